"""
Параллельный map по независимым задачам (точки аудита, узлы линий уровня,
ячейки сходимости). Порядок результатов совпадает с порядком задач.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def map_tasks(func: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """При workers <= 1 задачи выполняются последовательно в текущем процессе"""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]

    chunksize = max(1, len(tasks) // (4 * workers))
    logger.debug(f"Dispatching {len(tasks)} tasks to {workers} workers", extra={'chunksize': chunksize})
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=chunksize))
