"""
Исследование сходимости: сетка ячеек (n, epsilon), пространственные порядки
относительно опорного решения, зависимость от регуляризации и временной
порядок RK4 по Ричардсону на постоянном шаге.
"""
import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np

from core.config import build_run, with_overrides
from core.exceptions import RelaxationError
from core.integrator import HaltingCause, integrate_fixed, run
from core.schemas import RunConfig
from core.workers import map_tasks

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e-12


@dataclass
class CellResult:
    n: int
    epsilon: float
    cause: str
    steps: int = 0
    rho: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    length: float = 2.0 * math.pi
    error: Optional[dict] = None

    @property
    def completed(self) -> bool:
        return self.cause == HaltingCause.COMPLETED.value and self.rho is not None

    def as_dict(self) -> dict:
        data = {'n': self.n, 'epsilon': self.epsilon, 'halting_cause': self.cause, 'steps': self.steps}
        if self.error:
            data['error'] = self.error
        return data


def _cell_config(config: RunConfig, n: int, epsilon: float) -> RunConfig:
    t_end = config.converge.t_end
    return with_overrides(
        config,
        grid={'n': n},
        params={'epsilon': epsilon},
        control={'t_end': t_end},
        diagnostics={'record_interval': t_end if t_end > 0.0 else 1.0, 'snapshot_times': []},
    )


def run_cell(task: Tuple[RunConfig, int, float]) -> CellResult:
    """Одна ячейка: запуск до converge.t_end без диагностики"""
    config, n, epsilon = task
    try:
        setup = build_run(_cell_config(config, n, epsilon))
    except RelaxationError as exc:
        return CellResult(n, epsilon, 'config_error', error=exc.as_dict())

    trajectory = run(setup.state, setup.params, setup.control)
    result = CellResult(n, epsilon, trajectory.cause.value, trajectory.steps,
                        length=setup.grid.length, error=trajectory.error)
    if trajectory.cause is HaltingCause.COMPLETED:
        result.rho = np.array(trajectory.final_state.rho.values)
        result.b = np.array(trajectory.final_state.b.values)
    logger.debug(f"Cell n={n}, epsilon={epsilon}: {result.cause}", extra={'steps': result.steps})
    return result


def l2_distance(rho_a, b_a, rho_b, b_b, length: float) -> float:
    """sqrt(‖Δrho‖² + ‖ΔB‖²) по квадратуре на сетке"""
    dx = length / len(rho_a)
    d_rho = np.asarray(rho_a) - np.asarray(rho_b)
    d_b = np.asarray(b_a) - np.asarray(b_b)
    return math.sqrt(dx * float(d_rho @ d_rho + d_b @ d_b))


def observed_orders(sizes: List[float], errors: List[float], floor: float = ERROR_FLOOR) -> List[Optional[float]]:
    """Наблюдаемый порядок log(e1/e2)/log(h1/h2); None, если ошибка ниже порога"""
    orders = []
    for (h1, e1), (h2, e2) in zip(zip(sizes, errors), zip(sizes[1:], errors[1:])):
        if not (e1 > floor and e2 > floor):
            orders.append(None)
            continue
        orders.append(math.log(e1 / e2) / math.log(h1 / h2))
    return orders


def spatial_study(cells: List[CellResult], reference: CellResult) -> dict:
    """Ошибки ячеек с epsilon = 0 относительно опорного решения в общих узлах"""
    if not reference.completed:
        return {'reference_n': reference.n, 'error': reference.error or {'detail': reference.cause}}
    rows = []
    for cell in sorted((c for c in cells if c.epsilon == 0.0 and c.completed), key=lambda c: c.n):
        if reference.n % cell.n:
            continue
        stride = reference.n // cell.n
        error = l2_distance(cell.rho, cell.b, reference.rho[::stride], reference.b[::stride], cell.length)
        rows.append({'n': cell.n, 'error': error})

    orders = observed_orders([1.0 / row['n'] for row in rows], [row['error'] for row in rows])
    resolved = [order for order in orders if order is not None]
    return {
        'reference_n': reference.n,
        'errors': rows,
        'orders': orders,
        'floor': ERROR_FLOOR,
        'faster_than_fourth_order': bool(resolved) and all(order > 4.0 for order in resolved),
    }


def epsilon_study(cells: List[CellResult]) -> dict:
    """Расстояния до решения с epsilon = 0 и попарные расстояния при каждом n"""
    by_n: Dict[int, List[CellResult]] = {}
    for cell in cells:
        if cell.completed:
            by_n.setdefault(cell.n, []).append(cell)

    study = {}
    for n, group in sorted(by_n.items()):
        group.sort(key=lambda c: c.epsilon)
        pairwise = [
            {'epsilon_a': a.epsilon, 'epsilon_b': b.epsilon,
             'distance': l2_distance(a.rho, a.b, b.rho, b.b, a.length)}
            for a, b in combinations(group, 2)
        ]
        base = group[0] if group[0].epsilon == 0.0 else None
        distances = []
        if base is not None:
            distances = [
                {'epsilon': cell.epsilon, 'distance': l2_distance(cell.rho, cell.b, base.rho, base.b, cell.length)}
                for cell in group[1:]
            ]
        values = [row['distance'] for row in distances]
        study[str(n)] = {
            'distances_to_zero': distances,
            'pairwise': pairwise,
            'monotone': all(x < y for x, y in zip(values, values[1:])),
        }
    return study


def temporal_study(config: RunConfig) -> dict:
    """RK4 на постоянных шагах dt, dt/2, dt/4; порядок log2 отношения разностей"""
    settings = config.converge
    dt = settings.temporal_dt
    try:
        setup = build_run(with_overrides(config, grid={'n': settings.temporal_n}))
        finals = [
            integrate_fixed(setup.state, setup.params, dt / factor, settings.temporal_t_end)
            for factor in (1, 2, 4)
        ]
    except RelaxationError as exc:
        return {'n': settings.temporal_n, 'dt': dt, 'error': exc.as_dict()}

    length = setup.grid.length
    coarse = l2_distance(finals[0].rho.values, finals[0].b.values,
                         finals[1].rho.values, finals[1].b.values, length)
    fine = l2_distance(finals[1].rho.values, finals[1].b.values,
                       finals[2].rho.values, finals[2].b.values, length)
    order = math.log2(coarse / fine) if coarse > 0.0 and fine > 0.0 else None
    return {
        'n': settings.temporal_n,
        'dt': dt,
        't_end': settings.temporal_t_end,
        'differences': [coarse, fine],
        'order': order,
    }


def run_converge(config: RunConfig, workers: int = 1) -> dict:
    settings = config.converge
    tasks = [(config, n, eps) for n in settings.resolutions for eps in settings.epsilons]
    if settings.reference_n:
        tasks.append((config, settings.reference_n, 0.0))
    results = map_tasks(run_cell, tasks, workers)

    reference = results.pop() if settings.reference_n else None
    failures = [cell for cell in results if not cell.completed]
    for cell in failures:
        logger.warning(
            f"Converge cell n={cell.n}, epsilon={cell.epsilon} ended with {cell.cause}",
            extra={'n': cell.n, 'epsilon': cell.epsilon, 'cause': cell.cause},
        )

    report = {
        'scenario': config.scenario,
        't_end': settings.t_end,
        'cells': [cell.as_dict() for cell in results],
        'epsilon': epsilon_study(results),
    }
    if reference is not None:
        report['spatial'] = spatial_study(results, reference)
    if settings.temporal_dt > 0.0:
        report['temporal'] = temporal_study(config)
    return report
