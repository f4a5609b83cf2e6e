"""
Наблюдатели запуска: вызываются интегратором на старте, на каждом шаге,
в моменты записи и по завершении.
"""
import logging
import math
import time
from typing import Optional, Sequence

from core.diagnostics import Reference, record
from core.integrator import HaltingCause, Trajectory
from core.logging_config import RunAuditLogger
from core.models import Params, State

logger = logging.getLogger(__name__)


class RunObserver:
    """Базовый наблюдатель; все методы по умолчанию ничего не делают"""

    def on_start(self, trajectory: Trajectory, state: State, params: Params) -> None:
        pass

    def on_step(self, trajectory: Trajectory, state: State, dt: float) -> None:
        pass

    def on_record(self, trajectory: Trajectory, state: State, params: Params, dt: float) -> None:
        pass

    def on_finish(self, trajectory: Trajectory) -> None:
        pass


class DiagnosticsObserver(RunObserver):
    """Считает DiagnosticsRecord в моменты записи и добавляет в траекторию"""

    def __init__(self, reference: Optional[Reference] = None, s_list: Sequence[int] = (1,),
                 weighted_order: int = 1, **quad):
        self.reference = reference
        self.s_list = tuple(s_list)
        self.weighted_order = weighted_order
        self.quad = quad

    def _record(self, trajectory: Trajectory, state: State, params: Params, dt: float) -> None:
        trajectory.append(record(
            state,
            params,
            ref=self.reference,
            s_list=self.s_list,
            dt_used=dt,
            weighted_order=self.weighted_order,
            **self.quad,
        ))

    def on_start(self, trajectory, state, params):
        self._record(trajectory, state, params, math.nan)

    def on_record(self, trajectory, state, params, dt):
        self._record(trajectory, state, params, dt)


class RunLoggingObserver(RunObserver):
    """Журнал хода расчета: старт, прогресс по записям, итог и длительность"""

    def __init__(self, scenario: str, progress_every: int = 10):
        self.scenario = scenario
        self.progress_every = progress_every
        self.start_time = None
        self.wall_clock = 0.0

    def on_start(self, trajectory, state, params):
        self.start_time = time.perf_counter()
        RunAuditLogger.log_run_event(
            self.scenario,
            'started',
            n=state.grid.n,
            gamma=params.gamma,
            b0=params.b0,
            epsilon=params.epsilon,
        )

    def on_record(self, trajectory, state, params, dt):
        count = len(trajectory.records)
        if self.progress_every and count % self.progress_every == 0:
            logger.info(
                f"Progress: t={state.time:.6g}, steps={trajectory.steps}, dt={dt:.3e}",
                extra={'scenario': self.scenario, 'time': state.time, 'steps': trajectory.steps},
            )

    def on_finish(self, trajectory):
        if self.start_time is not None:
            self.wall_clock = time.perf_counter() - self.start_time
        if trajectory.cause is HaltingCause.COMPLETED:
            RunAuditLogger.log_run_event(
                self.scenario,
                'completed',
                steps=trajectory.steps,
                records=len(trajectory.records),
                duration_ms=round(self.wall_clock * 1000, 2),
            )
        else:
            RunAuditLogger.log_halt(
                self.scenario,
                trajectory.cause.value,
                trajectory.error.get('detail', ''),
                trajectory.error.get('time'),
            )
