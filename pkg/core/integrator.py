"""
Интегрирование по времени методом прямых: классический RK4
с параболическим ограничением шага и контролем вакуума.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import (
    ConfigError,
    EvaluationError,
    HaltingError,
    NonFiniteStateError,
    StiffnessCollapseError,
    VacuumBreachError,
)
from core.models import Params, State, check_admissible, rhs_arrays
from core.relaxvars import alpha_values

if TYPE_CHECKING:
    from core.diagnostics import DiagnosticsRecord
    from core.observers import RunObserver

logger = logging.getLogger(__name__)

PI_SQ = math.pi ** 2
PI_4 = math.pi ** 4


@dataclass(frozen=True)
class StepControl:
    cfl: float = 0.5
    dt_min: float = 1e-12
    dt_max: float = 1.0
    t_end: float = 1.0
    record_interval: float = 0.1
    snapshot_times: Tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0.0 < self.dt_min <= self.dt_max:
            raise ConfigError(f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}")
        if not self.t_end >= 0.0:
            raise ConfigError(f"t_end must be non-negative, got {self.t_end}")
        if not self.record_interval > 0.0:
            raise ConfigError(f"record_interval must be positive, got {self.record_interval}")
        object.__setattr__(self, 'snapshot_times', tuple(sorted({float(t) for t in self.snapshot_times})))


class HaltingCause(str, Enum):
    COMPLETED = 'completed'
    VACUUM_BREACH = 'vacuum_breach'
    STIFFNESS_COLLAPSE = 'stiffness_collapse'
    NON_FINITE = 'non_finite'
    EVALUATION_ERROR = 'evaluation_error'


# Код выхода процесса - тотальная функция причины остановки
EXIT_CODES = {
    HaltingCause.COMPLETED: 0,
    HaltingCause.VACUUM_BREACH: VacuumBreachError.exit_code,
    HaltingCause.STIFFNESS_COLLAPSE: StiffnessCollapseError.exit_code,
    HaltingCause.NON_FINITE: NonFiniteStateError.exit_code,
    HaltingCause.EVALUATION_ERROR: EvaluationError.exit_code,
}


def cause_of(exc: Exception) -> HaltingCause:
    if isinstance(exc, VacuumBreachError):
        return HaltingCause.VACUUM_BREACH
    if isinstance(exc, StiffnessCollapseError):
        return HaltingCause.STIFFNESS_COLLAPSE
    if isinstance(exc, NonFiniteStateError):
        return HaltingCause.NON_FINITE
    return HaltingCause.EVALUATION_ERROR


@dataclass
class Trajectory:
    """Записи диагностики по возрастанию времени и снимки состояний"""

    records: List['DiagnosticsRecord'] = field(default_factory=list)
    snapshots: List[State] = field(default_factory=list)
    cause: HaltingCause = HaltingCause.COMPLETED
    error: Optional[dict] = None
    steps: int = 0
    final_state: Optional[State] = None

    def append(self, rec: 'DiagnosticsRecord') -> None:
        if self.records and not rec.time > self.records[-1].time:
            raise ValueError(
                f"record times must increase: {rec.time} after {self.records[-1].time}"
            )
        self.records.append(rec)

    @property
    def times(self) -> List[float]:
        return [rec.time for rec in self.records]

    def series(self, name: str) -> List[Tuple[float, float]]:
        return [(rec.time, rec.value(name)) for rec in self.records]

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.cause]

    def halt(self, exc: Exception) -> None:
        self.cause = cause_of(exc)
        self.error = exc.as_dict()


def stable_dt(s: State, p: Params, c: StepControl) -> float:
    """cfl · min(dx²/(π² max α), dx⁴/(π⁴ ε)), не больше dt_max"""
    grid = s.grid
    check_admissible(grid, s.rho.values, s.time)
    alpha_max = float(np.max(alpha_values(s.rho.values, s.b.values, p)))
    dx_sq = grid.dx * grid.dx
    dt = dx_sq / (PI_SQ * alpha_max)
    if p.epsilon > 0.0:
        dt = min(dt, dx_sq * dx_sq / (PI_4 * p.epsilon))
    dt *= c.cfl
    if dt < c.dt_min:
        raise StiffnessCollapseError(time=s.time, dt=dt, dt_min=c.dt_min)
    return min(dt, c.dt_max)


def _check_finite(s_time: float, grid, rho: np.ndarray, b: np.ndarray) -> None:
    for name, values in (('rho', rho), ('b', b)):
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteStateError(
                f"{name} became non-finite at t={s_time:.17g}, x={grid.x[bad[0]]:.17g}", s_time
            )


def step(s: State, p: Params, dt: float) -> State:
    """Один шаг классического RK4; положительность rho проверяется после шага"""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = s.grid
    t = s.time
    rho, b = s.rho.values, s.b.values
    half = 0.5 * dt

    k1r, k1b = rhs_arrays(grid, rho, b, p, t)
    k2r, k2b = rhs_arrays(grid, rho + half * k1r, b + half * k1b, p, t + half)
    k3r, k3b = rhs_arrays(grid, rho + half * k2r, b + half * k2b, p, t + half)
    k4r, k4b = rhs_arrays(grid, rho + dt * k3r, b + dt * k3b, p, t + dt)

    sixth = dt / 6.0
    new_rho = rho + sixth * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    new_b = b + sixth * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)

    t_new = t + dt
    _check_finite(t_new, grid, new_rho, new_b)
    check_admissible(grid, new_rho, t_new)
    return s.with_arrays(new_rho, new_b, t_new)


def integrate_fixed(s0: State, p: Params, dt: float, t_end: float) -> State:
    """Постоянный шаг dt до t_end; t_end должно быть кратно dt"""
    n_steps = int(round((t_end - s0.time) / dt))
    if n_steps < 0 or not math.isclose(s0.time + n_steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ConfigError(f"t_end={t_end} is not reachable from t={s0.time} in steps of {dt}")
    state = s0
    for _ in range(n_steps):
        state = step(state, p, dt)
    return dataclasses.replace(state, time=t_end) if n_steps else state


def run(s0: State, p: Params, c: StepControl, observers: Sequence['RunObserver'] = ()) -> Trajectory:
    """
    Интегрирование до c.t_end или до остановки. Записи делаются через
    c.record_interval и в t_end; шаг укорачивается, чтобы попасть в эти моменты
    и в моменты снимков точно. Остановка - это результат, а не исключение.
    """
    trajectory = Trajectory()
    state = s0
    t0 = s0.time
    t_end = t0 + c.t_end
    pending_snapshots = [t0 + t for t in c.snapshot_times if 0.0 <= t <= c.t_end]
    record_index = 1

    try:
        check_admissible(s0.grid, s0.rho.values, s0.time)
        for observer in observers:
            observer.on_start(trajectory, state, p)
        if pending_snapshots and pending_snapshots[0] == t0:
            trajectory.snapshots.append(state)
            pending_snapshots.pop(0)

        while state.time < t_end:
            next_record = t0 + record_index * c.record_interval
            if next_record >= t_end - 1e-9 * c.record_interval:
                next_record = t_end
            target = min([next_record] + pending_snapshots[:1])

            dt = stable_dt(state, p, c)
            landing = dt >= target - state.time
            if landing:
                dt = target - state.time
            state = step(state, p, dt)
            if landing:
                state = dataclasses.replace(state, time=target)
            trajectory.steps += 1

            for observer in observers:
                observer.on_step(trajectory, state, dt)

            if pending_snapshots and state.time == pending_snapshots[0]:
                trajectory.snapshots.append(state)
                pending_snapshots.pop(0)
            if state.time == next_record:
                record_index += 1
                for observer in observers:
                    observer.on_record(trajectory, state, p, dt)
    except (HaltingError, EvaluationError) as exc:
        trajectory.halt(exc)
        logger.warning(
            f"Run halted: {exc.detail}",
            extra={'cause': trajectory.cause.value, 'steps': trajectory.steps},
        )

    trajectory.final_state = state
    for observer in observers:
        observer.on_finish(trajectory)
    return trajectory
