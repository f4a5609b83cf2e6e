"""
Непрерывная модель: параметры, состояние, правая часть системы,
восстановление скорости и матрица диффузии.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.exceptions import ConfigError, NonFiniteStateError, VacuumBreachError
from core.grid import Field, Grid

# 2/(2-gamma) > 100 делает степени W и Z непредставимыми
MAX_GAMMA = 1.98


@dataclass(frozen=True)
class Params:
    """Константы модели: показатель адиабаты, фоновое поле, регуляризация"""

    gamma: float
    b0: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (1.0 < self.gamma < 2.0):
            raise ConfigError(f"gamma must lie in (1, 2), got {self.gamma}")
        if self.gamma > MAX_GAMMA:
            raise ConfigError(
                f"gamma must not exceed {MAX_GAMMA} (exponent 2/(2-gamma) above 100), got {self.gamma}"
            )
        if not math.isfinite(self.b0) or self.b0 == 0.0:
            raise ConfigError(f"b0 must be finite and non-zero, got {self.b0}")
        if not math.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")

    @property
    def b0_sq(self) -> float:
        return self.b0 * self.b0

    @property
    def exponent(self) -> float:
        """Показатель 2/(2-gamma) в определениях w и z"""
        return 2.0 / (2.0 - self.gamma)


@dataclass(frozen=True)
class State:
    """Пара (rho, B) в момент времени time"""

    rho: Field
    b: Field
    time: float = 0.0

    def __post_init__(self):
        if self.rho.grid != self.b.grid:
            raise ConfigError("rho and b must live on the same grid")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @classmethod
    def from_arrays(cls, grid: Grid, rho: np.ndarray, b: np.ndarray, time: float = 0.0) -> 'State':
        return cls(Field(grid, rho), Field(grid, b), float(time))

    def with_arrays(self, rho: np.ndarray, b: np.ndarray, time: float) -> 'State':
        return State.from_arrays(self.grid, rho, b, time)

    @property
    def admissible(self) -> bool:
        """rho конечна и строго положительна во всех узлах"""
        values = self.rho.values
        return bool(np.all(np.isfinite(values)) and np.min(values) > 0.0)


@dataclass(frozen=True)
class Velocity:
    """Компоненты скорости; u^y тождественно равна нулю"""

    ux: Field
    uz: Field


def check_admissible(grid: Grid, rho: np.ndarray, time: float) -> None:
    """Бросает VacuumBreachError, если min rho <= 0"""
    j = int(np.argmin(rho))
    if np.isnan(rho[j]):
        raise NonFiniteStateError(f"rho is NaN at x={grid.x[j]:.17g}", time)
    if not rho[j] > 0.0:
        raise VacuumBreachError(time=time, location=float(grid.x[j]), value=float(rho[j]))


def pressure(rho: np.ndarray, p: Params) -> np.ndarray:
    """rho^gamma через exp(gamma log rho); вызывать только при rho > 0"""
    return np.exp(p.gamma * np.log(rho))


def pressure_potential(rho: np.ndarray, b: np.ndarray, p: Params) -> np.ndarray:
    return pressure(rho, p) / p.gamma + 0.5 * b * b


def rhs_arrays(grid: Grid, rho: np.ndarray, b: np.ndarray, p: Params, time: float = 0.0):
    """Правая часть на массивах; используется интегратором на каждой стадии"""
    check_admissible(grid, rho, time)

    potential = grid.filter(pressure_potential(rho, b, p))
    drho = grid.diff(potential, 2)

    flux = (b * grid.diff(potential, 1) + p.b0_sq * grid.diff(b, 1)) / rho
    db = grid.diff(grid.filter(flux), 1)

    if p.epsilon > 0.0:
        drho -= p.epsilon * grid.diff(rho, 4)
        db -= p.epsilon * grid.diff(b, 4)
    return drho, db


def rhs(s: State, p: Params) -> Tuple[Field, Field]:
    """
    d rho/dt = ∂ₓ²(rho^γ/γ + B²/2) − ε∂ₓ⁴rho,
    d B/dt   = ∂ₓ((B/rho)∂ₓ(rho^γ/γ + B²/2) + (B₀²/rho)∂ₓB) − ε∂ₓ⁴B.
    Потоки берутся в консервативной форме, внешняя производная последняя.
    """
    drho, db = rhs_arrays(s.grid, s.rho.values, s.b.values, p, s.time)
    return Field(s.grid, drho), Field(s.grid, db)


def velocity(s: State, p: Params) -> Velocity:
    grid = s.grid
    rho, b = s.rho.values, s.b.values
    check_admissible(grid, rho, s.time)

    rho_x = grid.diff(rho, 1)
    b_x = grid.diff(b, 1)
    rho_gm1 = np.exp((p.gamma - 1.0) * np.log(rho))
    ux = -(rho_gm1 * rho_x + b * b_x) / rho
    uz = p.b0 * b_x / rho
    return Velocity(Field(grid, ux), Field(grid, uz))


def diffusion_matrix(rho: float, b: float, p: Params) -> np.ndarray:
    """Матрица при вторых производных; ее собственные числа равны alpha и beta"""
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    return np.array([
        [rho ** (p.gamma - 1.0), b],
        [rho ** (p.gamma - 2.0) * b, (b * b + p.b0_sq) / rho],
    ])
