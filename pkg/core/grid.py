"""
Равномерная периодическая сетка на торе и спектральное исчисление:
производные, средние, соболевские полунормы.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy import fft

from core.exceptions import ConfigError, NonFiniteStateError

TWO_PI = 2.0 * math.pi
DERIVATIVE_ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class Grid:
    """Сетка из n узлов на отрезке [0, length) с периодическими условиями"""

    n: int
    length: float = TWO_PI
    dealias: bool = False

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ConfigError(f"n must be an integer, got {self.n!r}")
        if self.n % 2:
            raise ConfigError("n must be even")
        if self.n < 16:
            raise ConfigError("n must be at least 16")
        if not math.isfinite(self.length) or self.length <= 0:
            raise ConfigError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Все n волновых чисел в порядке numpy.fft (эрмитова раскладка)"""
        k = fft.fftfreq(self.n, d=1.0 / self.n) * (TWO_PI / self.length)
        k.flags.writeable = False
        return k

    @cached_property
    def _rk(self) -> np.ndarray:
        # неотрицательная половина спектра для rfft; последний элемент - Найквист
        return fft.rfftfreq(self.n, d=1.0 / self.n) * (TWO_PI / self.length)

    @cached_property
    def _symbols(self) -> dict:
        symbols = {}
        for order in DERIVATIVE_ORDERS:
            symbol = (1j * self._rk) ** order
            if order % 2:
                symbol[-1] = 0.0
            symbols[order] = symbol
        return symbols

    @cached_property
    def _parseval_weights(self) -> np.ndarray:
        weights = np.full(self.n // 2 + 1, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        return weights

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        return (np.arange(self.n // 2 + 1) <= self.n // 3).astype(float)

    def diff(self, values: np.ndarray, order: int) -> np.ndarray:
        """Спектральная производная массива значений"""
        if order not in DERIVATIVE_ORDERS:
            raise ValueError(f"derivative order must be one of {DERIVATIVE_ORDERS}, got {order}")
        return fft.irfft(fft.rfft(values) * self._symbols[order], n=self.n)

    def filter(self, values: np.ndarray) -> np.ndarray:
        """Правило 2/3: срезает верхнюю треть спектра, если dealias включен"""
        if not self.dealias:
            return values
        return fft.irfft(fft.rfft(values) * self._dealias_mask, n=self.n)

    def seminorm(self, values: np.ndarray, s: int = 0) -> float:
        if s < 0:
            raise ValueError(f"seminorm order must be non-negative, got {s}")
        coeffs = fft.rfft(values) / self.n
        power = (coeffs.real ** 2 + coeffs.imag ** 2) * self._parseval_weights
        if s:
            power = power * self._rk ** (2 * s)
        return math.sqrt(self.length * float(power.sum()))


@dataclass(frozen=True)
class Field:
    """Вещественные значения в узлах сетки"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise ConfigError(
                f"field has shape {values.shape}, grid expects ({self.grid.n},)"
            )
        if not np.isfinite(values).all():
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonFiniteStateError(
                f"field holds a non-finite value at x={self.grid.x[bad]:.17g}"
            )
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> 'Field':
        return cls(grid, np.broadcast_to(func(grid.x), (grid.n,)))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> 'Field':
        return cls(grid, np.full(grid.n, float(value)))


def make_grid(n: int, length: float = TWO_PI, dealias: bool = False) -> Grid:
    return Grid(n=n, length=float(length), dealias=dealias)


def deriv(f: Field, order: int) -> Field:
    return Field(f.grid, f.grid.diff(f.values, order))


def mean(f: Field) -> float:
    return float(np.mean(f.values))


def sobolev_seminorm(f: Field, s: int) -> float:
    """
    ‖∂ₓˢf‖ в L²(тор), вычисленная в спектре:
    sqrt(length · Σ |k|^{2s} |f̂_k|²), где f̂ = fft(f)/n.
    """
    return f.grid.seminorm(f.values, s)


def l2_norm(f: Field) -> float:
    return f.grid.seminorm(f.values, 0)


def dealias(f: Field) -> Field:
    return Field(f.grid, f.grid.filter(f.values))
