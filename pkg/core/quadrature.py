"""
Одномерные интегралы из определений w и z.

Все интегралы считаются адаптивной квадратурой Гаусса-Кронрода
(scipy.integrate.quad) после замены переменной, сглаживающей подынтегральное
выражение: s = 2 + e^v у полюса s = 2 и s = 4e^t на длинных отрезках.
Множитель c = 2B₀²/(2-γ) вынесен и здесь не участвует.
"""
import math
import warnings
from typing import Callable

from scipy import integrate
from scipy.integrate import IntegrationWarning

from core.exceptions import QuadratureError

DEFAULT_RTOL = 1e-10
DEFAULT_LIMIT = 200


def adaptive_quad(func: Callable[[float], float], a: float, b: float,
                  rtol: float = DEFAULT_RTOL, limit: int = DEFAULT_LIMIT,
                  label: str = 'integral') -> float:
    """quad с относительным допуском rtol и бюджетом панелей limit"""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('error', IntegrationWarning)
        try:
            value, _ = integrate.quad(func, a, b, epsabs=0.0, epsrel=rtol, limit=limit)
        except IntegrationWarning as exc:
            raise QuadratureError(
                f"{label}: no convergence on [{a:.17g}, {b:.17g}] within {limit} panels: {exc}"
            ) from exc
        except OverflowError as exc:
            raise QuadratureError(f"{label}: overflow on [{a:.17g}, {b:.17g}]") from exc
    if not math.isfinite(value):
        raise QuadratureError(f"{label}: non-finite value on [{a:.17g}, {b:.17g}]")
    return value


def _power(s: float, exponent: float) -> float:
    return math.exp(exponent * math.log(s))


def pole_integral(f: float, exponent: float, rtol: float = DEFAULT_RTOL,
                  limit: int = DEFAULT_LIMIT) -> float:
    """
    ∫_f^4 (1 - s/4) s^p / (1 - s/2)² ds при 2 < f <= 4.

    Замена s = 2 + e^v убирает двойной полюс в s = 2:
    подынтегральное выражение становится 4(1 - s/4) s^p e^{-v}.
    """
    if not 2.0 < f <= 4.0:
        raise ValueError(f"pole integral needs 2 < f <= 4, got {f}")

    def integrand(v):
        s = 2.0 + math.exp(v)
        return 4.0 * (1.0 - 0.25 * s) * _power(s, exponent) * math.exp(-v)

    return adaptive_quad(integrand, math.log(f - 2.0), math.log(2.0), rtol, limit, 'w pole integral')


def tail_integral(f: float, exponent: float, rtol: float = DEFAULT_RTOL,
                  limit: int = DEFAULT_LIMIT) -> float:
    """∫_4^f s^{p-1} / (1 - s/2)² ds при f >= 4, замена s = 4e^t"""
    if f < 4.0:
        raise ValueError(f"tail integral needs f >= 4, got {f}")

    def integrand(t):
        s = 4.0 * math.exp(t)
        return 4.0 * _power(s, exponent) / (s - 2.0) ** 2

    return adaptive_quad(integrand, 0.0, math.log(f / 4.0), rtol, limit, 'w tail integral')


def z_integral(g: float, exponent: float, rtol: float = DEFAULT_RTOL,
               limit: int = DEFAULT_LIMIT) -> float:
    """∫_0^g s^{p-1} / (1 + s/2)² ds; при g > 4 хвост считается в переменной t = log(s/4)"""
    if g < 0.0:
        raise ValueError(f"z integral needs g >= 0, got {g}")
    q = exponent - 1.0

    def direct(s):
        return _power(s, q) / (1.0 + 0.5 * s) ** 2 if s > 0.0 else 0.0

    def logarithmic(t):
        s = 4.0 * math.exp(t)
        return 4.0 * _power(s, exponent) / (s + 2.0) ** 2

    head = adaptive_quad(direct, 0.0, min(g, 4.0), rtol, limit, 'z integral')
    if g <= 4.0:
        return head
    return head + adaptive_quad(logarithmic, 0.0, math.log(g / 4.0), rtol, limit, 'z tail integral')
