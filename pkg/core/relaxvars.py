"""
Диагонализующие переменные системы: f, g, w, z, W = e^{-w}, Z = e^{-z},
собственные числа alpha > beta матрицы диффузии, их производные,
корни zeta для связанных переменных и выборка линий уровня.

Обозначения: P = rho^γ, D = B² + B₀² - P, S = sqrt(D² + 4B²P),
E = B² - B₀² + P, p = 2/(2-γ), q = p - 1.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import EvaluationError
from core.models import Params
from core.quadrature import DEFAULT_LIMIT, DEFAULT_RTOL, pole_integral, tail_integral, z_integral
from core.workers import map_tasks

logger = logging.getLogger(__name__)

BRANCH_FINITE = 'finite'
BRANCH_INFINITE = 'infinite'
BRANCH_ERROR = 'error'


@dataclass(frozen=True)
class ExtReal:
    """Конечное число или выделенное значение +inf"""

    value: float

    def __post_init__(self):
        if math.isnan(self.value) or self.value == -math.inf:
            raise ValueError(f"ExtReal holds a finite value or +inf, got {self.value}")

    @classmethod
    def finite(cls, value: float) -> 'ExtReal':
        if not math.isfinite(value):
            raise EvaluationError(f"overflow: expected a finite value, got {value}")
        return cls(float(value))

    @classmethod
    def infinite(cls) -> 'ExtReal':
        return cls(math.inf)

    @property
    def is_infinite(self) -> bool:
        return self.value == math.inf

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class RelaxPoint:
    rho: float
    b: float
    f: ExtReal
    g: ExtReal
    w: ExtReal
    z: ExtReal
    bigW: float
    bigZ: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class DerivBundle:
    """Первые и вторые частные производные W или Z"""

    d_rho: float
    d_b: float
    d_rho_rho: float
    d_rho_b: float
    d_b_b: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise EvaluationError(f"derivative bundle is not finite: {self.as_tuple()}")

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.d_rho, self.d_b, self.d_rho_rho, self.d_rho_b, self.d_b_b)

    @property
    def gradient(self) -> Tuple[float, float]:
        return (self.d_rho, self.d_b)

    @property
    def hessian(self) -> Tuple[float, float, float]:
        return (self.d_rho_rho, self.d_rho_b, self.d_b_b)


ZERO_BUNDLE = DerivBundle(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ZetaPair:
    zeta1: float
    zeta2: float


@dataclass(frozen=True)
class _Invariants:
    P: float
    D: float
    S: float
    E: float


def _check_rho(rho: float) -> None:
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")


def _invariants(rho: float, b: float, p: Params) -> _Invariants:
    _check_rho(rho)
    P = rho ** p.gamma
    b_sq = b * b
    D = b_sq + p.b0_sq - P
    S = math.hypot(D, 2.0 * abs(b) * math.sqrt(P))
    E = b_sq - p.b0_sq + P
    return _Invariants(P=P, D=D, S=S, E=E)


# --- f, g -------------------------------------------------------------------

def eval_f(rho: float, b: float, p: Params) -> ExtReal:
    """
    f = 4P / (S - D); при D > 0 используется рационализованная форма
    (S + D)/B², без вычитания близких чисел.
    """
    inv = _invariants(rho, b, p)
    if b == 0.0:
        if inv.P <= p.b0_sq:
            return ExtReal.infinite()
        return ExtReal.finite(2.0 * inv.P / (inv.P - p.b0_sq))
    if inv.D > 0.0:
        return ExtReal.finite((inv.S + inv.D) / (b * b))
    return ExtReal.finite(4.0 * inv.P / (inv.S - inv.D))


def eval_g(rho: float, b: float, p: Params) -> ExtReal:
    """g = 4P / (S + D); при D < 0 берется форма (S - D)/B²"""
    inv = _invariants(rho, b, p)
    if b == 0.0:
        if inv.P >= p.b0_sq:
            return ExtReal.infinite()
        return ExtReal.finite(2.0 * inv.P / (p.b0_sq - inv.P))
    if inv.D < 0.0:
        return ExtReal.finite((inv.S - inv.D) / (b * b))
    return ExtReal.finite(4.0 * inv.P / (inv.S + inv.D))


def f_values(rho: np.ndarray, b: np.ndarray, p: Params) -> np.ndarray:
    """Векторная версия eval_f; бесконечная ветка дает np.inf"""
    P = np.exp(p.gamma * np.log(rho))
    b_sq = b * b
    D = b_sq + p.b0_sq - P
    S = np.hypot(D, 2.0 * np.abs(b) * np.sqrt(P))
    with np.errstate(divide='ignore', invalid='ignore'):
        f = np.where(D > 0.0, (S + D) / b_sq, 4.0 * P / (S - D))
    return np.where((b == 0.0) & (P <= p.b0_sq), np.inf, f)


def g_values(rho: np.ndarray, b: np.ndarray, p: Params) -> np.ndarray:
    P = np.exp(p.gamma * np.log(rho))
    b_sq = b * b
    D = b_sq + p.b0_sq - P
    S = np.hypot(D, 2.0 * np.abs(b) * np.sqrt(P))
    with np.errstate(divide='ignore', invalid='ignore'):
        g = np.where(D < 0.0, (S - D) / b_sq, 4.0 * P / (S + D))
    return np.where((b == 0.0) & (P >= p.b0_sq), np.inf, g)


# --- alpha, beta ------------------------------------------------------------

def eval_alpha(rho: float, b: float, p: Params) -> float:
    """alpha = (B² + B₀²)/rho + 2 rho^{γ-1}/f; при f = inf это B₀²/rho"""
    f = eval_f(rho, b, p)
    alpha = (b * b + p.b0_sq) / rho
    if not f.is_infinite:
        alpha += 2.0 * rho ** (p.gamma - 1.0) / f.value
    return alpha


def eval_beta(rho: float, b: float, p: Params) -> float:
    """beta = (B₀²/rho) g/(g + 2); при g = inf это B₀²/rho"""
    g = eval_g(rho, b, p)
    if g.is_infinite:
        return p.b0_sq / rho
    return p.b0_sq / rho * g.value / (g.value + 2.0)


def alpha_forms(rho: float, b: float, p: Params) -> Tuple[float, float, float]:
    """
    Три эквивалентные записи alpha на конечной ветке f:
    (B₀²/rho) f/(f-2), rho^{γ-1} + B² f/(2 rho), (B² + B₀²)/rho + 2 rho^{γ-1}/f.
    """
    f = eval_f(rho, b, p)
    if f.is_infinite:
        raise EvaluationError("alpha forms are defined on the finite branch of f", rho=rho, b=b)
    fv = f.value
    rho_gm1 = rho ** (p.gamma - 1.0)
    return (
        p.b0_sq / rho * fv / (fv - 2.0),
        rho_gm1 + b * b * fv / (2.0 * rho),
        (b * b + p.b0_sq) / rho + 2.0 * rho_gm1 / fv,
    )


def alpha_values(rho: np.ndarray, b: np.ndarray, p: Params) -> np.ndarray:
    f = f_values(rho, b, p)
    return (b * b + p.b0_sq) / rho + 2.0 * np.exp((p.gamma - 1.0) * np.log(rho)) / f


def beta_values(rho: np.ndarray, b: np.ndarray, p: Params) -> np.ndarray:
    g = g_values(rho, b, p)
    with np.errstate(invalid='ignore'):
        ratio = np.where(np.isinf(g), 1.0, g / (g + 2.0))
    return p.b0_sq / rho * ratio


# --- w, z, W, Z -------------------------------------------------------------

def _w_from_f(b: float, f: float, p: Params, rtol: float, limit: int) -> float:
    exponent = p.exponent
    c = exponent * p.b0_sq
    try:
        if f > 4.0:
            return (b * b * f ** exponent + 4.0 ** exponent * p.b0_sq
                    + c * tail_integral(f, exponent, rtol, limit))
        return (b * b + p.b0_sq) * f ** exponent - c * pole_integral(f, exponent, rtol, limit)
    except OverflowError as exc:
        raise EvaluationError(f"overflow in w at f={f:.17g}") from exc


def _z_from_g(b: float, g: float, p: Params, rtol: float, limit: int) -> float:
    exponent = p.exponent
    c = exponent * p.b0_sq
    try:
        return b * b * g ** exponent + c * z_integral(g, exponent, rtol, limit)
    except OverflowError as exc:
        raise EvaluationError(f"overflow in z at g={g:.17g}") from exc


def eval_w(rho: float, b: float, p: Params, rtol: float = DEFAULT_RTOL,
           limit: int = DEFAULT_LIMIT) -> ExtReal:
    f = eval_f(rho, b, p)
    if f.is_infinite:
        return ExtReal.infinite()
    try:
        return ExtReal.finite(_w_from_f(b, f.value, p, rtol, limit))
    except EvaluationError as exc:
        raise type(exc)(f"{exc.detail} at rho={rho:.17g}, b={b:.17g}", rho=rho, b=b) from exc


def eval_z(rho: float, b: float, p: Params, rtol: float = DEFAULT_RTOL,
           limit: int = DEFAULT_LIMIT) -> ExtReal:
    g = eval_g(rho, b, p)
    if g.is_infinite:
        return ExtReal.infinite()
    try:
        return ExtReal.finite(_z_from_g(b, g.value, p, rtol, limit))
    except EvaluationError as exc:
        raise type(exc)(f"{exc.detail} at rho={rho:.17g}, b={b:.17g}", rho=rho, b=b) from exc


def exp_neg(value: ExtReal) -> float:
    """e^{-value} с e^{-inf} = 0; переполнение дает inf"""
    if value.is_infinite:
        return 0.0
    try:
        return math.exp(-value.value)
    except OverflowError:
        return math.inf


def eval_W(rho: float, b: float, p: Params, **quad) -> float:
    return exp_neg(eval_w(rho, b, p, **quad))


def eval_Z(rho: float, b: float, p: Params, **quad) -> float:
    return exp_neg(eval_z(rho, b, p, **quad))


def evaluate_point(rho: float, b: float, p: Params, **quad) -> RelaxPoint:
    w = eval_w(rho, b, p, **quad)
    z = eval_z(rho, b, p, **quad)
    return RelaxPoint(
        rho=rho,
        b=b,
        f=eval_f(rho, b, p),
        g=eval_g(rho, b, p),
        w=w,
        z=z,
        bigW=exp_neg(w),
        bigZ=exp_neg(z),
        alpha=eval_alpha(rho, b, p),
        beta=eval_beta(rho, b, p),
    )


def w_values(rho: np.ndarray, b: np.ndarray, p: Params, **quad) -> np.ndarray:
    return np.array([eval_w(r, v, p, **quad).value for r, v in zip(rho.tolist(), b.tolist())])


def z_values(rho: np.ndarray, b: np.ndarray, p: Params, **quad) -> np.ndarray:
    return np.array([eval_z(r, v, p, **quad).value for r, v in zip(rho.tolist(), b.tolist())])


# --- производные ------------------------------------------------------------

def _f_partials(rho: float, b: float, p: Params, f: float) -> Tuple[float, float]:
    inv = _invariants(rho, b, p)
    # S² - E² = 4B²B₀²
    if inv.E >= 0.0:
        h_plus = inv.S + inv.E
    else:
        h_plus = 4.0 * b * b * p.b0_sq / (inv.S - inv.E)
    denom = inv.S * h_plus
    f_rho = -4.0 * p.gamma * rho ** (p.gamma - 1.0) * p.b0_sq / denom
    f_b = -4.0 * p.b0_sq * b * f / denom
    return f_rho, f_b


def _g_partials(rho: float, b: float, p: Params, g: float) -> Tuple[float, float]:
    inv = _invariants(rho, b, p)
    if inv.E <= 0.0:
        h_minus = inv.S - inv.E
    else:
        h_minus = 4.0 * b * b * p.b0_sq / (inv.S + inv.E)
    denom = inv.S * h_minus
    g_rho = 4.0 * p.b0_sq * p.gamma * rho ** (p.gamma - 1.0) / denom
    g_b = -4.0 * p.b0_sq * b * g / denom
    return g_rho, g_b


def f_partials(rho: float, b: float, p: Params) -> Optional[Tuple[float, float]]:
    """(∂rho f, ∂B f) на конечной ветке, None на бесконечной"""
    f = eval_f(rho, b, p)
    return None if f.is_infinite else _f_partials(rho, b, p, f.value)


def g_partials(rho: float, b: float, p: Params) -> Optional[Tuple[float, float]]:
    g = eval_g(rho, b, p)
    return None if g.is_infinite else _g_partials(rho, b, p, g.value)


def _exponent_derivatives(rho: float, b: float, p: Params, h: float, h_rho: float, h_b: float,
                          sign: float) -> Tuple[float, float, float, float, float]:
    """
    Производные w (sign = -1, h = f) или z (sign = +1, h = g):
    ∂rho = sign·a·rho^{γ-1}h^q, ∂B = -k·B·h^p, a = 4γ/(2-γ), k = 2γ/(2-γ).
    """
    exponent = p.exponent
    q = exponent - 1.0
    a = 2.0 * p.gamma * exponent
    k = p.gamma * exponent
    rho_gm1 = rho ** (p.gamma - 1.0)
    rho_gm2 = rho ** (p.gamma - 2.0)
    h_q = h ** q
    h_qm1 = h ** (q - 1.0)
    h_p = h ** exponent

    d_rho = sign * a * rho_gm1 * h_q
    d_b = -k * b * h_p
    d_rho_rho = sign * a * ((p.gamma - 1.0) * rho_gm2 * h_q + q * rho_gm1 * h_qm1 * h_rho)
    d_rho_b = sign * a * q * rho_gm1 * h_qm1 * h_b
    d_b_b = -k * (h_p + exponent * b * h_q * h_b)
    return d_rho, d_b, d_rho_rho, d_rho_b, d_b_b


def log_derivatives_w(rho: float, b: float, p: Params) -> Optional[Tuple[float, ...]]:
    """Производные показателя w без квадратур; None на бесконечной ветке"""
    f = eval_f(rho, b, p)
    if f.is_infinite:
        return None
    f_rho, f_b = _f_partials(rho, b, p, f.value)
    return _exponent_derivatives(rho, b, p, f.value, f_rho, f_b, sign=-1.0)


def log_derivatives_z(rho: float, b: float, p: Params) -> Optional[Tuple[float, ...]]:
    g = eval_g(rho, b, p)
    if g.is_infinite:
        return None
    g_rho, g_b = _g_partials(rho, b, p, g.value)
    return _exponent_derivatives(rho, b, p, g.value, g_rho, g_b, sign=1.0)


def _exp_bundle(big: float, d: Tuple[float, ...], rho: float, b: float) -> DerivBundle:
    """Производные e^{-u} через производные u"""
    u_r, u_b, u_rr, u_rb, u_bb = d
    try:
        return DerivBundle(
            d_rho=-big * u_r,
            d_b=-big * u_b,
            d_rho_rho=big * (u_r * u_r - u_rr),
            d_rho_b=big * (u_r * u_b - u_rb),
            d_b_b=big * (u_b * u_b - u_bb),
        )
    except EvaluationError as exc:
        raise EvaluationError(f"{exc.detail} at rho={rho:.17g}, b={b:.17g}", rho=rho, b=b) from exc


def derivatives_W(rho: float, b: float, p: Params, **quad) -> DerivBundle:
    d = log_derivatives_w(rho, b, p)
    if d is None:
        return ZERO_BUNDLE
    return _exp_bundle(eval_W(rho, b, p, **quad), d, rho, b)


def derivatives_Z(rho: float, b: float, p: Params, **quad) -> DerivBundle:
    d = log_derivatives_z(rho, b, p)
    if d is None:
        return ZERO_BUNDLE
    return _exp_bundle(eval_Z(rho, b, p, **quad), d, rho, b)


def grad_W(rho: float, b: float, p: Params, **quad) -> Tuple[float, float]:
    return derivatives_W(rho, b, p, **quad).gradient


def grad_Z(rho: float, b: float, p: Params, **quad) -> Tuple[float, float]:
    return derivatives_Z(rho, b, p, **quad).gradient


def hess_W(rho: float, b: float, p: Params, **quad) -> Tuple[float, float, float]:
    return derivatives_W(rho, b, p, **quad).hessian


def hess_Z(rho: float, b: float, p: Params, **quad) -> Tuple[float, float, float]:
    return derivatives_Z(rho, b, p, **quad).hessian


# --- zeta -------------------------------------------------------------------

def zeta_roots(rho_bar: float, b_bar: float, p: Params) -> ZetaPair:
    """
    Корни B̄ζ² + ((B̄² + B₀² - ρ̄^γ)/ρ̄)ζ - ρ̄^{γ-2}B̄ = 0.
    Сначала больший по модулю корень, второй через произведение -ρ̄^{γ-2}.
    """
    _check_rho(rho_bar)
    if b_bar == 0.0:
        raise ValueError("zeta roots need a non-zero mean field b_bar")
    product = -rho_bar ** (p.gamma - 2.0)
    linear = (b_bar * b_bar + p.b0_sq - rho_bar ** p.gamma) / rho_bar
    disc = math.sqrt(linear * linear - 4.0 * b_bar * b_bar * product)
    big = (-linear - math.copysign(disc, linear)) / (2.0 * b_bar)
    small = product / big
    return ZetaPair(zeta1=max(big, small), zeta2=min(big, small))


def zeta_rate(zeta: float, rho_bar: float, b_bar: float, p: Params) -> float:
    """Коэффициент диффузии связанной переменной zeta(rho - ρ̄) + (B - B̄)"""
    return zeta * b_bar + (b_bar * b_bar + p.b0_sq) / rho_bar


# --- линии уровня -----------------------------------------------------------

@dataclass(frozen=True)
class LevelRow:
    rho: float
    b: float
    value: float
    exponent: float
    branch: str
    error: str = ''


@dataclass
class LevelTable:
    which: str
    params: Params
    rho_samples: List[float] = field(default_factory=list)
    b_samples: List[float] = field(default_factory=list)
    rows: List[LevelRow] = field(default_factory=list)

    @property
    def errors(self) -> List[LevelRow]:
        return [row for row in self.rows if row.branch == BRANCH_ERROR]


def _level_row(task) -> LevelRow:
    rho, b, p, which, quad = task
    evaluate = eval_w if which == 'W' else eval_z
    try:
        exponent = evaluate(rho, b, p, **quad)
    except EvaluationError as exc:
        return LevelRow(rho, b, math.nan, math.nan, BRANCH_ERROR, exc.detail)
    if exponent.is_infinite:
        return LevelRow(rho, b, 0.0, math.inf, BRANCH_INFINITE)
    return LevelRow(rho, b, exp_neg(exponent), exponent.value, BRANCH_FINITE)


def sample_axis(lo: float, hi: float, count: int) -> np.ndarray:
    """linspace; симметричный отрезок дает точно симметричную выборку"""
    values = np.linspace(lo, hi, count)
    if lo == -hi:
        values = 0.5 * (values - values[::-1])
    return values


def level_grid(p: Params, rho_range: Sequence[float], b_range: Sequence[float],
               n_rho: int, n_b: int, which: str, workers: int = 1, **quad) -> LevelTable:
    """Плотная выборка W или Z; бесконечная ветка записывается как 0 с флагом"""
    if which not in ('W', 'Z'):
        raise ValueError(f"which must be 'W' or 'Z', got {which!r}")
    rho_lo, rho_hi = rho_range
    if not 0.0 < rho_lo < rho_hi:
        raise ValueError(f"rho range must lie in (0, inf) and be increasing, got {rho_range}")
    if not b_range[0] < b_range[1]:
        raise ValueError(f"b range must be increasing, got {b_range}")

    rhos = sample_axis(rho_lo, rho_hi, n_rho)
    bs = sample_axis(b_range[0], b_range[1], n_b)
    tasks = [(float(r), float(v), p, which, quad) for r in rhos for v in bs]
    rows = map_tasks(_level_row, tasks, workers)

    table = LevelTable(which=which, params=p, rho_samples=rhos.tolist(), b_samples=bs.tolist(), rows=rows)
    if table.errors:
        logger.warning(
            f"Level grid {which}: {len(table.errors)} points failed",
            extra={'which': which, 'failed': len(table.errors)},
        )
    return table


@dataclass(frozen=True)
class LevelAnalysis:
    reference: Tuple[float, float]
    singular_point: Optional[Tuple[float, float]]
    w0: float
    z0: float
    w_members: int
    w_bounded_above: bool
    w_max_rho: float
    w_max_abs_b: float
    z_members: int
    rho_z0: float
    z_excludes_low_rho: bool
    z_below_one: bool

    def as_dict(self) -> dict:
        return {
            'reference': list(self.reference),
            'singular_point': list(self.singular_point) if self.singular_point else None,
            'w0': self.w0,
            'z0': self.z0,
            'w_sublevel': {
                'members': self.w_members,
                'bounded_above': self.w_bounded_above,
                'max_rho': self.w_max_rho,
                'max_abs_b': self.w_max_abs_b,
            },
            'z_sublevel': {
                'members': self.z_members,
                'rho_z0': self.rho_z0,
                'excludes_low_rho': self.z_excludes_low_rho,
            },
            'z_below_one': self.z_below_one,
        }


def locate_singular_point(table_W: LevelTable, table_Z: LevelTable) -> Optional[Tuple[float, float]]:
    """
    Точка стыка бесконечных веток W (rho^γ <= B₀²) и Z (rho^γ >= B₀²)
    на строке B = 0; при отсутствии такой строки None.
    """
    if 0.0 not in table_W.b_samples:
        return None
    w_inf = [row.rho for row in table_W.rows if row.b == 0.0 and row.branch == BRANCH_INFINITE]
    z_inf = [row.rho for row in table_Z.rows if row.b == 0.0 and row.branch == BRANCH_INFINITE]
    if not w_inf or not z_inf:
        return None
    return (0.5 * (max(w_inf) + min(z_inf)), 0.0)


def analyze_levels(table_W: LevelTable, table_Z: LevelTable,
                   reference: Tuple[float, float] = (1.0, 0.5), **quad) -> LevelAnalysis:
    """
    Геометрия подуровневых множеств. Сравнения ведутся по показателям:
    {W <= W₀} = {w >= w₀}, {Z <= Z₀} = {z >= z₀}.
    """
    p = table_W.params
    w0 = eval_w(reference[0], reference[1], p, **quad)
    z0 = eval_z(reference[0], reference[1], p, **quad)
    if w0.is_infinite or z0.is_infinite:
        raise EvaluationError("reference state must lie on the finite branches of w and z",
                              rho=reference[0], b=reference[1])

    rho_max = max(table_W.rho_samples)
    rho_min = min(table_Z.rho_samples)
    b_max = max(abs(v) for v in table_W.b_samples)

    w_set = [row for row in table_W.rows if row.branch != BRANCH_ERROR and row.exponent >= w0.value]
    z_set = [row for row in table_Z.rows if row.branch != BRANCH_ERROR and row.exponent >= z0.value]

    w_bounded = not any(row.rho == rho_max or abs(row.b) == b_max for row in w_set)
    rho_z0 = min((row.rho for row in z_set), default=math.inf)
    z_values_ok = all(row.value < 1.0 for row in table_Z.rows if row.branch != BRANCH_ERROR)

    return LevelAnalysis(
        reference=tuple(reference),
        singular_point=locate_singular_point(table_W, table_Z),
        w0=w0.value,
        z0=z0.value,
        w_members=len(w_set),
        w_bounded_above=w_bounded,
        w_max_rho=max((row.rho for row in w_set), default=math.nan),
        w_max_abs_b=max((abs(row.b) for row in w_set), default=math.nan),
        z_members=len(z_set),
        rho_z0=rho_z0,
        z_excludes_low_rho=rho_z0 > rho_min,
        z_below_one=z_values_ok,
    )
