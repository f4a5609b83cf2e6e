"""
Контролируемые величины на состояниях траектории: энергия, диссипация,
соболевские полунормы, минимумы w и z, связанные нормы; подгонка
экспоненциального затухания и вердикты по временному ряду.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import EvaluationError, FitError
from core.grid import TWO_PI
from core.models import Params, State, check_admissible, pressure, velocity
from core.relaxvars import eval_alpha, eval_beta, eval_w, eval_z, sample_axis, zeta_rate, zeta_roots

logger = logging.getLogger(__name__)

FIT_FLOOR = 1e-12
FIT_MIN_SAMPLES = 10
WINDOW_BAND = (1e-8, 1e-2)

ENERGY_TOLERANCE = 1e-9
ENVELOPE_TOLERANCE = 1e-6
DRIFT_TOLERANCE = 1e-11
DISSIPATION_FLOOR = 1e-8
DECREASE_FLOOR = 1.0
MIN_RHO_RATIO = 0.5

ENVELOPE_SAMPLES = 25
ENVELOPE_EXPANSIONS = 4


@dataclass(frozen=True)
class Reference:
    """Постоянное состояние (ρ̄, B̄), к которому релаксирует решение"""

    rho_bar: float
    b_bar: float


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    flux_mean: float
    energy: float
    dissipation: float
    min_rho: float
    max_rho: float
    max_abs_b: float
    min_w: float
    min_z: float
    l2_rho_dev: float
    l2_b_dev: float
    hs_rho: Dict[int, float] = field(default_factory=dict)
    hs_b: Dict[int, float] = field(default_factory=dict)
    coupled_norms: Optional[Tuple[float, float]] = None
    dt_used: float = math.nan
    weighted_hs: float = math.nan
    u_l2: float = math.nan

    def value(self, name: str) -> float:
        """Значение колонки временного ряда по имени"""
        if name == 't':
            return self.time
        if name == 'dt':
            return self.dt_used
        if name in ('coupled1', 'coupled2'):
            if self.coupled_norms is None:
                return math.nan
            return self.coupled_norms[0 if name == 'coupled1' else 1]
        if name.startswith('hs_rho_'):
            return self.hs_rho[int(name[len('hs_rho_'):])]
        if name.startswith('hs_b_'):
            return self.hs_b[int(name[len('hs_b_'):])]
        return getattr(self, name)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    window: Tuple[float, float]
    samples: int

    def as_dict(self) -> dict:
        return {
            'rate': self.rate,
            'r_squared': self.r_squared,
            'window': list(self.window),
            'samples': self.samples,
        }


# --- величины на состоянии --------------------------------------------------

def energy(s: State, p: Params) -> float:
    """∫ rho^γ/(γ(γ-1)) + B²/2"""
    rho, b = s.rho.values, s.b.values
    check_admissible(s.grid, rho, s.time)
    density = pressure(rho, p) / (p.gamma * (p.gamma - 1.0)) + 0.5 * b * b
    return float(density.sum() * s.grid.dx)


def dissipation(s: State, p: Params) -> float:
    """∫ (rho^{γ-3/2}∂ₓrho + B rho^{-1/2}∂ₓB)² + (B₀ rho^{-1/2}∂ₓB)²"""
    grid = s.grid
    rho, b = s.rho.values, s.b.values
    check_admissible(grid, rho, s.time)
    rho_x = grid.diff(rho, 1)
    b_x = grid.diff(b, 1)
    inv_sqrt = 1.0 / np.sqrt(rho)
    first = np.exp((p.gamma - 1.5) * np.log(rho)) * rho_x + b * inv_sqrt * b_x
    second = p.b0 * inv_sqrt * b_x
    return float((first * first + second * second).sum() * grid.dx)


def weighted_hs(s: State, p: Params, order: int = 1) -> float:
    """∫ (rho^{γ/2-1}∂ₓˢrho)² + (∂ₓˢB)²"""
    grid = s.grid
    rho, b = s.rho.values, s.b.values
    check_admissible(grid, rho, s.time)
    rho_s = grid.diff(rho, order) if order else rho - rho.mean()
    b_s = grid.diff(b, order) if order else b - b.mean()
    weighted = np.exp((0.5 * p.gamma - 1.0) * np.log(rho)) * rho_s
    return float((weighted * weighted + b_s * b_s).sum() * grid.dx)


def velocity_l2(s: State, p: Params) -> float:
    u = velocity(s, p)
    grid = s.grid
    return grid.seminorm(u.ux.values, 0) + grid.seminorm(u.uz.values, 0)


def grid_minimum(s: State, p: Params, which: str, **quad) -> float:
    """
    Минимум w или z по узлам. Узлы бесконечной ветки дают +inf;
    если бесконечны все узлы, возвращается inf и пишется предупреждение.
    """
    evaluate = eval_w if which == 'w' else eval_z
    grid = s.grid
    smallest = math.inf
    for j, (r, v) in enumerate(zip(s.rho.values.tolist(), s.b.values.tolist())):
        try:
            value = evaluate(r, v, p, **quad).value
        except EvaluationError as exc:
            raise exc.at_location(float(grid.x[j])) from exc
        smallest = min(smallest, value)
    if smallest == math.inf:
        logger.warning(
            f"All grid points lie on the infinite branch of {which} at t={s.time}",
            extra={'which': which, 'time': s.time},
        )
    return smallest


def coupled_norms(s: State, p: Params, ref: Reference) -> Optional[Tuple[float, float]]:
    """‖ζᵢ(rho - ρ̄) + (B - B̄)‖ в L²; при B̄ = 0 не определены"""
    if ref.b_bar == 0.0:
        return None
    zetas = zeta_roots(ref.rho_bar, ref.b_bar, p)
    d_rho = s.rho.values - ref.rho_bar
    d_b = s.b.values - ref.b_bar
    return (
        s.grid.seminorm(zetas.zeta1 * d_rho + d_b, 0),
        s.grid.seminorm(zetas.zeta2 * d_rho + d_b, 0),
    )


def record(s: State, p: Params, ref: Optional[Reference] = None, s_list: Sequence[int] = (1,),
           dt_used: float = math.nan, weighted_order: int = 1, **quad) -> DiagnosticsRecord:
    """Полная запись диагностики для состояния"""
    grid = s.grid
    rho, b = s.rho.values, s.b.values
    check_admissible(grid, rho, s.time)

    mass = float(np.mean(rho))
    flux_mean = float(np.mean(b))
    rho_bar, b_bar = (ref.rho_bar, ref.b_bar) if ref else (mass, flux_mean)

    return DiagnosticsRecord(
        time=s.time,
        mass=mass,
        flux_mean=flux_mean,
        energy=energy(s, p),
        dissipation=dissipation(s, p),
        min_rho=float(rho.min()),
        max_rho=float(rho.max()),
        max_abs_b=float(np.abs(b).max()),
        min_w=grid_minimum(s, p, 'w', **quad),
        min_z=grid_minimum(s, p, 'z', **quad),
        l2_rho_dev=grid.seminorm(rho - rho_bar, 0),
        l2_b_dev=grid.seminorm(b - b_bar, 0),
        hs_rho={order: grid.seminorm(rho - rho_bar, order) for order in s_list},
        hs_b={order: grid.seminorm(b - b_bar, order) for order in s_list},
        coupled_norms=coupled_norms(s, p, ref) if ref else None,
        dt_used=dt_used,
        weighted_hs=weighted_hs(s, p, weighted_order),
        u_l2=velocity_l2(s, p),
    )


# --- подгонка затухания -----------------------------------------------------

def fit_decay(series: Iterable[Tuple[float, float]],
              window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Наименьшие квадраты для log(value) = c - rate·t.
    Значения ниже FIT_FLOOR и нечисловые отбрасываются.
    """
    data = np.array([(t, v) for t, v in series], dtype=float).reshape(-1, 2)
    times, values = data[:, 0], data[:, 1]
    mask = np.isfinite(values) & (values > FIT_FLOOR)
    if window is not None:
        mask &= (times >= window[0]) & (times <= window[1])
    if int(mask.sum()) < FIT_MIN_SAMPLES:
        raise FitError(
            f"decay fit needs at least {FIT_MIN_SAMPLES} usable samples, got {int(mask.sum())}"
        )

    t = times[mask]
    log_v = np.log(values[mask])
    slope, intercept = np.polyfit(t, log_v, 1)
    residual = log_v - (slope * t + intercept)
    ss_res = float(residual @ residual)
    centered = log_v - log_v.mean()
    ss_tot = float(centered @ centered)
    if ss_tot <= 1e-24 * len(t) * max(1.0, float(log_v @ log_v) / len(t)):
        r_squared = 1.0
    else:
        r_squared = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecayFit(rate=float(-slope), r_squared=r_squared,
                    window=(float(t.min()), float(t.max())), samples=int(len(t)))


def default_window(series: Sequence[Tuple[float, float]],
                   band: Tuple[float, float] = WINDOW_BAND) -> Tuple[float, float]:
    """Отрезок времени, на котором отклонение лежит в [1e-8, 1e-2]"""
    inside = [t for t, v in series if math.isfinite(v) and band[0] <= v <= band[1]]
    if not inside:
        raise FitError(f"no samples inside the deviation band {band}")
    return (min(inside), max(inside))


# --- линеаризация -----------------------------------------------------------

def linear_rates(ref: Reference, p: Params, length: float = TWO_PI, mode: int = 1) -> dict:
    """
    Скорости затухания линеаризации около (ρ̄, B̄) для моды mode:
    собственные числа матрицы диффузии, умноженные на k².
    """
    k_sq = (TWO_PI / length * mode) ** 2
    alpha = eval_alpha(ref.rho_bar, ref.b_bar, p)
    beta = eval_beta(ref.rho_bar, ref.b_bar, p)
    rates = {
        'alpha': alpha * k_sq,
        'beta': beta * k_sq,
        'min_eigen': min(alpha, beta) * k_sq,
    }
    if ref.b_bar == 0.0:
        rates['l2_rho_dev'] = ref.rho_bar ** (p.gamma - 1.0) * k_sq
        rates['l2_b_dev'] = p.b0_sq / ref.rho_bar * k_sq
    else:
        zetas = zeta_roots(ref.rho_bar, ref.b_bar, p)
        rates['coupled1'] = zeta_rate(zetas.zeta1, ref.rho_bar, ref.b_bar, p) * k_sq
        rates['coupled2'] = zeta_rate(zetas.zeta2, ref.rho_bar, ref.b_bar, p) * k_sq
    return rates


# --- вердикты ---------------------------------------------------------------

def _relative_drift(values: np.ndarray, scale: float) -> float:
    if values.size == 0:
        return 0.0
    drift = float(np.max(np.abs(values - values[0])))
    return drift / scale if scale > 0.0 else drift


def _max_relative_decrease(values: np.ndarray) -> float:
    """Наибольшее убывание соседних значений относительно max(|prev|, 1); inf не участвует"""
    worst = 0.0
    for prev, cur in zip(values.tolist()[:-1], values.tolist()[1:]):
        if not (math.isfinite(prev) and math.isfinite(cur)):
            continue
        drop = (prev - cur) / max(abs(prev), DECREASE_FLOOR)
        worst = max(worst, drop)
    return worst


def energy_balance_residual(records: Sequence[DiagnosticsRecord]) -> float:
    """
    max |dE/dt + dissipation| / dissipation по внутренним записям с равным шагом;
    dE/dt берется центральной разностью четвертого порядка.
    """
    worst = math.nan
    for k in range(2, len(records) - 2):
        window = records[k - 2:k + 3]
        times = np.array([r.time for r in window])
        steps = np.diff(times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            continue
        diss = records[k].dissipation
        if diss <= DISSIPATION_FLOOR:
            continue
        e = [r.energy for r in window]
        rate = (-e[4] + 8.0 * e[3] - 8.0 * e[1] + e[0]) / (12.0 * steps[0])
        residual = abs(rate + diss) / diss
        worst = residual if math.isnan(worst) else max(worst, residual)
    return worst


@dataclass(frozen=True)
class ImpliedEnvelope:
    """
    Границы области {w >= w₀, z >= z₀}, найденные по выборке и расширенные
    на одну ячейку. Граница, которую не удалось отделить от края выборки,
    равна 0 (rho_lo) или inf (rho_hi, b_hi).
    """

    w0: float
    z0: float
    rho_lo: float
    rho_hi: float
    b_hi: float
    members: int

    @property
    def resolved(self) -> bool:
        return self.members > 0 and self.rho_lo > 0.0 and math.isfinite(self.rho_hi) \
            and math.isfinite(self.b_hi)

    def contains(self, min_rho: float, max_rho: float, max_abs_b: float) -> bool:
        return min_rho >= self.rho_lo and max_rho <= self.rho_hi and max_abs_b <= self.b_hi

    def as_dict(self) -> dict:
        def finite_or_none(value: float) -> Optional[float]:
            return value if math.isfinite(value) else None

        return {
            'w0': finite_or_none(self.w0),
            'z0': finite_or_none(self.z0),
            'rho_lo': self.rho_lo,
            'rho_hi': finite_or_none(self.rho_hi),
            'b_hi': finite_or_none(self.b_hi),
            'members': self.members,
            'resolved': self.resolved,
        }


def _region_members(p: Params, rhos: np.ndarray, bs: np.ndarray, w0: float, z0: float, **quad):
    members = []
    for r in rhos.tolist():
        for v in bs.tolist():
            try:
                inside = eval_w(r, v, p, **quad).value >= w0 and eval_z(r, v, p, **quad).value >= z0
            except EvaluationError:
                continue
            if inside:
                members.append((r, v))
    return members


def implied_envelope(p: Params, first: DiagnosticsRecord, samples: int = ENVELOPE_SAMPLES,
                     expansions: int = ENVELOPE_EXPANSIONS, **quad) -> ImpliedEnvelope:
    """
    Область {w >= min w(0), z >= min z(0)} инвариантна, поэтому ее границы
    ограничивают min rho, max rho и max |B| на всей траектории. Выборка
    начинается с окрестности начальных огибающих и расширяется, пока
    область касается края.
    """
    w0, z0 = first.min_w, first.min_z
    spread = max(first.max_rho - first.min_rho, 1e-3 * first.max_rho)
    lo = max(first.min_rho - spread, 0.5 * first.min_rho)
    hi = first.max_rho + spread
    b_max = first.max_abs_b + max(first.max_abs_b, 1e-3)

    found = None
    for _ in range(expansions + 1):
        rhos = np.linspace(lo, hi, samples)
        bs = sample_axis(-b_max, b_max, samples)
        members = _region_members(p, rhos, bs, w0, z0, **quad)
        if not members:
            # более грубая выборка потеряла область; остается предыдущая
            break
        touches = (
            min(r for r, _ in members) <= rhos[0],
            max(r for r, _ in members) >= rhos[-1],
            max(abs(v) for _, v in members) >= bs[-1],
        )
        found = (members, float(rhos[1] - rhos[0]), float(bs[1] - bs[0]), touches)
        if not any(touches):
            break
        if touches[0]:
            lo = 0.5 * lo
        if touches[1]:
            hi = 2.0 * hi
        if touches[2]:
            b_max = 2.0 * b_max

    if found is None:
        logger.warning(
            f"Implied envelope: no sample in {{w >= {w0:.6g}, z >= {z0:.6g}}}",
            extra={'w0': w0, 'z0': z0},
        )
        return ImpliedEnvelope(w0, z0, 0.0, math.inf, math.inf, 0)

    members, d_rho, d_b, touches = found
    return ImpliedEnvelope(
        w0=w0,
        z0=z0,
        rho_lo=0.0 if touches[0] else max(min(r for r, _ in members) - d_rho, 0.0),
        rho_hi=math.inf if touches[1] else max(r for r, _ in members) + d_rho,
        b_hi=math.inf if touches[2] else max(abs(v) for _, v in members) + d_b,
        members=len(members),
    )


def verdicts(records: Sequence[DiagnosticsRecord], envelope: Optional[ImpliedEnvelope] = None) -> dict:
    """
    Сохранение, монотонность, Z < 1 и огибающие по временному ряду.
    Если передана envelope, огибающие сравниваются и с ее границами.
    """
    if not records:
        return {}
    mass = np.array([r.mass for r in records])
    flux = np.array([r.flux_mean for r in records])
    energies = np.array([r.energy for r in records])
    min_w = np.array([r.min_w for r in records])
    min_z = np.array([r.min_z for r in records])

    first = records[0]
    flux_scale = max(abs(first.flux_mean), first.max_abs_b)
    energy_increase = float(np.max(np.diff(energies), initial=0.0)) / first.energy
    w_decrease = _max_relative_decrease(min_w)
    z_decrease = _max_relative_decrease(min_z)
    mass_drift = _relative_drift(mass, abs(first.mass))
    flux_drift = _relative_drift(flux, flux_scale)
    min_rho = min(r.min_rho for r in records)
    max_rho = max(r.max_rho for r in records)
    max_abs_b = max(r.max_abs_b for r in records)
    ratio = min_rho / first.min_rho

    envelopes = {
        'min_rho': min_rho,
        'max_rho': max_rho,
        'max_abs_b': max_abs_b,
        'initial_min_rho': first.min_rho,
        'min_rho_ratio': ratio,
        'min_rho_ratio_passed': bool(ratio > MIN_RHO_RATIO),
        'initial_min_w': first.min_w,
        'initial_min_z': first.min_z,
        'implied': None,
        'implied_passed': None,
    }
    passed = envelopes['min_rho_ratio_passed']
    if envelope is not None:
        within = bool(envelope.contains(min_rho, max_rho, max_abs_b))
        envelopes['implied'] = envelope.as_dict()
        envelopes['implied_passed'] = within
        passed = passed and within
    envelopes['passed'] = passed

    return {
        'conservation': {
            'mass_drift': mass_drift,
            'flux_drift': flux_drift,
            'passed': bool(mass_drift <= DRIFT_TOLERANCE and flux_drift <= DRIFT_TOLERANCE),
        },
        'monotonicity': {
            'energy_max_increase': energy_increase,
            'min_w_max_decrease': w_decrease,
            'min_z_max_decrease': z_decrease,
            'energy_passed': bool(energy_increase <= ENERGY_TOLERANCE),
            'min_w_passed': bool(w_decrease <= ENVELOPE_TOLERANCE),
            'min_z_passed': bool(z_decrease <= ENVELOPE_TOLERANCE),
        },
        'z_ceiling_passed': bool(np.all(min_z > 0.0)),
        'energy_balance_residual': energy_balance_residual(records),
        'envelopes': envelopes,
    }


def decay_fits(records: Sequence[DiagnosticsRecord],
               names: Sequence[str] = ('l2_rho_dev', 'l2_b_dev', 'coupled1', 'coupled2')) -> dict:
    """Подгонка по каждой отслеживаемой норме; ошибки подгонки попадают в отчет"""
    fits = {}
    for name in names:
        series = [(r.time, r.value(name)) for r in records]
        if all(math.isnan(v) for _, v in series):
            continue
        try:
            fits[name] = fit_decay(series, default_window(series)).as_dict()
        except FitError as exc:
            fits[name] = {'error': exc.detail}
    return fits
