"""
Аудит переменных релаксации: аналитические производные против конечных
разностей, алгебраические тождества, квадратура против брутфорс-Симпсона,
знаки производных и упорядоченность корней на регулярной выборке.

Точки выбираются детерминированно (numpy default_rng(seed)) из прямоугольника
с исключением окрестности особого множества |B| <= 0.1, |rho^γ - B₀²| <= 0.1.
Отчет - словарь без отметок времени: одинаковый seed дает одинаковые байты.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from core.exceptions import AuditFailure, EvaluationError
from core.logging_config import RunAuditLogger
from core.models import Params, diffusion_matrix
from core.quadrature import pole_integral, tail_integral, z_integral
from core.relaxvars import (
    alpha_forms,
    derivatives_W,
    derivatives_Z,
    eval_alpha,
    eval_beta,
    eval_f,
    eval_g,
    eval_w,
    eval_z,
    exp_neg,
    log_derivatives_w,
    log_derivatives_z,
)
from core.workers import map_tasks

logger = logging.getLogger(__name__)

DEFAULT_BOX = ((0.2, 3.0), (-2.0, 2.0))
EXCLUSION = 0.1
FD_STEP = 1e-5
AUDIT_RTOL = 1e-13
SIMPSON_PANELS = 10 ** 6
SIMPSON_POINTS = ((1.2, 0.4), (2.0, 0.4))
SIGN_GRID = 100

# e^{-w} представимо и не денормализовано
LOG_REPRESENTABLE = math.log(1e280)

TOLERANCES = {
    'derivatives': 1e-6,
    'identities': 1e-10,
    'quadrature': 1e-9,
    'signs': 0.0,
}

CHECK_CLASSES = {
    'grad_w_fd': 'derivatives',
    'hess_w_fd': 'derivatives',
    'grad_z_fd': 'derivatives',
    'hess_z_fd': 'derivatives',
    'grad_W_fd': 'derivatives',
    'hess_W_fd': 'derivatives',
    'grad_Z_fd': 'derivatives',
    'hess_Z_fd': 'derivatives',
    'left_eigenvector_w': 'identities',
    'left_eigenvector_z': 'identities',
    'eigen_trace': 'identities',
    'eigen_det': 'identities',
    'eigen_numpy': 'identities',
    'product_fg': 'identities',
    'difference_fg': 'identities',
    'ratio_w': 'identities',
    'ratio_z': 'identities',
    'alpha_forms': 'identities',
    'simpson_w': 'quadrature',
    'simpson_z': 'quadrature',
    'monotonicity': 'signs',
    'root_ordering': 'signs',
}

OFFSETS = (-2, -1, 1, 2)


def sample_points(count: int, seed: int, box=DEFAULT_BOX, p: Optional[Params] = None,
                  exclusion: float = EXCLUSION) -> List[Tuple[float, float]]:
    """Отбор с отбрасыванием; порядок и состав точек зависят только от seed"""
    p = p or Params(1.5, 1.0)
    (rho_lo, rho_hi), (b_lo, b_hi) = box
    if not 0.0 < rho_lo < rho_hi or not b_lo < b_hi:
        raise ValueError(f"invalid sample box {box}")
    rng = np.random.default_rng(seed)
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise ValueError(f"sample box {box} is almost entirely excluded")
        rho = float(rng.uniform(rho_lo, rho_hi))
        b = float(rng.uniform(b_lo, b_hi))
        if abs(b) <= exclusion or abs(rho ** p.gamma - p.b0_sq) <= exclusion:
            continue
        points.append((rho, b))
    return points


def five_point(values: Sequence[float], h: float) -> float:
    """Центральная разность 4-го порядка по значениям в x-2h, x-h, x+h, x+2h"""
    m2, m1, p1, p2 = values
    return (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)


def _relative(error: float, scale: float) -> float:
    return error / scale if scale > 0.0 else error


def _fd_errors(grad_stencil, hess_stencil, bundle: Tuple[float, ...], h: float) -> Tuple[float, float]:
    """
    grad_stencil[axis] - значения функции в узлах шаблона по оси,
    hess_stencil[axis] - аналитические градиенты в тех же узлах.
    Ошибка нормируется на наибольшую компоненту того же порядка.
    """
    d_r, d_b, d_rr, d_rb, d_bb = bundle
    fd_grad = (five_point(grad_stencil[0], h), five_point(grad_stencil[1], h))
    grad_error = max(abs(fd_grad[0] - d_r), abs(fd_grad[1] - d_b))

    rho_dir, b_dir = hess_stencil
    fd_rr = five_point([g[0] for g in rho_dir], h)
    fd_rb = five_point([g[1] for g in rho_dir], h)
    fd_br = five_point([g[0] for g in b_dir], h)
    fd_bb = five_point([g[1] for g in b_dir], h)
    hess_error = max(abs(fd_rr - d_rr), abs(fd_rb - d_rb), abs(fd_br - d_rb), abs(fd_bb - d_bb))
    return (
        _relative(grad_error, max(abs(d_r), abs(d_b))),
        _relative(hess_error, max(abs(d_rr), abs(d_rb), abs(d_bb))),
    )


def _exponent_checks(rho: float, b: float, p: Params, which: str, h: float, quad: dict) -> Dict[str, float]:
    """Конечные разности для w (или z) и, где представимо, для W = e^{-w} (или Z)"""
    evaluate = eval_w if which == 'w' else eval_z
    log_derivatives = log_derivatives_w if which == 'w' else log_derivatives_z
    big = which.upper()

    centre = evaluate(rho, b, p, **quad).value
    values = (
        [evaluate(rho + k * h, b, p, **quad).value for k in OFFSETS],
        [evaluate(rho, b + k * h, p, **quad).value for k in OFFSETS],
    )
    grads = (
        [log_derivatives(rho + k * h, b, p)[:2] for k in OFFSETS],
        [log_derivatives(rho, b + k * h, p)[:2] for k in OFFSETS],
    )
    bundle = log_derivatives(rho, b, p)
    grad_error, hess_error = _fd_errors(values, grads, bundle, h)
    result = {f"grad_{which}_fd": grad_error, f"hess_{which}_fd": hess_error}

    exponents = [centre] + values[0] + values[1]
    if all(abs(u) < LOG_REPRESENTABLE for u in exponents):
        big_values = tuple([math.exp(-u) for u in axis] for axis in values)
        big_grads = tuple(
            [(-math.exp(-u) * g[0], -math.exp(-u) * g[1]) for u, g in zip(axis_values, axis_grads)]
            for axis_values, axis_grads in zip(values, grads)
        )
        derivatives = derivatives_W if which == 'w' else derivatives_Z
        big_bundle = derivatives(rho, b, p, **quad).as_tuple()
        grad_error, hess_error = _fd_errors(big_values, big_grads, big_bundle, h)
        result[f"grad_{big}_fd"] = grad_error
        result[f"hess_{big}_fd"] = hess_error
    return result


def _stable_differences(rho: float, b: float, p: Params) -> Tuple[float, float, float, float]:
    """P, D и S - D, S + D без вычитания близких чисел"""
    P = rho ** p.gamma
    D = b * b + p.b0_sq - P
    S = math.hypot(D, 2.0 * abs(b) * math.sqrt(P))
    four_b2p = 4.0 * b * b * P
    s_minus_d = S - D if D <= 0.0 else four_b2p / (S + D)
    s_plus_d = S + D if D >= 0.0 else four_b2p / (S - D)
    return P, D, s_minus_d, s_plus_d


def _left_eigen_error(rho: float, b: float, p: Params, d: Tuple[float, ...], eigen: float) -> float:
    u_r, u_b = d[0], d[1]
    a11, a12 = rho ** (p.gamma - 1.0), b
    a21, a22 = rho ** (p.gamma - 2.0) * b, (b * b + p.b0_sq) / rho
    first = u_r * a11 + u_b * a21 - eigen * u_r
    second = u_r * a12 + u_b * a22 - eigen * u_b
    scale = max(
        abs(u_r * a11) + abs(u_b * a21) + abs(eigen * u_r),
        abs(u_r * a12) + abs(u_b * a22) + abs(eigen * u_b),
    )
    return _relative(max(abs(first), abs(second)), scale)


def _identity_checks(rho: float, b: float, p: Params) -> Dict[str, float]:
    f = eval_f(rho, b, p).value
    g = eval_g(rho, b, p).value
    alpha = eval_alpha(rho, b, p)
    beta = eval_beta(rho, b, p)
    P, D, s_minus_d, s_plus_d = _stable_differences(rho, b, p)
    b_sq = b * b

    trace = rho ** (p.gamma - 1.0) + (b_sq + p.b0_sq) / rho
    det = rho ** (p.gamma - 2.0) * p.b0_sq
    eigen = np.sort(np.linalg.eigvals(diffusion_matrix(rho, b, p)).real)

    dw = log_derivatives_w(rho, b, p)
    dz = log_derivatives_z(rho, b, p)
    ratio_w = s_minus_d / (2.0 * b * rho)
    ratio_z = -s_plus_d / (2.0 * b * rho)
    forms = alpha_forms(rho, b, p)

    return {
        'left_eigenvector_w': _left_eigen_error(rho, b, p, dw, alpha),
        'left_eigenvector_z': _left_eigen_error(rho, b, p, dz, beta),
        'eigen_trace': abs(alpha + beta - trace) / trace,
        'eigen_det': abs(alpha * beta - det) / det,
        'eigen_numpy': max(abs(eigen[1] - alpha), abs(eigen[0] - beta)) / alpha,
        'product_fg': abs(f * g - 4.0 * P / b_sq) / (4.0 * P / b_sq),
        'difference_fg': abs((f - g) - 2.0 * D / b_sq) / (f + g),
        'ratio_w': abs(dw[0] / dw[1] - ratio_w) / abs(ratio_w),
        'ratio_z': abs(dz[0] / dz[1] - ratio_z) / abs(ratio_z),
        'alpha_forms': (max(forms) - min(forms)) / max(forms),
    }


def _audit_point(task) -> Dict[str, float]:
    rho, b, p, h, quad = task
    try:
        result = _identity_checks(rho, b, p)
        result.update(_exponent_checks(rho, b, p, 'w', h, quad))
        result.update(_exponent_checks(rho, b, p, 'z', h, quad))
    except EvaluationError as exc:
        return {'error': f"rho={rho:.17g}, b={b:.17g}: {exc.detail}"}
    return result


# --- квадратура против Симпсона ---------------------------------------------

def simpson(func, a: float, b: float, panels: int = SIMPSON_PANELS) -> float:
    x = np.linspace(a, b, panels + 1)
    return float(integrate.simpson(func(x), x=x))


def simpson_oracle(rho: float, b: float, p: Params, which: str,
                   panels: int = SIMPSON_PANELS) -> Optional[Tuple[float, float]]:
    """
    (адаптивная квадратура, Симпсон) для интеграла из определения w или z
    в исходной переменной s; None на бесконечной ветке.
    """
    exponent = p.exponent
    if which == 'w':
        f = eval_f(rho, b, p)
        if f.is_infinite:
            return None
        f = f.value
        if f > 4.0:
            quad_value = tail_integral(f, exponent, rtol=AUDIT_RTOL)
            brute = simpson(lambda s: s ** (exponent - 1.0) / (1.0 - 0.5 * s) ** 2, 4.0, f, panels)
        else:
            quad_value = pole_integral(f, exponent, rtol=AUDIT_RTOL)
            brute = simpson(
                lambda s: (1.0 - 0.25 * s) * s ** exponent / (1.0 - 0.5 * s) ** 2, f, 4.0, panels
            )
        return quad_value, brute

    g = eval_g(rho, b, p)
    if g.is_infinite:
        return None
    quad_value = z_integral(g.value, exponent, rtol=AUDIT_RTOL)
    brute = simpson(lambda s: s ** (exponent - 1.0) / (1.0 + 0.5 * s) ** 2, 0.0, g.value, panels)
    return quad_value, brute


def _simpson_checks(p: Params, panels: int) -> Dict[str, float]:
    result = {'simpson_w': 0.0, 'simpson_z': 0.0}
    tasks = [(point, 'w') for point in SIMPSON_POINTS] + [(SIMPSON_POINTS[0], 'z')]
    for (rho, b), which in tasks:
        pair = simpson_oracle(rho, b, p, which, panels)
        if pair is None:
            continue
        quad_value, brute = pair
        key = f"simpson_{which}"
        result[key] = max(result[key], _relative(abs(quad_value - brute), abs(brute)))
    return result


# --- знаки и упорядоченность на регулярной сетке ----------------------------

def _sign_row(task) -> Tuple[int, int, int]:
    """(нарушения монотонности, нарушения упорядоченности, число точек) для строки rho"""
    rho, bs, p = task
    monotone_bad = 0
    order_bad = 0
    for b in bs:
        f = eval_f(rho, b, p)
        g = eval_g(rho, b, p)
        if not f.is_infinite and not f.value > 2.0:
            order_bad += 1
        if not g.is_infinite and not g.value > 0.0:
            order_bad += 1
        if not (eval_alpha(rho, b, p) > 0.0 and eval_beta(rho, b, p) > 0.0):
            order_bad += 1
        z = eval_z(rho, b, p)
        if not (z.value > 0.0 and exp_neg(z) < 1.0):
            order_bad += 1

        # ∂ρW >= 0, ∂BW >= 0 при B >= 0, ∂BZ·sgn(B) >= 0; W = e^{-w}
        dw = log_derivatives_w(rho, b, p)
        if dw is not None and (dw[0] > 0.0 or (b >= 0.0 and dw[1] > 0.0)):
            monotone_bad += 1
        dz = log_derivatives_z(rho, b, p)
        if dz is not None and dz[1] * math.copysign(1.0, b) > 0.0 and b != 0.0:
            monotone_bad += 1
    return monotone_bad, order_bad, len(bs)


def _sign_checks(p: Params, box, n: int, workers: int) -> Tuple[Dict[str, float], int]:
    (rho_lo, rho_hi), (b_lo, b_hi) = box
    bs = np.linspace(b_lo, b_hi, n).tolist()
    tasks = [(float(rho), bs, p) for rho in np.linspace(rho_lo, rho_hi, n)]
    rows = map_tasks(_sign_row, tasks, workers)
    return (
        {
            'monotonicity': float(sum(row[0] for row in rows)),
            'root_ordering': float(sum(row[1] for row in rows)),
        },
        sum(row[2] for row in rows),
    )


# --- отчет ------------------------------------------------------------------

def run_audit(p: Params, points: int = 200, seed: int = 1, tol: Optional[float] = None,
              workers: int = 1, box=DEFAULT_BOX, h: float = FD_STEP,
              sign_grid: int = SIGN_GRID, simpson_panels: int = SIMPSON_PANELS,
              limit: int = 200) -> dict:
    """
    Полный отчет аудита. tol заменяет все допуски сразу; для проверок знаков
    max_error - число нарушений.
    """
    tolerances = {name: (tol if tol is not None else value) for name, value in TOLERANCES.items()}
    quad = {'rtol': AUDIT_RTOL, 'limit': limit}
    sample = sample_points(points, seed, box, p)
    per_point = map_tasks(_audit_point, [(rho, b, p, h, quad) for rho, b in sample], workers)

    errors = [item['error'] for item in per_point if 'error' in item]
    maxima: Dict[str, float] = {}
    samples: Dict[str, int] = {}
    for item in per_point:
        for name, value in item.items():
            if name == 'error':
                continue
            maxima[name] = max(maxima.get(name, 0.0), float(value))
            samples[name] = samples.get(name, 0) + 1

    for name, value in _simpson_checks(p, simpson_panels).items():
        maxima[name] = float(value)
        samples[name] = len(SIMPSON_POINTS) if name == 'simpson_w' else 1
    sign_maxima, sign_samples = _sign_checks(p, box, sign_grid, workers)
    for name, value in sign_maxima.items():
        maxima[name] = float(value)
        samples[name] = sign_samples

    checks = {}
    for name, check_class in CHECK_CLASSES.items():
        if name not in maxima:
            continue
        tolerance = tolerances[check_class]
        passed = bool(maxima[name] <= tolerance)
        checks[name] = {
            'max_error': maxima[name],
            'tolerance': tolerance,
            'passed': passed,
            'samples': samples[name],
        }
        RunAuditLogger.log_check(name, maxima[name], tolerance, passed)

    report = {
        'params': {'gamma': p.gamma, 'b0': p.b0},
        'points': points,
        'seed': seed,
        'box': {'rho': list(box[0]), 'b': list(box[1]), 'exclusion': EXCLUSION},
        'fd_step': h,
        'quad_rtol': AUDIT_RTOL,
        'tolerances': tolerances,
        'checks': checks,
        'errors': errors,
        'passed': bool(not errors and all(check['passed'] for check in checks.values())),
    }
    if errors:
        logger.warning(f"Audit: {len(errors)} points failed to evaluate", extra={'failed': len(errors)})
    return report


def ensure_passed(report: dict) -> None:
    if report['passed']:
        return
    failed = sorted(name for name, check in report['checks'].items() if not check['passed'])
    detail = f"audit failed: {', '.join(failed) or 'no checks failed'}"
    if report['errors']:
        detail += f"; {len(report['errors'])} points failed to evaluate"
    raise AuditFailure(detail)
