import numpy as np
import pytest

from core.exceptions import ConfigError, NonFiniteStateError, VacuumBreachError
from core.grid import Field
from core.models import (
    Params,
    State,
    check_admissible,
    diffusion_matrix,
    pressure_potential,
    rhs,
    velocity,
)
from tests.factories import GridFactory, ParamsFactory, make_state


def relative_l2(actual, expected):
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


def fd_d1(f, h):
    return (-np.roll(f, -2) + 8.0 * np.roll(f, -1) - 8.0 * np.roll(f, 1) + np.roll(f, 2)) / (12.0 * h)


def fd_d2(f, h):
    return (-np.roll(f, -2) + 16.0 * np.roll(f, -1) - 30.0 * f + 16.0 * np.roll(f, 1)
            - np.roll(f, 2)) / (12.0 * h * h)


def fd_rhs(rho, b, p, h):
    """Правая часть на центральных разностях 4-го порядка"""
    potential = rho ** p.gamma / p.gamma + 0.5 * b * b
    flux = (b * fd_d1(potential, h) + p.b0_sq * fd_d1(b, h)) / rho
    return fd_d2(potential, h), fd_d1(flux, h)


def kernel_profile(x, ratio, amplitude):
    """1 + amplitude·Σ ratio^k cos kx и две ее производные в замкнутой форме"""
    c, s = np.cos(x), np.sin(x)
    denom = 1.0 - 2.0 * ratio * c + ratio * ratio
    scale = -ratio * (1.0 - ratio * ratio)
    value = (ratio * c - ratio * ratio) / denom
    first = scale * s / denom ** 2
    second = scale * (c * denom - 4.0 * ratio * s * s) / denom ** 3
    return 1.0 + amplitude * value, amplitude * first, amplitude * second


def exact_rhs(rho, rho_x, rho_xx, b, b_x, b_xx, p):
    """Правая часть по цепному правилу из точных производных rho и B"""
    g = p.gamma
    pot_x = rho ** (g - 1.0) * rho_x + b * b_x
    pot_xx = (g - 1.0) * rho ** (g - 2.0) * rho_x ** 2 + rho ** (g - 1.0) * rho_xx + b_x ** 2 + b * b_xx
    flux = b * pot_x + p.b0_sq * b_x
    flux_x = b_x * pot_x + b * pot_xx + p.b0_sq * b_xx
    return pot_xx, flux_x / rho - flux * rho_x / rho ** 2


class TestParams:
    """Тесты проверки параметров модели"""

    def test_gamma_out_of_range(self):
        """gamma = 2.3 отклоняется с указанием интервала (1, 2)"""
        with pytest.raises(ConfigError, match=r'\(1, 2\)'):
            Params(2.3, 1.0)

    def test_gamma_guard(self):
        """Показатель 2/(2-gamma) не больше 100"""
        with pytest.raises(ConfigError, match='must not exceed'):
            Params(1.99, 1.0)

    @pytest.mark.parametrize('b0, epsilon', [(0.0, 0.0), (1.0, -1e-3), (float('inf'), 0.0)])
    def test_invalid_b0_and_epsilon(self, b0, epsilon):
        with pytest.raises(ConfigError):
            Params(1.5, b0, epsilon)

    def test_exponent(self):
        assert ParamsFactory(gamma=1.5).exponent == pytest.approx(4.0)
        assert ParamsFactory(b0=2.0).b0_sq == 4.0


class TestAdmissibility:
    """Тесты проверки положительности плотности"""

    def test_vacuum_breach_reports_location(self, grid):
        rho = np.ones(grid.n)
        rho[10] = 0.0
        with pytest.raises(VacuumBreachError) as excinfo:
            check_admissible(grid, rho, 0.25)
        assert excinfo.value.location == pytest.approx(grid.x[10])
        assert excinfo.value.time == 0.25
        assert excinfo.value.exit_code == 3

    def test_nan_is_not_vacuum(self, grid):
        rho = np.ones(grid.n)
        rho[3] = np.nan
        with pytest.raises(NonFiniteStateError):
            check_admissible(grid, rho, 0.0)

    def test_admissible_property(self, grid):
        state = make_state(grid)
        assert state.admissible
        shifted = state.with_arrays(state.rho.values - 1.0, state.b.values, 0.5)
        assert shifted.time == 0.5
        assert shifted.grid == grid
        assert not shifted.admissible

    def test_rhs_rejects_vacuum(self, grid, params):
        state = State(Field(grid, 1.0 + np.cos(grid.x)), Field.constant(grid, 0.0))
        with pytest.raises(VacuumBreachError):
            rhs(state, params)


class TestRightHandSide:
    """Тесты правой части системы"""

    def test_constant_state_is_steady(self, grid, params):
        state = State(Field.constant(grid, 1.3), Field.constant(grid, 0.4))
        drho, db = rhs(state, params)
        assert np.max(np.abs(drho.values)) < 1e-12
        assert np.max(np.abs(db.values)) < 1e-12

    def test_conservative_form(self, perturbed_state, params):
        """Средние производных по времени равны нулю"""
        drho, db = rhs(perturbed_state, params)
        assert abs(drho.values.mean()) < 1e-15
        assert abs(db.values.mean()) < 1e-15

    def test_linear_response_b_zero(self, grid, params):
        """Около (1, 0): d rho/dt ≈ ∂ₓ²rho, dB/dt ≈ B₀²∂ₓ²B"""
        amp = 1e-6
        state = make_state(grid, rho_amp=amp, b_amp=amp)
        drho, db = rhs(state, params)
        assert np.max(np.abs(drho.values + amp * np.cos(grid.x))) < 1e-10
        assert np.max(np.abs(db.values + 4 * amp * np.sin(2 * grid.x))) < 1e-10

    def test_regularization_term(self, grid):
        """Добавка -ε∂ₓ⁴ к обоим уравнениям"""
        state = make_state(grid, rho_amp=0.05, b_amp=0.05)
        plain_rho, plain_b = rhs(state, ParamsFactory())
        reg_rho, reg_b = rhs(state, ParamsFactory(epsilon=0.1))
        expected_rho = -0.1 * 0.05 * np.cos(grid.x)
        expected_b = -0.1 * 16 * 0.05 * np.sin(2 * grid.x)
        assert np.max(np.abs(reg_rho.values - plain_rho.values - expected_rho)) < 1e-12
        assert np.max(np.abs(reg_b.values - plain_b.values - expected_b)) < 1e-12

    def test_dealiased_rhs_close(self, params):
        """Фильтр 2/3 почти не меняет правую часть гладкого состояния"""
        plain = rhs(make_state(GridFactory(n=64)), params)
        filtered = rhs(make_state(GridFactory(n=64, dealias=True)), params)
        assert np.max(np.abs(plain[0].values - filtered[0].values)) < 1e-10

    def test_matches_finite_difference_oracle(self, params):
        """n = 128 против центральных разностей 4-го порядка на n = 2048"""
        fine = GridFactory(n=2048)
        rho = 1.0 + 0.1 * np.cos(fine.x)
        b = 0.1 * np.sin(fine.x)
        oracle_rho, oracle_b = fd_rhs(rho, b, params, fine.x[1] - fine.x[0])

        grid = GridFactory(n=128)
        drho, db = rhs(State.from_arrays(grid, rho[::16], b[::16]), params)
        assert relative_l2(drho.values, oracle_rho[::16]) < 1e-6
        assert relative_l2(db.values, oracle_b[::16]) < 1e-6

    def test_spectral_convergence(self, params):
        """Ошибка на данных со спектром 0.6^k убывает быстрее n^-4"""
        errors = []
        for n in (32, 64, 128):
            grid = GridFactory(n=n)
            rho, rho_x, rho_xx = kernel_profile(grid.x, 0.6, 0.2)
            b, b_x, b_xx = 0.1 * np.sin(grid.x), 0.1 * np.cos(grid.x), -0.1 * np.sin(grid.x)
            exact_rho, exact_b = exact_rhs(rho, rho_x, rho_xx, b, b_x, b_xx, params)
            drho, db = rhs(State.from_arrays(grid, rho, b), params)
            errors.append(max(relative_l2(drho.values, exact_rho), relative_l2(db.values, exact_b)))
        for coarse, fine in zip(errors[:-1], errors[1:]):
            assert np.log2(coarse / fine) > 4.0, errors

    def test_pressure_potential(self, grid, params):
        rho = np.full(grid.n, 4.0)
        b = np.full(grid.n, 2.0)
        assert pressure_potential(rho, b, params) == pytest.approx(np.full(grid.n, 8.0 / 1.5 + 2.0))


class TestVelocity:
    """Тесты восстановления скорости"""

    def test_constant_state(self, constant_state, params):
        u = velocity(constant_state, params)
        assert np.max(np.abs(u.ux.values)) < 1e-13
        assert np.max(np.abs(u.uz.values)) < 1e-13

    def test_ux_from_pressure(self, grid, params):
        """rho = 1 + 0.1 cos x, B = 0: u^x = 0.1 sin x / sqrt(rho), u^z = 0"""
        rho = 1.0 + 0.1 * np.cos(grid.x)
        u = velocity(State.from_arrays(grid, rho, np.zeros(grid.n)), params)
        assert np.max(np.abs(u.ux.values - 0.1 * np.sin(grid.x) / np.sqrt(rho))) < 1e-12
        assert np.max(np.abs(u.uz.values)) == 0.0

    def test_uz_from_flux(self, grid, params):
        """u^z = B₀ ∂ₓB / rho"""
        state = make_state(grid, rho_amp=0.0, b_amp=0.1)
        u = velocity(state, params)
        assert np.max(np.abs(u.uz.values - 0.2 * np.cos(2 * grid.x))) < 1e-12


class TestDiffusionMatrix:
    """Тесты матрицы при вторых производных"""

    def test_identity_at_unit_state(self, params):
        """В точке (1, 0) при gamma = 1.5, B₀ = 1 матрица единичная"""
        assert np.allclose(diffusion_matrix(1.0, 0.0, params), np.eye(2), atol=1e-15)

    def test_trace(self, params, helpers):
        m = diffusion_matrix(2.0, 0.5, params)
        helpers.assert_close(np.trace(m), 2.0 ** 0.5 + 1.25 / 2.0, 1e-15)

    def test_determinant(self, params, helpers):
        """det = rho^{gamma-2} B₀² в 100 случайных допустимых точках"""
        rng = np.random.default_rng(7)
        for rho, b in zip(rng.uniform(0.05, 5.0, 100), rng.uniform(-3.0, 3.0, 100)):
            m = diffusion_matrix(rho, b, params)
            helpers.assert_close(np.linalg.det(m), rho ** (params.gamma - 2.0) * params.b0_sq, 1e-12)

    def test_rejects_vacuum(self, params):
        with pytest.raises(ValueError):
            diffusion_matrix(0.0, 0.5, params)
