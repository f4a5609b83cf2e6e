import math

import numpy as np
import pytest

from core.diagnostics import Reference, energy_balance_residual, fit_decay
from core.exceptions import ConfigError, EvaluationError, StiffnessCollapseError
from core.integrator import (
    EXIT_CODES,
    HaltingCause,
    integrate_fixed,
    run,
    stable_dt,
    step,
)
from core.models import State
from core.observers import DiagnosticsObserver, RunLoggingObserver
from tests.factories import GridFactory, ParamsFactory, StepControlFactory, make_state


class TestStepControl:
    """Тесты параметров шага"""

    @pytest.mark.parametrize('kwargs', [
        {'cfl': 0.0},
        {'cfl': 1.5},
        {'dt_min': 2.0, 'dt_max': 1.0},
        {'t_end': -1.0},
        {'record_interval': 0.0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            StepControlFactory(**kwargs)

    def test_snapshot_times_sorted(self):
        control = StepControlFactory(snapshot_times=(0.3, 0.1, 0.3))
        assert control.snapshot_times == (0.1, 0.3)


class TestStableDt:
    """Тесты параболического ограничения шага"""

    def test_unit_state(self, constant_state, params, control):
        """alpha = 1 в (1, 0): dt = cfl·dx²/π²"""
        dx = constant_state.grid.dx
        expected = 0.9 * dx * dx / math.pi ** 2
        assert stable_dt(constant_state, params, control) == pytest.approx(expected, rel=1e-14)

    def test_regularization_limits_step(self, constant_state, control):
        dx = constant_state.grid.dx
        dt = stable_dt(constant_state, ParamsFactory(epsilon=0.1), control)
        assert dt == pytest.approx(0.9 * dx ** 4 / (math.pi ** 4 * 0.1), rel=1e-14)

    def test_dt_max(self, constant_state, params):
        control = StepControlFactory(dt_max=1e-5, dt_min=1e-12)
        assert stable_dt(constant_state, params, control) == 1e-5

    def test_collapse(self, constant_state, params):
        control = StepControlFactory(dt_min=0.5, dt_max=1.0)
        with pytest.raises(StiffnessCollapseError):
            stable_dt(constant_state, params, control)


class TestStep:
    """Тесты шага RK4"""

    def test_constant_state_unchanged(self, constant_state, params):
        new = step(constant_state, params, 1e-3)
        assert new.time == pytest.approx(1e-3)
        assert np.max(np.abs(new.rho.values - 1.0)) < 1e-14
        assert np.max(np.abs(new.b.values)) < 1e-14

    def test_rejects_non_positive_dt(self, constant_state, params):
        with pytest.raises(ValueError):
            step(constant_state, params, 0.0)

    def test_mass_and_flux_conserved(self, bbar_state, params):
        state = bbar_state
        for _ in range(20):
            state = step(state, params, 5e-4)
        assert abs(state.rho.values.mean() - bbar_state.rho.values.mean()) < 1e-14
        assert abs(state.b.values.mean() - bbar_state.b.values.mean()) < 1e-14

    def test_fixed_steps(self, perturbed_state, params):
        final = integrate_fixed(perturbed_state, params, 1e-3, 0.01)
        assert final.time == 0.01
        reference = perturbed_state
        for _ in range(10):
            reference = step(reference, params, 1e-3)
        assert np.array_equal(final.rho.values, reference.rho.values)

    def test_fixed_steps_unreachable(self, perturbed_state, params):
        with pytest.raises(ConfigError):
            integrate_fixed(perturbed_state, params, 3e-3, 0.01)


class TestRun:
    """Тесты полного запуска"""

    def test_records_land_on_schedule(self, perturbed_state, params):
        control = StepControlFactory(t_end=0.5, record_interval=0.1, snapshot_times=(0.0, 0.25))
        trajectory = run(perturbed_state, params, control, [DiagnosticsObserver()])
        assert trajectory.cause is HaltingCause.COMPLETED
        assert trajectory.exit_code == 0
        assert trajectory.times == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5], abs=1e-15)
        assert trajectory.times[-1] == 0.5
        assert [s.time for s in trajectory.snapshots] == [0.0, 0.25]
        assert trajectory.final_state.time == 0.5
        assert trajectory.steps > 0

    def test_zero_length_run(self, perturbed_state, params):
        control = StepControlFactory(t_end=0.0)
        trajectory = run(perturbed_state, params, control, [DiagnosticsObserver()])
        assert trajectory.cause is HaltingCause.COMPLETED
        assert trajectory.times == [0.0]
        assert trajectory.steps == 0

    def test_initial_vacuum(self, grid, params, control):
        state = State.from_arrays(grid, 1.0 + np.cos(grid.x), np.zeros(grid.n))
        trajectory = run(state, params, control, [DiagnosticsObserver()])
        assert trajectory.cause is HaltingCause.VACUUM_BREACH
        assert trajectory.exit_code == 3
        assert trajectory.error['location'] == pytest.approx(math.pi)
        assert trajectory.records == []

    def test_stiffness_collapse(self, perturbed_state, params):
        control = StepControlFactory(dt_min=0.5)
        trajectory = run(perturbed_state, params, control)
        assert trajectory.cause is HaltingCause.STIFFNESS_COLLAPSE
        assert trajectory.exit_code == 4

    def test_non_finite(self, perturbed_state, params, control, monkeypatch):
        """NaN в правой части останавливает расчет, а не пишется в поле"""
        def broken(grid, rho, b, p, time=0.0):
            return np.full(grid.n, np.nan), np.zeros(grid.n)

        monkeypatch.setattr('core.integrator.rhs_arrays', broken)
        trajectory = run(perturbed_state, params, control)
        assert trajectory.cause is HaltingCause.NON_FINITE
        assert trajectory.exit_code == 5
        assert trajectory.final_state is perturbed_state

    def test_evaluation_error(self, perturbed_state, params, control, monkeypatch):
        def failing(rho, b, p, **quad):
            raise EvaluationError('no convergence', rho=rho, b=b)

        monkeypatch.setattr('core.diagnostics.eval_w', failing)
        trajectory = run(perturbed_state, params, control, [DiagnosticsObserver()])
        assert trajectory.cause is HaltingCause.EVALUATION_ERROR
        assert trajectory.exit_code == 6
        assert 'grid location' in trajectory.error['detail']

    def test_exit_codes_total(self):
        assert set(EXIT_CODES) == set(HaltingCause)
        assert sorted(EXIT_CODES.values()) == [0, 3, 4, 5, 6]

    def test_logging_observer(self, perturbed_state, params, control):
        observer = RunLoggingObserver('unit', progress_every=2)
        trajectory = run(perturbed_state, params, control, [DiagnosticsObserver(), observer])
        assert trajectory.cause is HaltingCause.COMPLETED
        assert observer.wall_clock > 0.0


class TestRelaxation:
    """Затухание малых возмущений с линейными скоростями"""

    def test_linear_rates_at_unit_state(self, params):
        """Около (1, 0): мода cos x у rho гаснет как e^{-t}, мода sin 2x у B как e^{-4t}"""
        grid = GridFactory(n=32)
        state = make_state(grid, rho_amp=1e-3, b_amp=1e-3)
        control = StepControlFactory(t_end=3.0, record_interval=0.1)
        observer = DiagnosticsObserver(reference=Reference(1.0, 0.0))
        trajectory = run(state, params, control, [observer])
        assert trajectory.cause is HaltingCause.COMPLETED

        rho_fit = fit_decay(trajectory.series('l2_rho_dev'))
        b_fit = fit_decay(trajectory.series('l2_b_dev'), window=(0.0, 2.0))
        assert rho_fit.rate == pytest.approx(1.0, rel=0.02)
        assert b_fit.rate == pytest.approx(4.0, rel=0.02)
        assert rho_fit.r_squared > 0.999

    def test_energy_balance(self, params):
        """Центральная разность энергии совпадает с -dissipation"""
        grid = GridFactory(n=64)
        state = make_state(grid, rho_amp=0.1, b_amp=0.1)
        control = StepControlFactory(t_end=0.1, record_interval=0.01)
        trajectory = run(state, params, control, [DiagnosticsObserver()])
        assert energy_balance_residual(trajectory.records) < 1e-4
