"""
Длинные прогоны встроенных сценариев: сохранение, диссипация энергии,
принципы максимума, отсутствие вакуума и экспоненциальная релаксация.
"""
import pytest

from core.config import build_run, scenario_config, with_overrides
from core.diagnostics import fit_decay, implied_envelope, linear_rates, verdicts
from core.integrator import HaltingCause, run
from core.observers import DiagnosticsObserver

pytestmark = pytest.mark.slow


def integrate(tag, **overrides):
    config = scenario_config(tag)
    if overrides:
        config = with_overrides(config, **overrides)
    setup = build_run(config)
    observer = DiagnosticsObserver(setup.reference, s_list=config.diagnostics.sobolev_orders)
    trajectory = run(setup.state, setup.params, setup.control, [observer])
    return setup, trajectory


@pytest.fixture(scope='module')
def relax_b0():
    return integrate('relax-b0')


@pytest.fixture(scope='module')
def relax_bbar():
    return integrate('relax-bbar')


def assert_invariants(setup, trajectory):
    assert trajectory.cause is HaltingCause.COMPLETED
    envelope = implied_envelope(setup.params, trajectory.records[0])
    report = verdicts(trajectory.records, envelope)
    assert report['conservation']['passed'], report['conservation']
    assert report['monotonicity']['energy_passed'], report['monotonicity']
    assert report['monotonicity']['min_w_passed'], report['monotonicity']
    assert report['monotonicity']['min_z_passed'], report['monotonicity']
    assert report['z_ceiling_passed']
    assert report['envelopes']['min_rho_ratio'] > 0.5
    assert report['envelopes']['implied_passed'], report['envelopes']
    assert report['envelopes']['passed']


class TestRelaxB0:
    """Среднее поле B = 0"""

    def test_invariants(self, relax_b0):
        setup, trajectory = relax_b0
        assert trajectory.times[-1] == 20.0
        assert len(trajectory.snapshots) == 3
        assert_invariants(setup, trajectory)

    def test_decay(self, relax_b0):
        """‖rho - 1‖ гаснет как e^{-t}, ‖B‖ как e^{-4t}"""
        _, trajectory = relax_b0
        rho_fit = fit_decay(trajectory.series('l2_rho_dev'), window=(1.0, 12.0))
        b_fit = fit_decay(trajectory.series('l2_b_dev'), window=(0.5, 3.0))
        assert rho_fit.r_squared > 0.999
        assert b_fit.r_squared > 0.999
        assert rho_fit.rate == pytest.approx(1.0, rel=0.02)
        assert b_fit.rate == pytest.approx(4.0, rel=0.02)

    def test_rates_agree_across_resolutions(self, relax_b0):
        _, fine = relax_b0
        _, coarse = integrate('relax-b0', grid={'n': 64}, control={'t_end': 12.0},
                              diagnostics={'snapshot_times': []})
        fine_rate = fit_decay(fine.series('l2_rho_dev'), window=(1.0, 12.0)).rate
        coarse_rate = fit_decay(coarse.series('l2_rho_dev'), window=(1.0, 12.0)).rate
        assert coarse_rate == pytest.approx(fine_rate, rel=0.05)


class TestRelaxBbar:
    """Среднее поле B = 0.5: связанные нормы гаснут со скоростями alpha и beta"""

    def test_invariants(self, relax_bbar):
        setup, trajectory = relax_bbar
        assert_invariants(setup, trajectory)

    def test_coupled_decay(self, relax_bbar):
        setup, trajectory = relax_bbar
        predicted = linear_rates(setup.reference, setup.params, setup.grid.length)
        fast = fit_decay(trajectory.series('coupled1'), window=(1.0, 4.0))
        slow = fit_decay(trajectory.series('coupled2'), window=(3.0, 15.0))
        assert fast.r_squared > 0.999
        assert slow.r_squared > 0.999
        assert fast.rate == pytest.approx(predicted['coupled1'], rel=0.05)
        assert slow.rate == pytest.approx(predicted['coupled2'], rel=0.05)


class TestVacuumStress:
    """Большая амплитуда: либо расчет завершается с rho > 0, либо явная остановка"""

    def test_no_silent_failure(self):
        _, trajectory = integrate('vacuum-stress')
        if trajectory.cause is HaltingCause.COMPLETED:
            assert min(rec.min_rho for rec in trajectory.records) > 0.0
        else:
            assert trajectory.error['detail']
            assert trajectory.exit_code in (3, 4, 5, 6)
