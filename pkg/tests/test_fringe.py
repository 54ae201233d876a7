import inspect
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbayes import fringe as fringe_module
from spinbayes.collective_spin import SqueezedStateModel
from spinbayes.errors import ConfigError, ScenarioError
from spinbayes.fringe import (
    FringeConfig,
    FringePoint,
    FringeSample,
    fit_sine,
    fringe_grid,
    precision_vs_squeezing,
    simulate_fringe,
)
from spinbayes.gravimetry import (
    GravimetryConfig,
    PhaseModel,
    build_schedule,
    run_gravimetry,
    unambiguous_window,
)

T_RAMSEY = 455e-6
K_PHASE = PhaseModel.gravimetry().coefficient * T_RAMSEY**2
PERIOD = 2.0 * math.pi / K_PHASE


def scan_sql(cfg: FringeConfig) -> float:
    """SQL at the full scan budget (all shots accumulated)."""
    return cfg.sql_value() / math.sqrt(cfg.total_shots)


def synthetic_sample(amp, offset, g0, n_points=100):
    grid = fringe_grid(T_RAMSEY, n_points)
    p_e = offset + amp * np.sin(K_PHASE * (grid - g0))
    return FringeSample(g_values=grid, p_e=p_e, T=T_RAMSEY, shots=1)


class TestFringeGrid:
    def test_spans_one_period(self):
        grid = fringe_grid(T_RAMSEY, 100)
        period = unambiguous_window(PhaseModel.gravimetry(), T_RAMSEY)
        assert np.ptp(grid) == pytest.approx(period, rel=1e-12)
        assert grid[0] == -grid[-1]

    def test_wider_spans(self):
        assert np.ptp(fringe_grid(T_RAMSEY, 100, spans=2.0)) == pytest.approx(
            2.0 * PERIOD, rel=1e-12
        )

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            fringe_grid(T_RAMSEY, 7)

    def test_partial_span_rejected(self):
        with pytest.raises(ConfigError):
            fringe_grid(T_RAMSEY, 100, spans=0.5)


class TestFringeSample:
    def test_one_point_grid_rejected(self):
        with pytest.raises(ConfigError):
            FringeSample(
                g_values=np.array([0.0]),
                p_e=np.array([0.5]),
                T=T_RAMSEY,
            )

    def test_narrow_grid_rejected(self):
        grid = np.linspace(-0.1 * PERIOD, 0.1 * PERIOD, 20)
        with pytest.raises(ConfigError):
            FringeSample(g_values=grid, p_e=np.full(20, 0.5), T=T_RAMSEY)

    def test_probability_bounds_enforced(self):
        grid = fringe_grid(T_RAMSEY, 20)
        with pytest.raises(ConfigError):
            FringeSample(g_values=grid, p_e=np.full(20, 1.2), T=T_RAMSEY)

    def test_length_mismatch(self):
        grid = fringe_grid(T_RAMSEY, 20)
        with pytest.raises(ConfigError):
            FringeSample(g_values=grid, p_e=np.full(19, 0.5), T=T_RAMSEY)

    def test_len(self):
        assert len(synthetic_sample(0.4, 0.5, 0.0, n_points=33)) == 33


class TestSimulateFringe:
    def test_coherent_mean_curve_is_sinusoid(self):
        # infinite-shots limit: the scatter contracts onto 1/2 + (A/N) sin(k g)
        state = SqueezedStateModel.coherent(6000, contrast=0.98)
        grid = fringe_grid(T_RAMSEY, 40)
        rng = np.random.default_rng(5)
        sample = simulate_fringe(state, T_RAMSEY, grid, rng=rng, shots=600)
        model = 0.5 + (state.effective_amplitude / state.n_atoms) * np.sin(
            K_PHASE * grid
        )
        assert np.max(np.abs(sample.p_e - model)) < 1.5e-3

    def test_strong_squeezing_noisiest_on_the_slopes(self):
        # the squeezed quadrature reads out at the zero crossing; +-pi/4
        # points mix in the anti-squeezed one and scatter far more
        state = SqueezedStateModel.from_xi(6000, 0.06, contrast=0.98)
        grid = fringe_grid(T_RAMSEY, 100)
        phi = K_PHASE * grid
        rng = np.random.default_rng(9)
        reps = np.array(
            [simulate_fringe(state, T_RAMSEY, grid, rng=rng).p_e for _ in range(300)]
        )
        var = reps.var(axis=0)
        at_zero = np.abs(np.abs(phi) - 0.0) < 0.1
        at_quarter = np.abs(np.abs(phi) - math.pi / 4) < 0.1
        assert var[at_quarter].mean() > 10.0 * var[at_zero].mean()

    def test_shots_average_down_the_scatter(self):
        state = SqueezedStateModel.coherent(400, contrast=1.0)
        point = np.full(12, 0.0)
        grid = fringe_grid(T_RAMSEY, 12)
        rng = np.random.default_rng(3)
        one = np.array(
            [simulate_fringe(state, T_RAMSEY, grid, rng=rng, shots=1).p_e[0]
             for _ in range(400)]
        )
        many = np.array(
            [simulate_fringe(state, T_RAMSEY, grid, rng=rng, shots=25).p_e[0]
             for _ in range(400)]
        )
        assert many.std() == pytest.approx(one.std() / 5.0, rel=0.35)

    def test_reproducible_and_clipped(self):
        state = SqueezedStateModel.from_xi(50, 0.5, contrast=1.0)
        grid = fringe_grid(T_RAMSEY, 30)
        a = simulate_fringe(state, T_RAMSEY, grid, rng=np.random.default_rng(1))
        b = simulate_fringe(state, T_RAMSEY, grid, rng=np.random.default_rng(1))
        assert np.array_equal(a.p_e, b.p_e)
        assert a.p_e.min() >= 0.0 and a.p_e.max() <= 1.0


class TestFitSine:
    def test_noiseless_exact_recovery(self):
        g0 = 0.31 * PERIOD
        g_est, dg = fit_sine(synthetic_sample(0.43, 0.51, g0))
        assert abs(g_est - g0) / g0 < 1e-9
        assert dg < 1e-9

    @settings(max_examples=25, deadline=None)
    @given(
        amp=st.floats(0.05, 0.49),
        offset=st.floats(0.49, 0.51),
        frac=st.floats(-0.45, 0.45),
        n_points=st.integers(24, 120),
    )
    def test_noiseless_recovery_property(self, amp, offset, frac, n_points):
        g0 = frac * PERIOD
        g_est, _ = fit_sine(synthetic_sample(amp, offset, g0, n_points))
        assert abs(g_est - g0) < 1e-7 * PERIOD

    def test_estimate_wrapped_into_branch_around_init(self):
        g0 = 0.9 * PERIOD
        g_est, _ = fit_sine(synthetic_sample(0.4, 0.5, g0), init=0.0)
        assert g_est == pytest.approx(g0 - PERIOD, abs=1e-9 * PERIOD)
        g_near, _ = fit_sine(synthetic_sample(0.4, 0.5, g0), init=0.8 * PERIOD)
        assert g_near == pytest.approx(g0, abs=1e-9 * PERIOD)

    def test_flipped_amplitude_lands_half_period_away(self):
        grid = fringe_grid(T_RAMSEY, 80)
        p_e = 0.5 - 0.4 * np.sin(K_PHASE * grid)
        sample = FringeSample(g_values=grid, p_e=p_e, T=T_RAMSEY)
        g_est, _ = fit_sine(sample)
        assert abs(g_est) == pytest.approx(PERIOD / 2.0, abs=1e-9 * PERIOD)

    def test_iteration_cap_raises(self):
        state = SqueezedStateModel.coherent(100, contrast=1.0)
        grid = fringe_grid(T_RAMSEY, 40)
        sample = simulate_fringe(
            state, T_RAMSEY, grid, rng=np.random.default_rng(2)
        )
        with pytest.raises(ScenarioError):
            fit_sine(sample, max_evals=2)

    def test_reported_error_tracks_empirical_spread(self):
        state = SqueezedStateModel.coherent(6000, contrast=0.98)
        grid = fringe_grid(T_RAMSEY, 100)
        rng = np.random.default_rng(17)
        ests, dgs = [], []
        for _ in range(60):
            sample = simulate_fringe(state, T_RAMSEY, grid, rng=rng, shots=4)
            g_est, dg = fit_sine(sample)
            ests.append(g_est)
            dgs.append(dg)
        empirical = float(np.std(ests))
        assert np.mean(dgs) == pytest.approx(empirical, rel=0.5)


class TestPrecisionVsSqueezing:
    def test_default_repetition_count(self):
        sig = inspect.signature(precision_vs_squeezing)
        assert sig.parameters["trials"].default == 50

    def test_too_few_trials(self):
        with pytest.raises(ConfigError):
            precision_vs_squeezing([1.0], FringeConfig(), trials=9)

    def test_moderate_squeezing_wins(self):
        rows = {
            r.xi: r for r in precision_vs_squeezing([0.53, 0.15, 0.06], FringeConfig())
        }
        assert rows[0.15].precision_mean < rows[0.53].precision_mean
        assert rows[0.15].precision_mean < rows[0.06].precision_mean

    def test_strong_squeezing_worse_than_sql(self):
        cfg = FringeConfig(seed=4)
        (row,) = precision_vs_squeezing([0.06], cfg)
        assert row.rms_error > scan_sql(cfg)

    def test_coherent_tracks_sql_scaling_with_accumulated_shots(self):
        budgets, levels = [], []
        for shots in (1, 4, 16):
            cfg = FringeConfig(shots=shots, seed=11)
            (row,) = precision_vs_squeezing([1.0], cfg)
            assert row.rms_error == pytest.approx(scan_sql(cfg), rel=0.5)
            budgets.append(cfg.total_shots)
            levels.append(row.rms_error)
        slope = np.polyfit(np.log(budgets), np.log(levels), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.15)

    def test_unit_xi_is_the_coherent_state(self):
        cfg = FringeConfig()
        assert cfg.state_for(1.0) == SqueezedStateModel.coherent(
            cfg.n_atoms, cfg.contrast
        )

    def test_failures_counted_and_excluded(self, monkeypatch):
        calls = {"n": 0}
        real = fringe_module.fit_sine

        def flaky(sample, init=0.0, max_evals=200):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise ScenarioError("forced failure")
            return real(sample, init, max_evals)

        monkeypatch.setattr(fringe_module, "fit_sine", flaky)
        (row,) = fringe_module.precision_vs_squeezing([1.0], FringeConfig(), trials=12)
        assert row.failures == 4

    def test_all_failures_raise(self, monkeypatch):
        def broken(sample, init=0.0, max_evals=200):
            raise ScenarioError("forced failure")

        monkeypatch.setattr(fringe_module, "fit_sine", broken)
        with pytest.raises(ScenarioError):
            fringe_module.precision_vs_squeezing([1.0], FringeConfig(), trials=10)

    def test_rms_error_combines_mean_and_spread(self):
        point = FringePoint(xi=1.0, precision_mean=3.0, precision_std=4.0, failures=0)
        assert point.rms_error == pytest.approx(5.0)


@pytest.fixture(scope="module")
def comparison():
    cfg = FringeConfig(seed=6)
    fringe_rows = {
        r.xi: r for r in precision_vs_squeezing([0.53, 0.15, 0.06], cfg, trials=30)
    }
    flat = build_schedule(cfg.T, 1.3, 1, cfg.total_shots)
    bayes = {}
    for xi in (0.53, 0.15, 0.06):
        curve = run_gravimetry(
            GravimetryConfig(
                state=cfg.state_for(xi),
                schedule=flat,
                true_g=0.0,
                g_prior=0.0,
                seed=29,
            ),
            repetitions=30,
        )
        bayes[xi] = float(curve.dg_batch[-1])
    return fringe_rows, bayes


class TestAgainstBayesianProtocol:
    """Same atom budget, scan-and-fit versus adaptive estimation."""

    def test_fringe_precision_is_not_monotone_in_squeezing(self, comparison):
        fringe_rows, _ = comparison
        means = [fringe_rows[xi].precision_mean for xi in (0.53, 0.15, 0.06)]
        assert means[1] < means[0] and means[1] < means[2]

    def test_bayesian_precision_is_monotone_in_squeezing(self, comparison):
        _, bayes = comparison
        assert bayes[0.06] < bayes[0.15] < bayes[0.53]

    def test_bayesian_never_loses_at_matched_budget(self, comparison):
        fringe_rows, bayes = comparison
        for xi in (0.53, 0.15, 0.06):
            assert fringe_rows[xi].rms_error > bayes[xi]

    def test_strong_squeezing_gap_is_an_order_of_magnitude(self, comparison):
        fringe_rows, bayes = comparison
        assert fringe_rows[0.06].rms_error > 10.0 * bayes[0.06]
