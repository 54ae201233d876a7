"""Closed-form spin moments against the dense Dicke-basis computation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbayes import dicke
from spinbayes.collective_spin import (
    GaussianAnsatz,
    OatParams,
    SqueezedStateModel,
    ansatz_to_model,
    chi_t_for_xi,
    cos_power,
    curvature_coefficient,
    exact_optimal_twist_time,
    mean_jz,
    mean_jz2,
    optimal_rotation_angle,
    optimal_twist_time,
    phase_uncertainty,
    squeezing_parameter,
    xi_from_db,
)

SMALL_N = [2, 3, 5, 8, 12]
TWISTS = [0.05, 0.2]
PHIS = np.linspace(-1.3, 1.3, 5)


class TestOperatorAlgebra:
    def test_commutator(self):
        for n in SMALL_N:
            jx, jy, jz = dicke.jx(n), dicke.jy(n), np.diag(dicke.jz_diag(n))
            comm = jx @ jy - jy @ jx
            assert np.allclose(comm, 1j * jz, atol=1e-12)

    def test_casimir(self):
        for n in SMALL_N:
            s = n / 2.0
            jx, jy, jz = dicke.jx(n), dicke.jy(n), np.diag(dicke.jz_diag(n))
            total = jx @ jx + jy @ jy + jz @ jz
            assert np.allclose(total, s * (s + 1) * np.eye(n + 1), atol=1e-12)

    def test_coherent_two_atoms(self):
        # C(2,k)**0.5 / 2 for k = 0, 1, 2
        amps = dicke.coherent_x(2)
        assert np.allclose(amps, [0.5, math.sqrt(2) / 2, 0.5])

    def test_states_normalized(self):
        for n in SMALL_N:
            psi = dicke.readout_state(n, 0.1, 0.7, 0.3)
            assert abs(np.linalg.norm(psi) - 1.0) < 1e-12


class TestOracleEquivalence:
    @pytest.mark.parametrize("n", SMALL_N)
    @pytest.mark.parametrize("chi_t", TWISTS)
    def test_first_moment(self, n, chi_t):
        alpha = optimal_rotation_angle(n, chi_t)
        p = OatParams(n, chi_t, alpha)
        for phi in PHIS:
            assert mean_jz(p, phi) == pytest.approx(
                dicke.oracle_mean_jz(n, chi_t, alpha, phi), abs=1e-12
            )

    @pytest.mark.parametrize("n", SMALL_N)
    @pytest.mark.parametrize("chi_t", TWISTS)
    def test_second_moment(self, n, chi_t):
        alpha = optimal_rotation_angle(n, chi_t)
        p = OatParams(n, chi_t, alpha)
        for phi in PHIS:
            assert mean_jz2(p, phi) == pytest.approx(
                dicke.oracle_mean_jz2(n, chi_t, alpha, phi), abs=1e-11
            )

    @pytest.mark.parametrize("n", SMALL_N)
    @pytest.mark.parametrize("chi_t", TWISTS)
    def test_squeezing_parameter(self, n, chi_t):
        # off-optimal alignments too: the branch choice matters most there
        for alpha in (optimal_rotation_angle(n, chi_t), 0.1, -0.6, 1.2):
            xi = squeezing_parameter(OatParams(n, chi_t, alpha))
            assert xi == pytest.approx(
                dicke.oracle_xi(n, chi_t, alpha), abs=1e-12
            )

    def test_alignment_is_the_oracle_minimum(self):
        n, chi_t = 10, 0.1
        alphas = np.linspace(-math.pi / 2, math.pi / 2, 2001)
        xis = [dicke.oracle_xi(n, chi_t, a) for a in alphas]
        grid_best = alphas[int(np.argmin(xis))]
        assert optimal_rotation_angle(n, chi_t) == pytest.approx(
            grid_best, abs=2e-3
        )


class TestKnownValues:
    def test_untwisted_xi_is_one(self):
        for alpha in (0.0, 0.4, -1.1):
            assert squeezing_parameter(OatParams(50, 0.0, alpha)) == 1.0

    def test_optimal_twist_time(self):
        assert optimal_twist_time(100, 1.0) == pytest.approx(
            0.06694329500821695, rel=1e-12
        )
        assert optimal_twist_time(100, 2.0) == pytest.approx(
            0.06694329500821695 / 2, rel=1e-12
        )

    def test_exact_twist_optimum_is_stationary(self):
        # the closed form overshoots; the numeric optimum must not
        t = exact_optimal_twist_time(200, 1.0)
        assert t < optimal_twist_time(200, 1.0)

        def xi_at(chi_t):
            return squeezing_parameter(
                OatParams(200, chi_t, optimal_rotation_angle(200, chi_t))
            )

        assert xi_at(t) < xi_at(0.99 * t)
        assert xi_at(t) < xi_at(1.01 * t)
        assert exact_optimal_twist_time(200, 4.0) == pytest.approx(t / 4, rel=1e-9)

    def test_optimal_alignment_frozen(self):
        t = optimal_twist_time(100, 1.0)
        assert optimal_rotation_angle(100, t) == pytest.approx(
            1.3950324124732343, rel=1e-12
        )

    def test_xi_at_scaling_optimum(self):
        t = optimal_twist_time(100, 1.0)
        xi = squeezing_parameter(OatParams(100, t, optimal_rotation_angle(100, t)))
        assert xi == pytest.approx(0.2952191473761719, rel=1e-12)

    def test_weak_twist_alignment_near_quarter_pi(self):
        assert optimal_rotation_angle(100, 1e-8) == pytest.approx(
            math.pi / 4, abs=1e-3
        )

    def test_xi_in_decibels(self):
        assert xi_from_db(0.0) == 1.0
        assert xi_from_db(-5.1) == pytest.approx(0.5559042572704036, rel=1e-12)

    def test_twist_inversion_frozen(self):
        assert chi_t_for_xi(6000, 0.5) == pytest.approx(
            0.0002501042684629039, rel=1e-9
        )

    def test_twist_inversion_reaches_below_scaling_floor(self):
        # exact optimum at N=6000 sits near 0.0584, under the 0.0640 the
        # N**(-2/3) twist time alone would give
        ct = chi_t_for_xi(6000, 0.06)
        back = squeezing_parameter(
            OatParams(6000, ct, optimal_rotation_angle(6000, ct))
        )
        assert back == pytest.approx(0.06, rel=1e-10)
        with pytest.raises(ValueError):
            chi_t_for_xi(6000, 0.05)


class TestPhaseUncertainty:
    def test_zero_phase_equals_projection_limit(self):
        p = OatParams(200, 0.02, optimal_rotation_angle(200, 0.02))
        xi = squeezing_parameter(p)
        assert phase_uncertainty(p, 0.0) == pytest.approx(
            xi / math.sqrt(200), rel=1e-12
        )

    def test_coherent_flat_in_phase(self):
        p = OatParams(400, 0.0, 0.0)
        assert curvature_coefficient(400, 0.0) == pytest.approx(0.0, abs=1e-12)
        for phi in (0.0, 0.5, 1.2):
            assert phase_uncertainty(p, phi) == pytest.approx(
                1 / math.sqrt(400), rel=1e-12
            )

    def test_grows_away_from_zero_crossing(self):
        p = OatParams(500, 0.02, optimal_rotation_angle(500, 0.02))
        vals = [phase_uncertainty(p, phi) for phi in (0.0, 0.4, 0.9, 1.3)]
        assert vals == sorted(vals)

    def test_domain_edge_raises(self):
        p = OatParams(100, 0.05, 0.5)
        with pytest.raises(ValueError):
            phase_uncertainty(p, math.pi / 2)
        with pytest.raises(ValueError):
            phase_uncertainty(p, -2.0)

    def test_sub_sql_window_shrinks_with_xi(self):
        # width of {phi : uncertainty < 1/sqrt(N)} narrows with squeezing
        n = 6000
        widths = []
        for xi in (0.53, 0.15, 0.06):
            ct = chi_t_for_xi(n, xi)
            p = OatParams(n, ct, optimal_rotation_angle(n, ct))
            a = curvature_coefficient(n, ct)
            b = squeezing_parameter(p) ** 2 / n
            half = math.atan(math.sqrt((1 / n - b) / a))
            widths.append(2 * half)
            lo = phase_uncertainty(p, 0.99 * half)
            hi = phase_uncertainty(p, 1.01 * half)
            assert lo < 1 / math.sqrt(n) < hi
        assert widths[0] > widths[1] > widths[2]


class TestGaussianAnsatz:
    def test_frozen_mapping(self):
        g = GaussianAnsatz(1000, 0.1)
        assert g.xi == pytest.approx(0.10512710963760241, rel=1e-12)
        assert g.amplitude == pytest.approx(475.614712250357, rel=1e-12)
        assert g.curvature() == pytest.approx(0.0050131263911055495, rel=1e-9)
        assert ansatz_to_model(g).a_coeff == g.curvature()

    def test_direct_evaluations(self):
        assert GaussianAnsatz(200, 0.2).xi == pytest.approx(
            0.2 * math.exp(1 / 16), rel=1e-12
        )
        # exponent vanishes at large N
        assert GaussianAnsatz(10**6, 0.5).xi == pytest.approx(0.5, abs=1e-5)

    def test_curvature_matches_dense_ladder(self):
        # explicit matrix evaluation of the transverse packet variance
        n, s = 120, 0.2
        g = GaussianAnsatz(n, s)
        m = dicke.jz_diag(n)
        c = np.exp(-(m**2) / (s**2 * n))
        c /= np.linalg.norm(c)
        k1 = dicke.jx(n)  # same ladder weights in the packet basis
        mean = c @ (k1 @ c)
        var = c @ (k1 @ (k1 @ c)) - mean**2
        assert g.curvature() == pytest.approx(var / g.amplitude**2, rel=1e-12)

    def test_curvature_shrinks_toward_coherent(self):
        vals = [GaussianAnsatz.from_xi(200, x).curvature() for x in (0.15, 0.3, 0.53)]
        assert vals[0] > vals[1] > vals[2] > 0.0

    def test_width_inversion(self):
        g = GaussianAnsatz.from_xi(200, 0.15)
        assert g.s == pytest.approx(0.1291090898016962, rel=1e-10)
        assert g.xi == pytest.approx(0.15, rel=1e-12)
        with pytest.raises(ValueError):
            GaussianAnsatz.from_xi(6000, 0.02)  # below e^0.5/sqrt(N)
        with pytest.raises(ValueError):
            GaussianAnsatz.from_xi(6000, 1.0)

    def test_validity_domain(self):
        with pytest.raises(ValueError):
            GaussianAnsatz(50, 0.1)  # s**2 N = 0.5
        with pytest.raises(ValueError):
            GaussianAnsatz(1000, 1.5)
        with pytest.raises(ValueError):
            GaussianAnsatz(1000, 0.0)

    @given(
        n=st.integers(min_value=200, max_value=50_000),
        s=st.floats(min_value=0.08, max_value=0.9),
    )
    def test_xi_exceeds_width(self, n, s):
        # the exponential correction always pushes xi above s and the
        # amplitude below N/2
        g = GaussianAnsatz(n, s)
        assert g.xi > s
        assert 0.0 < g.amplitude < n / 2.0


class TestStateModel:
    def test_coherent_model(self):
        m = SqueezedStateModel.coherent(1000)
        assert (m.xi, m.amplitude, m.a_coeff, m.contrast) == (1.0, 500.0, 0.0, 1.0)
        assert m.b_coeff == pytest.approx(1e-3, rel=1e-12)

    def test_from_xi_uses_ansatz(self):
        m = SqueezedStateModel.from_xi(6000, 0.06, contrast=0.98)
        assert m.xi == pytest.approx(0.06, rel=1e-10)
        assert m.amplitude == pytest.approx(2927.9757296429707, rel=1e-9)
        assert m.a_coeff == pytest.approx(0.0011816732439394906, rel=1e-9)
        assert m.effective_amplitude == pytest.approx(m.amplitude * 0.98)
        # reachable where the twisting inversion is not
        below_twist_floor = SqueezedStateModel.from_xi(200, 0.15)
        assert below_twist_floor.amplitude == pytest.approx(
            86.07272653446412, rel=1e-9
        )
        assert below_twist_floor.a_coeff == pytest.approx(
            0.045749918862519855, rel=1e-9
        )

    def test_from_oat_matches_twist_inversion(self):
        ct = chi_t_for_xi(6000, 0.06)
        m = SqueezedStateModel.from_oat(
            OatParams(6000, ct, optimal_rotation_angle(6000, ct))
        )
        assert m.xi == pytest.approx(0.06, rel=1e-10)
        assert m.amplitude == pytest.approx(2912.5285724373493, rel=1e-9)
        assert m.a_coeff == pytest.approx(0.0017706165459674406, rel=1e-9)

    def test_from_xi_above_one_coherent(self):
        m = SqueezedStateModel.from_xi(500, 1.0)
        assert m.xi == 1.0 and m.a_coeff == 0.0 and m.amplitude == 250.0

    def test_field_validation(self):
        with pytest.raises(ValueError):
            SqueezedStateModel(1, 0.5, 0.4)
        with pytest.raises(ValueError):
            SqueezedStateModel(100, -0.5, 40.0)
        with pytest.raises(ValueError):
            SqueezedStateModel(100, 0.5, 80.0)  # amplitude > N/2
        with pytest.raises(ValueError):
            SqueezedStateModel(100, 0.5, 40.0, contrast=0.0)


class TestNumerics:
    @given(
        angle=st.floats(min_value=-1.5, max_value=1.5),
        k=st.integers(min_value=0, max_value=40),
    )
    def test_cos_power_matches_direct(self, angle, k):
        assert cos_power(angle, k) == pytest.approx(
            math.cos(angle) ** k, rel=1e-10, abs=1e-300
        )

    def test_cos_power_survives_large_exponent(self):
        v = cos_power(4.1435e-5, 29_999)
        assert 0.0 < v < 1.0
        assert v == pytest.approx(math.exp(29_999 * math.log(math.cos(4.1435e-5))))

    @settings(max_examples=30)
    @given(
        frac=st.floats(min_value=0.05, max_value=0.95),
        n=st.sampled_from([300, 1500, 8000]),
    )
    def test_xi_monotone_before_optimum(self, frac, n):
        from spinbayes.collective_spin import _exact_argmin_chi_t, _optimal_xi_at

        t_star = _exact_argmin_chi_t(n)
        a, b = frac * t_star, min(1.0, frac + 0.04) * t_star
        assert _optimal_xi_at(n, a) >= _optimal_xi_at(n, b)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            OatParams(1, 0.1, 0.0)
        with pytest.raises(ValueError):
            OatParams(10, -0.1, 0.0)
        with pytest.raises(ValueError):
            optimal_twist_time(10, 0.0)
        with pytest.raises(ValueError):
            optimal_rotation_angle(10, 0.0)
        with pytest.raises(ValueError):
            chi_t_for_xi(100, 1.5)
