import dataclasses
import math

import numpy as np
import pytest

from conftest import assert_spectra_close

from axonesim import hopf
from axonesim.params import (TransitionRates, rates_from_atp, baseline_params)
from axonesim.spectral import FourierState, rhs_first

TWO_PI = 2.0 * math.pi


def random_valid_params(rng):
    """Parameter draw around the baseline keeping the rate family physical."""
    base = baseline_params()
    scale = lambda lo, hi: float(rng.uniform(lo, hi))
    p = dataclasses.replace(
        base,
        ell=base.ell * scale(0.7, 1.4),
        eta=base.eta * scale(0.6, 1.6),
        k_spring=base.k_spring * scale(0.6, 1.6),
        U=base.U * scale(0.7, 1.4),
        c=base.c * scale(0.7, 1.4),
    )
    omega = p.Omega0 * scale(0.85, 1.25)
    return dataclasses.replace(p, Omega=omega)


class TestTau:
    def test_zero_at_onset_by_construction(self, base_params, rates_at_onset):
        t = hopf.tau(base_params, rates_at_onset)
        assert abs(t) < 1e-9 * rates_at_onset.a0

    def test_negative_without_first_harmonic(self, base_params):
        rates = TransitionRates(ell=base_params.ell, a0=250.0)
        assert hopf.tau(base_params, rates) < 0

    def test_sign_above_onset_matches_jacobian(self):
        params = baseline_params(delta=0.1)
        rates = rates_from_atp(params)
        t = hopf.tau(params, rates)
        assert t > 0
        eq = FourierState.equilibrium(params, rates, n_max=1)
        jac = hopf.numerical_jacobian(
            lambda y: rhs_first(y, params, rates),
            np.array([*eq.modes[0], eq.x]))
        pair_re = np.sort(np.linalg.eigvals(jac).real)[-1]
        assert pair_re == pytest.approx(t, rel=1e-6)


class TestOmega:
    def test_onset_value(self, base_params, rates_at_onset):
        w = hopf.omega_im(base_params, rates_at_onset)
        assert w == pytest.approx(490.24, abs=0.05)
        assert w / TWO_PI == pytest.approx(78.02, abs=0.01)
        assert w == pytest.approx(hopf.onset_frequency(base_params,
                                                       rates_at_onset),
                                  rel=1e-12)

    def test_complex_collapse(self, base_params):
        # giant a1 makes tau^2 exceed the determinant
        rates = TransitionRates(ell=10.0, a0=2000.0, odd_cos={1: -900.0})
        with pytest.raises(hopf.ComplexCollapse):
            hopf.omega_im(base_params, rates)


class TestFindOmega0:
    def test_root_at_construction_point(self, base_params):
        res = hopf.find_omega0(base_params)
        assert res.omega0 == pytest.approx(base_params.Omega0, rel=1e-10)
        assert abs(res.tau_at_root) < 1e-9 * 253.0

    def test_tau_prime_analytic_vs_differences(self, base_params):
        res = hopf.find_omega0(base_params)
        analytic = hopf.tau_prime_sqrt_family(base_params)
        assert analytic == pytest.approx(3711.0, abs=0.5)
        assert res.tau_prime == pytest.approx(analytic, rel=1e-6)

    def test_no_sign_change_without_first_harmonic(self, base_params):
        family = lambda om: TransitionRates(ell=base_params.ell,
                                            a0=base_params.c * math.sqrt(om))
        with pytest.raises(hopf.NoSignChange):
            hopf.find_omega0(base_params, family)

    def test_transversality_crossing(self, base_params):
        eps = 1e-3 * base_params.Omega0
        lo = rates_from_atp(base_params, base_params.Omega0 - eps)
        hi = rates_from_atp(base_params, base_params.Omega0 + eps)
        assert hopf.tau(base_params, lo) < 0 < hopf.tau(base_params, hi)

    def test_a1_hypothesis_guard_on_random_draws(self):
        # the first cosine coefficient at the located onset is always
        # negative and matches its sign-condition closed form
        rng = np.random.default_rng(31)
        for _ in range(25):
            params = random_valid_params(rng)
            onset = hopf.find_omega0(params)
            at0 = rates_from_atp(params, onset.omega0)
            assert at0.a1 < 0
            assert at0.a1 == pytest.approx(
                hopf.a1_at_onset(params, at0), rel=1e-9)


class TestEigenvalues:
    def test_pure_imaginary_pair_at_onset(self, base_params, rates_at_onset):
        eigs = hopf.eigenvalues_two_row(base_params, rates_at_onset)
        pair = eigs[np.abs(eigs.imag) > 0]
        assert len(pair) == 2
        assert np.abs(pair.real).max() < 1e-9 * np.abs(pair.imag).max()

    def test_stable_below_onset(self, base_params):
        params = baseline_params(delta=-0.2)
        rates = rates_from_atp(params)
        eigs = hopf.eigenvalues_two_row(params, rates)
        assert eigs.real.max() < 0

    def test_matches_numerical_jacobian_random_draws(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            params = random_valid_params(rng)
            rates = rates_from_atp(params)
            closed = hopf.eigenvalues_two_row(params, rates)
            eq = FourierState.equilibrium(params, rates, n_max=1)
            jac = hopf.numerical_jacobian(
                lambda y: rhs_first(y, params, rates),
                np.array([*eq.modes[0], eq.x]))
            assert_spectra_close(np.linalg.eigvals(jac), closed, rtol=1e-6)


class TestNRowSpectrum:
    def test_n2_matches_two_row(self, base_params, rates_at_onset):
        two = hopf.eigenvalues_two_row(base_params, rates_at_onset)
        spec = hopf.eigenvalues_n_row(base_params, rates_at_onset, 2)
        assert_spectra_close(spec.eigenvalues, two, rtol=1e-14)

    def test_block_trace_and_determinant(self, base_params):
        params = baseline_params(delta=0.07)
        rates = rates_from_atp(params)
        block = hopf.n_row_block(params, rates)
        t = hopf.tau(params, rates)
        w = hopf.omega_im(params, rates)
        assert np.trace(block) == pytest.approx(2 * t, rel=1e-10)
        assert np.linalg.det(block) == pytest.approx(t * t + w * w, rel=1e-10)

    def test_simultaneous_crossing_at_onset(self, base_params, rates_at_onset):
        spec = hopf.eigenvalues_n_row(base_params, rates_at_onset, 8)
        pairs = spec.eigenvalues[np.abs(spec.eigenvalues.imag) > 0]
        assert len(pairs) == 14  # 7 conjugate pairs
        assert np.abs(pairs.real).max() < 1e-9 * np.abs(pairs.imag).max()

    def test_coupling_matrix_shape(self):
        mat = hopf.displacement_coupling_matrix(8)
        assert mat.shape == (7, 7)
        assert np.all(np.diag(mat) == 2.0)
        assert np.all(np.diag(mat, 1) == -1.0)

    def test_full_jacobian_spectrum_n8(self, base_params, rates_at_onset):
        # the (3N-1)-dimensional reduction has N+1 eigenvalues at -a0 and
        # N-1 pairs at tau +/- i omega
        params, rates = base_params, rates_at_onset
        N = 8
        a1 = rates.a1
        eq_qc = a1 / (rates.a0 * params.ell)
        eq_qs = rates.b1 / (rates.a0 * params.ell)
        y0 = np.concatenate((np.full(N, eq_qc), np.full(N, eq_qs),
                             np.zeros(N - 1)))
        jac = hopf.numerical_jacobian(
            lambda y: hopf.n_row_first_order_rhs(y, params, rates, N), y0)
        numeric = np.linalg.eigvals(jac)
        spec = hopf.eigenvalues_n_row(params, rates, N)
        assert_spectra_close(numeric, spec.eigenvalues, rtol=1e-6)


class TestAmplitude:
    def test_zero_at_onset(self, base_params, rates_at_onset):
        amp = hopf.amplitude_theory(0.0, base_params, rates_at_onset)
        assert amp.rho == 0.0

    def test_value_and_route_agreement(self, base_params, rates_at_onset):
        amp = hopf.amplitude_theory(0.05, base_params, rates_at_onset)
        assert amp.rho_general == pytest.approx(0.3987, abs=2e-4)
        assert amp.rho_general == pytest.approx(amp.rho_simplified, rel=1e-12)

    def test_square_root_law(self, base_params, rates_at_onset):
        r1 = hopf.amplitude_theory(0.02, base_params, rates_at_onset).rho
        r4 = hopf.amplitude_theory(0.08, base_params, rates_at_onset).rho
        assert r4 == pytest.approx(2 * r1, rel=1e-12)

    def test_rejects_negative_delta(self, base_params, rates_at_onset):
        with pytest.raises(ValueError):
            hopf.amplitude_theory(-0.1, base_params, rates_at_onset)


class TestTauTilde:
    def test_baseline_value(self, base_params, rates_at_onset):
        assert hopf.tau_tilde(base_params, rates_at_onset) == \
            pytest.approx(-74.71, abs=0.02)

    def test_vanishes_without_spring(self, base_params, rates_at_onset):
        # tau_tilde is proportional to zeta (hence to k) in this limit
        soft = dataclasses.replace(base_params, k_spring=1e-12)
        tt = hopf.tau_tilde(soft, rates_at_onset)
        assert tt < 0
        assert abs(tt) < 1e-5

    def test_amplitude_identity(self, base_params, rates_at_onset):
        tt = hopf.tau_tilde(base_params, rates_at_onset)
        tp = hopf.tau_prime_sqrt_family(base_params)
        delta = 0.07
        rebuilt = math.sqrt(-delta * base_params.Omega0 * tp / tt)
        amp = hopf.amplitude_theory(delta, base_params, rates_at_onset)
        assert amp.rho == pytest.approx(rebuilt, rel=1e-12)

    def test_normal_form_route_agrees(self, base_params, rates_at_onset):
        direct = hopf.tau_tilde(base_params, rates_at_onset)
        via_nf = hopf.tau_tilde_from_normal_form(base_params, rates_at_onset)
        assert via_nf == pytest.approx(direct, rel=1e-10)

    def test_normal_form_route_random_draws(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            params = random_valid_params(rng)
            onset = hopf.find_omega0(params)
            at0 = rates_from_atp(params, onset.omega0)
            assert hopf.tau_tilde_from_normal_form(params, at0) == \
                pytest.approx(hopf.tau_tilde(params, at0), rel=1e-9)


class TestCenterManifold:
    def test_structural_zeros_and_row_equality(self, base_params,
                                               rates_at_onset):
        cm = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        assert cm.shape == (3, 6)
        np.testing.assert_array_equal(cm[:, 2], 0.0)
        np.testing.assert_array_equal(cm[:, 4], 0.0)
        np.testing.assert_array_equal(cm[:, 5], 0.0)
        np.testing.assert_array_equal(cm[0], cm[1])

    def test_row3_is_b1sq_fraction(self, base_params, rates_at_onset):
        cm = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        a1, b1 = rates_at_onset.a1, rates_at_onset.b1
        frac = b1 * b1 / (a1 * a1 + b1 * b1)
        np.testing.assert_allclose(cm[2], cm[0] * frac, rtol=1e-12)

    def test_matches_matching_system_solution(self, base_params,
                                              rates_at_onset):
        closed = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        solved = hopf.solve_cm_coeffs(base_params, rates_at_onset)
        np.testing.assert_allclose(closed, solved, rtol=1e-9)

    def test_degenerate_rates_rejected(self, base_params):
        rates = TransitionRates(ell=base_params.ell, a0=250.0)
        with pytest.raises(hopf.DegenerateRates):
            hopf.center_manifold_coeffs(base_params, rates)

    def test_zero_probe_zero_residual(self, base_params, rates_at_onset):
        cm = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        assert hopf.cm_residual(cm, base_params, rates_at_onset,
                                (0.0, 0.0, 0.0)) == 0.0

    def test_residual_scaling_exponent(self, base_params, rates_at_onset):
        cm = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        slope = hopf.cm_scaling_exponent(cm, base_params, rates_at_onset)
        assert slope >= 2.9

    def test_perturbed_coefficient_degrades_scaling(self, base_params,
                                                    rates_at_onset):
        cm = hopf.center_manifold_coeffs(base_params, rates_at_onset)
        bad = cm.copy()
        bad[0, 0] *= 1.1
        slope = hopf.cm_scaling_exponent(bad, base_params, rates_at_onset)
        assert slope < 2.2


class TestReport:
    def test_baseline_report(self, base_params):
        report = hopf.bifurcation_report(baseline_params(delta=0.05))
        assert report.omega0_param == pytest.approx(base_params.Omega0,
                                                    rel=1e-10)
        assert report.omega0_freq == pytest.approx(490.24, abs=0.05)
        assert report.tau_tilde == pytest.approx(-74.71, abs=0.02)
        curve = dict(report.amplitude_curve)
        assert curve[0.05] == pytest.approx(0.3987, abs=2e-4)
        assert report.valid

    def test_report_serialization(self):
        report = hopf.bifurcation_report(baseline_params(delta=0.05))
        doc = report.to_dict()
        assert all(len(pair) == 2 for pair in doc["eigenvalues"])
        assert doc["validity"]["a1_at_onset_negative"] is True

    def test_n_row_report_has_full_spectrum(self):
        report = hopf.bifurcation_report(baseline_params(delta=0.05), n_rows=8)
        assert len(report.eigenvalues) == 3 * 8 - 1

    def test_no_onset_family_raises(self, base_params):
        family = lambda om: TransitionRates(ell=base_params.ell,
                                            a0=base_params.c * math.sqrt(om))
        with pytest.raises(hopf.NoSignChange):
            hopf.bifurcation_report(base_params, rate_family=family)
