"""Drift/diffusion coefficients and the forward Euler simulation.

The drift is affine in the state given the noisy spectrum; its two factors
and the diffusion coefficient are checked against independently derived
spot values and against finite differences of the closed-form moments.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sediff.diffusion import DiffusionState, conditional_mean
from sediff.schedule import Schedule, Variant
from sediff.sde import (
    decompose_mean_velocity,
    diffusion_coefficient,
    drift_given_noise,
    drift_given_noisy,
    sde_coefficients,
    simulate_forward_euler,
)

# sqrt(beta(0)) with beta(0) = 0.1
G_AT_0 = 0.31622776601683794
# sqrt(mean^2*beta + (1-mean^2)*(beta+2*gamma)) at tau = 0.5
G_AT_HALF = 1.3414880915189127
# -(beta(0.5)/2 + gamma)
A_AT_HALF = -2.025
# mean_scale(0.5) * gamma
B_AT_HALF = 1.2991563705862006

REL = 1e-12


class TestDriftFactors:
    def test_state_factor_spot(self, s):
        one = np.array([1.0 + 0j])
        zero = np.array([0.0 + 0j])
        drift = drift_given_noisy(DiffusionState(one, 0.5), zero, s)
        assert drift[0].real == pytest.approx(A_AT_HALF, rel=REL)

    def test_noisy_factor_spot(self, s):
        one = np.array([1.0 + 0j])
        zero = np.array([0.0 + 0j])
        drift = drift_given_noisy(DiffusionState(zero, 0.5), one, s)
        assert drift[0].real == pytest.approx(B_AT_HALF, rel=REL)

    @settings(max_examples=40, deadline=None)
    @given(
        u=st.floats(min_value=0.0, max_value=1.0),
        tau=st.floats(min_value=0.05, max_value=1.0),
    )
    def test_affine_in_the_state(self, u, tau):
        s = Schedule()
        rng = np.random.default_rng(11)
        y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s1 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s2 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        blend = drift_given_noisy(DiffusionState(u * s1 + (1 - u) * s2, tau), y, s)
        parts = u * drift_given_noisy(DiffusionState(s1, tau), y, s) + (
            1 - u
        ) * drift_given_noisy(DiffusionState(s2, tau), y, s)
        assert np.allclose(blend, parts, rtol=1e-9, atol=1e-12)

    def test_noise_form_agrees_on_the_mean(self, s, rng):
        # The two drift parameterizations describe the same mean motion, so
        # they must coincide when evaluated at the conditional mean.
        clean = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        noise = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        noisy = clean + noise
        for tau in (0.2, 0.6, 1.0):
            state = DiffusionState(conditional_mean(clean, noisy, s, tau), tau)
            via_noisy = drift_given_noisy(state, noisy, s)
            via_noise = drift_given_noise(state, noise, s)
            assert np.allclose(via_noisy, via_noise, rtol=1e-9, atol=1e-12)


class TestDiffusionCoefficient:
    def test_spot_values_exact(self, s):
        assert diffusion_coefficient(s, 0.0) == pytest.approx(G_AT_0, rel=1e-9)
        assert diffusion_coefficient(s, 0.5) == pytest.approx(G_AT_HALF, rel=1e-9)

    def test_spot_values_against_six_decimal_references(self, s):
        assert diffusion_coefficient(s, 0.0) == pytest.approx(0.316228, rel=1e-4)
        assert diffusion_coefficient(s, 0.5) == pytest.approx(1.341469, rel=1e-4)

    def test_squared_matches_variance_balance_fd(self, s):
        # g^2 must equal d(var)/dtau - 2*var*dlog(scale*weight)/dtau, with
        # both derivatives taken by central differences of the closed forms.
        h = 1e-6
        for tau in np.linspace(0.05, 0.95, 19):
            d_var = (s.gaussian_var(tau + h) - s.gaussian_var(tau - h)) / (2 * h)
            d_log = (
                np.log(s.mean_scale(tau + h) * s.interp_weight(tau + h))
                - np.log(s.mean_scale(tau - h) * s.interp_weight(tau - h))
            ) / (2 * h)
            expected = d_var - 2.0 * s.gaussian_var(tau) * d_log
            assert diffusion_coefficient(s, tau) ** 2 == pytest.approx(
                expected, rel=1e-6
            )

    def test_sde_coefficients_bundle(self, s, rng):
        state = DiffusionState(rng.standard_normal(4) + 0j, 0.4)
        noisy = rng.standard_normal(4) + 0j
        bundle = sde_coefficients(state, noisy, s)
        assert np.allclose(bundle.drift, drift_given_noisy(state, noisy, s), rtol=REL)
        assert bundle.diffusion == diffusion_coefficient(s, 0.4)


class TestMeanVelocity:
    def test_drift_reproduces_mean_motion(self, s, spectra_pair):
        # The conditional mean must satisfy the deterministic part of the
        # state equation: d(mean)/dtau = drift(mean).
        clean, noisy = spectra_pair
        h = 1e-6
        for tau in (0.1, 0.5, 0.9):
            fd = (
                conditional_mean(clean, noisy, s, tau + h)
                - conditional_mean(clean, noisy, s, tau - h)
            ) / (2 * h)
            mean = conditional_mean(clean, noisy, s, tau)
            drift = drift_given_noisy(DiffusionState(mean, tau), noisy, s)
            assert np.allclose(fd, drift, rtol=1e-6, atol=1e-9)

    def test_decomposition_sums_to_velocity(self, s, spectra_pair):
        clean, noisy = spectra_pair
        h = 1e-6
        tau = 0.5
        mean = DiffusionState(conditional_mean(clean, noisy, s, tau), tau)
        shrink, inject = decompose_mean_velocity(mean, noisy - clean, s)
        fd = (
            conditional_mean(clean, noisy, s, tau + h)
            - conditional_mean(clean, noisy, s, tau - h)
        ) / (2 * h)
        assert np.allclose(shrink + inject, fd, rtol=1e-6, atol=1e-9)


class TestForwardEuler:
    def test_marginals_match_closed_form(self, s):
        rng = np.random.default_rng(5)
        clean = np.array([0.8 + 0.1j, -0.3 + 0.5j])
        noisy = clean + np.array([0.4 - 0.2j, 0.1 + 0.3j])
        stats = simulate_forward_euler(
            clean, noisy, s, n_paths=3000, n_steps=400, rng=rng, checkpoints=(0.5, 1.0)
        )
        for st_ in stats:
            mean = conditional_mean(clean, noisy, s, st_.tau)
            var = s.gaussian_var(st_.tau)
            se = np.sqrt(var / st_.n_paths)
            assert np.all(np.abs(st_.mean - mean) < 4 * np.sqrt(2) * se)
            assert np.all(np.abs(st_.var - var) < 0.12 * var)

    def test_ve_start_includes_noise_floor(self):
        # The variance-exploding schedule is noisy already at time zero; the
        # integrator must draw that part rather than start deterministically.
        ve = Schedule(variant=Variant.VE_INTERP)
        rng = np.random.default_rng(8)
        clean = np.array([1.0 + 0j])
        noisy = np.array([1.5 + 0.5j])
        stats = simulate_forward_euler(
            clean, noisy, ve, n_paths=4000, n_steps=200, rng=rng, checkpoints=(0.25,)
        )
        var = ve.gaussian_var(0.25)
        assert stats[0].var[0] == pytest.approx(var, rel=0.12)

    def test_validation(self, s):
        clean = np.array([1.0 + 0j])
        with pytest.raises(ValueError):
            simulate_forward_euler(
                clean, clean, s, n_paths=0, n_steps=10, rng=np.random.default_rng(0)
            )
        with pytest.raises(ValueError):
            simulate_forward_euler(
                clean,
                clean,
                s,
                n_paths=10,
                n_steps=10,
                rng=np.random.default_rng(0),
                checkpoints=(2.0,),
            )
