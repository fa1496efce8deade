"""Forward law: interpolation, conditional moments, density, and exact score.

Spot values were derived independently from the closed forms before being
frozen here (see test_schedule.py for the underlying coefficient values).
"""

import math

import numpy as np
import pytest

from sediff.diffusion import (
    DiffusionState,
    analytic_score,
    conditional_mean,
    forward_sample,
    interpolate,
    log_density,
)
from sediff.schedule import Schedule

# With clean = 1, noisy = 3: interp weight exp(-1.5) gives 3 - 2*exp(-1.5).
INTERP_1_3_AT_1 = 2.5537396797031406
# mean_scale(0.5) * (3 - 2*exp(-0.75))
MEAN_1_3_AT_HALF = 1.7800753861786256

REL = 1e-12


class TestInterpolationAndMean:
    def test_interpolate_spot(self, s):
        one, three = np.array([1.0 + 0j]), np.array([3.0 + 0j])
        got = interpolate(one, three, s, 1.0)
        assert got[0].real == pytest.approx(INTERP_1_3_AT_1, rel=REL)
        assert got[0].imag == 0.0

    def test_interpolate_starts_at_clean(self, s, spectra_pair):
        clean, noisy = spectra_pair
        assert np.array_equal(interpolate(clean, noisy, s, 0.0), clean)

    def test_conditional_mean_spot(self, s):
        one, three = np.array([1.0 + 0j]), np.array([3.0 + 0j])
        got = conditional_mean(one, three, s, 0.5)
        assert got[0].real == pytest.approx(MEAN_1_3_AT_HALF, rel=REL)

    def test_conditional_mean_is_scaled_interpolation(self, s, spectra_pair):
        clean, noisy = spectra_pair
        tau = 0.37
        expected = s.mean_scale(tau) * interpolate(clean, noisy, s, tau)
        assert np.allclose(conditional_mean(clean, noisy, s, tau), expected, rtol=REL)

    def test_shape_mismatch_rejected(self, s):
        with pytest.raises(ValueError):
            interpolate(np.zeros(3, complex), np.zeros(4, complex), s, 0.5)


class TestForwardSample:
    def test_state_reconstructs_from_returned_draw(self, s, spectra_pair, rng):
        clean, noisy = spectra_pair
        tau = 0.6
        state, draw = forward_sample(clean, noisy, s, tau, rng)
        rebuilt = conditional_mean(clean, noisy, s, tau) + s.gaussian_sd(tau) * draw.z
        assert np.array_equal(state.spectrum, rebuilt)
        assert state.tau == tau

    def test_same_seed_same_draw(self, s, spectra_pair):
        clean, noisy = spectra_pair
        a, _ = forward_sample(clean, noisy, s, 0.8, np.random.default_rng(7))
        b, _ = forward_sample(clean, noisy, s, 0.8, np.random.default_rng(7))
        assert np.array_equal(a.spectrum, b.spectrum)

    def test_moments(self, s):
        clean = np.array([0.7 - 0.2j])
        noisy = np.array([1.1 + 0.4j])
        tau = 0.5
        rng = np.random.default_rng(3)
        draws = np.concatenate(
            [forward_sample(clean, noisy, s, tau, rng)[0].spectrum for _ in range(4000)]
        )
        mean = conditional_mean(clean, noisy, s, tau)[0]
        var = s.gaussian_var(tau)
        se = math.sqrt(var / draws.size)
        assert abs(draws.mean() - mean) < 4 * math.sqrt(2) * se
        sample_var = np.mean(np.abs(draws - mean) ** 2)
        assert sample_var == pytest.approx(var, rel=0.1)


class TestLogDensity:
    def test_matches_complex_gaussian_formula(self, s, spectra_pair, rng):
        clean, noisy = spectra_pair
        tau = 0.45
        state, _ = forward_sample(clean, noisy, s, tau, rng)
        var = s.gaussian_var(tau)
        mean = conditional_mean(clean, noisy, s, tau)
        expected = -clean.size * math.log(math.pi * var) - float(
            np.sum(np.abs(state.spectrum - mean) ** 2)
        ) / var
        assert log_density(state, clean, noisy, s) == pytest.approx(expected, rel=REL)

    def test_peaks_at_the_mean(self, s, spectra_pair):
        clean, noisy = spectra_pair
        tau = 0.5
        mean = conditional_mean(clean, noisy, s, tau)
        at_mean = log_density(DiffusionState(mean, tau), clean, noisy, s)
        off = log_density(DiffusionState(mean + 0.1, tau), clean, noisy, s)
        assert at_mean > off

    def test_degenerate_time_rejected(self, s, spectra_pair):
        clean, noisy = spectra_pair
        with pytest.raises(ValueError):
            log_density(DiffusionState(clean, 0.0), clean, noisy, s)


class TestAnalyticScore:
    def test_is_negative_standardized_deviation(self, s, spectra_pair, rng):
        clean, noisy = spectra_pair
        tau = 0.7
        state, _ = forward_sample(clean, noisy, s, tau, rng)
        expected = -(
            state.spectrum - conditional_mean(clean, noisy, s, tau)
        ) / s.gaussian_var(tau)
        assert np.allclose(analytic_score(state, clean, noisy, s), expected, rtol=REL)

    def test_matches_density_gradient(self, s, spectra_pair, rng):
        # Convention: moving a bin by dS changes log density by 2*Re(psi* . dS),
        # so real/imag finite differences recover twice the score components.
        clean, noisy = spectra_pair
        tau = 0.55
        state, _ = forward_sample(clean, noisy, s, tau, rng)
        psi = analytic_score(state, clean, noisy, s)
        h = 1e-6
        flat = state.spectrum.ravel()
        for b in (0, 7, 23):
            for direction, component in ((h, np.real), (1j * h, np.imag)):
                bumped_up, bumped_dn = flat.copy(), flat.copy()
                bumped_up[b] += direction
                bumped_dn[b] -= direction
                fd = (
                    log_density(
                        DiffusionState(bumped_up.reshape(state.spectrum.shape), tau),
                        clean, noisy, s,
                    )
                    - log_density(
                        DiffusionState(bumped_dn.reshape(state.spectrum.shape), tau),
                        clean, noisy, s,
                    )
                ) / (2 * h)
                assert fd == pytest.approx(2.0 * component(psi.ravel()[b]), rel=1e-5)

    def test_zero_at_the_mean(self, s, spectra_pair):
        clean, noisy = spectra_pair
        tau = 0.3
        mean = conditional_mean(clean, noisy, s, tau)
        psi = analytic_score(DiffusionState(mean, tau), clean, noisy, s)
        assert np.array_equal(psi, np.zeros_like(psi))
