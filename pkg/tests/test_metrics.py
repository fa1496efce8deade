"""Evaluation metrics: SI-SDR, spectral residual power, log-spectral distance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sediff.metrics import (
    SI_SDR_CAP_DB,
    log_spectral_distance,
    residual_noise_power,
    si_sdr,
)
from sediff.spectral import Waveform


def _wave(x):
    return Waveform(np.asarray(x, dtype=np.float64), 16000)


class TestSiSdr:
    def test_perfect_estimate_hits_the_cap(self, rng):
        x = rng.standard_normal(1000)
        assert si_sdr(_wave(x), _wave(x)) == SI_SDR_CAP_DB

    def test_orthogonal_error_of_equal_power_gives_zero_db(self):
        ref = np.zeros(100)
        ref[0] = 1.0
        est = ref.copy()
        est[1] = 1.0
        assert si_sdr(_wave(ref), _wave(est)) == pytest.approx(0.0, abs=1e-9)

    def test_known_ratio(self):
        # error power 1/4 of signal power -> 10*log10(4)
        ref = np.zeros(64)
        ref[0] = 1.0
        est = ref.copy()
        est[1] = 0.5
        assert si_sdr(_wave(ref), _wave(est)) == pytest.approx(
            10.0 * np.log10(4.0), abs=1e-9
        )

    @settings(max_examples=30, deadline=None)
    @given(scale=st.floats(min_value=1e-3, max_value=1e3))
    def test_scale_invariance(self, scale):
        rng = np.random.default_rng(0)
        ref = rng.standard_normal(500)
        est = ref + 0.3 * rng.standard_normal(500)
        base = si_sdr(_wave(ref), _wave(est))
        scaled = si_sdr(_wave(ref), _wave(scale * est))
        assert scaled == pytest.approx(base, abs=1e-6)

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            si_sdr(_wave(rng.standard_normal(10)), _wave(rng.standard_normal(11)))


class TestResidualNoisePower:
    def test_zero_for_identical(self, rng):
        z = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        assert residual_noise_power(z, z) == 0.0

    def test_constant_offset(self, rng):
        z = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        off = 0.3 - 0.4j
        assert residual_noise_power(z + off, z) == pytest.approx(abs(off) ** 2, rel=1e-12)


class TestLogSpectralDistance:
    def test_zero_for_identical(self, rng):
        z = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        assert log_spectral_distance(z, z) == 0.0

    def test_uniform_gain_maps_to_db(self, rng):
        z = 1.0 + rng.random((4, 6)) + 0j
        assert log_spectral_distance(2.0 * z, z) == pytest.approx(
            20.0 * np.log10(2.0), rel=1e-6
        )

    def test_phase_is_ignored(self, rng):
        z = 1.0 + rng.random((4, 6)) + 0j
        rotated = z * np.exp(1j * rng.uniform(0, 2 * np.pi, z.shape))
        assert log_spectral_distance(rotated, z) == pytest.approx(0.0, abs=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            log_spectral_distance(np.zeros((2, 3), complex), np.zeros((3, 2), complex))
