"""Reverse sampler: stepping contracts, extraction identities, determinism."""

import numpy as np
import pytest

from sediff.corpus import CorpusSpec, generate
from sediff.diffusion import DiffusionState, conditional_mean, interpolate
from sediff.metrics import si_sdr
from sediff.sampler import (
    SamplerConfig,
    SamplerDiverged,
    enhance,
    enhance_early_stop,
    extract_clean,
    extract_interpolant,
    init_state,
    reverse_step,
)
from sediff.score import ScoreFn, oracle_score
from sediff.spectral import analyze


@pytest.fixture(scope="module")
def one_item():
    spec = CorpusSpec(n_utterances=1, snr_levels_db=(0.0,), seed=12)
    return generate(spec)[0]


class TestConfig:
    def test_early_stop_default_caps_at_twelve(self):
        assert SamplerConfig().early_stop_steps == 12
        assert SamplerConfig(n_steps=8).early_stop_steps == 8

    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(n_steps=1)
        with pytest.raises(ValueError):
            SamplerConfig(n_steps=10, early_stop_steps=11)
        with pytest.raises(ValueError):
            SamplerConfig(mode="walk")
        with pytest.raises(ValueError):
            SamplerConfig(output="spectrum")


class TestStepping:
    def test_init_state_moments(self, s, rng):
        noisy = np.full(2000, 1.0 + 1.0j)
        state = init_state(noisy, s, rng)
        assert state.tau == s.t_max
        center = s.mean_scale(s.t_max) * noisy[0]
        dev = state.spectrum - center
        assert abs(dev.mean()) < 0.1
        assert np.mean(np.abs(dev) ** 2) == pytest.approx(
            s.gaussian_var(s.t_max), rel=0.15
        )

    def test_reverse_step_requires_matching_time(self, s, rng, spectra_pair):
        clean, noisy = spectra_pair
        grid = s.grid(10)
        psi = oracle_score(clean, s)
        state = DiffusionState(noisy, 0.123)
        with pytest.raises(ValueError, match="grid time"):
            reverse_step(state, noisy, psi, s, grid, 10, rng)

    def test_reverse_step_index_bounds(self, s, rng, spectra_pair):
        clean, noisy = spectra_pair
        grid = s.grid(10)
        psi = oracle_score(clean, s)
        state = DiffusionState(noisy, grid.tau_at(1))
        with pytest.raises(ValueError, match="k must be"):
            reverse_step(state, noisy, psi, s, grid, 1, rng)

    def test_deterministic_step_drops_the_kick(self, s, rng, spectra_pair):
        clean, noisy = spectra_pair
        grid = s.grid(10)
        psi = oracle_score(clean, s)
        state = DiffusionState(conditional_mean(clean, noisy, s, grid.tau_at(10)),
                               grid.tau_at(10))
        a = reverse_step(state, noisy, psi, s, grid, 10,
                         np.random.default_rng(1), stochastic=False)
        b = reverse_step(state, noisy, psi, s, grid, 10,
                         np.random.default_rng(2), stochastic=False)
        assert np.array_equal(a.spectrum, b.spectrum)


class TestExtraction:
    def test_interpolant_is_exact_on_the_mean(self, s, spectra_pair):
        clean, noisy = spectra_pair
        tau = 0.62
        psi = oracle_score(clean, s)
        state = DiffusionState(conditional_mean(clean, noisy, s, tau), tau)
        got = extract_interpolant(state, noisy, psi, s)
        assert np.allclose(got, interpolate(clean, noisy, s, tau), rtol=1e-12)

    def test_clean_is_exact_on_the_mean(self, s, spectra_pair):
        clean, noisy = spectra_pair
        tau = 0.62
        psi = oracle_score(clean, s)
        state = DiffusionState(conditional_mean(clean, noisy, s, tau), tau)
        got = extract_clean(state, noisy, psi, s)
        assert np.allclose(got, clean, rtol=1e-10, atol=1e-12)


class TestEnhance:
    def test_oracle_recovers_clean(self, s, one_item):
        psi = oracle_score(analyze(one_item.clean), s)
        out = enhance(one_item.noisy, psi, s, SamplerConfig(seed=0))
        assert out.samples.size == one_item.noisy.samples.size
        assert si_sdr(one_item.clean, out) >= 40.0

    def test_deterministic_under_seed(self, s, one_item):
        psi = oracle_score(analyze(one_item.clean), s)
        a = enhance(one_item.noisy, psi, s, SamplerConfig(seed=3))
        b = enhance(one_item.noisy, psi, s, SamplerConfig(seed=3))
        assert np.array_equal(a.samples, b.samples)

    def test_raw_state_keeps_the_gaussian_floor(self, s, one_item):
        psi = oracle_score(analyze(one_item.clean), s)
        denoised = enhance(one_item.noisy, psi, s, SamplerConfig(seed=0))
        raw = enhance(one_item.noisy, psi, s, SamplerConfig(seed=0, output="raw_state"))
        assert si_sdr(one_item.clean, denoised) > si_sdr(one_item.clean, raw)

    def test_early_stop_runs_and_reduces_noise(self, s, one_item):
        psi = oracle_score(analyze(one_item.clean), s)
        out = enhance_early_stop(one_item.noisy, psi, s,
                                 SamplerConfig(seed=0, early_stop_steps=12))
        assert out.samples.size == one_item.noisy.samples.size
        assert si_sdr(one_item.clean, out) > si_sdr(one_item.clean, one_item.noisy)

    def test_early_stop_equal_to_steps_degenerates_to_full_pass(self, s, one_item):
        psi = oracle_score(analyze(one_item.clean), s)
        cfg = SamplerConfig(n_steps=6, early_stop_steps=6, seed=0)
        out = enhance_early_stop(one_item.noisy, psi, s, cfg)
        assert np.all(np.isfinite(out.samples))

    def test_divergent_score_raises(self, s, one_item):
        class Exploding(ScoreFn):
            def evaluate(self, spectrum, noisy, tau):
                return 1e12 * np.ones_like(spectrum)

        with pytest.raises(SamplerDiverged):
            enhance(one_item.noisy, Exploding(), s, SamplerConfig(seed=0))
