"""Forward bridge process on compressed complex spectrograms.

Given a clean spectrum X and its noisy counterpart Y, the process state at
time tau is

    S(tau) = mean_scale(tau) * [w*X + (1-w)*Y] + gaussian_sd(tau) * Z,

with w = interp_weight(tau) and Z unit circular complex Gaussian noise.  The
conditional law of S given (X, Y) is therefore an isotropic complex Gaussian
whose mean and variance are closed-form, which makes the exact score
available for verification.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from sediff.schedule import Schedule
from sediff.spectral import ComplexSpectrum


@dataclass(frozen=True)
class DiffusionState:
    """A process state: a complex spectrum tagged with its time."""

    spectrum: ComplexSpectrum
    tau: float

    def __post_init__(self) -> None:
        spectrum = np.asarray(self.spectrum, dtype=np.complex128)
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")
        object.__setattr__(self, "spectrum", spectrum)
        object.__setattr__(self, "tau", float(self.tau))


@dataclass(frozen=True)
class ComplexGaussianDraw:
    """A draw of i.i.d. circular complex Gaussian noise with E|z|^2 = 1.

    ``provenance`` is a short digest of the generator state before the draw,
    recorded so experiment logs can attribute a sample to its RNG stream.
    """

    z: ComplexSpectrum
    provenance: str


def _rng_provenance(rng: np.random.Generator) -> str:
    state = repr(rng.bit_generator.state).encode()
    return hashlib.sha256(state).hexdigest()[:16]


def draw_complex_gaussian(
    shape: tuple[int, ...], rng: np.random.Generator
) -> ComplexGaussianDraw:
    """Draw circular complex noise: real and imaginary parts each N(0, 1/2)."""
    provenance = _rng_provenance(rng)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    z = np.sqrt(0.5) * (re + 1j * im)
    return ComplexGaussianDraw(z=z, provenance=provenance)


def _check_same_shape(*arrays: ComplexSpectrum) -> None:
    shapes = {np.asarray(a).shape for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"spectra must share one shape, got {sorted(shapes)}")


def interpolate(
    clean: ComplexSpectrum, noisy: ComplexSpectrum, s: Schedule, tau
) -> ComplexSpectrum:
    """Clean/noisy interpolation w*X + (1-w)*Y with w = interp_weight(tau).

    Equivalently X + noise_weight(tau)*N when noisy = clean + N, so the
    recording's own noise is injected gradually as tau grows.
    """
    _check_same_shape(clean, noisy)
    w = s.interp_weight(tau)
    return w * clean + (1.0 - w) * noisy


def conditional_mean(
    clean: ComplexSpectrum, noisy: ComplexSpectrum, s: Schedule, tau
) -> ComplexSpectrum:
    """Mean of the state at tau: mean_scale * interpolate."""
    return s.mean_scale(tau) * interpolate(clean, noisy, s, tau)


def forward_sample(
    clean: ComplexSpectrum,
    noisy: ComplexSpectrum,
    s: Schedule,
    tau,
    rng: np.random.Generator,
) -> tuple[DiffusionState, ComplexGaussianDraw]:
    """Draw the state at tau from its conditional Gaussian law.

    Returns the state together with the noise draw so training targets can
    reuse the exact Z that produced the state.
    """
    mean = conditional_mean(clean, noisy, s, tau)
    draw = draw_complex_gaussian(mean.shape, rng)
    state = DiffusionState(mean + s.gaussian_sd(tau) * draw.z, float(tau))
    return state, draw


def log_density(
    state: DiffusionState,
    clean: ComplexSpectrum,
    noisy: ComplexSpectrum,
    s: Schedule,
) -> float:
    """Log conditional density of the state given (clean, noisy).

    The law is an isotropic complex Gaussian over all bins:
    -n*log(pi*var) - ||S - mean||^2 / var for n bins.

    Raises:
        ValueError: at tau <= 0, where the VP law degenerates to a point mass.
    """
    if state.tau <= 0:
        raise ValueError(f"density requires tau > 0, got {state.tau}")
    _check_same_shape(state.spectrum, clean, noisy)
    var = s.gaussian_var(state.tau)
    mean = conditional_mean(clean, noisy, s, state.tau)
    n_bins = state.spectrum.size
    quad = float(np.sum(np.abs(state.spectrum - mean) ** 2))
    return -n_bins * float(np.log(np.pi * var)) - quad / var


def analytic_score(
    state: DiffusionState,
    clean: ComplexSpectrum,
    noisy: ComplexSpectrum,
    s: Schedule,
) -> ComplexSpectrum:
    """Exact conditional score: -(S - mean)/var.

    This is the gradient of :func:`log_density` in the conjugate-coordinate
    convention d/dS* = (d/dRe + j d/dIm)/2, and equals -Z/sd for the draw Z
    that generated the state.
    """
    if state.tau <= 0:
        raise ValueError(f"score requires tau > 0, got {state.tau}")
    _check_same_shape(state.spectrum, clean, noisy)
    var = s.gaussian_var(state.tau)
    mean = conditional_mean(clean, noisy, s, state.tau)
    return -(state.spectrum - mean) / var
