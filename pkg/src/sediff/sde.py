"""Drift and diffusion coefficients of the forward process, plus a simulator.

The forward bridge solves dS = f(S, Y, tau) dtau + g(tau) dW with affine
drift.  Two algebraically equivalent drift forms are provided: one written
against the noisy spectrum Y, used by the reverse sampler, and one written
against the additive noise N = Y - X, which splits the mean velocity into a
shrinkage term and a noise-injection term.  ``simulate_forward_euler`` checks
the closed-form marginals by brute force.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sediff.diffusion import DiffusionState, _check_same_shape
from sediff.schedule import Schedule
from sediff.spectral import ComplexSpectrum


@dataclass(frozen=True)
class SdeCoefficients:
    """Drift spectrum and scalar diffusion coefficient at one time."""

    drift: ComplexSpectrum
    diffusion: float


def _drift_factors(s: Schedule, tau) -> tuple[float, float]:
    """Affine drift f = a*S + b*Y: decay factor a and noisy-pull factor b."""
    a = s.dlog_mean_times_interp(tau)
    b = -s.mean_scale(tau) * s.dlog_interp_weight(tau)
    return a, b


def drift_given_noisy(
    state: DiffusionState, noisy: ComplexSpectrum, s: Schedule
) -> ComplexSpectrum:
    """Drift written against the noisy spectrum.

    f = dlog(mean_scale*interp_weight)/dtau * S
        - mean_scale * dlog(interp_weight)/dtau * Y.

    Requires tau in (0, t_max].
    """
    if state.tau <= 0:
        raise ValueError(f"drift requires tau > 0, got {state.tau}")
    _check_same_shape(state.spectrum, noisy)
    a, b = _drift_factors(s, state.tau)
    return a * state.spectrum + b * noisy


def drift_given_noise(
    state: DiffusionState, noise: ComplexSpectrum, s: Schedule
) -> ComplexSpectrum:
    """Drift written against the additive noise N = Y - X.

    f = dlog(mean_scale)/dtau * S + mean_scale * d(noise_weight)/dtau * N.
    Coincides with :func:`drift_given_noisy` on the conditional mean.
    """
    if state.tau <= 0:
        raise ValueError(f"drift requires tau > 0, got {state.tau}")
    _check_same_shape(state.spectrum, noise)
    tau = state.tau
    return (
        s.dlog_mean_scale(tau) * state.spectrum
        + s.mean_scale(tau) * s.d_noise_weight(tau) * noise
    )


def diffusion_coefficient(s: Schedule, tau) -> float:
    """Scalar noise-injection rate g(tau).

    Evaluates g^2 = d(gaussian_var)/dtau
                    - 2*gaussian_var*dlog(mean_scale*interp_weight)/dtau
    from the analytic schedule derivatives, which keeps the state's
    conditional variance consistent with the closed form.

    Raises:
        ValueError: if the radicand is negative (cannot occur with the
            default schedules; guards misconfigured ones).
    """
    radicand = np.asarray(
        s.d_gaussian_var(tau)
        - 2.0 * s.gaussian_var(tau) * s.dlog_mean_times_interp(tau)
    )
    if np.any(radicand < 0):
        raise ValueError(
            f"negative diffusion radicand {radicand} at tau={tau}; "
            "the configured schedule is not a valid forward process"
        )
    return np.sqrt(radicand)[()]


def sde_coefficients(
    state: DiffusionState, noisy: ComplexSpectrum, s: Schedule
) -> SdeCoefficients:
    """Bundle drift (noisy form) and diffusion coefficient at the state's time."""
    return SdeCoefficients(
        drift=drift_given_noisy(state, noisy, s),
        diffusion=float(diffusion_coefficient(s, state.tau)),
    )


def decompose_mean_velocity(
    mean_state: DiffusionState, noise: ComplexSpectrum, s: Schedule
) -> tuple[ComplexSpectrum, ComplexSpectrum]:
    """Split the velocity of the conditional mean into its two mechanisms.

    Returns (shrink_term, inject_term) where shrink_term =
    dlog(mean_scale)/dtau * U rescales the whole mean and inject_term =
    mean_scale * d(noise_weight)/dtau * N feeds in the recording's noise.
    Their sum is dU/dtau; the tests confirm this against finite differences.
    """
    if mean_state.tau <= 0:
        raise ValueError(f"decomposition requires tau > 0, got {mean_state.tau}")
    _check_same_shape(mean_state.spectrum, noise)
    tau = mean_state.tau
    shrink = s.dlog_mean_scale(tau) * mean_state.spectrum
    inject = s.mean_scale(tau) * s.d_noise_weight(tau) * noise
    return shrink, inject


@dataclass(frozen=True)
class ForwardStats:
    """Empirical marginals of the simulated state at one checkpoint time."""

    tau: float
    mean: ComplexSpectrum
    var: np.ndarray
    n_paths: int


def simulate_forward_euler(
    clean: ComplexSpectrum,
    noisy: ComplexSpectrum,
    s: Schedule,
    n_paths: int,
    n_steps: int,
    rng: np.random.Generator,
    checkpoints: tuple[float, ...] = (0.25, 0.5, 1.0),
) -> list[ForwardStats]:
    """Integrate the forward SDE from the exact time-zero marginal.

    The start is the clean spectrum plus the schedule's time-zero noise;
    that noise is zero for the variance-preserving schedules and the sigma
    floor for the variance-exploding one.

    All paths advance together in one vectorized state array; Brownian
    increments use per-component variance delta/2 so E|dW|^2 = delta.
    Checkpoints snap to the nearest integration grid time and report the
    empirical per-bin mean and variance (ddof=1) across paths.

    Args:
        clean: small spectrum (a handful of bins keeps this cheap).
        noisy: same shape as clean.
        s: schedule to integrate under.
        n_paths: number of Monte Carlo paths, >= 1.
        n_steps: number of Euler steps over [0, t_max], >= 1.
        rng: generator owning this simulation's stream.
        checkpoints: times at which to record statistics.

    Returns:
        One :class:`ForwardStats` per checkpoint, in time order.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    _check_same_shape(clean, noisy)
    clean = np.asarray(clean, dtype=np.complex128).ravel()
    noisy_flat = np.asarray(noisy, dtype=np.complex128).ravel()
    n_bins = clean.size

    delta = s.t_max / n_steps
    snap_idx = sorted({int(round(c / delta)) for c in checkpoints})
    if any(not 1 <= j <= n_steps for j in snap_idx):
        raise ValueError(f"checkpoints {checkpoints} fall outside (0, t_max]")

    state = np.tile(clean, (n_paths, 1))
    # The time-zero marginal is deterministic only when the noise level
    # vanishes at the origin; the variance-exploding schedule starts at its
    # sigma floor, which the integration cannot recreate, so draw it here.
    sd0 = s.gaussian_sd(0.0)
    if sd0 > 0.0:
        state = state + sd0 * np.sqrt(0.5) * (
            rng.standard_normal((n_paths, n_bins))
            + 1j * rng.standard_normal((n_paths, n_bins))
        )
    out: list[ForwardStats] = []
    root_half_delta = np.sqrt(0.5 * delta)
    for j in range(1, n_steps + 1):
        tau_left = (j - 1) * delta
        a, b = _drift_factors(s, tau_left)
        g = diffusion_coefficient(s, tau_left)
        dw = root_half_delta * (
            rng.standard_normal((n_paths, n_bins))
            + 1j * rng.standard_normal((n_paths, n_bins))
        )
        state = state + (a * state + b * noisy_flat) * delta + g * dw
        if j in snap_idx:
            mean = state.mean(axis=0)
            # Complex per-bin variance E|S - mean|^2 with the n-1 correction.
            dev = np.abs(state - mean) ** 2
            var = dev.sum(axis=0) / max(n_paths - 1, 1)
            out.append(
                ForwardStats(tau=j * delta, mean=mean, var=var, n_paths=n_paths)
            )
    return out
