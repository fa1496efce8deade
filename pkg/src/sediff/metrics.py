"""Objective quality measures used throughout the test and CLI reports."""

from __future__ import annotations

import numpy as np

from sediff.spectral import ComplexSpectrum, Waveform

SI_SDR_CAP_DB = 80.0
_LSD_FLOOR = 1e-8


def si_sdr(reference: Waveform, estimate: Waveform) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +80.

    The estimate is orthogonally projected onto the reference; the ratio of
    projected power to residual power is reported, so any positive rescaling
    of the estimate leaves the value unchanged.

    Args:
        reference: ground-truth signal, nonzero power.
        estimate: signal under test, same length and rate.

    Returns:
        SI-SDR in dB, capped at +80 when the residual (nearly) vanishes.
    """
    if reference.sample_rate != estimate.sample_rate:
        raise ValueError(
            f"sample rates differ: {reference.sample_rate} vs {estimate.sample_rate}"
        )
    ref = reference.samples
    est = estimate.samples
    if ref.shape != est.shape:
        raise ValueError(f"lengths differ: {ref.size} vs {est.size}")
    ref_power = float(np.dot(ref, ref))
    if ref_power <= 0:
        raise ValueError("reference has zero power")
    if float(np.dot(est, est)) <= 0:
        raise ValueError("estimate has zero power")
    target = (np.dot(est, ref) / ref_power) * ref
    residual = est - target
    target_power = float(np.dot(target, target))
    residual_power = float(np.dot(residual, residual))
    if residual_power <= target_power * 10.0 ** (-SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return min(SI_SDR_CAP_DB, 10.0 * np.log10(target_power / residual_power))


def residual_noise_power(estimate: ComplexSpectrum, clean: ComplexSpectrum) -> float:
    """Mean squared spectral residual against the clean reference.

    For the ground-truth interpolation state this equals
    noise_weight(tau)^2 * mean|N|^2, so it tracks how much of the
    recording's noise is still present in a mid-trajectory estimate.
    """
    estimate = np.asarray(estimate)
    clean = np.asarray(clean)
    if estimate.shape != clean.shape:
        raise ValueError(f"shapes differ: {estimate.shape} vs {clean.shape}")
    return float(np.mean(np.abs(estimate - clean) ** 2))


def log_spectral_distance(a: ComplexSpectrum, b: ComplexSpectrum) -> float:
    """RMS log-magnitude distance in dB between two spectra.

    Per bin: 20*(log10(|a| + floor) - log10(|b| + floor)) with a 1e-8 floor,
    then root-mean-square over all bins.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    diff = 20.0 * (
        np.log10(np.abs(a) + _LSD_FLOOR) - np.log10(np.abs(b) + _LSD_FLOOR)
    )
    return float(np.sqrt(np.mean(diff**2)))
