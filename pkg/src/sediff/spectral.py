"""Waveform I/O and compressed complex-spectrogram transforms.

A waveform is analyzed into overlapping windowed frames, transformed with a
real FFT, and magnitude-compressed, giving a complex array of shape
(frames, bins) on which all diffusion operations act.  Synthesis inverts the
compression and performs weighted overlap-add with window-squared
normalization.

Analysis zero-pads both ends of the signal by one window-minus-hop span and
synthesis trims the same span, so every real sample lies where the squared
windows overlap fully.  Round trips are then exact to machine precision, and
synthesis of spectra that are not an exact transform of any waveform (every
modified spectrum is of this kind) stays well conditioned: without the pad,
normalizing the first partial window amplifies frame inconsistencies into
edge spikes orders of magnitude above the signal.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal.windows import hann

# A compressed complex spectrogram: complex128 array of shape (frames, bins).
ComplexSpectrum = np.ndarray

_PCM16_FULL_SCALE = 32767.0
_OLA_EPS = 1e-12


@dataclass(frozen=True)
class Waveform:
    """A mono audio signal with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis framing parameters.

    The FFT length equals the window length, so an even ``win_length`` of 510
    yields 256 frequency bins.  Analysis pads ``edge_pad`` zeros on each side
    (see the module docstring) and synthesis trims them again.
    """

    win_length: int = 510
    hop: int = 128
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if self.win_length <= 0:
            raise ValueError(f"win_length must be positive, got {self.win_length}")
        if not 0 < self.hop <= self.win_length:
            raise ValueError(
                f"hop must be in (0, win_length], got hop={self.hop} "
                f"win_length={self.win_length}"
            )
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def n_bins(self) -> int:
        return self.win_length // 2 + 1

    @property
    def edge_pad(self) -> int:
        return self.win_length - self.hop

    def n_frames(self, n_samples: int) -> int:
        """Frames :func:`analyze` produces for an ``n_samples`` waveform."""
        if n_samples <= 0:
            raise ValueError(f"n_samples must be positive, got {n_samples}")
        n_eff = n_samples + 2 * self.edge_pad
        if n_eff <= self.win_length:
            return 1
        return 1 + int(np.ceil((n_eff - self.win_length) / self.hop))

    def window(self) -> np.ndarray:
        return hann(self.win_length, sym=False)


@dataclass(frozen=True)
class CompressionConfig:
    """Magnitude compression ``scale * |z|**exponent * exp(j*angle(z))``."""

    scale: float = 0.15
    exponent: float = 0.5

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0 < self.exponent <= 1:
            raise ValueError(f"exponent must be in (0, 1], got {self.exponent}")


def compress(z: ComplexSpectrum, comp: CompressionConfig) -> ComplexSpectrum:
    """Apply magnitude compression, preserving phase.  Zero maps to zero."""
    return comp.scale * np.abs(z) ** comp.exponent * np.exp(1j * np.angle(z))


def decompress(v: ComplexSpectrum, comp: CompressionConfig) -> ComplexSpectrum:
    """Invert :func:`compress`."""
    return (np.abs(v) / comp.scale) ** (1.0 / comp.exponent) * np.exp(1j * np.angle(v))


def _frame_starts(n_samples: int, stft: StftConfig) -> np.ndarray:
    return stft.hop * np.arange(stft.n_frames(n_samples))


def analyze(
    wave_in: Waveform,
    stft: StftConfig | None = None,
    comp: CompressionConfig | None = None,
) -> ComplexSpectrum:
    """Transform a waveform into a compressed complex spectrogram.

    Args:
        wave_in: mono waveform; its rate must match ``stft.sample_rate``.
        stft: framing parameters (defaults used when omitted).
        comp: compression parameters (defaults used when omitted).

    Returns:
        Complex array of shape (frames, bins).
    """
    stft = stft or StftConfig()
    comp = comp or CompressionConfig()
    if wave_in.sample_rate != stft.sample_rate:
        raise ValueError(
            f"waveform rate {wave_in.sample_rate} != config rate {stft.sample_rate}"
        )
    x = wave_in.samples
    starts = _frame_starts(x.size, stft)
    padded = np.zeros(max(starts[-1] + stft.win_length, x.size + 2 * stft.edge_pad))
    padded[stft.edge_pad : stft.edge_pad + x.size] = x
    frames = padded[starts[:, None] + np.arange(stft.win_length)]
    spec = np.fft.rfft(frames * stft.window(), n=stft.win_length, axis=1)
    return compress(spec, comp)


def synthesize(
    spec: ComplexSpectrum,
    stft: StftConfig | None = None,
    comp: CompressionConfig | None = None,
    length: int | None = None,
) -> Waveform:
    """Invert :func:`analyze` by weighted overlap-add.

    Args:
        spec: complex array of shape (frames, bins).
        stft: framing parameters matching the analysis.
        comp: compression parameters matching the analysis.
        length: output sample count; defaults to the overlap-add span minus
            the analysis edge pads.

    Returns:
        Reconstructed waveform.  Samples where the squared-window sum
        vanishes (possible only in the trimmed pad regions) are set to zero.
    """
    stft = stft or StftConfig()
    comp = comp or CompressionConfig()
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != stft.n_bins:
        raise ValueError(
            f"expected shape (frames, {stft.n_bins}), got {spec.shape}"
        )
    n_frames = spec.shape[0]
    win = stft.window()
    frames = np.fft.irfft(decompress(spec, comp), n=stft.win_length, axis=1) * win
    total = (n_frames - 1) * stft.hop + stft.win_length
    acc = np.zeros(total)
    den = np.zeros(total)
    idx = stft.hop * np.arange(n_frames)[:, None] + np.arange(stft.win_length)
    np.add.at(acc, idx, frames)
    # ufunc.at needs value/index shapes to agree; broadcast explicitly.
    np.add.at(den, idx, np.broadcast_to(win**2, idx.shape))
    full = np.where(den > _OLA_EPS, acc / np.where(den > _OLA_EPS, den, 1.0), 0.0)
    out = full[stft.edge_pad :]
    span = max(total - 2 * stft.edge_pad, 0)
    if length is None:
        length = span
    elif length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    if length <= out.size:
        out = out[:length]
    else:
        out = np.concatenate([out, np.zeros(length - out.size)])
    return Waveform(out, stft.sample_rate)


def mix_snr(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """Scale ``noise`` so that ``clean + k*noise`` attains the requested SNR.

    The noise is tiled or trimmed to the length of ``clean`` first.  The
    achieved SNR is exact because the gain solves the power ratio directly.

    Args:
        clean: reference signal, nonzero power.
        noise: interfering signal, nonzero power after length matching.
        snr_db: desired signal-to-noise ratio in dB (finite).

    Returns:
        The mixture ``clean + k * noise`` with the same length as ``clean``.
    """
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if clean.ndim != 1 or noise.ndim != 1:
        raise ValueError("mix_snr expects 1-D signals")
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    if noise.size == 0:
        raise ValueError("noise is empty")
    if noise.size < clean.size:
        noise = np.tile(noise, int(np.ceil(clean.size / noise.size)))
    noise = noise[: clean.size]
    p_clean = float(np.mean(clean**2))
    p_noise = float(np.mean(noise**2))
    if p_clean <= 0:
        raise ValueError("clean signal has zero power")
    if p_noise <= 0:
        raise ValueError("noise signal has zero power")
    gain = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return clean + gain * noise


def read_wav(path: str | Path) -> Waveform:
    """Read a mono 16-bit PCM WAV file.

    Raises:
        ValueError: for non-mono or non-16-bit input.
        OSError: when the file cannot be read or parsed as WAV.
    """
    with wave.open(str(path), "rb") as fh:
        n_channels = fh.getnchannels()
        sampwidth = fh.getsampwidth()
        rate = fh.getframerate()
        n_frames = fh.getnframes()
        if n_channels != 1:
            raise ValueError(f"{path}: expected mono, got {n_channels} channels")
        if sampwidth != 2:
            raise ValueError(
                f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit"
            )
        raw = fh.readframes(n_frames)
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _PCM16_FULL_SCALE
    return Waveform(samples, rate)


def write_wav(path: str | Path, wave_out: Waveform) -> None:
    """Write a mono 16-bit PCM WAV file, clipping to [-1, 1]."""
    clipped = np.clip(wave_out.samples, -1.0, 1.0)
    pcm = np.round(clipped * _PCM16_FULL_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave_out.sample_rate)
        fh.writeframes(pcm.tobytes())
