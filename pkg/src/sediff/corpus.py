"""Synthetic paired clean/noisy corpus generation and WAV ingestion.

Clean material is deterministic synthetic audio (harmonic combs, sweeps, or
band-limited noise); interference is white, pink, or a crude multi-band
amplitude-modulated stand-in for babble.  Pairs are mixed at exact SNRs and
peak-guarded jointly so the additive relation noisy = clean + noise survives
WAV quantization headroom.  Everything is reproducible from one seed, with
one spawned RNG stream per utterance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import butter, sosfiltfilt

from sediff.spectral import StftConfig, Waveform, mix_snr, read_wav, write_wav

_CLEAN_KINDS = ("multisine", "chirp", "filtered_noise")
_NOISE_KINDS = ("white", "pink", "babble_proxy")
_MIN_FRAMES = 256
_PEAK_GUARD = 0.99
_CLEAN_PEAK = 0.95


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for one synthetic corpus."""

    n_utterances: int = 20
    duration_s: float = 2.2
    sample_rate: int = 16000
    snr_levels_db: tuple[float, ...] = (-5.0, 0.0, 5.0)
    clean_kind: str = "multisine"
    noise_kind: str = "white"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_utterances < 0:
            raise ValueError(f"n_utterances must be >= 0, got {self.n_utterances}")
        if self.clean_kind not in _CLEAN_KINDS:
            raise ValueError(
                f"clean_kind must be one of {_CLEAN_KINDS}, got {self.clean_kind!r}"
            )
        if self.noise_kind not in _NOISE_KINDS:
            raise ValueError(
                f"noise_kind must be one of {_NOISE_KINDS}, got {self.noise_kind!r}"
            )
        if not self.snr_levels_db:
            raise ValueError("snr_levels_db must be nonempty")
        stft = StftConfig(sample_rate=self.sample_rate)
        n_samples = int(round(self.duration_s * self.sample_rate))
        if n_samples <= 0 or stft.n_frames(n_samples) < _MIN_FRAMES:
            min_samples = stft.win_length + (_MIN_FRAMES - 1) * stft.hop
            raise ValueError(
                f"duration_s={self.duration_s} gives {n_samples} samples; need at "
                f"least {min_samples} ({min_samples / self.sample_rate:.3f} s) for "
                f"{_MIN_FRAMES} analysis frames"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate))


class CorpusItem(NamedTuple):
    clean: Waveform
    noisy: Waveform
    snr_db: float


def _fade(x: np.ndarray, sr: int, ms: float = 20.0) -> np.ndarray:
    n = min(int(sr * ms / 1000.0), x.size // 2)
    if n == 0:
        return x
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
    out = x.copy()
    out[:n] *= ramp
    out[-n:] *= ramp[::-1]
    return out


def _peak_normalize(x: np.ndarray, peak: float) -> np.ndarray:
    top = float(np.max(np.abs(x)))
    if top <= 0:
        raise ValueError("cannot normalize an all-zero signal")
    return x * (peak / top)


def _gen_multisine(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    n_comp = int(rng.integers(4, 9))
    freqs = np.exp(rng.uniform(np.log(120.0), np.log(3400.0), n_comp))
    amps = rng.uniform(0.3, 1.0, n_comp)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_comp)
    x = np.zeros(n)
    for f, a, p in zip(freqs, amps, phases):
        x += a * np.sin(2.0 * np.pi * f * t + p)
    return _peak_normalize(_fade(x, sr), _CLEAN_PEAK)


def _gen_chirp(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    f0 = float(np.exp(rng.uniform(np.log(100.0), np.log(800.0))))
    f1 = float(np.exp(rng.uniform(np.log(1000.0), np.log(3400.0))))
    phase = rng.uniform(0.0, 2.0 * np.pi)
    # Logarithmic sweep f(t) = f0 * (f1/f0)^(t/T).
    duration = n / sr
    k = np.log(f1 / f0) / duration
    inst_phase = 2.0 * np.pi * f0 * (np.expm1(k * t)) / k
    return _peak_normalize(_fade(np.sin(inst_phase + phase), sr), _CLEAN_PEAK)


def _gen_filtered_noise(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    sos = butter(4, [200.0, 3400.0], btype="bandpass", fs=sr, output="sos")
    x = sosfiltfilt(sos, rng.standard_normal(n))
    return _peak_normalize(_fade(np.asarray(x), sr), _CLEAN_PEAK)


def _gen_white(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(n)


def _gen_pink(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    f[0] = f[1]
    return np.fft.irfft(spec / np.sqrt(f), n=n)


def _gen_babble_proxy(n: int, sr: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    centers = np.exp(np.linspace(np.log(220.0), np.log(3200.0), 6))
    x = np.zeros(n)
    for fc in centers:
        lo, hi = fc / 1.25, min(fc * 1.25, 0.45 * sr)
        sos = butter(2, [lo, hi], btype="bandpass", fs=sr, output="sos")
        band = np.asarray(sosfiltfilt(sos, rng.standard_normal(n)))
        fm = rng.uniform(1.0, 6.0)
        env = 0.55 + 0.45 * np.sin(2.0 * np.pi * fm * t + rng.uniform(0, 2 * np.pi))
        x += band * env
    return x


_CLEAN_GEN = {
    "multisine": _gen_multisine,
    "chirp": _gen_chirp,
    "filtered_noise": _gen_filtered_noise,
}
_NOISE_GEN = {
    "white": _gen_white,
    "pink": _gen_pink,
    "babble_proxy": _gen_babble_proxy,
}


def generate(spec: CorpusSpec) -> list[CorpusItem]:
    """Generate the corpus described by ``spec``, deterministically.

    SNR levels rotate round-robin across utterances.  Each utterance draws
    from its own spawned RNG stream, so the result does not depend on
    generation order.  When the raw mixture would clip, clean and noisy are
    rescaled by one common factor, preserving both the additive relation and
    the exact SNR.
    """
    children = np.random.SeedSequence(spec.seed).spawn(max(spec.n_utterances, 1))
    items: list[CorpusItem] = []
    for i in range(spec.n_utterances):
        rng = np.random.default_rng(children[i])
        clean = _CLEAN_GEN[spec.clean_kind](spec.n_samples, spec.sample_rate, rng)
        noise = _NOISE_GEN[spec.noise_kind](spec.n_samples, spec.sample_rate, rng)
        snr_db = float(spec.snr_levels_db[i % len(spec.snr_levels_db)])
        noisy = mix_snr(clean, noise, snr_db)
        top = float(np.max(np.abs(noisy)))
        if top > _PEAK_GUARD:
            scale = _PEAK_GUARD / top
            clean = clean * scale
            noisy = noisy * scale
        items.append(
            CorpusItem(
                clean=Waveform(clean, spec.sample_rate),
                noisy=Waveform(noisy, spec.sample_rate),
                snr_db=snr_db,
            )
        )
    return items


def load_pair(clean_path: str | Path, noisy_path: str | Path) -> tuple[Waveform, Waveform]:
    """Load a clean/noisy WAV pair, trimming both to the shorter length.

    Raises:
        ValueError: non-mono or non-16-bit files, or mismatched sample rates.
    """
    clean = read_wav(clean_path)
    noisy = read_wav(noisy_path)
    if clean.sample_rate != noisy.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: {clean_path} is {clean.sample_rate} Hz, "
            f"{noisy_path} is {noisy.sample_rate} Hz"
        )
    n = min(clean.samples.size, noisy.samples.size)
    return (
        Waveform(clean.samples[:n], clean.sample_rate),
        Waveform(noisy.samples[:n], noisy.sample_rate),
    )


def write_corpus(items: list[CorpusItem], out_dir: str | Path, seed: int) -> Path:
    """Write WAV pairs plus a JSON-lines manifest; returns the manifest path.

    Manifest rows hold paths relative to the manifest's directory, the pair's
    SNR, and the generating seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for i, item in enumerate(items):
            clean_name = f"clean_{i:04d}.wav"
            noisy_name = f"noisy_{i:04d}.wav"
            write_wav(out / clean_name, item.clean)
            write_wav(out / noisy_name, item.noisy)
            row = {
                "index": i,
                "clean": clean_name,
                "noisy": noisy_name,
                "snr_db": item.snr_db,
                "seed": seed,
            }
            fh.write(json.dumps(row) + "\n")
    return manifest


def read_manifest(manifest_path: str | Path) -> list[dict]:
    """Parse a JSON-lines manifest into row dicts with absolute paths."""
    path = Path(manifest_path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            row["clean"] = str((path.parent / row["clean"]).resolve())
            row["noisy"] = str((path.parent / row["noisy"]).resolve())
            rows.append(row)
    return rows
