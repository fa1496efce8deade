"""Score functions: the callable interface, the exact oracle, the denoising
score-matching objective, and a small trainable model.

A score function estimates the gradient of the log conditional density of
the process state with respect to the state (conjugate convention).  The
oracle computes it exactly from the clean spectrum and exists for
verification; the trainable model approximates it from (state, noisy, time)
alone.  The model is deliberately tiny: a per-bin multilayer perceptron over
a 5x3 spectrogram context plus a sinusoidal time embedding, trained with
hand-written gradients in numpy.

The network estimates the clean spectrum; the score is the exact conditional
form -(S - mean)/var with the conditional mean assembled from that estimate
exactly as from ground truth.  Two consequences of this decomposition:

- The analytic passthrough keeps the reverse sampler's mean reversion exact
  no matter how wrong the network is, so score errors cannot feed back into
  runaway states (a bounded network output cannot counteract state growth if
  it must supply the whole score), and the network's task is the same
  scale-free denoising regression at every time.
- The sd-weighted score-matching loss is computed exactly in this form:
  ||sd*Psi + Z||^2 = (mean_scale*interp_weight/sd)^2 * ||estimate - X||^2,
  a denoising regression whose target is deterministic given the clean
  spectrum.

The clean estimate itself is not a free-form spectrum.  The head emits
per-bin gains on the state and on the conditioning spectrum plus a bounded
additive correction: X_hat = gS*S + gY*Y + r.  Magnitude decompression
amplifies absolute errors by a slope that grows with bin level, and the few
loudest bins carry nearly all waveform power, so a free-form output trained
under an equal-per-bin loss reconstructs unusable audio even at low rms
error.  Gains make loud-bin errors proportional to the bin itself and
inherit phase from the inputs; the silent majority of bins is handled by
closing both gains.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from sediff.diffusion import (
    DiffusionState,
    analytic_score,
    conditional_mean,
    forward_sample,
)
from sediff.schedule import Schedule
from sediff.spectral import ComplexSpectrum


class ScoreFn(ABC):
    """Callable score estimate Psi(S, Y, tau) -> same-shape complex spectrum."""

    @abstractmethod
    def evaluate(
        self, spectrum: ComplexSpectrum, noisy: ComplexSpectrum, tau: float
    ) -> ComplexSpectrum:
        """Estimate the conditional score of ``spectrum`` at time ``tau``."""

    def __call__(
        self, spectrum: ComplexSpectrum, noisy: ComplexSpectrum, tau: float
    ) -> ComplexSpectrum:
        return self.evaluate(spectrum, noisy, tau)


class OracleScore(ScoreFn):
    """Exact conditional score computed from the true clean spectrum.

    Verification-only: it answers with -(S - mean)/var using ground truth
    the deployed model never sees.
    """

    def __init__(self, clean: ComplexSpectrum, s: Schedule):
        self.clean = np.asarray(clean, dtype=np.complex128)
        self.schedule = s

    def evaluate(
        self, spectrum: ComplexSpectrum, noisy: ComplexSpectrum, tau: float
    ) -> ComplexSpectrum:
        state = DiffusionState(spectrum, tau)
        return analytic_score(state, self.clean, noisy, self.schedule)


def oracle_score(clean: ComplexSpectrum, s: Schedule) -> OracleScore:
    """Build the exact score function for a known clean spectrum."""
    return OracleScore(clean, s)


def dsm_loss(
    psi: ScoreFn,
    batch: Sequence[tuple[ComplexSpectrum, ComplexSpectrum]],
    s: Schedule,
    rng: np.random.Generator,
) -> float:
    """Denoising score-matching loss over a batch of (clean, noisy) pairs.

    For each pair a time is drawn uniformly from (epsilon, t_max], a state is
    sampled from the forward law, and the sd-weighted score error
    ||sd * Psi(S, Y, tau) + Z||^2 is accumulated, normalized by batch size
    and bin count.  The exact oracle scores -Z/sd, so its loss is 0; the
    zero function scores E|Z|^2 = 1.

    Args:
        psi: score function under evaluation.
        batch: nonempty sequence of (clean, noisy) spectra.
        s: schedule defining the forward law.
        rng: generator for the time and noise draws.

    Returns:
        Mean weighted squared error per bin.
    """
    if len(batch) == 0:
        raise ValueError("dsm_loss requires a nonempty batch")
    total = 0.0
    n_bins = 0
    for clean, noisy in batch:
        # t_max - u*(t_max - epsilon) with u in [0, 1) lands in (epsilon, t_max].
        tau = s.t_max - rng.random() * (s.t_max - s.epsilon)
        state, _ = forward_sample(clean, noisy, s, tau, rng)
        # Standardize the state's deviation with the same mean/var/ops the
        # analytic score uses, so the oracle's residual cancels bitwise and
        # its loss is exactly zero rather than merely tiny.
        mean = conditional_mean(clean, noisy, s, tau)
        sd = s.gaussian_sd(tau)
        z_target = sd * ((state.spectrum - mean) / s.gaussian_var(tau))
        weighted = sd * psi.evaluate(state.spectrum, noisy, tau)
        total += float(np.sum(np.abs(weighted + z_target) ** 2))
        n_bins += z_target.size
    return total / n_bins


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


class CheckpointMismatch(ValueError):
    """Raised when a checkpoint was trained under a different schedule."""


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop parameters for the small score model.

    Args:
        batch_size: utterance pairs per update.
        learning_rate: step size (> 0; exactly 0 freezes the parameters,
            useful for no-op checks).
        momentum: classical momentum coefficient for SGD.
        steps: number of parameter updates.
        bins_per_item: time-frequency bins sampled per pair per update;
            gradients are unbiased estimates of the full-spectrum loss.
        hidden1: width of the first hidden layer.
        hidden2: width of the second hidden layer.
        hidden3: width of the third hidden layer.
        optimizer: "sgd" (momentum) or "adam".
        seed: RNG seed; fixes batches, times, noise, and init bit-for-bit.
        loss_window: moving-average window for reporting loss reduction.
    """

    batch_size: int = 4
    learning_rate: float = 0.03
    momentum: float = 0.9
    steps: int = 1500
    bins_per_item: int = 2048
    hidden1: int = 96
    hidden2: int = 64
    hidden3: int = 48
    optimizer: str = "sgd"
    seed: int = 0
    loss_window: int = 25

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if min(self.bins_per_item, self.hidden1, self.hidden2, self.hidden3) < 1:
            raise ValueError("bins_per_item and hidden sizes must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.loss_window < 1:
            raise ValueError(f"loss_window must be >= 1, got {self.loss_window}")


# 5 frames x 3 bins neighborhood of 4 real feature maps (Re/Im of state and
# noisy).  Wider in time because tonal content holds its frequency across
# frames, so extra frames average down the Gaussian component, while extra
# frequency neighbors mostly add unrelated bins.
_TIME_HALO = 2
_FREQ_HALO = 1
_PATCH_OFFSETS = [
    (dl, dm)
    for dl in range(-_TIME_HALO, _TIME_HALO + 1)
    for dm in range(-_FREQ_HALO, _FREQ_HALO + 1)
]
_N_MAPS = 4
_EMB_FREQS = (1.0, 2.0, 4.0, 8.0)
FEATURE_DIM = _N_MAPS * len(_PATCH_OFFSETS) + 2 * len(_EMB_FREQS)

# Output head bounds: gains on the state and conditioning bins live in
# (0, _GAIN_MAX); the additive correction is confined to a disc of radius
# about _RESID_SCALE so it can fix mid-level bins without ever dominating
# loud ones.
_GAIN_MAX = 1.5
_RESID_SCALE = 0.25
_N_OUT = 4


def _center_basis(
    spectrum: ComplexSpectrum, noisy: ComplexSpectrum, sel: np.ndarray | None
) -> np.ndarray:
    """Per-bin (S_re, S_im, Y_re, Y_im) rows the output gains multiply."""
    s_flat = np.asarray(spectrum).ravel()
    y_flat = np.asarray(noisy).ravel()
    if sel is not None:
        s_flat = s_flat[sel]
        y_flat = y_flat[sel]
    return np.stack([s_flat.real, s_flat.imag, y_flat.real, y_flat.imag], axis=1)


def _head(out: np.ndarray, basis: np.ndarray) -> tuple[np.ndarray, ...]:
    """Map raw head outputs to predictions; returns intermediates for backprop."""
    gate = expit(out[:, :2])
    resid = np.tanh(out[:, 2:])
    gains = _GAIN_MAX * gate
    pred = np.stack(
        [
            gains[:, 0] * basis[:, 0] + gains[:, 1] * basis[:, 2]
            + _RESID_SCALE * resid[:, 0],
            gains[:, 0] * basis[:, 1] + gains[:, 1] * basis[:, 3]
            + _RESID_SCALE * resid[:, 1],
        ],
        axis=1,
    )
    return pred, gate, resid


def _patch_features(
    spectrum: ComplexSpectrum, noisy: ComplexSpectrum, sel: np.ndarray | None
) -> np.ndarray:
    """Per-bin features: zero-padded patch context of 4 maps, flattened.

    Args:
        spectrum: process state, shape (L, M).
        noisy: conditioning spectrum, same shape.
        sel: flat bin indices to gather, or None for all bins.

    Returns:
        Array of shape (n_sel, 4 * patch size) in offset-major, map-minor
        order.
    """
    n_frames, n_bins = spectrum.shape
    maps = (spectrum.real, spectrum.imag, noisy.real, noisy.imag)
    padded = np.zeros((_N_MAPS, n_frames + 2 * _TIME_HALO, n_bins + 2 * _FREQ_HALO))
    for i, m in enumerate(maps):
        padded[i, _TIME_HALO:-_TIME_HALO, _FREQ_HALO:-_FREQ_HALO] = m
    cols = []
    for dl, dm in _PATCH_OFFSETS:
        pane = padded[
            :,
            _TIME_HALO + dl : _TIME_HALO + dl + n_frames,
            _FREQ_HALO + dm : _FREQ_HALO + dm + n_bins,
        ]
        flat = pane.reshape(_N_MAPS, -1)
        cols.append(flat if sel is None else flat[:, sel])
    return np.concatenate(cols, axis=0).T


def _time_embedding(tau: float, t_max: float) -> np.ndarray:
    phase = np.pi * np.asarray(_EMB_FREQS) * (tau / t_max)
    return np.concatenate([np.sin(phase), np.cos(phase)])


def init_params(
    hidden1: int, hidden2: int, hidden3: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Xavier-uniform init of the per-bin MLP (FEATURE_DIM -> h1 -> h2 -> h3 -> 4)."""
    def xavier(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, (fan_in, fan_out))

    return {
        "w1": xavier(FEATURE_DIM, hidden1),
        "b1": np.zeros(hidden1),
        "w2": xavier(hidden1, hidden2),
        "b2": np.zeros(hidden2),
        "w3": xavier(hidden2, hidden3),
        "b3": np.zeros(hidden3),
        # Small output layer plus gate biases below the sigmoid midpoint
        # start the clean estimate near zero, the optimum for the silent
        # majority of bins, and tame early gradient spikes from heavily
        # weighted small-time samples.
        "w4": 0.25 * xavier(hidden3, _N_OUT),
        "b4": np.array([-2.0, -2.0, 0.0, 0.0]),
    }


def loss_and_grads(
    params: dict[str, np.ndarray],
    feats: np.ndarray,
    basis: np.ndarray,
    target: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted mean squared complex prediction error and its gradients.

    Args:
        params: MLP parameters (see :func:`init_params`).
        feats: (n, FEATURE_DIM) input rows.
        basis: (n, 4) center-bin values the gains multiply
            (see :func:`_center_basis`).
        target: (n,) complex targets for the predicted clean spectrum.
        weights: optional (n,) nonnegative row weights; None means all ones.

    Returns:
        (loss, grads): loss = mean w * |pred - target|^2 over rows; grads
        matches the params dict.  Verified against finite differences in the
        tests.
    """
    h1 = np.tanh(feats @ params["w1"] + params["b1"])
    h2 = np.tanh(h1 @ params["w2"] + params["b2"])
    h3 = np.tanh(h2 @ params["w3"] + params["b3"])
    out = h3 @ params["w4"] + params["b4"]
    pred, gate, resid = _head(out, basis)
    diff = np.stack([pred[:, 0] - target.real, pred[:, 1] - target.imag], axis=1)
    n = feats.shape[0]
    if weights is None:
        weighted = diff
    else:
        weighted = weights[:, None] * diff
    loss = float(np.sum(weighted * diff)) / n

    d_pred = 2.0 * weighted / n
    d_gains = np.stack(
        [
            d_pred[:, 0] * basis[:, 0] + d_pred[:, 1] * basis[:, 1],
            d_pred[:, 0] * basis[:, 2] + d_pred[:, 1] * basis[:, 3],
        ],
        axis=1,
    )
    d_out = np.concatenate(
        [
            d_gains * _GAIN_MAX * gate * (1.0 - gate),
            d_pred * _RESID_SCALE * (1.0 - resid**2),
        ],
        axis=1,
    )
    g4 = h3.T @ d_out
    d_h3 = (d_out @ params["w4"].T) * (1.0 - h3**2)
    g3 = h2.T @ d_h3
    d_h2 = (d_h3 @ params["w3"].T) * (1.0 - h2**2)
    g2 = h1.T @ d_h2
    d_h1 = (d_h2 @ params["w2"].T) * (1.0 - h1**2)
    g1 = feats.T @ d_h1
    grads = {
        "w1": g1,
        "b1": d_h1.sum(axis=0),
        "w2": g2,
        "b2": d_h2.sum(axis=0),
        "w3": g3,
        "b3": d_h3.sum(axis=0),
        "w4": g4,
        "b4": d_out.sum(axis=0),
    }
    return loss, grads


class TrainedScore(ScoreFn):
    """Score function backed by the small per-bin MLP.

    The network output approximates the clean spectrum; the score is the
    exact conditional form evaluated with that estimate in place of ground
    truth.  See the module docstring for why this decomposition.
    """

    def __init__(self, params: dict[str, np.ndarray], s: Schedule):
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.schedule = s

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def predict_clean(
        self, spectrum: ComplexSpectrum, noisy: ComplexSpectrum, tau: float
    ) -> ComplexSpectrum:
        """Estimated clean spectrum, same shape as the inputs."""
        spectrum = np.asarray(spectrum)
        noisy = np.asarray(noisy)
        feats = _patch_features(spectrum, noisy, sel=None)
        emb = _time_embedding(tau, self.schedule.t_max)
        feats = np.concatenate(
            [feats, np.broadcast_to(emb, (feats.shape[0], emb.size))], axis=1
        )
        h1 = np.tanh(feats @ self.params["w1"] + self.params["b1"])
        h2 = np.tanh(h1 @ self.params["w2"] + self.params["b2"])
        h3 = np.tanh(h2 @ self.params["w3"] + self.params["b3"])
        out = h3 @ self.params["w4"] + self.params["b4"]
        pred, _, _ = _head(out, _center_basis(spectrum, noisy, sel=None))
        return (pred[:, 0] + 1j * pred[:, 1]).reshape(spectrum.shape)

    def evaluate(
        self, spectrum: ComplexSpectrum, noisy: ComplexSpectrum, tau: float
    ) -> ComplexSpectrum:
        spectrum = np.asarray(spectrum, dtype=np.complex128)
        noisy = np.asarray(noisy, dtype=np.complex128)
        clean_hat = self.predict_clean(spectrum, noisy, tau)
        return analytic_score(
            DiffusionState(spectrum, tau), clean_hat, noisy, self.schedule
        )


def train_small_model(
    pairs: Sequence[tuple[ComplexSpectrum, ComplexSpectrum]],
    cfg: TrainConfig,
    s: Schedule,
) -> tuple[TrainedScore, list[float]]:
    """Fit the small score model by stochastic gradient descent.

    Each update samples ``batch_size`` pairs, one time per pair from
    (epsilon, t_max], a forward state, and ``bins_per_item`` bins.  The
    regression target is the clean spectrum, with per-row weight
    (mean_scale*interp_weight/sd)^2, which makes each minibatch loss exactly
    the sd-weighted score error ||sd*Psi + Z||^2 of the model on those bins.
    The recorded trace holds one minibatch loss per step; a non-finite loss
    aborts.

    Args:
        pairs: nonempty sequence of (clean, noisy) compressed spectra.
        cfg: training parameters.
        s: schedule defining the forward law (stored with the model).

    Returns:
        (model, loss_trace).
    """
    if len(pairs) == 0:
        raise ValueError("training requires a nonempty corpus")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.hidden1, cfg.hidden2, cfg.hidden3, rng)
    slots = {k: np.zeros_like(v) for k, v in params.items()}  # momentum / adam m
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    trace: list[float] = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(pairs), cfg.batch_size)
        loss_acc = 0.0
        grad_acc = {k: np.zeros_like(v) for k, v in params.items()}
        for i in idx:
            clean, noisy = pairs[i]
            tau = s.t_max - rng.random() * (s.t_max - s.epsilon)
            state, _ = forward_sample(clean, noisy, s, tau, rng)
            weight = (
                s.mean_scale(tau) * s.interp_weight(tau)
            ) ** 2 / s.gaussian_var(tau)
            target_full = np.asarray(clean, dtype=np.complex128).ravel()
            n_total = target_full.size
            n_sel = min(cfg.bins_per_item, n_total)
            sel = rng.choice(n_total, size=n_sel, replace=False)
            feats = _patch_features(state.spectrum, noisy, sel)
            emb = _time_embedding(tau, s.t_max)
            feats = np.concatenate(
                [feats, np.broadcast_to(emb, (n_sel, emb.size))], axis=1
            )
            loss_i, grads_i = loss_and_grads(
                params,
                feats,
                _center_basis(state.spectrum, noisy, sel),
                target_full[sel],
                np.full(n_sel, weight),
            )
            loss_acc += loss_i / cfg.batch_size
            for k in grad_acc:
                grad_acc[k] += grads_i[k] / cfg.batch_size
        if not np.isfinite(loss_acc):
            raise TrainingDiverged(f"loss became non-finite at step {step}")
        trace.append(loss_acc)
        if cfg.optimizer == "sgd":
            for k in params:
                slots[k] = cfg.momentum * slots[k] + grad_acc[k]
                params[k] = params[k] - cfg.learning_rate * slots[k]
        else:  # adam
            b1, b2, eps_hat = 0.9, 0.999, 1e-8
            t = step + 1
            for k in params:
                slots[k] = b1 * slots[k] + (1 - b1) * grad_acc[k]
                adam_v[k] = b2 * adam_v[k] + (1 - b2) * grad_acc[k] ** 2
                m_hat = slots[k] / (1 - b1**t)
                v_hat = adam_v[k] / (1 - b2**t)
                params[k] = params[k] - cfg.learning_rate * m_hat / (
                    np.sqrt(v_hat) + eps_hat
                )
    return TrainedScore(params, s), trace


def moving_average(trace: Sequence[float], window: int) -> np.ndarray:
    """Trailing moving average of a loss trace (shorter head uses what exists)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    arr = np.asarray(trace, dtype=np.float64)
    csum = np.cumsum(arr)
    out = np.empty_like(arr)
    for i in range(arr.size):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo > 0 else 0.0)) / (i - lo + 1)
    return out


CHECKPOINT_FORMAT = "sediff-score-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    model: TrainedScore, path: str | Path, train_seed: int | None = None
) -> None:
    """Serialize the model with its schedule hash for load-time validation."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "schedule_hash": model.schedule.config_hash(),
        "train_seed": train_seed,
        "params": {k: v.tolist() for k, v in model.params.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path: str | Path, s: Schedule) -> TrainedScore:
    """Load a checkpoint, refusing one trained under a different schedule.

    Raises:
        CheckpointMismatch: wrong format, version, or schedule hash.
    """
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointMismatch(f"{path} is not a score checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(
            f"unsupported checkpoint version {payload.get('version')}"
        )
    if payload.get("schedule_hash") != s.config_hash():
        raise CheckpointMismatch(
            "checkpoint schedule hash does not match the configured schedule; "
            "retrain or fix the config"
        )
    params = {k: np.asarray(v, dtype=np.float64) for k, v in payload["params"].items()}
    return TrainedScore(params, s)
