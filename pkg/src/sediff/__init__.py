"""Diffusion-based single-channel speech enhancement in numpy.

The package implements a family of forward/reverse stochastic processes on
compressed complex spectrograms.  The forward process drags clean speech
toward a noisy recording while injecting Gaussian noise whose scale follows
a closed-form schedule; the reverse process walks back along that bridge
using a score function, which may be an exact oracle (for verification) or
a small trained network (for enhancement).

Modules
-------
spectral   waveform <-> compressed complex spectrogram transforms, SNR mixing
schedule   interpolation/scaling/noise schedules and time grids
diffusion  forward sampling, conditional statistics, analytic score
sde        drift/diffusion coefficients and Euler-Maruyama simulation
score      score-function interface, oracle, DSM loss, small trainable model
sampler    reverse-time enhancement loop and mid-trajectory output extraction
corpus     synthetic paired clean/noisy corpus generation and manifests
metrics    SI-SDR, residual noise power, log-spectral distance
verify     finite-difference and Monte Carlo consistency checks
cli        command-line entry points
"""

from sediff.corpus import CorpusSpec, generate, read_manifest, write_corpus
from sediff.diffusion import (
    DiffusionState,
    analytic_score,
    conditional_mean,
    forward_sample,
    log_density,
)
from sediff.metrics import log_spectral_distance, residual_noise_power, si_sdr
from sediff.sampler import (
    SamplerConfig,
    SamplerDiverged,
    enhance,
    enhance_early_stop,
)
from sediff.schedule import Grid, Schedule, Variant, parse_variant
from sediff.score import (
    ScoreFn,
    TrainConfig,
    TrainedScore,
    TrainingDiverged,
    dsm_loss,
    load_checkpoint,
    moving_average,
    oracle_score,
    save_checkpoint,
    train_small_model,
)
from sediff.spectral import (
    CompressionConfig,
    StftConfig,
    Waveform,
    analyze,
    mix_snr,
    read_wav,
    synthesize,
    write_wav,
)
from sediff.verify import CheckResult, verify_all, write_report

__all__ = [
    "CheckResult",
    "CompressionConfig",
    "CorpusSpec",
    "DiffusionState",
    "Grid",
    "SamplerConfig",
    "SamplerDiverged",
    "Schedule",
    "ScoreFn",
    "StftConfig",
    "TrainConfig",
    "TrainedScore",
    "TrainingDiverged",
    "Variant",
    "Waveform",
    "analytic_score",
    "analyze",
    "conditional_mean",
    "dsm_loss",
    "enhance",
    "enhance_early_stop",
    "forward_sample",
    "generate",
    "load_checkpoint",
    "log_density",
    "log_spectral_distance",
    "mix_snr",
    "moving_average",
    "oracle_score",
    "parse_variant",
    "read_manifest",
    "read_wav",
    "residual_noise_power",
    "save_checkpoint",
    "si_sdr",
    "synthesize",
    "train_small_model",
    "verify_all",
    "write_corpus",
    "write_report",
    "write_wav",
]

__version__ = "0.1.0"
