"""Closed-form coefficient schedules and discrete time grids.

One :class:`Schedule` fixes three time-dependent quantities that define a
forward bridge from clean speech toward a noisy recording:

* ``interp_weight`` (weight on the clean spectrum in the clean/noisy
  interpolation, decaying from 1),
* ``mean_scale`` (overall shrinkage of the interpolated mean),
* ``gaussian_sd`` (standard deviation of the injected circular Gaussian).

Three process variants share these definitions.  ``VP_INTERP`` shrinks the
mean and interpolates toward the noisy signal; ``VP_PLAIN`` keeps the mean on
the clean signal (interpolation weight pinned to 1) and is the classical
variance-preserving process; ``VE_INTERP`` interpolates without shrinking
(mean scale pinned to 1) and uses a geometric noise-SD schedule.

All derivatives used by the drift/diffusion coefficients are analytic; the
test suite compares them against finite differences.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass

import numpy as np


class Variant(enum.Enum):
    """Process variant selector.

    Values are the canonical config strings.  ``parse_variant`` also accepts
    the compact literature aliases vpidm/vpdm/veidm.
    """

    VP_INTERP = "vp-interp"
    VP_PLAIN = "vp-plain"
    VE_INTERP = "ve-interp"


_VARIANT_ALIASES = {
    "vp-interp": Variant.VP_INTERP,
    "vp-plain": Variant.VP_PLAIN,
    "ve-interp": Variant.VE_INTERP,
    "vpidm": Variant.VP_INTERP,
    "vpdm": Variant.VP_PLAIN,
    "veidm": Variant.VE_INTERP,
}


def parse_variant(name: str) -> Variant:
    """Map a config string (canonical name or alias) to a :class:`Variant`."""
    try:
        return _VARIANT_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(
            f"unknown variant {name!r}; expected one of {sorted(_VARIANT_ALIASES)}"
        ) from None


@dataclass(frozen=True)
class Grid:
    """Evenly spaced reverse-sampling times on [epsilon, t_max].

    ``taus[k-1]`` is the time of 1-indexed step ``k``; ``taus[0] = epsilon``
    and ``taus[-1] = t_max`` exactly.
    """

    n_steps: int
    delta: float
    taus: np.ndarray

    def tau_at(self, k: int) -> float:
        """Time of 1-indexed grid point ``k`` in [1, n_steps]."""
        if not 1 <= k <= self.n_steps:
            raise ValueError(f"k must be in [1, {self.n_steps}], got {k}")
        return float(self.taus[k - 1])


@dataclass(frozen=True)
class Schedule:
    """Coefficient schedule over the process interval [0, t_max].

    Args:
        gamma: decay rate of the clean/noisy interpolation weight.
        beta_min: noise-rate line value at time 0 (VP variants).
        beta_max: noise-rate line value at time t_max (VP variants).
        t_max: end of the process interval.
        epsilon: first reverse-sampling time, in (0, t_max).
        variant: process variant.
        ve_sigma_min: geometric noise-SD start for VE_INTERP (None = unset).
        ve_sigma_max: geometric noise-SD end for VE_INTERP (None = unset).
    """

    gamma: float = 1.5
    beta_min: float = 0.1
    beta_max: float = 2.0
    t_max: float = 1.0
    epsilon: float = 0.04
    variant: Variant = Variant.VP_INTERP
    ve_sigma_min: float | None = 0.05
    ve_sigma_max: float | None = 0.5

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.beta_min < 0:
            raise ValueError(f"beta_min must be >= 0, got {self.beta_min}")
        if self.beta_max < self.beta_min:
            raise ValueError(
                f"beta_max must be >= beta_min, got {self.beta_max} < {self.beta_min}"
            )
        if self.t_max <= 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not 0 < self.epsilon < self.t_max:
            raise ValueError(
                f"epsilon must be in (0, t_max), got {self.epsilon} with "
                f"t_max={self.t_max}"
            )
        if (self.ve_sigma_min is None) != (self.ve_sigma_max is None):
            raise ValueError("ve_sigma_min and ve_sigma_max must be set together")
        if self.ve_sigma_min is not None and not 0 < self.ve_sigma_min < self.ve_sigma_max:
            raise ValueError(
                f"need 0 < ve_sigma_min < ve_sigma_max, got "
                f"{self.ve_sigma_min}, {self.ve_sigma_max}"
            )

    # -- time validation ---------------------------------------------------

    def _check_tau(self, tau, lo: float = 0.0) -> np.ndarray:
        arr = np.asarray(tau, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tau must be finite")
        if np.any(arr < lo) or np.any(arr > self.t_max):
            raise ValueError(
                f"tau must lie in [{lo}, {self.t_max}], got {tau}"
            )
        return arr

    # -- interpolation weight ----------------------------------------------

    def interp_weight(self, tau):
        """Weight on the clean spectrum; exp(-gamma*tau), pinned to 1 for VP_PLAIN."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VP_PLAIN:
            return np.ones_like(tau)[()]
        return np.exp(-self.gamma * tau)[()]

    def noise_weight(self, tau):
        """Weight on the recording's own noise: 1 - interp_weight(tau)."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VP_PLAIN:
            return np.zeros_like(tau)[()]
        return (-np.expm1(-self.gamma * tau))[()]

    def dlog_interp_weight(self, tau):
        """d/dtau of log interp_weight (constant -gamma; 0 for VP_PLAIN)."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VP_PLAIN:
            return np.zeros_like(tau)[()]
        return np.full_like(tau, -self.gamma)[()]

    def d_noise_weight(self, tau):
        """d/dtau of noise_weight: gamma*exp(-gamma*tau); 0 for VP_PLAIN."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VP_PLAIN:
            return np.zeros_like(tau)[()]
        return (self.gamma * np.exp(-self.gamma * tau))[()]

    # -- mean scale ----------------------------------------------------------

    def beta(self, tau):
        """Linear noise-rate schedule driving the VP mean scale."""
        tau = self._check_tau(tau)
        return ((self.beta_max - self.beta_min) * tau + self.beta_min)[()]

    def _beta_integral(self, tau: np.ndarray) -> np.ndarray:
        return 0.5 * (self.beta_max - self.beta_min) * tau**2 + self.beta_min * tau

    def mean_scale(self, tau):
        """Shrinkage of the interpolated mean; exp of the half beta integral."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VE_INTERP:
            return np.ones_like(tau)[()]
        return np.exp(-0.5 * self._beta_integral(tau))[()]

    def dlog_mean_scale(self, tau):
        """d/dtau of log mean_scale: -beta/2 for VP variants, 0 for VE_INTERP."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VE_INTERP:
            return np.zeros_like(tau)[()]
        return (-0.5 * ((self.beta_max - self.beta_min) * tau + self.beta_min))[()]

    def dlog_mean_times_interp(self, tau):
        """d/dtau of log(mean_scale * interp_weight), the state-decay rate."""
        return self.dlog_mean_scale(tau) + self.dlog_interp_weight(tau)

    # -- Gaussian spread -----------------------------------------------------

    def _ve_sigmas(self) -> tuple[float, float]:
        if self.ve_sigma_min is None or self.ve_sigma_max is None:
            raise ValueError(
                "VE_INTERP requires ve_sigma_min and ve_sigma_max to be set"
            )
        return self.ve_sigma_min, self.ve_sigma_max

    def gaussian_var(self, tau):
        """Variance of the injected complex Gaussian (per bin, E|.|^2)."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VE_INTERP:
            lo, hi = self._ve_sigmas()
            return (lo * (hi / lo) ** tau)[()] ** 2
        # 1 - exp(-B); expm1 keeps precision near tau = 0.
        return (-np.expm1(-self._beta_integral(tau)))[()]

    def gaussian_sd(self, tau):
        """Standard deviation of the injected complex Gaussian."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VE_INTERP:
            lo, hi = self._ve_sigmas()
            return (lo * (hi / lo) ** tau)[()]
        return np.sqrt(-np.expm1(-self._beta_integral(tau)))[()]

    def d_gaussian_var(self, tau):
        """d/dtau of gaussian_var, analytic."""
        tau = self._check_tau(tau)
        if self.variant is Variant.VE_INTERP:
            lo, hi = self._ve_sigmas()
            var = (lo * (hi / lo) ** tau) ** 2
            return (2.0 * np.log(hi / lo) * var)[()]
        beta = (self.beta_max - self.beta_min) * tau + self.beta_min
        return (beta * np.exp(-self._beta_integral(tau)))[()]

    # -- grid and identity -----------------------------------------------------

    def grid(self, n_steps: int) -> Grid:
        """Evenly divide [epsilon, t_max] into ``n_steps`` sampling times."""
        if n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {n_steps}")
        taus = np.linspace(self.epsilon, self.t_max, n_steps)
        delta = (self.t_max - self.epsilon) / (n_steps - 1)
        return Grid(n_steps=n_steps, delta=delta, taus=taus)

    def config_hash(self) -> str:
        """Stable hash of all schedule parameters, used to guard checkpoints."""
        payload = {
            "gamma": repr(self.gamma),
            "beta_min": repr(self.beta_min),
            "beta_max": repr(self.beta_max),
            "t_max": repr(self.t_max),
            "epsilon": repr(self.epsilon),
            "variant": self.variant.value,
            "ve_sigma_min": repr(self.ve_sigma_min),
            "ve_sigma_max": repr(self.ve_sigma_max),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
