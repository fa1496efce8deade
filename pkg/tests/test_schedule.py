"""Schedule coefficients against independently derived closed-form values.

The reference constants below were computed from the definitions alone
(exponential interpolation weight, linear noise-rate, exponential mean
scale) with plain math before the implementation was consulted.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sediff.schedule import Grid, Schedule, Variant, parse_variant

# exp(-1.5)
INTERP_AT_1 = 0.22313016014842982
# exp(-(0.05*tau + 0.475*tau^2)) at tau = 1, 0.5, 0.04
MEAN_AT_1 = 0.59155536436681511
MEAN_AT_HALF = 0.86610424705746702
MEAN_AT_EPS = 0.99724380529832046
# sqrt(1 - mean^2)
SD_AT_1 = 0.80626438026793956
SD_AT_HALF = 0.49986341457343941
# -(beta(0.5)/2 + gamma) = -(0.525 + 1.5)
DLOG_MEAN_INTERP_AT_HALF = -2.025
# geometric 0.05 * (0.5/0.05)**0.5
VE_SD_AT_HALF = 0.15811388300841897

REL = 1e-12


class TestVpInterpSpots:
    def test_interp_weight(self, s):
        assert s.interp_weight(1.0) == pytest.approx(INTERP_AT_1, rel=REL)
        assert s.interp_weight(0.0) == 1.0

    def test_noise_weight_complements(self, s):
        for tau in np.linspace(0.0, 1.0, 11):
            assert s.noise_weight(tau) == pytest.approx(
                1.0 - s.interp_weight(tau), rel=REL, abs=1e-15
            )

    def test_mean_scale(self, s):
        assert s.mean_scale(0.0) == 1.0
        assert s.mean_scale(1.0) == pytest.approx(MEAN_AT_1, rel=REL)
        assert s.mean_scale(0.5) == pytest.approx(MEAN_AT_HALF, rel=REL)
        assert s.mean_scale(0.04) == pytest.approx(MEAN_AT_EPS, rel=REL)

    def test_gaussian_sd(self, s):
        assert s.gaussian_sd(0.0) == 0.0
        assert s.gaussian_sd(1.0) == pytest.approx(SD_AT_1, rel=REL)
        assert s.gaussian_sd(0.5) == pytest.approx(SD_AT_HALF, rel=REL)

    def test_beta_is_the_configured_line(self, s):
        assert s.beta(0.0) == pytest.approx(0.1, rel=REL)
        assert s.beta(1.0) == pytest.approx(2.0, rel=REL)
        assert s.beta(0.5) == pytest.approx(1.05, rel=REL)

    def test_dlog_mean_times_interp(self, s):
        assert s.dlog_mean_times_interp(0.5) == pytest.approx(
            DLOG_MEAN_INTERP_AT_HALF, rel=REL
        )

    def test_dlog_interp_weight_is_constant_decay(self, s):
        for tau in (0.0, 0.3, 1.0):
            assert s.dlog_interp_weight(tau) == pytest.approx(-s.gamma, rel=REL)


class TestDerivativesMatchFiniteDifferences:
    def test_d_gaussian_var(self, s):
        h = 1e-6
        for tau in np.linspace(0.1, 0.9, 9):
            fd = (s.gaussian_var(tau + h) - s.gaussian_var(tau - h)) / (2 * h)
            assert s.d_gaussian_var(tau) == pytest.approx(fd, rel=1e-6)

    def test_dlog_mean_scale(self, s):
        h = 1e-6
        for tau in np.linspace(0.1, 0.9, 9):
            fd = (
                math.log(s.mean_scale(tau + h)) - math.log(s.mean_scale(tau - h))
            ) / (2 * h)
            assert s.dlog_mean_scale(tau) == pytest.approx(fd, rel=1e-6)

    def test_d_noise_weight(self, s):
        h = 1e-6
        for tau in np.linspace(0.1, 0.9, 9):
            fd = (s.noise_weight(tau + h) - s.noise_weight(tau - h)) / (2 * h)
            assert s.d_noise_weight(tau) == pytest.approx(fd, rel=1e-6)


class TestVariants:
    def test_plain_freezes_interpolation(self):
        plain = Schedule(variant=Variant.VP_PLAIN)
        for tau in (0.0, 0.4, 1.0):
            assert plain.interp_weight(tau) == 1.0
            assert plain.noise_weight(tau) == 0.0
            assert plain.dlog_interp_weight(tau) == 0.0

    def test_plain_keeps_vp_noise_law(self, s):
        plain = Schedule(variant=Variant.VP_PLAIN)
        for tau in (0.2, 0.7, 1.0):
            assert plain.gaussian_sd(tau) == s.gaussian_sd(tau)
            assert plain.mean_scale(tau) == s.mean_scale(tau)

    def test_ve_unit_mean_scale(self):
        ve = Schedule(variant=Variant.VE_INTERP)
        for tau in (0.0, 0.5, 1.0):
            assert ve.mean_scale(tau) == 1.0
            assert ve.dlog_mean_scale(tau) == 0.0

    def test_ve_geometric_noise(self):
        ve = Schedule(variant=Variant.VE_INTERP)
        assert ve.gaussian_sd(0.0) == pytest.approx(0.05, rel=REL)
        assert ve.gaussian_sd(1.0) == pytest.approx(0.5, rel=REL)
        assert ve.gaussian_sd(0.5) == pytest.approx(VE_SD_AT_HALF, rel=REL)

    def test_ve_keeps_interpolation(self):
        ve = Schedule(variant=Variant.VE_INTERP)
        s = Schedule()
        for tau in (0.2, 0.7):
            assert ve.interp_weight(tau) == s.interp_weight(tau)

    def test_zero_gamma_disables_interpolation(self):
        frozen = Schedule(gamma=0.0)
        for tau in (0.0, 0.5, 1.0):
            assert frozen.interp_weight(tau) == 1.0


class TestParseVariant:
    @pytest.mark.parametrize(
        "name,expected",
        [
            ("vp-interp", Variant.VP_INTERP),
            ("vp-plain", Variant.VP_PLAIN),
            ("ve-interp", Variant.VE_INTERP),
            ("vpidm", Variant.VP_INTERP),
            ("vpdm", Variant.VP_PLAIN),
            ("veidm", Variant.VE_INTERP),
            ("  VPIDM ", Variant.VP_INTERP),
        ],
    )
    def test_aliases(self, name, expected):
        assert parse_variant(name) is expected

    def test_unknown_rejected(self):
        with pytest.raises(ValueError, match="unknown variant"):
            parse_variant("ddpm")


class TestGrid:
    def test_spans_epsilon_to_t_max(self, s):
        grid = s.grid(25)
        assert grid.n_steps == 25
        assert grid.taus[0] == s.epsilon
        assert grid.taus[-1] == s.t_max
        assert grid.delta == pytest.approx((s.t_max - s.epsilon) / 24, rel=REL)
        assert np.allclose(np.diff(grid.taus), grid.delta, rtol=0, atol=1e-12)

    def test_tau_at_is_one_indexed(self, s):
        grid = s.grid(10)
        assert grid.tau_at(1) == s.epsilon
        assert grid.tau_at(10) == s.t_max
        with pytest.raises(ValueError):
            grid.tau_at(0)
        with pytest.raises(ValueError):
            grid.tau_at(11)

    def test_too_few_steps_rejected(self, s):
        with pytest.raises(ValueError):
            s.grid(1)


class TestValidation:
    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError, match="gamma"):
            Schedule(gamma=-0.1)

    def test_beta_order_enforced(self):
        with pytest.raises(ValueError):
            Schedule(beta_min=2.0, beta_max=0.1)

    def test_epsilon_inside_interval(self):
        with pytest.raises(ValueError):
            Schedule(epsilon=0.0)
        with pytest.raises(ValueError):
            Schedule(epsilon=1.5, t_max=1.0)

    def test_config_hash_tracks_parameters(self):
        assert Schedule().config_hash() == Schedule().config_hash()
        assert Schedule().config_hash() != Schedule(gamma=1.6).config_hash()
        assert (
            Schedule().config_hash()
            != Schedule(variant=Variant.VP_PLAIN).config_hash()
        )


@given(
    t1=st.floats(min_value=0.0, max_value=1.0),
    t2=st.floats(min_value=0.0, max_value=1.0),
)
def test_mean_scale_is_nonincreasing(t1, t2):
    s = Schedule()
    lo, hi = min(t1, t2), max(t1, t2)
    assert s.mean_scale(lo) >= s.mean_scale(hi)


@given(tau=st.floats(min_value=0.0, max_value=1.0))
def test_gaussian_var_stays_in_unit_interval(tau):
    s = Schedule()
    assert 0.0 <= s.gaussian_var(tau) < 1.0


@given(tau=st.floats(min_value=0.0, max_value=1.0))
def test_weights_stay_in_unit_interval(tau):
    s = Schedule()
    assert 0.0 < s.interp_weight(tau) <= 1.0
    assert 0.0 <= s.noise_weight(tau) < 1.0
