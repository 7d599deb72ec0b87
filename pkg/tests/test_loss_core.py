import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyaff.loss_core import (
    GAMMA_LIMIT,
    AsymmetryConfig,
    EdgeLogits,
    analyze_gamma,
    edge_loss,
    edge_loss_arrays,
    edge_loss_gradient,
    edge_loss_gradient_arrays,
    edge_probability,
    edge_probability_arrays,
    f_of_p,
    gamma_closed_form_min,
    reduce_edge_losses,
)

mp.mp.dps = 40

logits = st.floats(-12, 12, allow_nan=False)
deltas = st.floats(0, 4)
gammas = st.floats(0, 2.7)


def mp_loss(a, b, delta, gamma):
    s = lambda x: 1 / (1 + mp.e ** (-mp.mpf(x)))
    p = s(a - delta) * s(b - delta) + s(delta - a) * s(delta - b)
    return mp.e ** (gamma * (p - mp.mpf(1) / 2)) * -mp.log(p)


def test_probability_at_large_agreeing_logits():
    # sigma(10)^2 + sigma(-10)^2 to 40 digits
    assert edge_probability(EdgeLogits(10, 10)) == pytest.approx(0.99990920838452809666, abs=1e-15)


def test_probability_of_disagreeing_endpoints_is_small():
    assert edge_probability(EdgeLogits(8, -8)) < 1e-3


@pytest.mark.parametrize(
    "a, b, delta, gamma",
    [(-3, -3, 2.5, 1.5), (3, 3, 2.5, 1.5), (0.3, -1.7, 0.0, 0.0), (5, 4, 3.5, 2.5), (-6, 2, 1.0, 2.0)],
)
def test_loss_matches_high_precision(a, b, delta, gamma):
    got = edge_loss(EdgeLogits(a, b), AsymmetryConfig(delta, gamma))
    assert got == pytest.approx(float(mp_loss(a, b, delta, gamma)), rel=1e-12)


def test_frozen_asymmetric_values():
    cfg = AsymmetryConfig(2.5, 1.5)
    assert edge_loss(EdgeLogits(-3, -3), cfg) == pytest.approx(0.017024477977749838, rel=1e-12)
    assert edge_loss(EdgeLogits(3, 3), cfg) == pytest.approx(0.66410761785645490, rel=1e-12)


def test_gradient_matches_high_precision_derivative():
    a, b, delta, gamma = 1.3, -0.4, 2.0, 2.2
    da = mp.diff(lambda x: mp_loss(x, b, delta, gamma), a)
    db = mp.diff(lambda x: mp_loss(a, x, delta, gamma), b)
    ga, gb = edge_loss_gradient(EdgeLogits(a, b), AsymmetryConfig(delta, gamma))
    assert ga == pytest.approx(float(da), rel=1e-10)
    assert gb == pytest.approx(float(db), rel=1e-10)


@pytest.mark.parametrize("delta", [0.0, 1.5, 2.5, 3.5])
@pytest.mark.parametrize("gamma", [0.0, 1.5, 2.5])
def test_gradient_vanishes_at_shifted_origin(delta, gamma):
    ga, gb = edge_loss_gradient(EdgeLogits(delta, delta), AsymmetryConfig(delta, gamma))
    assert math.hypot(ga, gb) < 1e-12


@settings(max_examples=200, deadline=None)
@given(logits, logits, gammas)
def test_symmetric_loss_is_invariant_under_joint_negation(a, b, gamma):
    assert edge_loss_arrays(a, b, 0.0, gamma) == pytest.approx(edge_loss_arrays(-a, -b, 0.0, gamma), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(logits, logits, deltas, gammas)
def test_endpoint_swap_symmetry(a, b, delta, gamma):
    assert edge_loss_arrays(a, b, delta, gamma) == edge_loss_arrays(b, a, delta, gamma)
    _, ga, gb = edge_loss_gradient_arrays(a, b, delta, gamma)
    _, gb2, ga2 = edge_loss_gradient_arrays(b, a, delta, gamma)
    assert (ga, gb) == (ga2, gb2)


@settings(max_examples=200, deadline=None)
@given(logits, logits, deltas)
def test_probability_in_unit_interval_and_loss_nonnegative(a, b, delta):
    p = edge_probability_arrays(a, b, delta)
    assert 0 < p <= 1
    assert edge_loss_arrays(a, b, delta, 1.5) >= 0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 6), st.floats(0.5, 4), gammas)
def test_positive_delta_prefers_double_negative(a, delta, gamma):
    assert edge_loss_arrays(-a, -a, delta, gamma) < edge_loss_arrays(a, a, delta, gamma)


def test_loss_bounded_at_probability_floor():
    loss = edge_loss_arrays(60.0, -60.0, 0.0, 0.0)
    assert math.isfinite(loss)
    assert loss == pytest.approx(-math.log(1e-12) * math.exp(0), rel=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        AsymmetryConfig(-0.1, 1.0)
    with pytest.raises(ValueError):
        AsymmetryConfig(1.0, -1.0)
    with pytest.raises(ValueError):
        AsymmetryConfig(1.0, 3.0)
    assert AsymmetryConfig(1.0, 3.0, allow_unstable=True).gamma == 3.0
    assert AsymmetryConfig().symmetric
    with pytest.raises(ValueError):
        EdgeLogits(float("nan"), 0.0)


def test_f_of_p_rejects_nonpositive():
    with pytest.raises(ValueError):
        f_of_p(0.0, 1.0)
    assert f_of_p(1.0, 2.0) == 1.0


@pytest.mark.parametrize("gamma", [1.2, 1.5, 2.0, 2.5, 2.8, 3.5, 4.5])
def test_closed_form_minimum(gamma):
    argmin, value = gamma_closed_form_min(gamma)
    assert argmin == pytest.approx(1 / gamma)
    assert value == pytest.approx(gamma * (1 - math.log(gamma)), abs=1e-15)
    res = analyze_gamma(gamma)
    assert res.min_value == pytest.approx(value, abs=1e-9)
    assert res.argmin_p == pytest.approx(argmin, abs=1e-6)


def test_closed_form_below_one_sits_on_boundary():
    assert gamma_closed_form_min(0.5) == (1.0, 1.0)
    assert analyze_gamma(0.5).min_value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("gamma, extra", [(0.5, False), (1.5, False), (2.5, False), (2.7, False),
                                          (2.75, True), (2.8, True), (3.5, True), (4.5, True)])
def test_extra_stationary_points_appear_past_e(gamma, extra):
    assert analyze_gamma(gamma).has_extra_stationary_points is extra
    assert (gamma > GAMMA_LIMIT) is extra


def test_analyze_gamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        analyze_gamma(0.0)


def test_reduce_edge_losses():
    assert reduce_edge_losses([]) == 0.0
    assert reduce_edge_losses([1e16, 1.0, -1e16, 1.0]) == 0.5
    assert reduce_edge_losses(np.array([0.25, 0.75])) == 0.5


@pytest.mark.parametrize("delta", [0.0, 1.0, 3.5])
def test_shifted_origin_is_the_even_point(delta):
    assert edge_probability(EdgeLogits(delta, delta), delta) == 0.5
    for gamma in (0.0, 1.0, 2.5):
        assert edge_loss(EdgeLogits(delta, delta), AsymmetryConfig(delta, gamma)) == pytest.approx(math.log(2), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(logits, logits)
def test_unshifted_gradient_is_odd(a, b):
    _, ga, gb = edge_loss_gradient_arrays(a, b)
    _, na, nb = edge_loss_gradient_arrays(-a, -b)
    assert ga == pytest.approx(-na, abs=1e-15) and gb == pytest.approx(-nb, abs=1e-15)


def test_f_of_p_reference_points():
    assert f_of_p(1.0, 7.3) == 1.0
    assert f_of_p(0.5, 2 / math.log(2)) == pytest.approx(0.0, abs=1e-15)
    assert gamma_closed_form_min(1.0) == (1.0, 1.0)
    assert gamma_closed_form_min(math.e)[1] == pytest.approx(0.0, abs=1e-15)
    assert gamma_closed_form_min(2.5)[1] == pytest.approx(0.20927317031461234, rel=1e-14)


def test_reduce_matches_sequential_sum():
    vals = np.random.default_rng(1).exponential(1.0, 1000)
    total = 0.0
    for v in vals:
        total += v
    assert reduce_edge_losses(vals) == pytest.approx(total / 1000, rel=1e-14)
    assert reduce_edge_losses([math.log(2)] * 2) == math.log(2)


def test_floor_is_inactive_for_moderate_logits():
    # The smallest P over |y| <= 20, delta <= 4 sits at opposite extremes.
    y = np.linspace(-20, 20, 401)
    for delta in (0.0, 2.0, 4.0):
        p = edge_probability_arrays(y[:, None], y[None, :], delta)
        assert p.min() > 1e-12


def test_asymmetry_grid():
    for delta in np.arange(0.5, 3.51, 0.5):
        for gamma in (0.0, 1.5, 2.5):
            for a in np.arange(0.5, 6.01, 0.5):
                assert edge_loss_arrays(-a, -a, delta, gamma) < edge_loss_arrays(a, a, delta, gamma)
