import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kanfis import numerics as nx
from kanfis.errors import InvariantViolation, ParameterDomainError
from kanfis.membership import (
    BellBasis,
    Edge,
    GaussianBasis,
    It2GaussianBasis,
    SigmoidBasis,
    basis_param_names,
    bell,
    bell_op,
    edge_activate,
    gaussian_op,
    it2_memberships,
    raw_for_width,
    sigmoid_mf,
    sigmoid_op,
    softplus,
    t1_gaussian,
    type_reduce,
)

EXP_HALF = math.exp(-0.5)


def test_gaussian_peak():
    assert t1_gaussian(0.3, 0.3, 0.7) == 1.0


def test_gaussian_one_width_out():
    assert t1_gaussian(1.5, 1.0, 0.5) == pytest.approx(EXP_HALF, abs=1e-12)


def test_gaussian_substitution():
    assert t1_gaussian(2.0, 0.5, 1.5) == pytest.approx(0.6065306597, abs=1e-10)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_gaussian_rejects_bad_width(sigma):
    with pytest.raises(ParameterDomainError):
        t1_gaussian(0.0, 0.0, sigma)


def test_it2_center_is_one():
    b = It2GaussianBasis.from_widths(0.0, 0.5, 1.0)
    umf, lmf = it2_memberships(0.0, b)
    assert (umf, lmf) == (1.0, 1.0)


def test_it2_substitution():
    b = It2GaussianBasis.from_widths(0.0, 0.5, 1.0)
    umf, lmf = it2_memberships(1.0, b)
    assert umf == pytest.approx(math.exp(-0.5), abs=1e-5)
    assert lmf == pytest.approx(math.exp(-2.0), abs=1e-5)


def test_it2_upper_width_point():
    b = It2GaussianBasis.from_widths(0.2, 0.5, 1.3)
    umf, _ = it2_memberships(0.2 + b.sigma_upper, b)
    assert umf == pytest.approx(EXP_HALF, abs=1e-12)


def test_type_reduce_examples():
    assert type_reduce(1.0, 1.0) == 1.0
    assert type_reduce(0.60653, 0.13534) == pytest.approx(0.370935, abs=1e-12)
    assert type_reduce(0.8, 0.0) == 0.4


def test_type_reduce_rejects_inverted_interval():
    with pytest.raises(InvariantViolation):
        type_reduce(0.2, 0.3)


def test_edge_fully_masked():
    edge = Edge((GaussianBasis.from_width(0.0, 1.0, 3.0),))
    assert edge_activate(0.4, edge, 0.0) == 0.0


def test_edge_single_unit_basis():
    edge = Edge((GaussianBasis.from_width(0.7, 0.3, 1.0),))
    assert edge_activate(0.7, edge, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_edge_two_bases_hand_sum():
    edge = Edge((GaussianBasis.from_width(0.0, 1.0, 2.0), GaussianBasis.from_width(1.0, 1.0, 0.5)))
    assert edge_activate(0.0, edge, 1.0) == pytest.approx(2.30327, abs=1e-5)


def test_edge_rejects_mask_outside_unit_interval():
    edge = Edge((GaussianBasis.from_width(0.0, 1.0),))
    with pytest.raises(ParameterDomainError):
        edge_activate(0.0, edge, 1.5)


def test_edge_rejects_mixed_families():
    with pytest.raises(ParameterDomainError):
        Edge((GaussianBasis.from_width(0.0, 1.0), SigmoidBasis.from_shape(0.0, 1.0)))


def test_it2_only_for_gaussian():
    with pytest.raises(ParameterDomainError):
        basis_param_names("bell", it2=True)


def test_width_floor_keeps_sigma_positive():
    assert GaussianBasis(0.0, -800.0).sigma == pytest.approx(1e-4)


def test_it2_ordering_is_strict_by_construction():
    b = It2GaussianBasis(0.0, -50.0, -50.0)
    assert b.sigma_upper > b.sigma_lower > 0


def test_bell_is_one_at_center():
    assert bell(1.2, 0.5, 3.0, 1.2) == 1.0


@given(st.floats(0.1, 5), st.floats(-3, 3), st.booleans())
def test_sigmoid_monotone_with_slope_sign(mag, center, positive):
    slope = mag if positive else -mag
    xs = np.linspace(-5, 5, 101)
    diffs = np.diff(sigmoid_mf(xs, slope, center))
    assert np.all(diffs >= 0) if positive else np.all(diffs <= 0)


finite = st.floats(-6, 6, allow_nan=False)
raw = st.floats(-4, 4, allow_nan=False)


@given(finite, finite, raw, raw, raw)
def test_it2_bounds(x, mu, lo_raw, gap_raw, amp_raw):
    b = It2GaussianBasis(mu, lo_raw, gap_raw, amp_raw)
    umf, lmf = it2_memberships(x, b)
    red = type_reduce(umf, lmf)
    assert 0.0 <= lmf <= red <= umf <= 1.0


@given(finite, finite, raw, st.floats(0.0, 1.0))
def test_it2_gap_shrinks_interval(x, mu, lo_raw, frac):
    if abs(x - mu) < 1e-6:
        return
    lo = softplus(lo_raw) + 1e-4
    wide = It2GaussianBasis.from_widths(mu, lo, lo + 1.0)
    narrow = It2GaussianBasis.from_widths(mu, lo, lo + 1e-3 + frac * (1.0 - 1e-3))
    gap_w = np.subtract(*it2_memberships(x, wide))
    gap_n = np.subtract(*it2_memberships(x, narrow))
    assert gap_n <= gap_w + 1e-15


@given(finite, st.lists(st.tuples(finite, raw, raw), min_size=1, max_size=5), st.floats(0, 1))
def test_edge_bounds(x, specs, mask):
    edge = Edge(tuple(GaussianBasis(c, w, a) for c, w, a in specs))
    v = edge_activate(x, edge, mask)
    assert 0.0 <= v <= mask * edge.total_amplitude * (1 + 1e-12)


@given(finite, finite, st.floats(0.05, 3))
def test_basis_values_in_unit_interval(x, c, w):
    for b in (GaussianBasis.from_width(c, w), BellBasis.from_shape(c, w, 2.0),
              SigmoidBasis.from_shape(c, w), It2GaussianBasis.from_widths(c, w, 2 * w)):
        assert 0.0 <= float(b.membership(x)) <= 1.0


# elementary derivative checks against central differences

POINTS = [(-1.3, 0.4, 0.7), (0.2, 0.2 + 1e-3, 1.1), (2.5, -0.5, 0.3)]


@pytest.mark.parametrize("x,mu,sigma", POINTS)
def test_gaussian_partials(x, mu, sigma):
    f = lambda p: nx.sum(gaussian_op(p["x"], p["mu"], p["s"]))  # noqa: E731
    params = {"x": np.array([x]), "mu": np.array([mu]), "s": np.array([sigma])}
    assert nx.grad_check(f, params) < 1e-6


@pytest.mark.parametrize("x,c,a,b", [(-1.0, 0.3, 0.8, 1.5), (0.9, 0.1, 0.4, 2.0), (3.0, 0.0, 1.0, 0.7)])
def test_bell_partials(x, c, a, b):
    f = lambda p: nx.sum(bell_op(p["x"], p["a"], p["b"], p["c"]))  # noqa: E731
    params = {k: np.array([v]) for k, v in dict(x=x, a=a, b=b, c=c).items()}
    assert nx.grad_check(f, params) < 1e-6


@pytest.mark.parametrize("x,slope,c", [(-1.0, 2.0, 0.3), (0.5, -3.0, 0.1), (2.0, 0.5, -1.0)])
def test_sigmoid_partials(x, slope, c):
    f = lambda p: nx.sum(sigmoid_op(p["x"], p["s"], p["c"]))  # noqa: E731
    params = {"x": np.array([x]), "s": np.array([slope]), "c": np.array([c])}
    assert nx.grad_check(f, params) < 1e-6


@pytest.mark.parametrize("x", [-1.7, 0.35, 2.2])
def test_it2_partials(x):
    def f(p):
        lo = nx.softplus(p["l"]) + 1e-4
        up = lo + nx.softplus(p["g"]) + 1e-4
        return nx.sum(gaussian_op(x, p["mu"], up) + gaussian_op(x, p["mu"], lo))

    params = {"mu": np.array([0.1]), "l": np.array([raw_for_width(0.5)]), "g": np.array([0.3])}
    assert nx.grad_check(f, params) < 1e-6
