import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_fl.controller import (
    REFERENCE_GAINS,
    DecouplingError,
    Gains,
    Mapping,
    RouthStatus,
    characteristic_polynomial,
    control_law,
    error_derivatives,
    routh_hurwitz,
    synthetic_input,
)
from cavity_fl.lie import lie_chain
from cavity_fl.model import PlantParams, SingularityError
from cavity_fl.reference import ReferenceSample

DESC = Gains(*REFERENCE_GAINS, mapping=Mapping.DESCENDING)
ASC = Gains(*REFERENCE_GAINS, mapping=Mapping.ASCENDING)
ZERO = Gains(0, 0, 0, 0, mapping=Mapping.ASCENDING)


def test_gains_require_mapping():
    with pytest.raises(TypeError):
        Gains(1, 2, 3, 4)
    with pytest.raises(ValueError):
        Gains(1, 2, 3, math.inf, mapping="ascending")


def test_error_derivatives_on_reference(params):
    x = [4.0, 0.5, -1.0, 420.0, 390.0]
    c = lie_chain(x, params)
    ref = ReferenceSample(c.lf0, c.lf1, c.lf2, c.lf3, 0.0)
    np.testing.assert_array_equal(error_derivatives(x, ref, params), np.zeros(4))


def test_error_derivatives_constant_reference(params):
    e = error_derivatives([10.0, 0.0, 0.0, 350.0, 350.0], ReferenceSample(400, 0, 0, 0, 0), params)
    assert e[0] == -50.0 and e[1] == 0.0


def test_error_derivatives_zero_reference_is_chain(params):
    x = [2.0, 1.0, 3.0, 100.0, 40.0]
    c = lie_chain(x, params)
    np.testing.assert_array_equal(error_derivatives(x, ReferenceSample(0, 0, 0, 0, 0), params), [c.lf0, c.lf1, c.lf2, c.lf3])


def test_synthetic_input_examples():
    assert synthetic_input((0, 0, 0, 0), 7.0, ASC) == 7.0
    assert synthetic_input((1, 0, 0, 0), 7.0, DESC) == pytest.approx(7.0 - 2.5)
    assert synthetic_input((1, 0, 0, 0), 7.0, ASC) == pytest.approx(7.0 - 0.7)
    # top derivative weight: k1 under DESCENDING, k4 under ASCENDING
    assert synthetic_input((0, 0, 0, 1), 0.0, DESC) == -0.7
    assert synthetic_input((0, 0, 0, 1), 0.0, ASC) == -2.5


def test_synthetic_input_scales_with_gains():
    e = (1.5, -2.0, 0.25, 3.0)
    for lam in (0.5, 2.0, 10.0):
        scaled = Gains(*(lam * k for k in REFERENCE_GAINS), mapping="ascending")
        assert synthetic_input(e, 0.0, scaled) == pytest.approx(lam * synthetic_input(e, 0.0, ASC))


def test_control_exact_cancellation_gives_zero(params):
    x = [6.0, 0.2, -0.3, 200.0, 150.0]
    c = lie_chain(x, params)
    d = control_law(x, ReferenceSample(0, 0, 0, 0, c.lf4), ZERO, params)
    assert d.u == 0.0 and d.v == c.lf4 and not d.saturated


def test_control_affine_in_v(params):
    x = [6.0, 0.2, -0.3, 200.0, 150.0]
    c = lie_chain(x, params)
    u0 = control_law(x, ReferenceSample(0, 0, 0, 0, 0.0), ZERO, params).u
    u1 = control_law(x, ReferenceSample(0, 0, 0, 0, 1000.0), ZERO, params).u
    assert u1 - u0 == pytest.approx(1000.0 / c.lglf3, rel=1e-9)


def test_control_saturation():
    p = PlantParams(u_limit=10.0)
    x = [6.0, 0.2, -0.3, 200.0, 150.0]
    c = lie_chain(x, p)
    ref = ReferenceSample(0, 0, 0, 0, c.lf4 + 25.0 * c.lglf3)
    assert control_law(x, ref, ZERO, PlantParams()).u == pytest.approx(25.0)
    d = control_law(x, ref, ZERO, p)
    assert d.u == 10.0 and d.saturated
    d = control_law(x, ReferenceSample(0, 0, 0, 0, c.lf4 - 25.0 * c.lglf3), ZERO, p)
    assert d.u == -10.0 and d.saturated


def test_control_singular_states(params):
    with pytest.raises(SingularityError):
        control_law([0.0, 0, 0, 0, 0], ReferenceSample(0, 0, 0, 0, 0), ASC, params)


def test_degenerate_decoupling(params):
    # huge x1 shrinks L_g L_f^3 h below the relative threshold
    with pytest.raises(DecouplingError):
        control_law([1e300, 0, 0, 1e3, 0], ReferenceSample(0, 0, 0, 0, 1e10), ASC, params)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.1, 20), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 1000), st.floats(0, 1000),
    st.floats(0, 1000),
)
def test_control_always_finite(x1, x2, x3, x4, x5, level):
    d = control_law([x1, x2, x3, x4, x5], ReferenceSample(level, 0, 0, 0, 0), ASC, PlantParams())
    assert math.isfinite(d.u) and math.isfinite(d.v)


def test_characteristic_polynomials():
    np.testing.assert_array_equal(characteristic_polynomial(DESC), [1, 0.7, 2, 30, 2.5])
    np.testing.assert_array_equal(characteristic_polynomial(ASC), [1, 2.5, 30, 2, 0.7])


def test_routh_reference_gains():
    desc = routh_hurwitz(DESC)
    assert desc.status is RouthStatus.UNSTABLE
    # third pivot by hand: (0.7 * 2 - 30) / 0.7
    assert desc.first_column[2] == pytest.approx((0.7 * 2 - 30) / 0.7)
    asc = routh_hurwitz(ASC)
    assert asc.status is RouthStatus.STABLE
    # hand table: 2.5, (2.5*30 - 2)/2.5 = 29.2, (29.2*2 - 2.5*0.7)/29.2, 0.7
    np.testing.assert_allclose(asc.first_column, [1, 2.5, 29.2, (29.2 * 2 - 1.75) / 29.2, 0.7])


def test_routh_repeated_root():
    rep = routh_hurwitz(Gains(4, 6, 4, 1, mapping="descending"))
    assert rep.status is RouthStatus.STABLE
    assert rep.coefficients == (1, 4, 6, 4, 1)


def test_routh_marginal_zero_pivot():
    # s^4 + s^3 + s^2 + s + 1: second pivot (1*1 - 1*1)/1 = 0
    assert routh_hurwitz([1, 1, 1, 1, 1]).status is RouthStatus.MARGINAL
    assert routh_hurwitz([1, 2, 3, 4, 0]).status is RouthStatus.MARGINAL
    # pure oscillator pair times stable pair
    assert routh_hurwitz(np.polymul([1, 0, 1], [1, 2, 1])).status is RouthStatus.MARGINAL


def _poly_from_roots(reals, pairs):
    poly = np.array([1.0])
    for r in reals:
        poly = np.polymul(poly, [1, -r])
    for re, im in pairs:
        poly = np.polymul(poly, [1, -2 * re, re * re + im * im])
    return poly


roots_real = st.floats(-20, -0.05)
roots_pair = st.tuples(st.floats(-20, -0.05), st.floats(0.05, 20))


@settings(max_examples=300, deadline=None)
@given(st.one_of(
    st.tuples(st.lists(roots_real, min_size=4, max_size=4), st.just([])),
    st.tuples(st.lists(roots_real, min_size=2, max_size=2), st.lists(roots_pair, min_size=1, max_size=1)),
    st.tuples(st.just([]), st.lists(roots_pair, min_size=2, max_size=2)),
))
def test_routh_stable_roots(spec):
    reals, pairs = spec
    assert routh_hurwitz(_poly_from_roots(reals, pairs)).status is RouthStatus.STABLE


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3), min_size=4, max_size=4))
def test_routh_agrees_with_roots(coeffs):
    poly = [1.0, *coeffs]
    roots = np.roots(poly)
    margin = np.min(np.abs(roots.real))
    if margin < 1e-6:
        return
    expected = RouthStatus.STABLE if np.all(roots.real < 0) else RouthStatus.UNSTABLE
    rep = routh_hurwitz(poly)
    if rep.status is not RouthStatus.MARGINAL:
        assert rep.status is expected
        # each sign change is one right-half-plane root
        assert rep.sign_changes == int(np.sum(roots.real > 0))
