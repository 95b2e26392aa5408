import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqoffload.errors import BracketError, BracketOverflow, DomainError
from seqoffload.numerics import INV_E, BracketedRoot, bisect_root, expand_upper_bracket, lambert_w0

# Frozen from scipy.special.lambertw(x, 0).real
SCIPY_W0 = {
    1.0: 0.5671432904097838,
    10.0: 1.7455280027406994,
    -0.2: -0.2591711018190737,
    -0.36: -0.8060843159708174,
    1e3: 5.249602852401596,
    1e6: 11.383358086140053,
    1e-8: 9.999999900000002e-09,
}


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (math.e, 1.0), (-INV_E, -1.0)])
def test_w0_exact_points(x, expected):
    assert lambert_w0(x) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("x", sorted(SCIPY_W0))
def test_w0_matches_reference_values(x):
    assert lambert_w0(x) == pytest.approx(SCIPY_W0[x], rel=1e-12, abs=1e-15)


def test_w0_omega_constant():
    assert lambert_w0(1.0) == pytest.approx(0.5671432904, abs=1e-10)


def test_w0_below_branch_point_raises():
    with pytest.raises(DomainError):
        lambert_w0(-0.5)


def test_w0_clamps_roundoff_below_branch_point():
    assert lambert_w0(-INV_E - 1e-14) == -1.0


def test_w0_array_matches_scalar():
    xs = np.array(sorted(SCIPY_W0))
    ws = lambert_w0(xs)
    assert ws.shape == xs.shape
    for x, w in zip(xs, ws):
        assert w == pytest.approx(lambert_w0(float(x)), rel=1e-14)


def test_w0_array_nan_and_inf():
    ws = lambert_w0(np.array([np.nan, np.inf]))
    assert np.isnan(ws[0]) and ws[1] == np.inf


@given(st.floats(min_value=-INV_E, max_value=1e6))
def test_w0_identity(x):
    w = lambert_w0(x)
    assert w >= -1.0
    assert abs(w * math.exp(w) - x) <= 1e-10 * max(1.0, abs(x))


@given(st.floats(min_value=-INV_E, max_value=1e6), st.floats(min_value=-INV_E, max_value=1e6))
def test_w0_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert lambert_w0(lo) <= lambert_w0(hi)


def test_bisect_sqrt2():
    root = bisect_root(lambda x: x * x - 2.0, BracketedRoot(0.0, 2.0))
    assert root == pytest.approx(1.414213562, abs=1e-9)


def test_bisect_odd_and_endpoint_roots():
    assert bisect_root(lambda x: x, BracketedRoot(-1.0, 1.0)) == pytest.approx(0.0, abs=1e-9)
    assert bisect_root(math.expm1, BracketedRoot(-1.0, 1.0)) == pytest.approx(0.0, abs=1e-9)
    assert bisect_root(lambda x: x - 3.0, BracketedRoot(0.0, 3.0)) == 3.0


def test_bisect_decreasing_function():
    root = bisect_root(lambda x: 4.0 - x * x, BracketedRoot(0.0, 5.0))
    assert root == pytest.approx(2.0, abs=1e-9)


def test_bisect_no_sign_change():
    with pytest.raises(BracketError):
        bisect_root(lambda x: x * x + 1.0, BracketedRoot(-1.0, 1.0))


def test_bracket_validation():
    with pytest.raises(ValueError):
        BracketedRoot(1.0, 1.0)
    with pytest.raises(ValueError):
        BracketedRoot(0.0, 1.0, tolerance=0.0)


@given(st.floats(min_value=0.01, max_value=100.0), st.floats(min_value=1.0, max_value=1e3))
def test_bisect_invariant_under_bracket_widening(root, widen):
    f = lambda x: x - root
    narrow = bisect_root(f, BracketedRoot(0.0, 2 * root))
    wide = bisect_root(f, BracketedRoot(-widen, 2 * root + widen))
    assert narrow == pytest.approx(root, abs=1e-8)
    assert wide == pytest.approx(narrow, abs=2e-9)


def test_expand_doubles_until_sign_change():
    b = expand_upper_bracket(lambda x: x - 5.0, 0.0)
    assert (b.lo, b.hi) == (4.0, 8.0)
    assert b.lo < 5.0 <= b.hi


def test_expand_first_probe_accepted():
    b = expand_upper_bracket(lambda x: x - 1.0, 0.0)
    assert b.hi == 1.0 and b.lo == 0.0


def test_expand_cap_overflow():
    with pytest.raises(BracketOverflow):
        expand_upper_bracket(lambda x: x - 1e9, 0.0, cap=1e6)


def test_expand_requires_negative_start():
    with pytest.raises(ValueError):
        expand_upper_bracket(lambda x: x + 1.0, 0.0)


@given(st.floats(min_value=1e-3, max_value=1e12))
def test_expand_then_bisect_finds_root(root):
    f = lambda x: x - root
    b = expand_upper_bracket(f, 0.0, tolerance=1e-9 * max(1.0, root))
    assert b.lo < root <= b.hi
    assert bisect_root(f, b) == pytest.approx(root, rel=1e-8, abs=2e-9)
