from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatmod.errors import NonInvariantPolynomial, UsageError
from flatmod.lie_core import build_root_system
from flatmod.polynomial import InvariantPolynomial as P

A1 = build_root_system("A", 1)
A2 = build_root_system("A", 2)


def test_parse_forms():
    assert P.parse("x^4", 1) == P.parse("x1^4", 1)
    p = P.parse("3/2 * x1^2*x2^2 - 1", 2)
    assert dict(p.terms) == {(0, 0): Fraction(-1), (2, 2): Fraction(3, 2)}
    assert p.degree == 4
    assert P.parse("1", 3).is_constant
    assert P.parse("x1 - x1", 1).degree == 0


@pytest.mark.parametrize("bad", ["x3^2", "", "x1^^2", "2**x1", "y1"])
def test_parse_rejects(bad):
    with pytest.raises(UsageError):
        P.parse(bad, 2)


def test_bare_x_needs_rank_one():
    with pytest.raises(UsageError):
        P.parse("x^2", 2)


def test_evaluate():
    p = P.parse("x1^2 + 2*x1*x2", 2)
    assert p(np.array([[1.0, 2.0], [3.0, 0.0]])).tolist() == [5.0, 9.0]


@given(st.integers(0, 5), st.fractions(min_value=-5, max_value=5, max_denominator=7))
def test_str_roundtrip(k, c):
    p = P.from_dict({(2 * k,): c, (0,): 1}, 1)
    assert P.parse(str(p), 1) == p


def test_invariance():
    P.parse("x^4", 1).check_invariance(A1)
    # quadratic Casimir is W-invariant for any rank
    P.parse("x1^2 + x2^2", 2).check_invariance(A2)
    with pytest.raises(NonInvariantPolynomial):
        P.parse("x1", 2).check_invariance(A2)
    with pytest.warns(UserWarning):
        P.parse("x1", 2).check_invariance(A2, warn_only=True)
    with pytest.raises(NonInvariantPolynomial):
        P.parse("x", 1).check_invariance(A2)


def test_singular_vanishing_warning():
    assert P.parse("x^2", 1).check_singular_vanishing(A1)
    with pytest.warns(UserWarning):
        P.parse("x^2 + 1", 1).check_singular_vanishing(A1)
