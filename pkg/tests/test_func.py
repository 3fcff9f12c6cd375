from fractions import Fraction

import pytest
from hypothesis import given, settings

from app.analysis.func import (
    PatternFn,
    Semicontinuity,
    add,
    constant,
    evaluate,
    indicator,
    is_continuous,
    is_lsc,
    is_usc,
    mul,
    negative_part,
    positive_part,
    scale,
    semicontinuity_witness,
    sub,
    sup_inf,
    support,
    vabs,
    vanishes_off,
    vmax,
    vmin,
)
from app.analysis.oscillation import envelopes
from app.errors import EmptySubspaceError, ShapeMismatchError
from app.topology.space import EMPTY_SUBSPACE, ClosedMark, MarkPattern, parse_address
from strategies import function_pairs, functions


def test_shape_is_checked(T1, T2):
    with pytest.raises(ShapeMismatchError):
        PatternFn(T1, (Fraction(1),))
    with pytest.raises(ShapeMismatchError):
        add(constant(T1, 1), constant(T2, 1))


def test_evaluate_by_address(chi_root):
    assert evaluate(chi_root, ()) == 1
    assert evaluate(chi_root, parse_address("/c0")) == 0


def test_root_and_leaf_indicators(T1, chi_root):
    assert is_usc(chi_root) and not is_lsc(chi_root)
    chi_leaf = indicator(MarkPattern.from_nodes(T1, [1]))
    assert is_lsc(chi_leaf) and not is_usc(chi_leaf)
    assert is_continuous(constant(T1, Fraction(1, 2)))
    assert semicontinuity_witness(chi_root, ClosedMark.full(T1), Semicontinuity.LSC) == 0
    assert semicontinuity_witness(chi_root, ClosedMark.full(T1), Semicontinuity.USC) is None


def test_semicontinuity_on_a_subspace(T1, chi_root):
    assert is_continuous(chi_root, ClosedMark.of(MarkPattern.from_nodes(T1, [0])))
    with pytest.raises(EmptySubspaceError):
        is_usc(chi_root, ClosedMark.empty(T1))


def test_sup_inf(T1, chi_root):
    assert sup_inf(chi_root, MarkPattern.full(T1)) == (1, 0)
    assert sup_inf(chi_root, MarkPattern.empty(T1)) is EMPTY_SUBSPACE


def test_algebra_on_T1(T1, chi_root):
    other = PatternFn(T1, (Fraction(-1, 2), Fraction(1, 3)))
    assert add(chi_root, other).values == (Fraction(1, 2), Fraction(1, 3))
    assert sub(chi_root, other).values == (Fraction(3, 2), Fraction(-1, 3))
    assert mul(chi_root, other).values == (Fraction(-1, 2), 0)
    assert vmax(chi_root, other).values == (1, Fraction(1, 3))
    assert vmin(chi_root, other).values == (Fraction(-1, 2), 0)
    assert vabs(other).values == (Fraction(1, 2), Fraction(1, 3))
    assert positive_part(other).values == (0, Fraction(1, 3))
    assert negative_part(other).values == (Fraction(1, 2), 0)
    assert scale(Fraction(2), other).sup_norm == 1
    assert support(other).nodes() == [0, 1]
    assert vanishes_off(chi_root, MarkPattern.from_nodes(T1, [0]))


@settings(max_examples=80, deadline=None)
@given(functions())
def test_continuity_is_both_semicontinuities(f):
    assert is_continuous(f) == (is_usc(f) and is_lsc(f))
    assert is_lsc(scale(-1, f)) == is_usc(f)


@settings(max_examples=80, deadline=None)
@given(functions())
def test_envelopes_are_semicontinuous(f):
    report = envelopes(f)
    assert is_usc(report.upper)
    assert is_lsc(report.lower)
    assert all(lo <= v <= hi for lo, v, hi in zip(report.lower.values, f.values, report.upper.values))


@settings(max_examples=60, deadline=None)
@given(function_pairs())
def test_parts_recombine(pair):
    f, g = pair
    assert sub(positive_part(f), negative_part(f)) == f
    assert add(vmax(f, g), vmin(f, g)) == add(f, g)
