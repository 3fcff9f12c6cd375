from fractions import Fraction

import pytest
from hypothesis import given, settings

from app.analysis.func import PatternFn, constant, indicator, neg, scale, sub, vabs
from app.analysis.oscillation import (
    Flavor,
    ThetaMode,
    combine,
    cover_oscillation,
    critical_set,
    derivation,
    envelopes,
    full_index,
    index,
    ltheta_sets,
    combination_containments,
)
from app.errors import EmptySubspaceError
from app.topology.space import ClosedMark, MarkPattern, closure, derived_chain
from strategies import function_pairs, functions


def test_envelopes_of_root_indicator(chi_root):
    report = envelopes(chi_root)
    assert report.upper.values == (1, 0)
    assert report.lower.values == (0, 0)
    assert report.uosc.values == (1, 0)
    assert report.osc.values == (1, 0)
    assert report.oosc.values == (1, 0)


def test_envelopes_need_a_domain(chi_root):
    with pytest.raises(EmptySubspaceError):
        envelopes(chi_root, MarkPattern.empty(chi_root.space))


def test_off_domain_values_are_zero(T2, chi_E2):
    report = envelopes(chi_E2, MarkPattern.from_nodes(T2, [0, 1]))
    assert report.upper.values == (1, 0, 0)
    assert report.osc.values == (1, 0, 0)


def test_derivation_of_even_height_indicator(T2, chi_E2):
    trail = derivation(chi_E2, Fraction(1))
    assert [s.nodes() for s in trail.sets] == [[0, 1, 2], [0, 1], [0], []]
    assert trail.index == 2
    assert trail.at(7).is_empty()
    for j in range(3):
        assert trail.sets[j].same_set(derived_chain(T2, j))


def test_derivation_needs_positive_eps(chi_root):
    with pytest.raises(ValueError):
        derivation(chi_root, 0)


def test_full_index_of_even_height_indicator(chi_E2):
    report = full_index(chi_E2)
    assert report.critical == (1,)
    assert report.indices == ((1, 2),)
    assert report.i_f == 2
    assert report.beta == 3
    assert report.beta_hor == 3
    assert report.quasinorm == 2
    assert report.full_quasinorm == 3
    assert report.index_at(Fraction(1, 2)) == 2
    assert report.index_at(Fraction(2)) == 0


def test_constants_have_index_zero(T2):
    f = constant(T2, Fraction(1, 3))
    report = full_index(f)
    assert report.critical == ()
    assert report.i_f == 0
    assert report.beta == 1
    assert index(f, Fraction(1, 100)) == 0


def test_critical_set_is_value_differences(T2):
    f = PatternFn(T2, (Fraction(1), Fraction(-1, 2), Fraction(0)))
    assert critical_set(f) == (Fraction(1, 2), Fraction(1), Fraction(3, 2))


def test_upper_flavor_trail_is_one_longer(chi_E2):
    trail = derivation(chi_E2, Fraction(1), Flavor.OOSC)
    assert len(trail.sets) - 1 == full_index(chi_E2).beta


def test_ltheta_and_containments(T2, chi_E2):
    g = indicator(derived_chain(T2, 2))
    assert ltheta_sets(chi_E2, g, Fraction(1), (0, 0)).nodes() == [0]
    for mode in ThetaMode:
        for n in (1, 2, 3):
            assert combination_containments(chi_E2, g, Fraction(1), mode, n) == []


def test_combine_modes(T1, chi_root):
    g = constant(T1, Fraction(1, 2))
    assert len(combine(chi_root, g, ThetaMode.SUM)) == 1
    assert combine(chi_root, g, ThetaMode.PRODUCT)[0].values == (Fraction(1, 2), 0)
    top, bottom = combine(chi_root, g, ThetaMode.LATTICE)
    assert top.values == (1, Fraction(1, 2))
    assert bottom.values == (Fraction(1, 2), 0)


@settings(max_examples=80, deadline=None)
@given(functions())
def test_envelope_sandwich(f):
    report = envelopes(f)
    for osc, oosc in zip(report.osc.values, report.oosc.values):
        assert oosc / 2 <= osc <= oosc
    assert envelopes(report.uosc).upper == report.osc
    assert sub(report.upper, report.lower) == report.oosc


@settings(max_examples=60, deadline=None)
@given(functions())
def test_oscillation_set_nesting(f):
    for eps in critical_set(f):
        wide = derivation(f, 2 * eps, Flavor.OOSC)
        middle = derivation(f, eps)
        narrow = derivation(f, eps, Flavor.OOSC)
        for j in range(len(narrow.sets)):
            assert wide.at(j).issubset(middle.at(j))
            assert middle.at(j).issubset(narrow.at(j))


@settings(max_examples=60, deadline=None)
@given(functions())
def test_index_identities(f):
    report = full_index(f)
    assert report.i_f <= f.space.rank
    assert full_index(neg(f)).i_f == report.i_f
    assert full_index(scale(Fraction(1, 3), f)).i_f == report.i_f
    for d, idx in report.indices:
        assert index(scale(5, f), 5 * d) == idx
        assert index(vabs(f), d) <= idx


@settings(max_examples=60, deadline=None)
@given(functions())
def test_closed_cover_oscillation(f):
    first = closure(MarkPattern(f.space, tuple(i % 2 == 0 for i in range(f.space.size))))
    second = closure(first.complement())
    assert cover_oscillation(f, [first, second]) == envelopes(f).osc
    assert cover_oscillation(f, [ClosedMark.full(f.space)]) == envelopes(f).osc


@settings(max_examples=40, deadline=None)
@given(function_pairs())
def test_sum_index_inequality(pair):
    f, g = pair
    h = combine(f, g, ThetaMode.SUM)[0]
    for d in critical_set(h):
        assert index(h, d) <= index(f, d / 2) + index(g, d / 2)
