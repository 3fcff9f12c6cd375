from fractions import Fraction

import pytest
from hypothesis import given, settings

from app.analysis.func import is_continuous, is_lsc, is_usc
from app.analysis.oscillation import Flavor, derivation, envelopes, index
from app.errors import SoundnessFault
from app.topology.expansion import (
    collapse,
    expand,
    lift_set,
    oracle_envelopes,
    oracle_heights,
    oracle_index,
    oracle_is_closed,
    oracle_is_nowhere_dense,
    oracle_semicontinuity,
    oracle_trail,
)
from app.topology.space import ClosedMark, derived_set
from strategies import functions


def test_expansion_sizes(T1, T2):
    assert expand(T1, 2).size == 3
    assert expand(T2, 3).size == 13


def test_expansion_needs_two_copies(T1):
    with pytest.raises(ValueError):
        expand(T1, 1)


def test_last_repetition_is_the_tail(T1):
    graph = expand(T1, 3)
    assert graph.vertices[0].children == (1, 2, 3)
    assert graph.vertices[0].tail == (3,)
    assert graph.eventual[0] == frozenset({3})
    assert graph.neighbourhood(0) == frozenset({0, 3})


def test_oracle_heights(T2):
    assert oracle_heights(expand(T2, 2)) == T2.heights
    assert oracle_heights(expand(T2, 3)) == (2, 1, 0)


def test_collapse_detects_disagreeing_copies(T1):
    graph = expand(T1, 2)
    with pytest.raises(SoundnessFault):
        collapse(graph, [0, 1, 2])
    assert collapse(graph, [5, 1, 1]) == (5, 1)


def test_oracle_topology(T2):
    graph = expand(T2, 2)
    first = lift_set(graph, derived_set(T2).bits)
    everything = frozenset(range(graph.size))
    assert oracle_is_closed(graph, first)
    assert oracle_is_nowhere_dense(graph, first, everything)


def test_oracle_envelopes_for_root_indicator(chi_root):
    graph = expand(chi_root.space, 3)
    found = oracle_envelopes(graph, chi_root.values, (True, True))
    assert found.upper == (1, 0)
    assert found.lower == (0, 0)
    assert found.osc == (1, 0)
    assert oracle_semicontinuity(graph, chi_root.values, (True, True)) == {
        "usc": True,
        "lsc": False,
        "continuous": False,
    }


def test_oracle_trail_for_even_height_indicator(chi_E2):
    graph = expand(chi_E2.space, 3)
    trail = oracle_trail(graph, chi_E2.values, Fraction(1))
    assert trail == [(True, True, True), (True, True, False), (True, False, False), (False, False, False)]
    assert oracle_index(graph, chi_E2.values, Fraction(1, 2)) == 2


@settings(max_examples=40, deadline=None)
@given(functions())
def test_oracle_agrees_with_symbolic_envelopes(f):
    full = ClosedMark.full(f.space)
    symbolic = envelopes(f)
    for copies in (2, 3):
        graph = expand(f.space, copies)
        found = oracle_envelopes(graph, f.values, full.bits)
        for name in ("upper", "lower", "uosc", "osc", "oosc"):
            assert getattr(symbolic, name).values == getattr(found, name)
        flags = oracle_semicontinuity(graph, f.values, full.bits)
        assert flags == {"usc": is_usc(f), "lsc": is_lsc(f), "continuous": is_continuous(f)}


@settings(max_examples=40, deadline=None)
@given(functions())
def test_oracle_agrees_with_symbolic_trails(f):
    graph = expand(f.space, 2)
    for eps in (Fraction(1, 3), Fraction(1, 2), Fraction(1)):
        assert oracle_trail(graph, f.values, eps) == [s.bits for s in derivation(f, eps).sets]
        assert oracle_index(graph, f.values, eps) == index(f, eps)
        upper = oracle_trail(graph, f.values, eps, upper_flavor=True)
        assert upper == [s.bits for s in derivation(f, eps, Flavor.OOSC).sets]
