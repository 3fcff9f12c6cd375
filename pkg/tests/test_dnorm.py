import pytest
from hypothesis import given, settings

from app.analysis.dnorm import (
    CertKind,
    ContinuousOnOpen,
    DiffClosed,
    Extension,
    Localization,
    LscSplit,
    NonnegLsc,
    RegionMarks,
    Sum,
    as_diff_closed,
    bounds,
    check_certificate,
    claimed_bound,
    describe_region,
    lower_bound,
    negate_certificate,
    semicontinuous_certificate,
    simple_certificate,
    to_simple_dcs,
    validate_certificate,
)
from app.analysis.func import constant, indicator, neg
from app.analysis.oscillation import full_index
from app.errors import CertificateRejected, ContainmentError, PreconditionError
from app.topology.space import ClosedMark, MarkPattern, derived_chain
from strategies import functions


def test_diff_closed_needs_containment(T2):
    with pytest.raises(ContainmentError):
        DiffClosed(derived_chain(T2, 2), derived_chain(T2, 1))


def test_as_diff_closed(T2):
    region = as_diff_closed(MarkPattern.from_nodes(T2, [1, 2]))
    assert region.mark.nodes() == [1, 2]
    with pytest.raises(PreconditionError):
        as_diff_closed(MarkPattern.from_nodes(T2, [0, 2]))


def test_simple_representation_of_even_height_indicator(chi_E2):
    s = to_simple_dcs(chi_E2)
    assert [(c, describe_region(r)) for c, r in s.terms] == [(1, ["/c0/c0"]), (1, ["/"])]
    assert s.is_disjoint()
    assert s.evaluate() == chi_E2
    assert validate_certificate(chi_E2, simple_certificate(s)) == 3


def test_bounds_of_even_height_indicator(chi_E2):
    found = bounds(chi_E2)
    assert found.lower == 1
    assert found.upper == 3
    assert lower_bound(chi_E2) == 1
    assert [a.certified for a in found.annotations] == [False, False]


def test_bounds_of_root_indicator(chi_root):
    found = bounds(chi_root)
    assert found.lower == 1
    assert found.upper == 2


def test_semicontinuous_split(chi_root):
    cert = semicontinuous_certificate(chi_root)
    assert isinstance(cert, LscSplit)
    assert cert.u == constant(chi_root.space, 1)
    assert validate_certificate(chi_root, cert) == 2


def test_rejection_carries_path_kind_and_condition(chi_root):
    verdict = check_certificate(chi_root, Sum(parts=((chi_root, NonnegLsc()),)))
    assert not verdict.accepted
    assert verdict.path == "$.parts[0].cert"
    assert verdict.kind is CertKind.NONNEG_LSC
    assert verdict.condition == "f is not lower semicontinuous on the domain"


def test_rejections(T1, chi_root):
    root = ClosedMark.of(MarkPattern.from_nodes(T1, [0]))
    region = DiffClosed(root, ClosedMark.empty(T1))
    with pytest.raises(CertificateRejected) as info:
        validate_certificate(chi_root, Extension(region, NonnegLsc(), factor=1))
    assert info.value.path == "$"
    assert "open" in info.value.condition

    assert validate_certificate(chi_root, Extension(region, NonnegLsc(), factor=2)) == 2

    wrong = Sum(parts=((constant(T1, 1), NonnegLsc()),))
    assert check_certificate(chi_root, wrong).condition == "parts do not sum to f on the domain"

    assert not check_certificate(chi_root, ContinuousOnOpen()).accepted


def test_localization_needs_separated_parts(T1):
    leaf = as_diff_closed(MarkPattern.from_nodes(T1, [1]))
    root = as_diff_closed(MarkPattern.from_nodes(T1, [0]))
    f = constant(T1, 1)
    verdict = check_certificate(f, Localization(parts=((leaf, NonnegLsc()), (root, NonnegLsc()))))
    assert not verdict.accepted


def test_unvalidated_regions_are_rejected_at_their_node(T1, chi_root):
    full = MarkPattern.full(T1)
    empty = MarkPattern.empty(T1)
    inverted = Localization(parts=((RegionMarks(empty, full), NonnegLsc()),))
    verdict = check_certificate(chi_root, inverted)
    assert verdict.path == "$.parts[0].region"
    assert verdict.condition == "minus is not contained in outer"

    leaf = MarkPattern.from_nodes(T1, [1])
    verdict = check_certificate(chi_root, ContinuousOnOpen(support=RegionMarks(full, leaf)))
    assert verdict.path == "$.support.minus"
    assert verdict.kind is CertKind.CONTINUOUS_ON_OPEN
    assert verdict.condition == "minus mark is not closed"


def test_claimed_bound_matches_checked_bound(chi_E2):
    cert = simple_certificate(to_simple_dcs(chi_E2))
    assert claimed_bound(chi_E2, cert) == validate_certificate(chi_E2, cert)


def test_negated_certificate(T1):
    chi_leaf = indicator(MarkPattern.from_nodes(T1, [1]))
    cert = negate_certificate(NonnegLsc(), chi_leaf)
    assert validate_certificate(neg(chi_leaf), cert) == 1


def test_zero_function_has_zero_bound(T2):
    assert validate_certificate(constant(T2, 0), ContinuousOnOpen()) == 0


@settings(max_examples=60, deadline=None)
@given(functions())
def test_simple_representation_round_trip(f):
    s = to_simple_dcs(f)
    assert s.evaluate() == f
    assert s.is_disjoint()
    assert all(c != 0 for c, _ in s.terms)
    assert check_certificate(f, simple_certificate(s)).accepted


@settings(max_examples=40, deadline=None)
@given(functions())
def test_bounds_are_consistent(f):
    found = bounds(f)
    assert f.sup_norm <= found.lower <= found.upper
    assert check_certificate(f, found.certificate).bound == found.upper
    for d, idx in full_index(f).indices:
        assert d * idx <= 4 * found.upper
