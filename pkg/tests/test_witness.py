from fractions import Fraction

import pytest

from app.analysis.func import indicator
from app.analysis.oscillation import index
from app.analysis.witness import build_chain, build_E, prop15_demo, truncated_assembly, verify_witness
from app.errors import PreconditionError
from app.topology.space import LEAF, LimitNode, homogeneous

GRID = (Fraction(1, 10), Fraction(1, 2), Fraction(1))


def test_even_height_mark():
    assert build_E(2).bits == (True, False, True)
    assert build_E(1).bits == (False, True)


def test_chain_is_the_derived_sequence():
    space, chain = build_chain(3)
    assert [mark.count() for mark in chain] == [4, 3, 2, 1]
    assert all(b.issubset(a) for a, b in zip(chain, chain[1:]))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_witness_on_homogeneous_trees(n):
    report = verify_witness(n, GRID)
    assert report.indices == tuple((eps, n) for eps in GRID)
    assert report.upper == 1 + 2 * (n // 2)
    assert report.upper == report.expected_upper
    assert report.upper <= n + 1
    assert report.lower == max(Fraction(1), Fraction(n, 4))


def test_witness_on_a_wider_tree():
    report = verify_witness(2, GRID, space=LimitNode(prefix=(LEAF,), cycle=(homogeneous(1),)))
    assert report.upper == 3
    assert report.space.size == 4


def test_witness_preconditions():
    with pytest.raises(PreconditionError):
        verify_witness(0, GRID)
    with pytest.raises(PreconditionError):
        verify_witness(1, (Fraction(2),))
    with pytest.raises(PreconditionError):
        verify_witness(2, GRID, space=homogeneous(1))


@pytest.mark.parametrize("max_rank", [3, 6])
def test_demo_rows(max_rank):
    report = prop15_demo(max_rank)
    assert [row.n for row in report.rows] == list(range(1, max_rank + 1))
    assert all(row.product == 1 for row in report.rows)
    assert all(row.index == row.n for row in report.rows)
    assert all(row.norm_bound <= 2 for row in report.rows)
    assert report.conclusion
    assert report.truncation_bound <= 2
    assert all(product >= 1 for _, product in report.truncation_products)


def test_demo_needs_a_rank():
    with pytest.raises(PreconditionError):
        prop15_demo(0)


def test_truncated_assembly_scales_each_piece():
    space, f = truncated_assembly(2)
    assert space.rank == 2
    assert f.sup_norm == 1
    assert index(f, Fraction(1, 2)) >= 2
    assert index(indicator(build_E(2)), Fraction(1)) == 2
