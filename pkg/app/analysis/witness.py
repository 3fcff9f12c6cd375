"""Index-n indicator witnesses and the rank-by-rank DBSC-but-not-SD demonstration."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from app.analysis.dnorm import (
    DiffClosed,
    DNormCertificate,
    Extension,
    Localization,
    NonnegLsc,
    Sum,
    as_diff_closed,
    lower_bound,
    simple_certificate,
    to_simple_dcs,
    validate_certificate,
)
from app.analysis.func import PatternFn, Rat, indicator, scale
from app.analysis.oscillation import derivation, index
from app.errors import CertificateRejected, PreconditionError, WitnessFailure
from app.topology.space import (
    LEAF,
    ClosedMark,
    LimitNode,
    MarkPattern,
    PatternSpace,
    SpaceDesc,
    as_space,
    compile_space,
    derived_chain,
    homogeneous,
    is_relatively_nowhere_dense,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WitnessReport:
    n: int
    space: PatternSpace
    chain: tuple[ClosedMark, ...]
    E: MarkPattern
    indices: tuple[tuple[Rat, int], ...]
    upper: Rat
    expected_upper: Rat
    lower: Rat
    certificate: DNormCertificate


@dataclass(frozen=True)
class Prop15Row:
    n: int
    eps: Rat
    index: int
    product: Rat
    norm_bound: Rat


@dataclass(frozen=True)
class Prop15Report:
    rows: tuple[Prop15Row, ...]
    conclusion: bool
    truncation_bound: Rat
    truncation_products: tuple[tuple[int, Rat], ...]
    note: str


CONCLUSION_NOTE = (
    "analytic conclusion over verified finite pieces: the disjoint union of all ranks "
    "carries f with D-norm at most 2 while eps·i(f, eps) >= 1 at eps = 1/n for every n, "
    "so f is a DBSC function outside SD"
)


def _space_for(n: int, space: Optional[SpaceDesc | PatternSpace]) -> PatternSpace:
    if n < 1:
        raise PreconditionError(f"witness rank must be at least 1, got {n}")
    compiled = compile_space(homogeneous(n)) if space is None else as_space(space)
    if compiled.rank < n:
        raise PreconditionError(f"space has rank {compiled.rank}, below {n}")
    return compiled


def build_chain(n: int, space: Optional[SpaceDesc | PatternSpace] = None) -> tuple[PatternSpace, tuple[ClosedMark, ...]]:
    """K_j = j-th derived set, j = 0..n, each relatively nowhere dense in its predecessor."""
    compiled = _space_for(n, space)
    chain = tuple(derived_chain(compiled, j) for j in range(n + 1))
    for j in range(1, n + 1):
        if not is_relatively_nowhere_dense(chain[j], chain[j - 1]):
            raise WitnessFailure(n, f"K_{j} is not nowhere dense in K_{j - 1}")
        if chain[j].is_empty():
            raise WitnessFailure(n, f"K_{j} is empty")
    return compiled, chain


def build_E(n: int, space: Optional[SpaceDesc | PatternSpace] = None) -> MarkPattern:
    """Union of K_{2i} ∖ K_{2i+1}: nodes whose height, capped at n, is even."""
    compiled = _space_for(n, space)
    return MarkPattern(compiled, tuple(min(h, n) % 2 == 0 for h in compiled.heights))


def _layers(chain: Sequence[ClosedMark]) -> list[DiffClosed]:
    n = len(chain) - 1
    empty = ClosedMark.empty(chain[0].space)
    regions = []
    for i in range(0, n + 1, 2):
        following = chain[i + 1] if i + 1 <= n else empty
        regions.append(DiffClosed(chain[i], following))
    return regions


def witness_certificate(chain: Sequence[ClosedMark], weight: Rat = Fraction(1)) -> Sum:
    parts = []
    for i, region in enumerate(_layers(chain)):
        parts.append((scale(weight, indicator(region.mark)), Extension(region, NonnegLsc(), factor=1 if i == 0 else 2)))
    return Sum(parts=tuple(parts))


def verify_witness(
    n: int,
    eps_grid: Sequence[Rat],
    space: Optional[SpaceDesc | PatternSpace] = None,
) -> WitnessReport:
    compiled, chain = build_chain(n, space)
    marks = build_E(n, compiled)
    f = indicator(marks)
    indices = []
    for eps in eps_grid:
        eps = Fraction(eps)
        if not 0 < eps <= 1:
            raise PreconditionError(f"grid value {eps} is outside (0, 1]")
        trail = derivation(f, eps)
        if trail.index != n:
            raise WitnessFailure(n, f"index {trail.index} at eps={eps}")
        for j, expected in enumerate(chain):
            if not trail.sets[j].same_set(expected):
                raise WitnessFailure(n, f"oscillation set {j} differs from K_{j} at eps={eps}")
        if not trail.sets[n + 1].is_empty():
            raise WitnessFailure(n, f"oscillation set {n + 1} is not empty at eps={eps}")
        indices.append((eps, trail.index))
    certificate = witness_certificate(chain)
    try:
        upper = validate_certificate(f, certificate)
    except CertificateRejected as e:
        raise WitnessFailure(n, f"certificate rejected: {e}")
    expected = Fraction(1 + 2 * (n // 2))
    if upper != expected or upper > n + 1:
        raise WitnessFailure(n, f"certified bound {upper}, expected {expected}")
    lower = lower_bound(f)
    if lower < Fraction(n, 4):
        raise WitnessFailure(n, f"lower bound {lower} is below n/4")
    logger.info(f"witness rank {n}: index {n} on {len(indices)} eps values, {lower} <= |chi_E|_D <= {upper}")
    return WitnessReport(
        n=n, space=compiled, chain=chain, E=marks, indices=tuple(indices),
        upper=upper, expected_upper=expected, lower=lower, certificate=certificate,
    )


def truncated_assembly(max_rank: int) -> tuple[PatternSpace, PatternFn]:
    """T_1 … T_N side by side as prefix pieces of one limit node, carrying (1/n)·χ_{E_n}."""
    desc = LimitNode(prefix=tuple(homogeneous(n) for n in range(1, max_rank + 1)), cycle=(LEAF,))
    space = compile_space(desc)
    values = [Fraction(0)] * space.size
    for n, child in enumerate(space.nodes[0].prefix, start=1):
        for i in space.subtree(child):
            if min(space.heights[i], n) % 2 == 0:
                values[i] = Fraction(1, n)
    return space, PatternFn(space, tuple(values))


def prop15_demo(max_rank: int) -> Prop15Report:
    if max_rank < 1:
        raise PreconditionError(f"max rank must be at least 1, got {max_rank}")
    rows = []
    for n in range(1, max_rank + 1):
        compiled, chain = build_chain(n)
        eps = Fraction(1, n)
        f = scale(eps, indicator(build_E(n, compiled)))
        found = index(f, eps)
        if found != n:
            raise WitnessFailure(n, f"i((1/n)·chi_E, 1/n) = {found}")
        try:
            norm = validate_certificate(f, witness_certificate(chain, eps))
        except CertificateRejected as e:
            raise WitnessFailure(n, f"certificate rejected: {e}")
        if norm > Fraction(n + 1, n) or norm > 2:
            raise WitnessFailure(n, f"norm premise fails: {norm}")
        rows.append(Prop15Row(n=n, eps=eps, index=found, product=eps * found, norm_bound=norm))

    space, f = truncated_assembly(max_rank)
    parts = []
    for child in space.nodes[0].prefix:
        piece = ClosedMark.of(MarkPattern.from_nodes(space, space.subtree(child)))
        parts.append((as_diff_closed(piece), simple_certificate(to_simple_dcs(f, piece), piece)))
    try:
        truncation_bound = validate_certificate(f, Localization(parts=tuple(parts)))
    except CertificateRejected as e:
        raise WitnessFailure(max_rank, f"truncation certificate rejected: {e}")
    if truncation_bound > 2:
        raise WitnessFailure(max_rank, f"truncation bound {truncation_bound} exceeds 2")
    products = []
    for n in range(1, max_rank + 1):
        eps = Fraction(1, n)
        product = eps * index(f, eps)
        if product < 1:
            raise WitnessFailure(n, f"truncation product {product} below 1")
        products.append((n, product))
    conclusion = all(row.product >= 1 for row in rows)
    return Prop15Report(
        rows=tuple(rows),
        conclusion=conclusion,
        truncation_bound=truncation_bound,
        truncation_products=tuple(products),
        note=CONCLUSION_NOTE,
    )
