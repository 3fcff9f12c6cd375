"""Exact-rational, cycle-uniform functions on pattern spaces."""
from __future__ import annotations

import logging
import operator
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

from app.errors import EmptySubspaceError, ShapeMismatchError
from app.rationals import Number, Rat
from app.topology.space import (
    EMPTY_SUBSPACE,
    ClosedMark,
    EmptySubspace,
    MarkPattern,
    NodeAddress,
    PatternSpace,
    as_space,
)

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class PatternFn:
    space: PatternSpace
    values: tuple[Rat, ...]

    def __post_init__(self):
        if len(self.values) != self.space.size:
            raise ShapeMismatchError(
                f"function has {len(self.values)} values, space has {self.space.size} nodes"
            )
        object.__setattr__(self, "values", tuple(Fraction(v) for v in self.values))

    @classmethod
    def of(cls, space, values: Iterable[Number]) -> "PatternFn":
        return PatternFn(as_space(space), tuple(Fraction(v) for v in values))

    def __getitem__(self, node: int) -> Rat:
        return self.values[node]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def sup_norm(self) -> Rat:
        return max(abs(v) for v in self.values)

    def value_set(self) -> frozenset[Rat]:
        return frozenset(self.values)


class Semicontinuity(str, Enum):
    USC = "usc"
    LSC = "lsc"
    CONTINUOUS = "continuous"


def _check(f: PatternFn, g: Union[PatternFn, MarkPattern]) -> None:
    if f.space != g.space:
        raise ShapeMismatchError("operands live on different spaces")


def evaluate(f: PatternFn, address: NodeAddress) -> Rat:
    return f.values[f.space.node_at(address)]


def constant(space, c: Number) -> PatternFn:
    space = as_space(space)
    return PatternFn(space, (Fraction(c),) * space.size)


def indicator(m: MarkPattern) -> PatternFn:
    return PatternFn(m.space, tuple(ONE if bit else ZERO for bit in m.bits))


def pointwise(op: Callable[[Rat, Rat], Rat], f: PatternFn, g: PatternFn) -> PatternFn:
    _check(f, g)
    return PatternFn(f.space, tuple(op(a, b) for a, b in zip(f.values, g.values)))


def add(f: PatternFn, g: PatternFn) -> PatternFn:
    return pointwise(operator.add, f, g)


def sub(f: PatternFn, g: PatternFn) -> PatternFn:
    return pointwise(operator.sub, f, g)


def mul(f: PatternFn, g: PatternFn) -> PatternFn:
    return pointwise(operator.mul, f, g)


def vmax(f: PatternFn, g: PatternFn) -> PatternFn:
    return pointwise(max, f, g)


def vmin(f: PatternFn, g: PatternFn) -> PatternFn:
    return pointwise(min, f, g)


def scale(c: Number, f: PatternFn) -> PatternFn:
    c = Fraction(c)
    return PatternFn(f.space, tuple(c * v for v in f.values))


def neg(f: PatternFn) -> PatternFn:
    return scale(-1, f)


def vabs(f: PatternFn) -> PatternFn:
    return PatternFn(f.space, tuple(abs(v) for v in f.values))


def positive_part(f: PatternFn) -> PatternFn:
    return PatternFn(f.space, tuple(max(v, ZERO) for v in f.values))


def negative_part(f: PatternFn) -> PatternFn:
    return PatternFn(f.space, tuple(max(-v, ZERO) for v in f.values))


def sup_norm(f: PatternFn) -> Rat:
    return f.sup_norm


def support(f: PatternFn) -> MarkPattern:
    return MarkPattern(f.space, tuple(v != 0 for v in f.values))


def restrict_values(f: PatternFn, m: MarkPattern) -> PatternFn:
    """f on the marked set, zero elsewhere."""
    _check(f, m)
    return PatternFn(f.space, tuple(v if bit else ZERO for v, bit in zip(f.values, m.bits)))


def values_on(f: PatternFn, m: MarkPattern) -> frozenset[Rat]:
    _check(f, m)
    return frozenset(v for v, bit in zip(f.values, m.bits) if bit)


def sup_inf(f: PatternFn, within: MarkPattern) -> Union[tuple[Rat, Rat], EmptySubspace]:
    found = values_on(f, within)
    if not found:
        return EMPTY_SUBSPACE
    return max(found), min(found)


def vanishes_off(f: PatternFn, m: MarkPattern) -> bool:
    _check(f, m)
    return all(v == 0 for v, bit in zip(f.values, m.bits) if not bit)


def semicontinuity_witness(f: PatternFn, within: MarkPattern, kind: Semicontinuity) -> Optional[int]:
    """First node of `within` where `f` restricted to `within` violates `kind`, if any."""
    _check(f, within)
    tail_hi, tail_lo = f.space.tail_fold(f.values, within.bits)
    for i, bit in enumerate(within.bits):
        if not bit or tail_hi[i] is None:
            continue
        too_high = tail_hi[i] > f.values[i]
        too_low = tail_lo[i] < f.values[i]
        if kind is Semicontinuity.USC and too_high:
            return i
        if kind is Semicontinuity.LSC and too_low:
            return i
        if kind is Semicontinuity.CONTINUOUS and (too_high or too_low):
            return i
    return None


def is_usc_in(f: PatternFn, within: MarkPattern) -> bool:
    return semicontinuity_witness(f, within, Semicontinuity.USC) is None


def is_lsc_in(f: PatternFn, within: MarkPattern) -> bool:
    return semicontinuity_witness(f, within, Semicontinuity.LSC) is None


def is_continuous_in(f: PatternFn, within: MarkPattern) -> bool:
    return semicontinuity_witness(f, within, Semicontinuity.CONTINUOUS) is None


def _domain(f: PatternFn, within: Optional[ClosedMark]) -> ClosedMark:
    if within is None:
        return ClosedMark.full(f.space)
    within = ClosedMark.of(within)
    if within.is_empty():
        raise EmptySubspaceError("semicontinuity needs a nonempty domain")
    return within


def is_usc(f: PatternFn, within: Optional[ClosedMark] = None) -> bool:
    return is_usc_in(f, _domain(f, within))


def is_lsc(f: PatternFn, within: Optional[ClosedMark] = None) -> bool:
    return is_lsc_in(f, _domain(f, within))


def is_continuous(f: PatternFn, within: Optional[ClosedMark] = None) -> bool:
    return is_continuous_in(f, _domain(f, within))
