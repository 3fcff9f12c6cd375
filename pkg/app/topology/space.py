"""Finite pattern-tree presentations of countable compact metric spaces.

A `LimitNode` is a point that is the limit of its child sequence: the prefix
subtrees followed by the cycle subtrees repeated forever. Every decoration of a
space (marks, function values) lives on the finitely many *pattern nodes* and
is identical across cycle repetitions, so all limit quantities reduce to exact
maxima over cycle-slot subtrees.

Pattern nodes are numbered in preorder; the subtree of node `i` is the id range
`[i, nodes[i].end)`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Mapping, NamedTuple, Optional, Sequence, TypeVar, Union

from app.errors import (
    ContainmentError,
    InvalidAddressError,
    MalformedSpaceError,
    NotClosedError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class Leaf:
    pass


@dataclass(frozen=True)
class LimitNode:
    prefix: tuple["SpaceDesc", ...] = ()
    cycle: tuple["SpaceDesc", ...] = ()

    def __post_init__(self):
        if not self.cycle:
            raise MalformedSpaceError("a limit node needs a nonempty cycle")


SpaceDesc = Union[Leaf, LimitNode]

LEAF = Leaf()


class SlotKind(str, Enum):
    PREFIX = "prefix"
    CYCLE = "cycle"


class Selector(NamedTuple):
    kind: SlotKind
    index: int


NodeAddress = tuple[Selector, ...]
ROOT: NodeAddress = ()


def format_address(address: NodeAddress) -> str:
    if not address:
        return "/"
    return "".join(f"/{'p' if s.kind is SlotKind.PREFIX else 'c'}{s.index}" for s in address)


def parse_address(text: str) -> NodeAddress:
    steps = [part for part in text.strip().split("/") if part]
    address = []
    for step in steps:
        kind = {"p": SlotKind.PREFIX, "c": SlotKind.CYCLE}.get(step[:1])
        if kind is None or not step[1:].isdigit():
            raise InvalidAddressError(f"bad selector {step!r} in {text!r}")
        address.append(Selector(kind, int(step[1:])))
    return tuple(address)


def homogeneous(n: int) -> SpaceDesc:
    """T_n: T_0 is a Leaf, T_n a limit of one repeated copy of T_{n-1}."""
    desc: SpaceDesc = LEAF
    for _ in range(n):
        desc = LimitNode(prefix=(), cycle=(desc,))
    return desc


class EmptySubspace:
    _instance: Optional["EmptySubspace"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY_SUBSPACE"

    def __bool__(self) -> bool:
        return False


EMPTY_SUBSPACE = EmptySubspace()


@dataclass(frozen=True)
class PatternNode:
    id: int
    address: NodeAddress
    parent: Optional[int]
    is_limit: bool
    prefix: tuple[int, ...]
    cycle: tuple[int, ...]
    end: int

    @property
    def children(self) -> tuple[int, ...]:
        return self.prefix + self.cycle


class PatternSpace:
    """Compiled, indexed view of a SpaceDesc. Build through `compile_space`."""

    def __init__(self, desc: SpaceDesc):
        self.desc = desc
        nodes: list[Optional[PatternNode]] = []
        self._build(desc, ROOT, None, nodes)
        self.nodes: tuple[PatternNode, ...] = tuple(nodes)  # type: ignore[arg-type]
        self.index: dict[NodeAddress, int] = {node.address: node.id for node in self.nodes}
        self._hash = hash(desc)

    def _build(self, desc, address, parent, nodes) -> int:
        node_id = len(nodes)
        nodes.append(None)
        prefix: list[int] = []
        cycle: list[int] = []
        if isinstance(desc, LimitNode):
            for i, child in enumerate(desc.prefix):
                prefix.append(self._build(child, address + (Selector(SlotKind.PREFIX, i),), node_id, nodes))
            for s, child in enumerate(desc.cycle):
                cycle.append(self._build(child, address + (Selector(SlotKind.CYCLE, s),), node_id, nodes))
        elif not isinstance(desc, Leaf):
            raise MalformedSpaceError(f"not a space description: {desc!r}")
        nodes[node_id] = PatternNode(
            id=node_id,
            address=address,
            parent=parent,
            is_limit=isinstance(desc, LimitNode),
            prefix=tuple(prefix),
            cycle=tuple(cycle),
            end=len(nodes),
        )
        return node_id

    @property
    def size(self) -> int:
        return len(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, PatternSpace) and self._hash == other._hash and self.desc == other.desc

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"PatternSpace(size={self.size}, rank={self.rank})"

    def node_at(self, address: NodeAddress) -> int:
        try:
            return self.index[tuple(address)]
        except KeyError:
            raise InvalidAddressError(f"address {format_address(tuple(address))} does not resolve")

    def subtree(self, node: int) -> range:
        return range(node, self.nodes[node].end)

    def in_cycle_subtrees(self, node: int) -> Iterator[int]:
        for child in self.nodes[node].cycle:
            yield from self.subtree(child)

    def addresses(self) -> list[NodeAddress]:
        return [node.address for node in self.nodes]

    @cached_property
    def heights(self) -> tuple[int, ...]:
        height = [0] * self.size
        reach = [0] * self.size
        for i in reversed(range(self.size)):
            node = self.nodes[i]
            if node.is_limit:
                height[i] = 1 + max(reach[c] for c in node.cycle)
            reach[i] = max([height[i]] + [reach[c] for c in node.children])
        return tuple(height)

    @cached_property
    def rank(self) -> int:
        return max(self.heights)

    @cached_property
    def in_tail(self) -> tuple[bool, ...]:
        """True for nodes lying inside some cycle-slot subtree (infinitely many copies)."""
        flags = [False] * self.size
        for node in self.nodes:
            for child in node.cycle:
                for j in self.subtree(child):
                    flags[j] = True
        return tuple(flags)

    def tail_fold(self, values: Sequence[T], mark: Sequence[bool]) -> tuple[list[Optional[T]], list[Optional[T]]]:
        """Per node, max and min of `values` over marked nodes of its cycle-slot subtrees.

        `None` means no marked node occurs there, i.e. the node is isolated
        relative to the marked set.
        """
        n = self.size
        sub_hi: list = [None] * n
        sub_lo: list = [None] * n
        tail_hi: list = [None] * n
        tail_lo: list = [None] * n
        for i in reversed(range(n)):
            node = self.nodes[i]
            hi = lo = None
            for c in node.cycle:
                hi = _pick(max, hi, sub_hi[c])
                lo = _pick(min, lo, sub_lo[c])
            tail_hi[i], tail_lo[i] = hi, lo
            for c in node.prefix:
                hi = _pick(max, hi, sub_hi[c])
                lo = _pick(min, lo, sub_lo[c])
            if mark[i]:
                hi = _pick(max, hi, values[i])
                lo = _pick(min, lo, values[i])
            sub_hi[i], sub_lo[i] = hi, lo
        return tail_hi, tail_lo

    def tail_hits(self, mark: Sequence[bool]) -> list[bool]:
        """Per node, whether some cycle-slot subtree contains a marked node."""
        hits = [False] * self.size
        below = [False] * self.size
        for i in reversed(range(self.size)):
            node = self.nodes[i]
            hits[i] = any(below[c] for c in node.cycle)
            below[i] = bool(mark[i]) or hits[i] or any(below[c] for c in node.prefix)
        return hits


def _pick(op, current, candidate):
    if candidate is None:
        return current
    if current is None:
        return candidate
    return op(current, candidate)


@lru_cache(maxsize=512)
def compile_space(desc: SpaceDesc) -> PatternSpace:
    return PatternSpace(desc)


def as_space(space: Union[SpaceDesc, PatternSpace]) -> PatternSpace:
    if isinstance(space, PatternSpace):
        return space
    return compile_space(space)


@dataclass(frozen=True)
class MarkPattern:
    """A subset of the presented space: one boolean per pattern node."""

    space: PatternSpace
    bits: tuple[bool, ...]

    def __post_init__(self):
        if len(self.bits) != self.space.size:
            raise ShapeMismatchError(f"mark has {len(self.bits)} entries, space has {self.space.size} nodes")

    @classmethod
    def full(cls, space) -> "MarkPattern":
        space = as_space(space)
        return MarkPattern(space, (True,) * space.size)

    @classmethod
    def empty(cls, space) -> "MarkPattern":
        space = as_space(space)
        return MarkPattern(space, (False,) * space.size)

    @classmethod
    def from_nodes(cls, space, nodes: Iterable[int]) -> "MarkPattern":
        space = as_space(space)
        chosen = set(nodes)
        return MarkPattern(space, tuple(i in chosen for i in range(space.size)))

    @classmethod
    def from_addresses(cls, space, addresses: Iterable[NodeAddress]) -> "MarkPattern":
        space = as_space(space)
        return cls.from_nodes(space, (space.node_at(a) for a in addresses))

    def __getitem__(self, node: int) -> bool:
        return self.bits[node]

    def _check(self, other: "MarkPattern") -> None:
        if self.space != other.space:
            raise ShapeMismatchError("marks live on different spaces")

    def union(self, other: "MarkPattern") -> "MarkPattern":
        self._check(other)
        return MarkPattern(self.space, tuple(a or b for a, b in zip(self.bits, other.bits)))

    def intersect(self, other: "MarkPattern") -> "MarkPattern":
        self._check(other)
        return MarkPattern(self.space, tuple(a and b for a, b in zip(self.bits, other.bits)))

    def minus(self, other: "MarkPattern") -> "MarkPattern":
        self._check(other)
        return MarkPattern(self.space, tuple(a and not b for a, b in zip(self.bits, other.bits)))

    def complement(self) -> "MarkPattern":
        return MarkPattern(self.space, tuple(not a for a in self.bits))

    def issubset(self, other: "MarkPattern") -> bool:
        self._check(other)
        return all(b or not a for a, b in zip(self.bits, other.bits))

    def same_set(self, other: "MarkPattern") -> bool:
        self._check(other)
        return self.bits == other.bits

    def is_empty(self) -> bool:
        return not any(self.bits)

    def is_finite(self) -> bool:
        return not any(m and t for m, t in zip(self.bits, self.space.in_tail))

    def count(self) -> int:
        return sum(self.bits)

    def nodes(self) -> list[int]:
        return [i for i, bit in enumerate(self.bits) if bit]

    def addresses(self) -> list[NodeAddress]:
        return [self.space.nodes[i].address for i in self.nodes()]

    def plain(self) -> "MarkPattern":
        return MarkPattern(self.space, self.bits)


@dataclass(frozen=True)
class ClosedMark(MarkPattern):
    """A mark validated closed: no unmarked limit node has marks in its cycle slots."""

    validated: bool = field(default=True, compare=False)

    def __post_init__(self):
        super().__post_init__()
        if not is_closed(MarkPattern(self.space, self.bits)):
            raise NotClosedError("mark is not closed")

    @classmethod
    def of(cls, mark: MarkPattern) -> "ClosedMark":
        if isinstance(mark, ClosedMark):
            return mark
        return ClosedMark(mark.space, mark.bits)

    @classmethod
    def full(cls, space) -> "ClosedMark":
        return cls.of(MarkPattern.full(space))

    @classmethod
    def empty(cls, space) -> "ClosedMark":
        return cls.of(MarkPattern.empty(space))


@dataclass(frozen=True)
class HeightMap:
    space: PatternSpace
    heights: tuple[int, ...]
    rank: int

    def at(self, address: NodeAddress) -> int:
        return self.heights[self.space.node_at(address)]


def cb_height(space) -> HeightMap:
    space = as_space(space)
    return HeightMap(space=space, heights=space.heights, rank=space.rank)


def is_closed(m: MarkPattern) -> bool:
    hits = m.space.tail_hits(m.bits)
    return not any(hit and not bit for hit, bit in zip(hits, m.bits))


def is_closed_in(m: MarkPattern, domain: MarkPattern) -> bool:
    """Relative closedness of `m` inside the subspace `domain` (m must lie in domain)."""
    m._check(domain)
    if not m.issubset(domain):
        raise ContainmentError("mark is not contained in the domain")
    hits = m.space.tail_hits(m.bits)
    return not any(d and hit and not bit for d, hit, bit in zip(domain.bits, hits, m.bits))


def is_open_in(m: MarkPattern, domain: MarkPattern) -> bool:
    """Relative openness: no point of `m` is a limit of points of domain outside m."""
    if not m.issubset(domain):
        raise ContainmentError("mark is not contained in the domain")
    outside = domain.minus(m)
    hits = m.space.tail_hits(outside.bits)
    return not any(bit and hit for bit, hit in zip(m.bits, hits))


def closure(m: MarkPattern) -> ClosedMark:
    hits = m.space.tail_hits(m.bits)
    return ClosedMark(m.space, tuple(bit or hit for bit, hit in zip(m.bits, hits)))


def derived(m: MarkPattern) -> MarkPattern:
    """Cluster points of `m` that lie in `m` (for closed m, all of its cluster points)."""
    hits = m.space.tail_hits(m.bits)
    result = MarkPattern(m.space, tuple(bit and hit for bit, hit in zip(m.bits, hits)))
    return ClosedMark.of(result) if isinstance(m, ClosedMark) else result


def derived_set(space) -> ClosedMark:
    return ClosedMark.of(derived(ClosedMark.full(as_space(space))))


def derived_chain(space, j: int) -> ClosedMark:
    """K^(j): nodes of Cantor-Bendixson height at least j."""
    space = as_space(space)
    return ClosedMark(space, tuple(h >= j for h in space.heights))


def is_relatively_nowhere_dense(inner: MarkPattern, outer: MarkPattern) -> bool:
    if not inner.issubset(outer):
        raise ContainmentError("inner mark is not contained in outer mark")
    hits = inner.space.tail_hits(outer.minus(inner).bits)
    return all(hit for bit, hit in zip(inner.bits, hits) if bit)


class FiniteDiscrete(NamedTuple):
    """A subspace made of finitely many (two or more) isolated points."""

    points: tuple[NodeAddress, ...]


@dataclass(frozen=True)
class Restriction:
    desc: SpaceDesc
    translation: Mapping[NodeAddress, NodeAddress]

    @property
    def space(self) -> PatternSpace:
        return compile_space(self.desc)


_Piece = tuple[SpaceDesc, dict]


def restrict(space, c: MarkPattern) -> Union[Restriction, FiniteDiscrete, EmptySubspace]:
    space = as_space(space)
    if c.space != space:
        raise ShapeMismatchError("mark does not belong to this space")
    c = ClosedMark.of(c)
    if c.is_empty():
        return EMPTY_SUBSPACE

    def pieces(i: int) -> list[_Piece]:
        node = space.nodes[i]
        if not node.is_limit:
            return [(LEAF, {ROOT: node.address})] if c[i] else []
        before = [p for child in node.prefix for p in pieces(child)]
        tail = [p for child in node.cycle for p in pieces(child)]
        if not c[i]:
            return before
        if not tail:
            return [(LEAF, {ROOT: node.address})] + before
        return [_assemble(node.address, before, tail)]

    found = pieces(0)
    if len(found) == 1:
        desc, translation = found[0]
        return Restriction(desc, translation)
    limits = [k for k, (desc, _) in enumerate(found) if isinstance(desc, LimitNode)]
    if not limits:
        return FiniteDiscrete(tuple(tr[ROOT] for _, tr in found))
    host_desc, host_tr = found[limits[0]]
    others = [p for k, p in enumerate(found) if k != limits[0]]
    translation = {}
    for rel, old in host_tr.items():
        if rel and rel[0].kind is SlotKind.PREFIX:
            rel = (Selector(SlotKind.PREFIX, rel[0].index + len(others)),) + rel[1:]
        translation[rel] = old
    for k, (_, tr) in enumerate(others):
        for rel, old in tr.items():
            translation[(Selector(SlotKind.PREFIX, k),) + rel] = old
    desc = LimitNode(prefix=tuple(d for d, _ in others) + host_desc.prefix, cycle=host_desc.cycle)
    logger.debug(f"restrict folded {len(others)} clopen pieces into the root prefix")
    return Restriction(desc, translation)


def _assemble(address: NodeAddress, before: list[_Piece], tail: list[_Piece]) -> _Piece:
    translation = {ROOT: address}
    for kind, group in ((SlotKind.PREFIX, before), (SlotKind.CYCLE, tail)):
        for k, (_, tr) in enumerate(group):
            for rel, old in tr.items():
                translation[(Selector(kind, k),) + rel] = old
    desc = LimitNode(prefix=tuple(d for d, _ in before), cycle=tuple(d for d, _ in tail))
    return desc, translation


def translate_mark(mark: MarkPattern, restriction: Restriction) -> MarkPattern:
    """Carry a mark on the original space over to the restricted presentation."""
    new_space = restriction.space
    old_space = mark.space
    bits = tuple(
        mark[old_space.node_at(restriction.translation[node.address])] for node in new_space.nodes
    )
    return MarkPattern(new_space, bits)


def compose_translations(
    outer: Mapping[NodeAddress, NodeAddress], inner: Mapping[NodeAddress, NodeAddress]
) -> dict[NodeAddress, NodeAddress]:
    return {new: outer[mid] for new, mid in inner.items()}
