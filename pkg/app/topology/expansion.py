"""Finite unrolling of pattern trees, used as an independent recomputation path.

`expand` replaces every infinite tail by `copies` explicit repetitions of the
cycle. The limit-aware semantics below then read "eventually" as "inside the
last unrolled repetition": a neighbourhood of a limit vertex is the vertex
itself plus everything below its final repetition. Every query works on
explicit vertex sets, never on the bottom-up folds of `space`, and results are
collapsed back onto pattern nodes with a check that all copies agree.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional, Sequence, TypeVar

from app.errors import SoundnessFault
from app.topology.space import PatternSpace, as_space

logger = logging.getLogger(__name__)

T = TypeVar("T")

Rat = Fraction


@dataclass(frozen=True)
class Vertex:
    id: int
    pattern: int
    children: tuple[int, ...]
    tail: tuple[int, ...]
    end: int


@dataclass(frozen=True)
class ExpandedGraph:
    space: PatternSpace
    copies: int
    vertices: tuple[Vertex, ...]

    @property
    def size(self) -> int:
        return len(self.vertices)

    def below(self, v: int) -> range:
        return range(v, self.vertices[v].end)

    @cached_property
    def eventual(self) -> tuple[frozenset[int], ...]:
        """Per vertex, the vertices below the last unrolled cycle repetition."""
        result = []
        for vertex in self.vertices:
            members: set[int] = set()
            for child in vertex.tail:
                members.update(self.below(child))
            result.append(frozenset(members))
        return tuple(result)

    def neighbourhood(self, v: int) -> frozenset[int]:
        return self.eventual[v] | {v}


def expand(space, copies: int) -> ExpandedGraph:
    if copies < 2:
        raise ValueError(f"expansion needs at least 2 copies, got {copies}")
    space = as_space(space)
    vertices: list[Optional[Vertex]] = []

    def unroll(node_id: int) -> int:
        node = space.nodes[node_id]
        vid = len(vertices)
        vertices.append(None)
        children = [unroll(c) for c in node.prefix]
        last: list[int] = []
        for _ in range(copies):
            last = [unroll(c) for c in node.cycle]
            children.extend(last)
        vertices[vid] = Vertex(
            id=vid,
            pattern=node_id,
            children=tuple(children),
            tail=tuple(last),
            end=len(vertices),
        )
        return vid

    unroll(0)
    graph = ExpandedGraph(space=space, copies=copies, vertices=tuple(vertices))  # type: ignore[arg-type]
    logger.debug(f"expanded {space.size} pattern nodes into {graph.size} vertices at copies={copies}")
    return graph


def lift_set(graph: ExpandedGraph, bits: Sequence[bool]) -> frozenset[int]:
    return frozenset(v.id for v in graph.vertices if bits[v.pattern])


def lift_values(graph: ExpandedGraph, values: Sequence[T]) -> list[T]:
    return [values[v.pattern] for v in graph.vertices]


def collapse(graph: ExpandedGraph, per_vertex: Sequence[T], what: str = "value") -> tuple[T, ...]:
    """Fold vertex results onto pattern nodes; every copy of a node must agree."""
    seen: dict[int, T] = {}
    for vertex in graph.vertices:
        value = per_vertex[vertex.id]
        if vertex.pattern in seen and seen[vertex.pattern] != value:
            raise SoundnessFault(
                f"expansion copies disagree on {what} at pattern node {vertex.pattern}: "
                f"{seen[vertex.pattern]!r} != {value!r}"
            )
        seen.setdefault(vertex.pattern, value)
    return tuple(seen[i] for i in range(graph.space.size))


def collapse_set(graph: ExpandedGraph, members: frozenset[int], what: str = "membership") -> tuple[bool, ...]:
    return collapse(graph, [v in members for v in range(graph.size)], what)


def cluster_points(graph: ExpandedGraph, members: frozenset[int]) -> frozenset[int]:
    return frozenset(v.id for v in graph.vertices if graph.eventual[v.id] & members)


def oracle_heights(graph: ExpandedGraph) -> tuple[int, ...]:
    """Heights by iterated isolated-point removal."""
    heights = [0] * graph.size
    current = frozenset(range(graph.size))
    level = 0
    while current:
        for v in current:
            heights[v] = level
        current = current & cluster_points(graph, current)
        level += 1
    return collapse(graph, heights, "height")


def oracle_is_closed(graph: ExpandedGraph, members: frozenset[int]) -> bool:
    return cluster_points(graph, members) <= members


def oracle_is_nowhere_dense(graph: ExpandedGraph, inner: frozenset[int], outer: frozenset[int]) -> bool:
    rest = outer - inner
    return all(graph.eventual[v] & rest for v in inner)


def _extreme(op: Callable, items):
    items = list(items)
    return op(items) if items else None


@dataclass(frozen=True)
class OracleEnvelopes:
    upper: tuple[Rat, ...]
    lower: tuple[Rat, ...]
    uosc: tuple[Rat, ...]
    osc: tuple[Rat, ...]
    oosc: tuple[Rat, ...]


def _vertex_envelopes(graph: ExpandedGraph, f: Sequence[Rat], domain: frozenset[int]) -> dict[str, list[Rat]]:
    zero = Fraction(0)
    upper = [zero] * graph.size
    lower = [zero] * graph.size
    uosc = [zero] * graph.size
    osc = [zero] * graph.size
    for v in domain:
        near = graph.neighbourhood(v) & domain
        upper[v] = max(f[y] for y in near)
        lower[v] = min(f[y] for y in near)
        uosc[v] = max(abs(f[y] - f[v]) for y in near)
    for v in domain:
        near = graph.neighbourhood(v) & domain
        osc[v] = max(uosc[y] for y in near)
    oosc = [upper[v] - lower[v] for v in range(graph.size)]
    return {"upper": upper, "lower": lower, "uosc": uosc, "osc": osc, "oosc": oosc}


def oracle_envelopes(graph: ExpandedGraph, values: Sequence[Rat], domain_bits: Sequence[bool]) -> OracleEnvelopes:
    f = lift_values(graph, values)
    domain = lift_set(graph, domain_bits)
    found = _vertex_envelopes(graph, f, domain)
    return OracleEnvelopes(**{name: collapse(graph, vals, name) for name, vals in found.items()})


def oracle_trail(graph: ExpandedGraph, values: Sequence[Rat], eps: Rat, upper_flavor: bool = False,
                 cap: Optional[int] = None) -> list[tuple[bool, ...]]:
    """Oscillation sets down to the empty set, collapsed to pattern nodes."""
    f = lift_values(graph, values)
    current = frozenset(range(graph.size))
    key = "oosc" if upper_flavor else "osc"
    trail = [collapse_set(graph, current)]
    limit = cap if cap is not None else graph.space.rank + 2
    while current:
        if len(trail) > limit:
            raise SoundnessFault(f"oracle derivation did not reach the empty set within {limit} steps")
        found = _vertex_envelopes(graph, f, current)
        current = frozenset(v for v in current if found[key][v] >= eps)
        trail.append(collapse_set(graph, current))
    return trail


def oracle_index(graph: ExpandedGraph, values: Sequence[Rat], eps: Rat) -> int:
    return len(oracle_trail(graph, values, eps)) - 2


def oracle_semicontinuity(graph: ExpandedGraph, values: Sequence[Rat], domain_bits: Sequence[bool]) -> dict[str, bool]:
    f = lift_values(graph, values)
    domain = lift_set(graph, domain_bits)
    usc = lsc = continuous = True
    for v in domain:
        tail = graph.eventual[v] & domain
        if not tail:
            continue
        hi = _extreme(max, (f[y] for y in tail))
        lo = _extreme(min, (f[y] for y in tail))
        usc = usc and hi <= f[v]
        lsc = lsc and lo >= f[v]
        continuous = continuous and hi == f[v] == lo
    return {"usc": usc, "lsc": lsc, "continuous": continuous}
