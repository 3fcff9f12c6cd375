"""Cross-check symbolic results against the finite-expansion recomputation."""
import logging
from typing import Any, Optional

from app.analysis.func import PatternFn, is_continuous, is_lsc, is_usc
from app.analysis.oscillation import Flavor, critical_set, derivation, envelopes, full_index
from app.errors import SoundnessFault
from app.rationals import format_rat
from app.topology.expansion import (
    expand,
    lift_set,
    oracle_envelopes,
    oracle_heights,
    oracle_is_closed,
    oracle_semicontinuity,
    oracle_trail,
)
from app.topology.space import ClosedMark, derived_chain

logger = logging.getLogger(__name__)

ENVELOPE_NAMES = ("upper", "lower", "uosc", "osc", "oosc")


def compare_heights(f: PatternFn, copies: int) -> list[str]:
    space = f.space
    graph = expand(space, copies)
    violations = []
    if oracle_heights(graph) != space.heights:
        violations.append(f"heights differ from the expansion at {copies} copies")
    for j in range(space.rank + 2):
        if not oracle_is_closed(graph, lift_set(graph, derived_chain(space, j).bits)):
            violations.append(f"derived set {j} is not closed in the expansion at {copies} copies")
    return violations


def compare_envelopes(f: PatternFn, copies: int) -> list[str]:
    graph = expand(f.space, copies)
    full = ClosedMark.full(f.space)
    symbolic = envelopes(f, full)
    oracle = oracle_envelopes(graph, f.values, full.bits)
    violations = [
        f"{name} differs from the expansion at {copies} copies"
        for name in ENVELOPE_NAMES
        if getattr(symbolic, name).values != getattr(oracle, name)
    ]
    flags = oracle_semicontinuity(graph, f.values, full.bits)
    for name, found in (("usc", is_usc(f)), ("lsc", is_lsc(f)), ("continuous", is_continuous(f))):
        if flags[name] != found:
            violations.append(f"{name} flag {found} differs from the expansion at {copies} copies")
    return violations


def compare_trail(f: PatternFn, eps, flavor: Flavor, copies: int) -> list[str]:
    graph = expand(f.space, copies)
    symbolic = [s.bits for s in derivation(f, eps, flavor).sets]
    oracle = oracle_trail(graph, f.values, eps, upper_flavor=flavor is Flavor.OOSC)
    if symbolic != oracle:
        return [
            f"{flavor.value} derivation at eps={format_rat(eps)} differs from the expansion at {copies} copies "
            f"(lengths {len(symbolic)} and {len(oracle)})"
        ]
    return []


def oracle_check(f: PatternFn, copies: int, eps_values: Optional[list] = None) -> list[str]:
    """All comparisons for one function; the critical set is the default eps grid."""
    eps_values = list(critical_set(f)) if eps_values is None else eps_values
    violations = compare_heights(f, copies) + compare_envelopes(f, copies)
    for eps in eps_values:
        for flavor in Flavor:
            violations += compare_trail(f, eps, flavor, copies)
    return violations


def oracle_summary(f: PatternFn, copies: int) -> dict[str, Any]:
    """Oracle-side numbers for one function: its index per critical eps."""
    graph = expand(f.space, copies)
    try:
        indices = [
            {"eps": format_rat(d), "index": len(oracle_trail(graph, f.values, d)) - 2}
            for d in critical_set(f)
        ]
    except SoundnessFault as e:
        logger.error(f"oracle derivation failed at {copies} copies: {e}")
        raise
    symbolic = full_index(f)
    return {
        "copies": copies,
        "vertices": graph.size,
        "indices": indices,
        "symbolic_indices": [{"eps": format_rat(d), "index": i} for d, i in symbolic.indices],
    }
