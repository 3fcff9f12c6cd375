"""Deterministic corpus of pattern spaces and functions for the property suites.

The same CorpusSpec always yields the same corpus: every random stream is a
`random.Random` seeded from a sha256 of the spec seed and a stream label.
"""
import hashlib
import itertools
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from app.analysis.func import PatternFn, constant, indicator
from app.analysis.oscillation import envelopes
from app.config import Settings, get_settings
from app.models import CorpusSpec
from app.rationals import parse_rat
from app.services.serialization import digest, serialize_function
from app.topology.space import (
    LEAF,
    LimitNode,
    MarkPattern,
    PatternSpace,
    SpaceDesc,
    compile_space,
    derived_chain,
    homogeneous,
)

logger = logging.getLogger(__name__)

RANDOM_KINDS = ("random", "continuous", "usc", "lsc", "continuous", "indicator")
LEAF_PROBABILITY = 0.35
GROUP_SIZE = 3
MAX_PREFIX_DEPTH = 3
WITNESS_MAX_RANK = 4


@dataclass(frozen=True)
class CorpusEntry:
    label: str
    kind: str
    f: PatternFn
    group: Optional[int] = None

    @property
    def space(self) -> PatternSpace:
        return self.f.space

    @property
    def digest(self) -> str:
        return digest({"label": self.label, "function": serialize_function(self.f)})


def derive_seed(seed: int, *labels) -> int:
    key = ":".join([str(seed), *map(str, labels)])
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


def default_spec(settings: Optional[Settings] = None) -> CorpusSpec:
    settings = settings or get_settings()
    return CorpusSpec(
        seed=settings.corpus_seed,
        count=settings.corpus_count,
        max_rank=settings.corpus_max_rank,
        value_set=[v.strip() for v in settings.corpus_values.split(",") if v.strip()],
        cycle_slots=settings.corpus_cycle_slots,
        prefix_len=settings.corpus_prefix_len,
    )


def _free_space(rng: random.Random, budget: int, depth: int, spec: CorpusSpec) -> SpaceDesc:
    if budget == 0 or depth >= MAX_PREFIX_DEPTH or rng.random() < LEAF_PROBABILITY:
        return LEAF
    return LimitNode(
        prefix=tuple(_free_space(rng, budget - 1, depth + 1, spec) for _ in range(rng.randint(0, spec.prefix_len))),
        cycle=tuple(_free_space(rng, budget - 1, depth + 1, spec) for _ in range(rng.randint(1, spec.cycle_slots))),
    )


def random_space(rng: random.Random, rank: int, spec: CorpusSpec) -> SpaceDesc:
    """A space of exactly the given rank; the first cycle slot carries the height."""
    if rank == 0:
        return LEAF
    cycle = [random_space(rng, rank - 1, spec)]
    cycle += [_free_space(rng, rank - 1, 1, spec) for _ in range(rng.randint(1, spec.cycle_slots) - 1)]
    prefix = [_free_space(rng, rank - 1, 1, spec) for _ in range(rng.randint(0, spec.prefix_len))]
    return LimitNode(prefix=tuple(prefix), cycle=tuple(cycle))


def _continuous(rng: random.Random, space: PatternSpace, values: list[Fraction]) -> PatternFn:
    out = [Fraction(0)] * space.size
    forced: list[Optional[Fraction]] = [None] * space.size
    for node in space.nodes:
        value = forced[node.id] if forced[node.id] is not None else rng.choice(values)
        out[node.id] = value
        if node.is_limit:
            for child in node.cycle:
                for i in space.subtree(child):
                    forced[i] = value
    return PatternFn(space, tuple(out))


def random_function(rng: random.Random, space: PatternSpace, kind: str, values: list[Fraction]) -> PatternFn:
    if kind == "continuous":
        return _continuous(rng, space, values)
    if kind == "indicator":
        return indicator(MarkPattern(space, tuple(rng.random() < 0.5 for _ in range(space.size))))
    f = PatternFn(space, tuple(rng.choice(values) for _ in range(space.size)))
    if kind == "usc":
        return envelopes(f).upper
    if kind == "lsc":
        return envelopes(f).lower
    return f


def _even_height_witness(space: PatternSpace, r: int) -> CorpusEntry:
    marks = MarkPattern(space, tuple(min(h, r) % 2 == 0 for h in space.heights))
    return CorpusEntry(f"chi-E-T{r}", "indicator", indicator(marks), group=-r)


def pinned_entries(spec: CorpusSpec) -> list[CorpusEntry]:
    entries = [CorpusEntry("const-1-leaf", "constant", constant(compile_space(LEAF), 1))]
    for r in range(1, spec.max_rank + 1):
        space = compile_space(homogeneous(r))
        entries.append(CorpusEntry(f"const-0-T{r}", "constant", constant(space, 0), group=-r))
        entries.append(CorpusEntry(f"const-1-T{r}", "constant", constant(space, 1), group=-r))
        for j in range(1, r + 1):
            entries.append(CorpusEntry(f"chi-K{j}-T{r}", "indicator", indicator(derived_chain(space, j)), group=-r))
        entries.append(_even_height_witness(space, r))
    # witnesses are pinned up to rank 4 whatever the cap
    for r in range(spec.max_rank + 1, WITNESS_MAX_RANK + 1):
        entries.append(_even_height_witness(compile_space(homogeneous(r)), r))
    return entries


def generate_corpus(spec: Optional[CorpusSpec] = None) -> list[CorpusEntry]:
    spec = spec or default_spec()
    values = [parse_rat(v) for v in spec.value_set]
    entries = pinned_entries(spec)
    groups = -(-spec.count // GROUP_SIZE)
    for g in range(groups):
        rng = random.Random(derive_seed(spec.seed, "space", g))
        space = compile_space(random_space(rng, rng.randint(0, spec.max_rank), spec))
        for k in range(GROUP_SIZE):
            position = GROUP_SIZE * g + k
            if position >= spec.count:
                break
            kind = RANDOM_KINDS[position % len(RANDOM_KINDS)]
            fn_rng = random.Random(derive_seed(spec.seed, "function", g, k))
            f = random_function(fn_rng, space, kind, values)
            entries.append(CorpusEntry(f"{kind}-{g:03d}{'abc'[k]}", kind, f, group=g))
    logger.info(f"corpus seed={spec.seed}: {len(entries)} functions, max rank {spec.max_rank}")
    return entries


def pairs(entries: list[CorpusEntry]) -> list[tuple[CorpusEntry, CorpusEntry]]:
    """Function pairs sharing one space: the random groups and the pinned T_r families."""
    by_group: dict[int, list[CorpusEntry]] = {}
    for entry in entries:
        if entry.group is not None:
            by_group.setdefault(entry.group, []).append(entry)
    return [pair for group in by_group.values() for pair in itertools.combinations(group, 2)]


def corpus_digest(entries: list[CorpusEntry]) -> str:
    return digest([entry.digest for entry in entries])
