"""Corpus-wide property suites.

Each suite is a check over one corpus entry, one pair of entries sharing a
space, or a single global run. Checks return violation strings; an empty list
means the property held. Entries run concurrently in worker threads and the
results are sorted by input digest before aggregation.
"""
import asyncio
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from app.analysis.decompose import GnWitness, ApproxPath, interpose, lam, sd_decompose, staircase, usc_sd_approx
from app.analysis.dnorm import bounds, check_certificate, simple_certificate, to_simple_dcs
from app.analysis.func import (
    PatternFn,
    indicator,
    is_continuous,
    is_lsc,
    is_usc,
    scale,
    sub,
    sup_inf,
    support,
    vabs,
)
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
    combination_containments,
)
from app.analysis.witness import prop15_demo, verify_witness
from app.config import Settings, get_settings
from app.errors import EngineError
from app.services.corpus import CorpusEntry, derive_seed, pairs
from app.services.oracle import oracle_check
from app.topology.space import (
    ClosedMark,
    FiniteDiscrete,
    MarkPattern,
    Restriction,
    closure,
    compose_translations,
    derived_chain,
    derived_set,
    is_closed,
    is_open_in,
    is_relatively_nowhere_dense,
    restrict,
    translate_mark,
)

logger = logging.getLogger(__name__)

SCALARS = (Fraction(-2), Fraction(-1), Fraction(1, 3), Fraction(5))
CONTAINMENT_SAMPLE = 20
CONTAINMENT_EPS = 3


@dataclass
class SuiteResult:
    name: str
    checked: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Suite:
    name: str
    per_entry: Optional[Callable[[CorpusEntry, Settings], list[str]]] = None
    per_pair: Optional[Callable[[CorpusEntry, CorpusEntry, Settings], list[str]]] = None
    whole: Optional[Callable[[Settings], list[str]]] = None


def _old_addresses(found) -> set:
    if isinstance(found, Restriction):
        return set(found.translation.values())
    if isinstance(found, FiniteDiscrete):
        return set(found.points)
    return set()


def _rank_of(found) -> int:
    return found.space.rank if isinstance(found, Restriction) else 0


def check_topology(entry: CorpusEntry, settings: Settings) -> list[str]:
    space = entry.space
    violations = []
    full = ClosedMark.full(space)
    first = derived_set(space)
    if not is_closed(first):
        violations.append("derived set is not closed")
    for j in range(space.rank + 2):
        layer = derived_chain(space, j)
        if j <= space.rank and layer.is_empty():
            violations.append(f"derived set {j} is empty below the rank")
        if j == space.rank and not layer.is_finite():
            violations.append(f"derived set {j} at the rank is not finite")
        if j == space.rank + 1 and not layer.is_empty():
            violations.append("derived set past the rank is not empty")
    if space.rank >= 1:
        if not is_relatively_nowhere_dense(first, full):
            violations.append("derived set is not nowhere dense")
        found = restrict(space, first)
        if _rank_of(found) != space.rank - 1:
            violations.append(f"restriction to the derived set has rank {_rank_of(found)}, expected {space.rank - 1}")
    if space.rank >= 2:
        second = derived_chain(space, 2)
        direct = restrict(space, second)
        step = restrict(space, first)
        inner = restrict(step.space, translate_mark(second, step))
        if isinstance(inner, Restriction):
            composed = set(compose_translations(step.translation, inner.translation).values())
        else:
            composed = {step.translation[p] for p in _old_addresses(inner)}
        if composed != _old_addresses(direct):
            violations.append("restriction does not compose along derived sets")
    return violations


def check_semicontinuity(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    full = ClosedMark.full(f.space)
    usc, lsc = is_usc(f), is_lsc(f)
    if is_continuous(f) != (usc and lsc):
        violations.append("continuity differs from usc and lsc together")
    if is_lsc(scale(-1, f)) != usc:
        violations.append("negation does not swap usc and lsc")
    report = envelopes(f)
    if not is_usc(report.upper) or not is_lsc(report.lower):
        violations.append("envelopes are not semicontinuous")
    if any(u < v for u, v in zip(report.upper.values, f.values)) or any(l > v for l, v in zip(report.lower.values, f.values)):
        violations.append("envelopes do not sandwich f")
    if sup_inf(f, full) != (max(f.values), min(f.values)):
        violations.append("sup_inf disagrees with the value range")
    m = support(f)
    chi = indicator(m)
    if is_lsc(chi) != is_open_in(m, full):
        violations.append("indicator of the support: lsc does not match openness")
    if is_usc(chi) != is_closed(m):
        violations.append("indicator of the support: usc does not match closedness")
    return violations


def check_sandwich(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    report = envelopes(f)
    for i, (osc, oosc) in enumerate(zip(report.osc.values, report.oosc.values)):
        if not oosc / 2 <= osc <= oosc:
            violations.append(f"half oosc <= osc <= oosc fails at node {i}")
    if envelopes(report.uosc).upper.values != report.osc.values:
        violations.append("osc is not the upper envelope of uosc")
    if sub(report.upper, report.lower).values != report.oosc.values:
        violations.append("oosc is not Uf - Lf")
    grid = sorted(set(critical_set(f)) | {d / 2 for d in critical_set(f)})
    for eps in grid:
        wide = derivation(f, 2 * eps, Flavor.OOSC)
        middle = derivation(f, eps, Flavor.OSC)
        narrow = derivation(f, eps, Flavor.OOSC)
        depth = max(len(wide.sets), len(middle.sets), len(narrow.sets))
        for j in range(depth):
            if not wide.at(j).issubset(middle.at(j)) or not middle.at(j).issubset(narrow.at(j)):
                violations.append(f"oscillation set nesting fails at j={j}, eps={eps}")
    return violations


def check_identities(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    report = full_index(f)
    if report.beta != report.i_f + 1 or report.beta_hor != report.beta:
        violations.append(f"beta {report.beta}/{report.beta_hor} differs from i(f)+1")
    if report.i_f > f.space.rank:
        violations.append(f"i(f) = {report.i_f} exceeds the rank {f.space.rank}")
    for c in SCALARS:
        scaled = scale(c, f)
        if full_index(scaled).i_f != report.i_f:
            violations.append(f"i({c}·f) differs from i(f)")
        for d, idx in report.indices:
            if index(scaled, abs(c) * d) != idx:
                violations.append(f"i({c}·f, {abs(c) * d}) differs from i(f, {d})")
    absolute = vabs(f)
    for d, idx in report.indices:
        if index(absolute, d) > idx:
            violations.append(f"i(|f|, {d}) exceeds i(f, {d})")
    rng = random.Random(derive_seed(settings.corpus_seed, "cover", entry.digest))
    first = closure(MarkPattern(f.space, tuple(rng.random() < 0.3 for _ in range(f.space.size))))
    second = closure(first.complement())
    if cover_oscillation(f, [first, second]).values != envelopes(f).osc.values:
        violations.append("closed-cover oscillation differs from osc")
    return violations


def _sum_inequality(f: PatternFn, g: PatternFn) -> list[str]:
    h = combine(f, g, ThetaMode.SUM)[0]
    return [
        f"i(f+g, {d}) exceeds i(f, {d / 2}) + i(g, {d / 2})"
        for d in critical_set(h)
        if index(h, d) > index(f, d / 2) + index(g, d / 2)
    ]


def _product_inequality(f: PatternFn, g: PatternFn) -> list[str]:
    big_f, big_g = f.sup_norm, g.sup_norm
    if big_f == 0 or big_g == 0:
        return []
    h = combine(f, g, ThetaMode.PRODUCT)[0]
    return [
        f"i(fg, {d}) exceeds the product bound"
        for d in critical_set(h)
        if index(h, d) > index(f, d / (2 * big_g)) + index(g, d / (2 * big_f))
    ]


def _lattice_inequality(f: PatternFn, g: PatternFn) -> list[str]:
    violations = []
    for name, h in zip(("max", "min"), combine(f, g, ThetaMode.LATTICE)):
        violations += [
            f"i({name}(f, g), {d}) exceeds i(f, {d}) + i(g, {d})"
            for d in critical_set(h)
            if index(h, d) > index(f, d) + index(g, d)
        ]
    return violations


def check_algebra(a: CorpusEntry, b: CorpusEntry, settings: Settings) -> list[str]:
    return _sum_inequality(a.f, b.f) + _product_inequality(a.f, b.f) + _lattice_inequality(a.f, b.f)


def check_containments(a: CorpusEntry, b: CorpusEntry, settings: Settings) -> list[str]:
    f, g = a.f, b.f
    violations = []
    for mode in ThetaMode:
        if mode is ThetaMode.PRODUCT and (f.sup_norm == 0 or g.sup_norm == 0):
            continue
        targets = combine(f, g, mode)
        grid = sorted({d for h in targets for d in critical_set(h)})[:CONTAINMENT_EPS]
        for eps in grid:
            n = max(index(h, eps) for h in targets)
            violations += combination_containments(f, g, eps, mode, max(n, 1))
    return violations


def check_simple_dcs(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    s = to_simple_dcs(f)
    if s.evaluate().values != f.values:
        violations.append("simple representation does not evaluate back to f")
    if not s.is_disjoint():
        violations.append("simple representation terms overlap")
    verdict = check_certificate(f, simple_certificate(s))
    if not verdict.accepted:
        violations.append(f"simple certificate rejected at {verdict.path}: {verdict.condition}")
    chi = indicator(support(f))
    if to_simple_dcs(chi).evaluate().values != chi.values:
        violations.append("indicator of the support is not simple")
    return violations


def check_index_norm(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    found = bounds(f)
    if found.upper < f.sup_norm:
        violations.append(f"certified bound {found.upper} is below the sup-norm")
    verdict = check_certificate(f, found.certificate)
    if not verdict.accepted or verdict.bound != found.upper:
        violations.append("best certificate does not re-check to its bound")
    for d, idx in full_index(f).indices:
        if d * idx > 4 * found.upper:
            violations.append(f"eps·i(f, eps) = {d * idx} exceeds 4·{found.upper} at eps={d}")
    return violations


def check_pipeline(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    violations = []
    tolerance = settings.rationals(settings.decompose_tolerance)[0]
    approx = sd_decompose(GnWitness.whole_space(f), tolerance)
    if approx.residual_bound > tolerance:
        violations.append(f"residual bound {approx.residual_bound} exceeds {tolerance}")
    verdict = check_certificate(approx.residual, approx.certificate)
    if not verdict.accepted or verdict.bound > approx.residual_bound:
        violations.append("residual certificate does not re-check")
    if approx.headline_bound > lam(approx.n) * f.sup_norm + tolerance:
        violations.append(f"headline bound {approx.headline_bound} exceeds lambda_n·|f| + {tolerance}")
    top = max(envelopes(f).osc.values)
    if top > 0:
        interpose(f, top)
    if entry.kind in ("usc", "lsc") and (is_usc(f) or is_lsc(f)):
        semi = usc_sd_approx(f, Fraction(1, 2))
        verdict = check_certificate(semi.residual, semi.certificate)
        if not verdict.accepted or verdict.bound > semi.residual_bound:
            violations.append("semicontinuous residual certificate does not re-check")
        if semi.path is ApproxPath.SEMICONTINUOUS and semi.residual_bound != 6 * semi.eps_used * (semi.n + 1):
            violations.append("semicontinuous residual bound is not 6·eps·(n+1)")
    return violations


def check_staircase(entry: CorpusEntry, settings: Settings) -> list[str]:
    f = entry.f
    if not is_continuous(f) or f.sup_norm > 1:
        return []
    violations = []
    full = MarkPattern.full(f.space)
    for n in settings.integers(settings.staircase_levels):
        result = staircase(f, n, support=full)
        if not is_lsc(result.residual):
            violations.append(f"staircase residual at n={n} is not lsc")
        verdict = check_certificate(result.residual, result.certificate)
        if not verdict.accepted or verdict.bound > Fraction(1, n):
            violations.append(f"staircase residual certificate exceeds 1/{n}")
    return violations


def check_oracle(entry: CorpusEntry, settings: Settings) -> list[str]:
    violations = []
    for copies in settings.integers(settings.oracle_copies):
        violations += oracle_check(entry.f, copies)
    return violations


def check_witness(settings: Settings) -> list[str]:
    grid = settings.rationals(settings.witness_eps_grid)
    violations = []
    for n in range(1, settings.witness_max_rank + 1):
        report = verify_witness(n, grid)
        if report.upper > n + 1:
            violations.append(f"rank {n}: certified bound {report.upper} exceeds n+1")
        if report.lower < Fraction(n, 4):
            violations.append(f"rank {n}: lower bound {report.lower} is below n/4")
    return violations


def check_prop15(settings: Settings) -> list[str]:
    report = prop15_demo(settings.witness_max_rank)
    violations = [f"row {row.n}: product {row.product} is not 1" for row in report.rows if row.product != 1]
    violations += [f"row {row.n}: norm premise {row.norm_bound} exceeds 2" for row in report.rows if row.norm_bound > 2]
    if not report.conclusion:
        violations.append("conclusion flag is not set")
    return violations


SUITES: dict[str, Suite] = {
    suite.name: suite
    for suite in (
        Suite("topology", per_entry=check_topology),
        Suite("semicontinuity", per_entry=check_semicontinuity),
        Suite("sandwich", per_entry=check_sandwich),
        Suite("identities", per_entry=check_identities),
        Suite("algebra", per_pair=check_algebra),
        Suite("simple-dcs", per_entry=check_simple_dcs),
        Suite("index-norm", per_entry=check_index_norm),
        Suite("pipeline", per_entry=check_pipeline),
        Suite("staircase", per_entry=check_staircase),
        Suite("witness", whole=check_witness),
        Suite("prop15", whole=check_prop15),
        Suite("oracle", per_entry=check_oracle),
    )
}

SUITE_NAMES = tuple(SUITES) + ("all",)


def _guarded(label: str, check: Callable[..., list[str]], *args) -> list[str]:
    try:
        return check(*args)
    except EngineError as e:
        logger.error(f"{label}: {type(e).__name__}: {e}")
        return [f"{type(e).__name__}: {e}"]


async def _run_items(items: list[tuple[str, str, Callable[[], list[str]]]], workers: int) -> list[tuple[str, str, list[str]]]:
    gate = asyncio.Semaphore(workers)

    async def run_one(key: str, label: str, job: Callable[[], list[str]]):
        async with gate:
            found = await asyncio.to_thread(_guarded, label, job)
        return key, label, found

    results = await asyncio.gather(*(run_one(*item) for item in items))
    return sorted(results, key=lambda r: r[0])


async def run_suite(name: str, corpus: list[CorpusEntry], settings: Optional[Settings] = None) -> SuiteResult:
    settings = settings or get_settings()
    suite = SUITES[name]
    items: list[tuple[str, str, Callable[[], list[str]]]] = []
    if suite.per_entry is not None:
        items += [
            (entry.digest, entry.label, lambda entry=entry: suite.per_entry(entry, settings))
            for entry in corpus
        ]
    if suite.per_pair is not None:
        found_pairs = pairs(corpus)
        items += [
            (a.digest + b.digest, f"{a.label}+{b.label}", lambda a=a, b=b: suite.per_pair(a, b, settings))
            for a, b in found_pairs
        ]
        if name == "algebra":
            sample = sorted(found_pairs, key=lambda p: p[0].digest + p[1].digest)[:CONTAINMENT_SAMPLE]
            items += [
                ("containment:" + a.digest + b.digest, f"{a.label}+{b.label} containments",
                 lambda a=a, b=b: check_containments(a, b, settings))
                for a, b in sample
            ]
    if suite.whole is not None:
        items.append((name, name, lambda: suite.whole(settings)))

    result = SuiteResult(name=name)
    for _, label, found in await _run_items(items, settings.suite_workers):
        result.checked += 1
        result.violations += [f"{label}: {v}" for v in found]
    if result.violations:
        logger.error(f"suite {name}: {len(result.violations)} violations over {result.checked} checks")
    else:
        logger.info(f"suite {name}: {result.checked} checks passed")
    return result


async def run_suites(names: list[str], corpus: list[CorpusEntry], settings: Optional[Settings] = None) -> list[SuiteResult]:
    if "all" in names:
        names = list(SUITES)
    return [await run_suite(name, corpus, settings) for name in names]
