"""Constructive approximation of finite-index functions by simple D-functions.

The pipeline has three entry points:

* `staircase` quantizes a function continuous on an open set into level sets
  (the residual is non-negative and lower semicontinuous).
* `sd_decompose` runs the peel-off loop for functions supported on an open set
  U with i(f|U) <= n: cut out the high-oscillation set W, recurse on W with
  index n - 1, interpose a continuous function on U ∖ W and carry the small
  remainder into the next round.
* `usc_sd_approx` handles semicontinuous functions piecewise along the
  oscillation trail at a single eps.

Every result carries a certificate that `dnorm.validate_certificate` accepts.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from app.analysis.dnorm import (
    ContinuousOnOpen,
    DiffClosed,
    DNormCertificate,
    Extension,
    LscSplit,
    NonnegLsc,
    SimpleDCS,
    Sum,
    as_diff_closed,
    claimed_bound,
    negate_certificate,
    semicontinuous_certificate,
    to_simple_dcs,
    validate_certificate,
)
from app.analysis.func import (
    ZERO,
    PatternFn,
    Rat,
    Semicontinuity,
    add,
    constant,
    is_continuous_in,
    is_lsc,
    is_usc,
    neg,
    restrict_values,
    scale,
    semicontinuity_witness,
    sub,
    vanishes_off,
)
from app.analysis.oscillation import IndexReport, derivation, envelopes, full_index, threshold_set
from app.config import get_settings
from app.errors import PreconditionError, SoundnessFault
from app.topology.space import ClosedMark, MarkPattern, format_address, is_closed, is_open_in

logger = logging.getLogger(__name__)


class ApproxPath(str, Enum):
    STAIRCASE = "staircase"
    FINITE_INDEX = "finite-index"
    SEMICONTINUOUS = "semicontinuous"


def lam(n: int) -> int:
    return 2 ** (n + 1) - 1


@dataclass(frozen=True)
class GnWitness:
    f: PatternFn
    support: MarkPattern
    n: int

    @classmethod
    def whole_space(cls, f: PatternFn) -> "GnWitness":
        return GnWitness(f=f, support=ClosedMark.full(f.space).plain(), n=full_index(f).i_f)


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    eps: Rat
    region_size: int
    h_bound: Rat
    g_norm: Rat


@dataclass(frozen=True)
class StaircaseResult:
    simple: SimpleDCS
    approximation: PatternFn
    residual: PatternFn
    certificate: DNormCertificate
    bound: Rat


@dataclass(frozen=True)
class SDApprox:
    f: PatternFn
    simple: SimpleDCS
    residual_bound: Rat
    certificate: DNormCertificate
    trace: tuple[TraceStep, ...]
    path: ApproxPath
    tolerance: Rat
    headline_bound: Rat
    headline_certificate: DNormCertificate
    n: int
    eps_used: Optional[Rat] = None
    below_seven_eta: Optional[bool] = None

    @property
    def residual(self) -> PatternFn:
        return sub(self.f, self.simple.evaluate())


@dataclass(frozen=True)
class SDVerdict:
    is_sd: bool
    index: int
    rank: int
    quasinorm: Rat
    slope_near_zero: int
    vanishing_product: bool
    approximation: SDApprox


@dataclass(frozen=True)
class _Step:
    h: PatternFn
    certificate: Sum
    bound: Rat
    eps: Rat
    region_size: int
    g_norm: Rat


def _node(f: PatternFn, i: int) -> str:
    return format_address(f.space.nodes[i].address)


def interpose(f: PatternFn, eps: Rat, within: Optional[MarkPattern] = None) -> PatternFn:
    """A function continuous on `within` and eps-close to f there; equal to f elsewhere.

    Top-down: a domain node with domain points in its tail pushes its own value
    onto every domain node of its cycle subtrees; prefix subtrees are handled
    independently.
    """
    domain = within if within is not None else ClosedMark.full(f.space)
    space = f.space
    if domain.is_empty():
        return f
    osc = envelopes(f, domain).osc
    for i, bit in enumerate(domain.bits):
        if bit and osc.values[i] > eps:
            raise PreconditionError(f"oscillation {osc.values[i]} exceeds eps={eps}", _node(f, i))
    hits = space.tail_hits(domain.bits)
    phi = list(f.values)
    stack: list[tuple[int, Optional[Rat]]] = [(0, None)]
    while stack:
        i, forced = stack.pop()
        node = space.nodes[i]
        if forced is not None:
            if domain[i]:
                phi[i] = forced
            stack.extend((c, forced) for c in node.children)
        elif domain[i] and hits[i]:
            stack.extend((c, f.values[i]) for c in node.cycle)
            stack.extend((c, None) for c in node.prefix)
        else:
            stack.extend((c, None) for c in node.children)
    result = PatternFn(space, tuple(phi))
    if not is_continuous_in(result, domain):
        raise SoundnessFault("interposed function is not continuous on its domain")
    norm = f.sup_norm
    for i, bit in enumerate(domain.bits):
        if bit and (abs(phi[i] - f.values[i]) > eps or abs(phi[i]) > norm):
            raise SoundnessFault(f"interposition contract fails at {_node(f, i)}")
    return result


def staircase(f: PatternFn, n: int, support: Optional[MarkPattern] = None) -> StaircaseResult:
    if n < 1:
        raise ValueError(f"staircase needs n >= 1, got {n}")
    if f.sup_norm > 1:
        raise PreconditionError(f"sup-norm {f.sup_norm} exceeds 1; rescale first")
    space = f.space
    full = ClosedMark.full(space)
    support = support if support is not None else MarkPattern(space, tuple(v != 0 for v in f.values))
    if not is_open_in(support, full):
        raise PreconditionError("staircase support is not open")
    if not vanishes_off(f, support):
        raise PreconditionError("function does not vanish off its support")
    broken = semicontinuity_witness(f, support, Semicontinuity.CONTINUOUS)
    if broken is not None:
        raise PreconditionError("function is not continuous on its support", _node(f, broken))
    levels: dict[int, list[int]] = {}
    for i, bit in enumerate(support.bits):
        if bit:
            levels.setdefault(math.floor(n * f.values[i]), []).append(i)
    terms = tuple(
        (Fraction(j, n), as_diff_closed(MarkPattern.from_nodes(space, nodes)))
        for j, nodes in sorted(levels.items())
        if j != 0
    )
    simple = SimpleDCS(space, terms)
    approximation = simple.evaluate()
    residual = sub(f, approximation)
    step = Fraction(1, n)
    if any(v < 0 or v > step for v in residual.values):
        raise SoundnessFault("staircase residual leaves [0, 1/n]")
    if not is_lsc(residual):
        raise SoundnessFault("staircase residual is not lower semicontinuous")
    certificate = NonnegLsc()
    validate_certificate(residual, certificate)
    return StaircaseResult(simple, approximation, residual, certificate, step)


def _zero_on(f: PatternFn, domain: MarkPattern) -> bool:
    return all(v == 0 for v, bit in zip(f.values, domain.bits) if bit)


def _gn_certificate(g: PatternFn, domain: MarkPattern, n: int, tolerance: Rat) -> DNormCertificate:
    """Certificate for g on `domain` (g supported on all of it, i(g|domain) <= n)."""
    if _zero_on(g, domain) or n == 0:
        return ContinuousOnOpen(support=as_diff_closed(domain))
    steps = _gn_loop(g, domain, domain, n, tolerance)
    return Sum(parts=tuple((s.h, s.certificate) for s in steps))


def _gn_loop(g: PatternFn, domain: MarkPattern, support: MarkPattern, n: int, tolerance: Rat) -> list[_Step]:
    lam_n = lam(n)
    cap = get_settings().max_loop_iterations
    steps: list[_Step] = []
    current = support
    j = 0
    while not _zero_on(g, domain):
        j += 1
        if j > cap:
            raise SoundnessFault(f"decomposition loop exceeded {cap} iterations")
        eps_j = tolerance / 2 / (lam_n * 2 ** j)
        inner_tolerance = tolerance / 2 ** (j + 2)
        region = threshold_set(envelopes(g, current).osc, current, eps_j)
        parts: list[tuple[PatternFn, DNormCertificate]] = []
        if not region.is_empty():
            sub_index = full_index(g, within=region).i_f
            if sub_index > n - 1:
                raise SoundnessFault(f"index did not drop on the high-oscillation set: {sub_index} > {n - 1}")
            inner = _gn_certificate(g, region, n - 1, inner_tolerance)
            parts.append((restrict_values(g, region), Extension(as_diff_closed(region), inner, factor=2)))
        rest = current.minus(region)
        if rest.is_empty():
            following = constant(g.space, 0)
        else:
            phi = interpose(g, eps_j, rest)
            parts.append((restrict_values(phi, rest), ContinuousOnOpen(support=as_diff_closed(rest))))
            following = restrict_values(sub(g, phi), rest)
        h = constant(g.space, 0)
        for part, _ in parts:
            h = add(h, part)
        certificate = Sum(parts=tuple(parts))
        g_norm = following.sup_norm
        if g_norm > eps_j:
            raise SoundnessFault(f"remainder {g_norm} exceeds the scheduled eps {eps_j}")
        steps.append(
            _Step(
                h=h,
                certificate=certificate,
                bound=claimed_bound(h, certificate, domain),
                eps=eps_j,
                region_size=region.count(),
                g_norm=g_norm,
            )
        )
        logger.debug(f"loop n={n} iteration {j}: |W|={region.count()} remainder={g_norm}")
        g, current = following, rest
    return steps


def validate_witness(w: GnWitness) -> None:
    if w.n < 0:
        raise PreconditionError(f"index bound must be non-negative, got {w.n}")
    if not is_closed(w.support.complement()):
        raise PreconditionError("witness support is not open")
    if not vanishes_off(w.f, w.support):
        raise PreconditionError("function does not vanish off the witness support")
    if not w.support.is_empty():
        found = full_index(w.f, within=w.support).i_f
        if found > w.n:
            raise PreconditionError(f"index on the support is {found}, above the claimed {w.n}")


def _empty_simple(f: PatternFn) -> SimpleDCS:
    return SimpleDCS(f.space, ())


def sd_decompose(w: GnWitness, eps: Rat) -> SDApprox:
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError(f"tolerance must be positive, got {eps}")
    validate_witness(w)
    f = w.f
    norm = f.sup_norm
    if norm == 0:
        zero_cert = ContinuousOnOpen()
        return SDApprox(
            f=f, simple=_empty_simple(f), residual_bound=ZERO, certificate=zero_cert, trace=(),
            path=ApproxPath.STAIRCASE if w.n == 0 else ApproxPath.FINITE_INDEX, tolerance=eps,
            headline_bound=ZERO, headline_certificate=zero_cert, n=w.n,
        )
    if w.n == 0:
        return _staircase_path(w, eps)

    steps = _gn_loop(f, ClosedMark.full(f.space), w.support, w.n, eps)
    headline = Sum(parts=tuple((s.h, s.certificate) for s in steps))
    headline_bound = validate_certificate(f, headline)
    if headline_bound > lam(w.n) * norm + eps:
        raise SoundnessFault(f"certified bound {headline_bound} exceeds lambda_n·|f| + eps")

    tails = [ZERO] * (len(steps) + 1)
    for k in reversed(range(len(steps))):
        tails[k] = tails[k + 1] + steps[k].bound
    m = next(k for k in range(len(steps) + 1) if tails[k] <= eps)
    head = constant(f.space, 0)
    for s in steps[:m]:
        head = add(head, s.h)
    simple = to_simple_dcs(head) if m else _empty_simple(f)
    residual_cert = Sum(parts=tuple((s.h, s.certificate) for s in steps[m:]))
    residual = sub(f, simple.evaluate())
    checked = validate_certificate(residual, residual_cert)
    if checked > tails[m]:
        raise SoundnessFault("residual certificate exceeds its recorded bound")
    trace = tuple(
        TraceStep(iteration=k + 1, eps=s.eps, region_size=s.region_size, h_bound=s.bound, g_norm=s.g_norm)
        for k, s in enumerate(steps)
    )
    logger.info(f"decomposed at n={w.n}: {len(steps)} rounds, simple part from {m}, residual <= {tails[m]}")
    return SDApprox(
        f=f, simple=simple, residual_bound=tails[m], certificate=residual_cert, trace=trace,
        path=ApproxPath.FINITE_INDEX, tolerance=eps, headline_bound=headline_bound,
        headline_certificate=headline, n=w.n,
    )


def _staircase_path(w: GnWitness, eps: Rat) -> SDApprox:
    f = w.f
    norm = f.sup_norm
    levels = math.ceil(norm / eps)
    stairs = staircase(scale(1 / norm, f), levels, support=w.support)
    simple = stairs.simple.scaled(norm)
    residual = sub(f, simple.evaluate())
    certificate = NonnegLsc()
    residual_bound = norm / levels
    if validate_certificate(residual, certificate) > residual_bound:
        raise SoundnessFault("staircase residual exceeds its bound")
    headline = ContinuousOnOpen(support=as_diff_closed(w.support))
    headline_bound = validate_certificate(f, headline)
    trace = (TraceStep(iteration=1, eps=residual_bound, region_size=0, h_bound=headline_bound, g_norm=residual.sup_norm),)
    return SDApprox(
        f=f, simple=simple, residual_bound=residual_bound, certificate=certificate, trace=trace,
        path=ApproxPath.STAIRCASE, tolerance=eps, headline_bound=headline_bound,
        headline_certificate=headline, n=0,
    )


def usc_sd_approx(f: PatternFn, eta: Rat) -> SDApprox:
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if is_usc(f):
        return _usc_path(f, eta)
    if is_lsc(f):
        mirrored = _usc_path(neg(f), eta)
        return SDApprox(
            f=f,
            simple=mirrored.simple.scaled(Fraction(-1)),
            residual_bound=mirrored.residual_bound,
            certificate=negate_certificate(mirrored.certificate, mirrored.residual),
            trace=mirrored.trace,
            path=mirrored.path,
            tolerance=mirrored.tolerance,
            headline_bound=mirrored.headline_bound,
            headline_certificate=negate_certificate(mirrored.headline_certificate, mirrored.f),
            n=mirrored.n,
            eps_used=mirrored.eps_used,
            below_seven_eta=mirrored.below_seven_eta,
        )
    broken = semicontinuity_witness(f, ClosedMark.full(f.space), Semicontinuity.USC)
    raise PreconditionError("function is neither upper nor lower semicontinuous", _node(f, broken))


def _usc_path(f: PatternFn, eta: Rat) -> SDApprox:
    report = full_index(f)
    usable = [d for d, idx in report.indices if d < eta and d * idx < eta]
    if not usable:
        logger.warning(f"no critical eps below eta={eta} with eps·i(f, eps) < eta; using the finite-index pipeline")
        return sd_decompose(GnWitness.whole_space(f), eta)
    eps = max(usable)
    trail = derivation(f, eps)
    n = trail.index
    approximation = constant(f.space, 0)
    parts: list[tuple[PatternFn, DNormCertificate]] = []
    level = constant(f.space, eps)
    for j in range(n + 1):
        outer, inner = ClosedMark.of(trail.sets[j]), ClosedMark.of(trail.sets[j + 1])
        region = DiffClosed(outer, inner)
        piece = region.mark
        phi = interpose(f, eps, piece)
        approximation = add(approximation, restrict_values(phi, piece))
        remainder = restrict_values(sub(f, phi), piece)
        split = LscSplit(u=level, v=sub(level, remainder))
        parts.append((remainder, Extension(region=region, inner=split, factor=2)))
    certificate = Sum(parts=tuple(parts))
    claim = 6 * eps * (n + 1)
    residual = sub(f, approximation)
    if validate_certificate(residual, certificate) > claim:
        raise SoundnessFault("semicontinuous residual exceeds 6·eps·(n+1)")
    headline = semicontinuous_certificate(f)
    headline_bound = validate_certificate(f, headline)
    simple = to_simple_dcs(approximation)
    logger.info(f"semicontinuous path at eps={eps}: n={n}, residual <= {claim}")
    return SDApprox(
        f=f, simple=simple, residual_bound=claim, certificate=certificate, trace=(),
        path=ApproxPath.SEMICONTINUOUS, tolerance=eta, headline_bound=headline_bound,
        headline_certificate=headline, n=n, eps_used=eps, below_seven_eta=claim < 7 * eta,
    )


def _near_zero(f: PatternFn, report: IndexReport) -> tuple[int, bool]:
    """i(f, eps) just below the smallest critical value, and whether eps·i(f, eps) -> 0 there."""
    if not report.critical:
        return 0, True
    d = min(report.critical)
    at_d = report.index_at(d)
    slope = derivation(f, d / 2).index
    if slope != at_d or slope != report.i_f:
        return slope, False
    return slope, slope == 0 or (d / 2) * slope < d * at_d


def sd_test(f: PatternFn, tolerance: Optional[Rat] = None) -> SDVerdict:
    if tolerance is None:
        settings = get_settings()
        tolerance = settings.rationals(settings.decompose_tolerance)[0]
    report = full_index(f)
    approximation = sd_decompose(GnWitness.whole_space(f), tolerance)
    rank = f.space.rank
    if report.i_f > rank:
        raise SoundnessFault(f"index {report.i_f} exceeds the rank {rank}")
    slope, vanishing = _near_zero(f, report)
    if not vanishing:
        logger.warning(f"eps·i(f, eps) does not settle below {min(report.critical)}: slope {slope}")
    return SDVerdict(
        is_sd=vanishing and approximation.residual_bound <= tolerance,
        index=report.i_f,
        rank=rank,
        quasinorm=report.quasinorm,
        slope_near_zero=slope,
        vanishing_product=vanishing,
        approximation=approximation,
    )
