"""Semicontinuous envelopes, oscillations, oscillation-set derivation and indices.

All quantities are relative to a domain mark (the subspace topology). Limsups
are non-exclusive: a neighbourhood of x always contains x itself, so every
oscillation vanishes at points isolated in the domain.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from app.analysis.func import (
    ZERO,
    PatternFn,
    Rat,
    add,
    mul,
    sup_norm,
    vmax,
    vmin,
)
from app.errors import EmptySubspaceError, NotClosedError, ShapeMismatchError, SoundnessFault
from app.topology.space import ClosedMark, MarkPattern, is_closed_in

logger = logging.getLogger(__name__)


class Flavor(str, Enum):
    OSC = "osc"
    OOSC = "oosc"


class ThetaMode(str, Enum):
    SUM = "sum"
    PRODUCT = "product"
    LATTICE = "lattice"


@dataclass(frozen=True)
class OscReport:
    domain: MarkPattern
    upper: PatternFn
    lower: PatternFn
    uosc: PatternFn
    osc: PatternFn
    oosc: PatternFn


@dataclass(frozen=True)
class DerivationTrail:
    eps: Rat
    flavor: Flavor
    sets: tuple[MarkPattern, ...]
    terminal: bool = True

    @property
    def index(self) -> int:
        return max(len(self.sets) - 2, 0)

    def at(self, j: int) -> MarkPattern:
        """The j-th set of the chain; empty past the end."""
        if j < len(self.sets):
            return self.sets[j]
        return self.sets[-1]


@dataclass(frozen=True)
class IndexReport:
    critical: tuple[Rat, ...]
    indices: tuple[tuple[Rat, int], ...]
    i_f: int
    beta: int
    beta_hor: int
    quasinorm: Rat
    full_quasinorm: Rat

    def index_at(self, eps: Rat) -> int:
        """i(f, eps) read off the step function: constant on (d_k, d_{k+1}]."""
        for d, idx in self.indices:
            if eps <= d:
                return idx
        return 0


def _domain(f: PatternFn, within: Optional[MarkPattern]) -> MarkPattern:
    if within is None:
        return ClosedMark.full(f.space)
    if within.space != f.space:
        raise ShapeMismatchError("domain mark and function live on different spaces")
    return within


def envelopes(f: PatternFn, within: Optional[MarkPattern] = None) -> OscReport:
    domain = _domain(f, within)
    if domain.is_empty():
        raise EmptySubspaceError("envelopes need a nonempty domain")
    space = f.space
    n = space.size
    tail_hi, tail_lo = space.tail_fold(f.values, domain.bits)
    upper = [ZERO] * n
    lower = [ZERO] * n
    uosc = [ZERO] * n
    for i in range(n):
        if not domain[i]:
            continue
        value = f.values[i]
        if tail_hi[i] is None:
            upper[i] = lower[i] = value
            continue
        upper[i] = max(value, tail_hi[i])
        lower[i] = min(value, tail_lo[i])
        uosc[i] = max(tail_hi[i] - value, value - tail_lo[i])
    osc_hi, _ = space.tail_fold(uosc, domain.bits)
    osc = [
        max(uosc[i], osc_hi[i]) if domain[i] and osc_hi[i] is not None else uosc[i]
        for i in range(n)
    ]
    return OscReport(
        domain=domain,
        upper=PatternFn(space, tuple(upper)),
        lower=PatternFn(space, tuple(lower)),
        uosc=PatternFn(space, tuple(uosc)),
        osc=PatternFn(space, tuple(osc)),
        oosc=PatternFn(space, tuple(u - l for u, l in zip(upper, lower))),
    )


def threshold_set(values: PatternFn, domain: MarkPattern, eps: Rat) -> MarkPattern:
    return MarkPattern(values.space, tuple(bit and v >= eps for bit, v in zip(domain.bits, values.values)))


def derivation(
    f: PatternFn,
    eps: Rat,
    flavor: Flavor = Flavor.OSC,
    within: Optional[MarkPattern] = None,
) -> DerivationTrail:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    eps = Fraction(eps)
    current = _domain(f, within)
    sets = [current]
    cap = f.space.rank + 2
    while not current.is_empty():
        report = envelopes(f, current)
        values = report.osc if flavor is Flavor.OSC else report.oosc
        following = threshold_set(values, current, eps)
        if not is_closed_in(following, current):
            raise SoundnessFault(f"oscillation set {len(sets)} is not relatively closed")
        if isinstance(current, ClosedMark):
            try:
                following = ClosedMark.of(following)
            except NotClosedError:
                raise SoundnessFault(f"oscillation set {len(sets)} is not closed")
        if following.same_set(current):
            raise SoundnessFault(f"derivation stalled at step {len(sets)} for eps={eps}")
        sets.append(following)
        current = following
        if len(sets) > cap:
            raise SoundnessFault(f"derivation did not reach the empty set within {cap} steps")
        logger.debug(f"derivation step {len(sets) - 1}: {following.count()} pattern nodes remain")
    return DerivationTrail(eps=eps, flavor=flavor, sets=tuple(sets), terminal=True)


def index(f: PatternFn, eps: Rat, within: Optional[MarkPattern] = None) -> int:
    return derivation(f, eps, Flavor.OSC, within).index


def critical_set(f: PatternFn, within: Optional[MarkPattern] = None) -> tuple[Rat, ...]:
    """Distinct nonzero differences of values taken on the domain, ascending."""
    domain = _domain(f, within)
    taken = sorted({v for v, bit in zip(f.values, domain.bits) if bit})
    return tuple(sorted({abs(a - b) for a, b in itertools.combinations(taken, 2)}))


def full_index(f: PatternFn, within: Optional[MarkPattern] = None) -> IndexReport:
    domain = _domain(f, within)
    critical = critical_set(f, domain)
    allowed = set(critical) | {ZERO}
    if not domain.is_empty():
        report = envelopes(f, domain)
        for name in ("uosc", "osc", "oosc"):
            stray = set(getattr(report, name).values) - allowed
            if stray:
                raise SoundnessFault(f"{name} takes values {sorted(stray)} outside the critical set")
    indices = []
    beta_hor = 1
    for d in critical:
        indices.append((d, derivation(f, d, Flavor.OSC, domain).index))
        upper_trail = derivation(f, d, Flavor.OOSC, domain)
        beta_hor = max(beta_hor, len(upper_trail.sets) - 1)
    for (_, earlier), (_, later) in zip(indices, indices[1:]):
        if later > earlier:
            raise SoundnessFault("index increased with eps")
    i_f = max((idx for _, idx in indices), default=0)
    if beta_hor != i_f + 1:
        raise SoundnessFault(f"upper-oscillation index {beta_hor} differs from i(f)+1 = {i_f + 1}")
    quasinorm = max((d * idx for d, idx in indices), default=ZERO)
    return IndexReport(
        critical=critical,
        indices=tuple(indices),
        i_f=i_f,
        beta=i_f + 1,
        beta_hor=beta_hor,
        quasinorm=quasinorm,
        full_quasinorm=quasinorm + sup_norm(f),
    )


def cover_oscillation(f: PatternFn, parts: Sequence[MarkPattern]) -> PatternFn:
    """Pointwise max over a finite closed cover of osc(f|W)·χ_W."""
    result = PatternFn(f.space, (ZERO,) * f.space.size)
    for part in parts:
        if part.is_empty():
            continue
        result = vmax(result, envelopes(f, part).osc)
    return result


def _thresholds(f: PatternFn, g: PatternFn, eps: Rat, mode: ThetaMode) -> tuple[Rat, Rat]:
    eps = Fraction(eps)
    if mode is ThetaMode.SUM:
        return eps / 2, eps / 2
    if mode is ThetaMode.LATTICE:
        return eps, eps
    big_f, big_g = sup_norm(f), sup_norm(g)
    if big_f == 0 or big_g == 0:
        raise ValueError("product thresholds need nonzero sup-norms")
    return eps / (2 * big_g), eps / (2 * big_f)


def ltheta_sets(
    f: PatternFn,
    g: PatternFn,
    eps: Rat,
    theta: Sequence[int],
    mode: ThetaMode = ThetaMode.SUM,
) -> ClosedMark:
    """L(theta): refine by osc f (bit 0) or osc g (bit 1) restricted to the current set."""
    if f.space != g.space:
        raise ShapeMismatchError("L(theta) needs both functions on one space")
    t_f, t_g = _thresholds(f, g, eps, mode)
    current = ClosedMark.full(f.space)
    for bit in theta:
        if current.is_empty():
            break
        which, threshold = (f, t_f) if bit == 0 else (g, t_g)
        current = ClosedMark.of(threshold_set(envelopes(which, current).osc, current, threshold))
    return current


def combine(f: PatternFn, g: PatternFn, mode: ThetaMode) -> list[PatternFn]:
    if mode is ThetaMode.SUM:
        return [add(f, g)]
    if mode is ThetaMode.PRODUCT:
        return [mul(f, g)]
    return [vmax(f, g), vmin(f, g)]


def combination_containments(f: PatternFn, g: PatternFn, eps: Rat, mode: ThetaMode, n: int) -> list[str]:
    """Check os_n(h) ⊆ ∪ L(theta) and L(theta) ⊆ os_j(f) ∩ os_k(g); returns violations."""
    violations: list[str] = []
    t_f, t_g = _thresholds(f, g, eps, mode)
    trail_f = derivation(f, t_f)
    trail_g = derivation(g, t_g)
    covered = MarkPattern.empty(f.space)
    for theta in itertools.product((0, 1), repeat=n):
        found = ltheta_sets(f, g, eps, theta, mode)
        covered = covered.union(found)
        j, k = theta.count(0), theta.count(1)
        bound = trail_f.at(j).intersect(trail_g.at(k))
        if not found.issubset(bound):
            violations.append(f"L{theta} not inside os_{j}(f) ∩ os_{k}(g) at eps={eps}")
    threshold = Fraction(eps)
    for h in combine(f, g, mode):
        target = derivation(h, threshold).at(n)
        if not target.issubset(covered):
            violations.append(f"os_{n}(h) not covered by L(theta), theta of length {n}, eps={eps}")
    return violations
