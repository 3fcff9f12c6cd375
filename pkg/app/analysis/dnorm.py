"""D-norm bound certificates, their checker, and the simple-D representation.

A certificate is a small proof tree. Each node kind corresponds to one norm
fact about differences of bounded semicontinuous functions and carries the
data needed to re-check its side conditions mechanically. Every node is
checked relative to a domain: the whole space at the root, the region of an
enclosing Extension or Localization part below it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

from app.analysis.func import (
    ZERO,
    PatternFn,
    Rat,
    add,
    constant,
    indicator,
    is_continuous_in,
    is_lsc_in,
    is_usc_in,
    negative_part,
    neg,
    positive_part,
    scale,
    sub,
)
from app.analysis.oscillation import IndexReport, full_index
from app.errors import (
    CertificateRejected,
    ContainmentError,
    NotClosedError,
    PreconditionError,
    ShapeMismatchError,
    SoundnessFault,
)
from app.topology.space import (
    ClosedMark,
    MarkPattern,
    PatternSpace,
    closure,
    format_address,
    is_closed,
    is_open_in,
)

logger = logging.getLogger(__name__)


class CertKind(str, Enum):
    LSC_SPLIT = "lsc_split"
    NONNEG_LSC = "nonneg_lsc"
    SUM = "sum"
    EXTENSION = "extension"
    LOCALIZATION = "localization"
    CONTINUOUS_ON_OPEN = "continuous_on_open"


@dataclass(frozen=True)
class DiffClosed:
    """The set outer ∖ minus for closed marks minus ⊆ outer."""

    outer: ClosedMark
    minus: ClosedMark

    def __post_init__(self):
        if not self.minus.issubset(self.outer):
            raise ContainmentError("minus is not contained in outer")

    @property
    def space(self) -> PatternSpace:
        return self.outer.space

    @property
    def mark(self) -> MarkPattern:
        return self.outer.minus(self.minus)


@dataclass(frozen=True)
class RegionMarks:
    """An outer/minus pair read from a document, closedness not yet established."""

    outer: MarkPattern
    minus: MarkPattern

    @property
    def space(self) -> PatternSpace:
        return self.outer.space

    @property
    def mark(self) -> MarkPattern:
        return self.outer.minus(self.minus)


Region = Union[DiffClosed, RegionMarks]


def as_diff_closed(m: MarkPattern) -> DiffClosed:
    """Present a locally closed mark as closure(m) ∖ (closure(m) ∖ m)."""
    outer = closure(m)
    try:
        minus = ClosedMark.of(outer.minus(m))
    except NotClosedError:
        raise PreconditionError("mark is not a difference of closed sets")
    return DiffClosed(outer, minus)


@dataclass(frozen=True)
class SimpleDCS:
    space: PatternSpace
    terms: tuple[tuple[Rat, DiffClosed], ...] = ()

    def evaluate(self) -> PatternFn:
        total = constant(self.space, 0)
        for coeff, region in self.terms:
            total = add(total, scale(coeff, indicator(region.mark)))
        return total

    def is_disjoint(self) -> bool:
        seen = MarkPattern.empty(self.space)
        for _, region in self.terms:
            if not seen.intersect(region.mark).is_empty():
                return False
            seen = seen.union(region.mark)
        return True

    def scaled(self, c: Rat) -> "SimpleDCS":
        return SimpleDCS(self.space, tuple((c * coeff, region) for coeff, region in self.terms if c * coeff != 0))


@dataclass(frozen=True)
class LscSplit:
    u: PatternFn
    v: PatternFn
    kind: CertKind = field(default=CertKind.LSC_SPLIT, init=False)


@dataclass(frozen=True)
class NonnegLsc:
    kind: CertKind = field(default=CertKind.NONNEG_LSC, init=False)


@dataclass(frozen=True)
class Sum:
    parts: tuple[tuple[PatternFn, "DNormCertificate"], ...]
    kind: CertKind = field(default=CertKind.SUM, init=False)


@dataclass(frozen=True)
class Extension:
    region: Region
    inner: "DNormCertificate"
    factor: int = 2
    kind: CertKind = field(default=CertKind.EXTENSION, init=False)


@dataclass(frozen=True)
class Localization:
    parts: tuple[tuple[Region, "DNormCertificate"], ...]
    kind: CertKind = field(default=CertKind.LOCALIZATION, init=False)


@dataclass(frozen=True)
class ContinuousOnOpen:
    support: Optional[Region] = None
    kind: CertKind = field(default=CertKind.CONTINUOUS_ON_OPEN, init=False)


DNormCertificate = Union[LscSplit, NonnegLsc, Sum, Extension, Localization, ContinuousOnOpen]


@dataclass(frozen=True)
class CertificateVerdict:
    accepted: bool
    bound: Optional[Rat] = None
    path: Optional[str] = None
    kind: Optional[CertKind] = None
    condition: Optional[str] = None


@dataclass(frozen=True)
class Annotation:
    label: str
    value: Rat
    certified: bool = False


@dataclass(frozen=True)
class DNormBounds:
    lower: Rat
    upper: Rat
    certificate: DNormCertificate
    source: str
    annotations: tuple[Annotation, ...] = ()


def _sup_abs(f: PatternFn, domain: MarkPattern) -> Rat:
    return max((abs(v) for v, bit in zip(f.values, domain.bits) if bit), default=ZERO)


def _agree_on(f: PatternFn, g: PatternFn, domain: MarkPattern) -> bool:
    return all(a == b for a, b, bit in zip(f.values, g.values, domain.bits) if bit)


def _zero_on(f: PatternFn, domain: MarkPattern) -> bool:
    return all(v == 0 for v, bit in zip(f.values, domain.bits) if bit)


class _Checker:
    def __init__(self, space: PatternSpace):
        self.space = space

    def reject(self, path: str, cert: DNormCertificate, condition: str):
        raise CertificateRejected(path, cert.kind.value, condition)

    def same_space(self, path: str, cert: DNormCertificate, *objs) -> None:
        for obj in objs:
            if obj.space != self.space:
                self.reject(path, cert, "operand lives on a different space")

    def region(self, path: str, cert: DNormCertificate, region: Region, domain: MarkPattern) -> MarkPattern:
        self.same_space(path, cert, region.outer, region.minus)
        for name, m in (("outer", region.outer), ("minus", region.minus)):
            if not is_closed(m):
                self.reject(f"{path}.{name}", cert, f"{name} mark is not closed")
        if not region.minus.issubset(region.outer):
            self.reject(path, cert, "minus is not contained in outer")
        mark = region.mark
        if not mark.issubset(domain):
            self.reject(path, cert, "region is not contained in the domain")
        return mark

    def check(self, f: PatternFn, cert: DNormCertificate, domain: MarkPattern, path: str) -> Rat:
        bound = self._check(f, cert, domain, path)
        if bound < _sup_abs(f, domain):
            raise SoundnessFault(f"{path}: accepted bound {bound} is below the sup-norm")
        return bound

    def _check(self, f: PatternFn, cert: DNormCertificate, domain: MarkPattern, path: str) -> Rat:
        if isinstance(cert, LscSplit):
            self.same_space(path, cert, cert.u, cert.v)
            for name, part in (("u", cert.u), ("v", cert.v)):
                if any(v < 0 for v, bit in zip(part.values, domain.bits) if bit):
                    self.reject(path, cert, f"{name} is negative on the domain")
                if not is_lsc_in(part, domain):
                    self.reject(path, cert, f"{name} is not lower semicontinuous on the domain")
            if not _agree_on(f, sub(cert.u, cert.v), domain):
                self.reject(path, cert, "f differs from u - v on the domain")
            return _sup_abs(add(cert.u, cert.v), domain)

        if isinstance(cert, NonnegLsc):
            if any(v < 0 for v, bit in zip(f.values, domain.bits) if bit):
                self.reject(path, cert, "f is negative on the domain")
            if not is_lsc_in(f, domain):
                self.reject(path, cert, "f is not lower semicontinuous on the domain")
            return _sup_abs(f, domain)

        if isinstance(cert, Sum):
            total = constant(self.space, 0)
            bound = ZERO
            for k, (part, child) in enumerate(cert.parts):
                self.same_space(path, cert, part)
                total = add(total, part)
                bound += self.check(part, child, domain, f"{path}.parts[{k}].cert")
            if not _agree_on(f, total, domain):
                self.reject(path, cert, "parts do not sum to f on the domain")
            return bound

        if isinstance(cert, Extension):
            region = self.region(f"{path}.region", cert, cert.region, domain)
            if cert.factor not in (1, 2):
                self.reject(path, cert, f"factor {cert.factor} is neither 1 nor 2")
            if cert.factor == 1 and not is_open_in(region, domain):
                self.reject(path, cert, "factor 1 needs a region open in the domain")
            if not _zero_on(f, domain.minus(region)):
                self.reject(path, cert, "f does not vanish off the region")
            if region.is_empty():
                return ZERO
            return cert.factor * self.check(f, cert.inner, region, f"{path}.inner")

        if isinstance(cert, Localization):
            regions = []
            for k, (part, _) in enumerate(cert.parts):
                mark = self.region(f"{path}.parts[{k}].region", cert, part, domain)
                if not is_open_in(mark, domain):
                    self.reject(f"{path}.parts[{k}]", cert, "part is not open in the domain")
                regions.append(mark)
            hulls = [closure(mark) for mark in regions]
            for a in range(len(hulls)):
                for b in range(a + 1, len(hulls)):
                    if not hulls[a].intersect(hulls[b]).is_empty():
                        self.reject(path, cert, f"closures of parts {a} and {b} meet")
            covered = MarkPattern.empty(self.space)
            for mark in regions:
                covered = covered.union(mark)
            if not _zero_on(f, domain.minus(covered)):
                self.reject(path, cert, "f is not supported on the union of the parts")
            bound = ZERO
            for k, ((_, child), mark) in enumerate(zip(cert.parts, regions)):
                if mark.is_empty():
                    continue
                bound = max(bound, self.check(f, child, mark, f"{path}.parts[{k}].cert"))
            return bound

        if isinstance(cert, ContinuousOnOpen):
            support = domain
            if cert.support is not None:
                support = self.region(f"{path}.support", cert, cert.support, domain)
                if not is_open_in(support, domain):
                    self.reject(path, cert, "support is not open in the domain")
            if not _zero_on(f, domain.minus(support)):
                self.reject(path, cert, "f does not vanish off the support")
            if not support.is_empty() and not is_continuous_in(f, support):
                self.reject(path, cert, "f is not continuous on the support")
            return _sup_abs(f, domain)

        raise CertificateRejected(path, type(cert).__name__, "unknown certificate node")


def validate_certificate(f: PatternFn, cert: DNormCertificate, within: Optional[MarkPattern] = None) -> Rat:
    """Checked bound, or CertificateRejected."""
    domain = within if within is not None else ClosedMark.full(f.space)
    if domain.space != f.space:
        raise ShapeMismatchError("domain mark and function live on different spaces")
    return _Checker(f.space).check(f, cert, domain, "$")


def check_certificate(f: PatternFn, cert: DNormCertificate, within: Optional[MarkPattern] = None) -> CertificateVerdict:
    try:
        bound = validate_certificate(f, cert, within)
    except CertificateRejected as e:
        logger.debug(f"certificate rejected: {e}")
        kind = next((k for k in CertKind if k.value == e.kind), None)
        return CertificateVerdict(accepted=False, path=e.path, kind=kind, condition=e.condition)
    return CertificateVerdict(accepted=True, bound=bound)


def claimed_bound(f: PatternFn, cert: DNormCertificate, within: Optional[MarkPattern] = None) -> Rat:
    """The bound a certificate claims, computed without checking side conditions."""
    domain = within if within is not None else ClosedMark.full(f.space)
    if isinstance(cert, LscSplit):
        return _sup_abs(add(cert.u, cert.v), domain)
    if isinstance(cert, (NonnegLsc, ContinuousOnOpen)):
        return _sup_abs(f, domain)
    if isinstance(cert, Sum):
        return sum((claimed_bound(part, child, domain) for part, child in cert.parts), ZERO)
    if isinstance(cert, Extension):
        region = cert.region.mark
        if region.is_empty():
            return ZERO
        return cert.factor * claimed_bound(f, cert.inner, region)
    if isinstance(cert, Localization):
        return max(
            (claimed_bound(f, child, part.mark) for part, child in cert.parts if not part.mark.is_empty()),
            default=ZERO,
        )
    raise TypeError(f"not a certificate: {cert!r}")


def negate_certificate(cert: DNormCertificate, f: PatternFn) -> DNormCertificate:
    """Certificate for -f from a certificate for f."""
    if isinstance(cert, LscSplit):
        return LscSplit(u=cert.v, v=cert.u)
    if isinstance(cert, NonnegLsc):
        return LscSplit(u=constant(f.space, 0), v=f)
    if isinstance(cert, Sum):
        return Sum(parts=tuple((neg(part), negate_certificate(child, part)) for part, child in cert.parts))
    if isinstance(cert, Extension):
        return Extension(region=cert.region, inner=negate_certificate(cert.inner, f), factor=cert.factor)
    if isinstance(cert, Localization):
        return Localization(parts=tuple((part, negate_certificate(child, f)) for part, child in cert.parts))
    if isinstance(cert, ContinuousOnOpen):
        return cert
    raise TypeError(f"not a certificate: {cert!r}")


def _discontinuities(f: PatternFn, domain: MarkPattern) -> MarkPattern:
    tail_hi, tail_lo = f.space.tail_fold(f.values, domain.bits)
    return MarkPattern(
        f.space,
        tuple(
            bit and hi is not None and (hi != v or lo != v)
            for bit, hi, lo, v in zip(domain.bits, tail_hi, tail_lo, f.values)
        ),
    )


def to_simple_dcs(f: PatternFn, within: Optional[ClosedMark] = None) -> SimpleDCS:
    """Split f into level sets of the successive discontinuity-set differences."""
    current: ClosedMark = ClosedMark.of(within) if within is not None else ClosedMark.full(f.space)
    terms: list[tuple[Rat, DiffClosed]] = []
    steps = 0
    while not current.is_empty():
        steps += 1
        if steps > f.space.rank + 2:
            raise SoundnessFault("discontinuity derivation did not terminate within rank + 2 steps")
        try:
            following = ClosedMark.of(_discontinuities(f, current))
        except NotClosedError:
            raise SoundnessFault("discontinuity set is not closed")
        if following.same_set(current):
            raise SoundnessFault("discontinuity derivation stalled")
        layer = current.minus(following)
        for value in sorted({v for v, bit in zip(f.values, layer.bits) if bit}):
            if value == 0:
                continue
            level = MarkPattern(f.space, tuple(bit and v == value for bit, v in zip(layer.bits, f.values)))
            terms.append((value, as_diff_closed(level)))
        current = following
    simple = SimpleDCS(f.space, tuple(terms))
    return simple


def simple_certificate(s: SimpleDCS, within: Optional[MarkPattern] = None) -> Sum:
    domain = within if within is not None else ClosedMark.full(s.space)
    parts = []
    for coeff, region in s.terms:
        mark = region.mark
        piece = scale(coeff, indicator(mark))
        inner: DNormCertificate = NonnegLsc() if coeff >= 0 else LscSplit(
            u=constant(s.space, 0), v=constant(s.space, -coeff)
        )
        factor = 1 if is_open_in(mark, domain) else 2
        parts.append((piece, Extension(region=region, inner=inner, factor=factor)))
    return Sum(parts=tuple(parts))


def nonneg_certificate(f: PatternFn, within: Optional[MarkPattern] = None) -> Optional[DNormCertificate]:
    domain = within if within is not None else ClosedMark.full(f.space)
    if all(v >= 0 for v, bit in zip(f.values, domain.bits) if bit) and is_lsc_in(f, domain):
        return NonnegLsc()
    return None


def sign_split_certificate(f: PatternFn, within: Optional[MarkPattern] = None) -> Optional[DNormCertificate]:
    domain = within if within is not None else ClosedMark.full(f.space)
    u, v = positive_part(f), negative_part(f)
    if is_lsc_in(u, domain) and is_lsc_in(v, domain):
        return LscSplit(u=u, v=v)
    return None


def semicontinuous_certificate(f: PatternFn, within: Optional[MarkPattern] = None) -> Optional[DNormCertificate]:
    """The "at most 3 sup-norm" split for a semicontinuous f."""
    domain = within if within is not None else ClosedMark.full(f.space)
    if domain.is_empty():
        return None
    top = constant(f.space, _sup_abs(f, domain))
    if is_usc_in(f, domain):
        return LscSplit(u=top, v=sub(top, f))
    if is_lsc_in(f, domain):
        return LscSplit(u=add(f, top), v=top)
    return None


def localized_certificate(f: PatternFn) -> Optional[Localization]:
    """Localize over the root's prefix subtrees and the clopen remainder."""
    space = f.space
    root = space.nodes[0]
    if not root.is_limit or not root.prefix:
        return None
    pieces = [MarkPattern.from_nodes(space, space.subtree(child)) for child in root.prefix]
    rest = MarkPattern.full(space)
    for piece in pieces:
        rest = rest.minus(piece)
    parts = []
    for piece in pieces + [rest]:
        region = as_diff_closed(piece)
        parts.append((region, _best_local(f, piece)))
    return Localization(parts=tuple(parts))


def _local_candidates(f: PatternFn, domain: MarkPattern) -> list[tuple[str, DNormCertificate]]:
    found: list[tuple[str, DNormCertificate]] = []
    for name, build in (
        ("nonneg_lsc", nonneg_certificate),
        ("sign_split", sign_split_certificate),
        ("semicontinuous", semicontinuous_certificate),
    ):
        cert = build(f, domain)
        if cert is not None:
            found.append((name, cert))
    found.append(("simple_dcs", simple_certificate(to_simple_dcs(f, ClosedMark.of(domain)), domain)))
    return found


def _best_local(f: PatternFn, domain: MarkPattern) -> DNormCertificate:
    if domain.is_empty():
        return NonnegLsc()
    best = None
    for _, cert in _local_candidates(f, domain):
        bound = claimed_bound(f, cert, domain)
        if best is None or bound < best[0]:
            best = (bound, cert)
    return best[1]


def lower_bound(f: PatternFn, report: Optional[IndexReport] = None) -> Rat:
    """max(sup-norm, eps·i(f, eps)/4 over critical eps)."""
    report = report if report is not None else full_index(f)
    return max([f.sup_norm] + [d * idx / 4 for d, idx in report.indices])


def bounds(f: PatternFn, extras: Sequence[tuple[str, DNormCertificate]] = ()) -> DNormBounds:
    report = full_index(f)
    lower = lower_bound(f, report)
    candidates = _local_candidates(f, ClosedMark.full(f.space))
    localized = localized_certificate(f)
    if localized is not None:
        candidates.append(("localized", localized))
    candidates.extend(extras)
    best: Optional[tuple[Rat, str, DNormCertificate]] = None
    for name, cert in candidates:
        verdict = check_certificate(f, cert)
        if not verdict.accepted:
            logger.debug(f"candidate {name} rejected at {verdict.path}: {verdict.condition}")
            continue
        if best is None or verdict.bound < best[0]:
            best = (verdict.bound, name, cert)
    if best is None:
        raise SoundnessFault("no candidate certificate was accepted")
    upper, source, cert = best
    if lower > upper:
        raise SoundnessFault(f"lower bound {lower} exceeds certified upper bound {upper}")
    sharp_index = max((d * idx for d, idx in report.indices), default=ZERO)
    annotations = (
        Annotation("index lower bound without the factor 4", sharp_index),
        Annotation("optimal finite-index upper bound (2n+1)·sup-norm", (2 * report.i_f + 1) * f.sup_norm),
    )
    return DNormBounds(lower=lower, upper=upper, certificate=cert, source=source, annotations=annotations)


def describe_region(region: DiffClosed) -> list[str]:
    return [format_address(a) for a in region.mark.addresses()]
