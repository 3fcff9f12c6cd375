"""JSON documents for spaces, marks, functions, certificates and results.

Every document mirrors the pattern tree: a node carries its own entry plus
`prefix` and `cycle` lists for a limit node. Rationals travel as canonical
"p/q" strings.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ValidationError

from app.analysis.decompose import SDApprox, SDVerdict
from app.analysis.dnorm import (
    CertificateVerdict,
    CertKind,
    ContinuousOnOpen,
    DiffClosed,
    DNormBounds,
    DNormCertificate,
    Extension,
    Localization,
    LscSplit,
    NonnegLsc,
    Region,
    RegionMarks,
    SimpleDCS,
    Sum,
    describe_region,
)
from app.analysis.func import PatternFn
from app.analysis.oscillation import DerivationTrail, IndexReport, OscReport
from app.analysis.witness import Prop15Report, WitnessReport
from app.errors import ContainmentError, NotClosedError, SchemaError
from app.models import CertDoc, FnDoc, MarkDoc, RegionDoc, SpaceDoc
from app.rationals import format_rat, parse_rat
from app.topology.space import (
    LEAF,
    ClosedMark,
    LimitNode,
    MarkPattern,
    PatternSpace,
    SpaceDesc,
    as_space,
    compile_space,
    format_address,
)

logger = logging.getLogger(__name__)

Doc = dict[str, Any]


def json_path(loc: tuple) -> str:
    path = "$"
    for item in loc:
        path += f"[{item}]" if isinstance(item, int) else f".{item}"
    return path


def validate_doc(model: type[BaseModel], data: Any, base: str = "$") -> BaseModel:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = json_path(tuple(first["loc"]))
        if base != "$":
            path = base + path[1:]
        raise SchemaError(first["msg"], path)


def load_json(path: Union[str, Path]) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON in {path}: {e.msg} (line {e.lineno})")
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e.strerror}")


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


# Spaces

def _space_from_doc(doc: SpaceDoc) -> SpaceDesc:
    if doc.leaf:
        return LEAF
    return LimitNode(
        prefix=tuple(_space_from_doc(child) for child in doc.prefix),
        cycle=tuple(_space_from_doc(child) for child in doc.cycle),
    )


def parse_space(data: Any) -> SpaceDesc:
    return _space_from_doc(validate_doc(SpaceDoc, data))


def serialize_space(desc: Union[SpaceDesc, PatternSpace]) -> Doc:
    if isinstance(desc, PatternSpace):
        desc = desc.desc
    if isinstance(desc, LimitNode):
        return {
            "prefix": [serialize_space(child) for child in desc.prefix],
            "cycle": [serialize_space(child) for child in desc.cycle],
        }
    return {"leaf": True}


# Per-node documents (marks and functions share the tree walk)

def _shape_of(doc: Union[MarkDoc, FnDoc]) -> SpaceDesc:
    if not doc.cycle:
        return LEAF
    return LimitNode(
        prefix=tuple(_shape_of(child) for child in doc.prefix),
        cycle=tuple(_shape_of(child) for child in doc.cycle),
    )


def _collect(space: PatternSpace, doc: Union[MarkDoc, FnDoc], attr: str, base: str) -> list:
    out: list = []

    def walk(node_id: int, node_doc, path: str) -> None:
        node = space.nodes[node_id]
        if node.is_limit != bool(node_doc.cycle):
            raise SchemaError("node shape does not match the space", path)
        if len(node.prefix) != len(node_doc.prefix) or len(node.cycle) != len(node_doc.cycle):
            raise SchemaError("child counts do not match the space", path)
        out.append(getattr(node_doc, attr))
        for k, (child, child_doc) in enumerate(zip(node.prefix, node_doc.prefix)):
            walk(child, child_doc, f"{path}.prefix[{k}]")
        for k, (child, child_doc) in enumerate(zip(node.cycle, node_doc.cycle)):
            walk(child, child_doc, f"{path}.cycle[{k}]")

    walk(0, doc, base)
    return out


def _emit(space: PatternSpace, entries: list, key: str) -> Doc:
    def node_doc(i: int) -> Doc:
        node = space.nodes[i]
        doc: Doc = {key: entries[i]}
        if node.is_limit:
            doc["prefix"] = [node_doc(c) for c in node.prefix]
            doc["cycle"] = [node_doc(c) for c in node.cycle]
        return doc

    return node_doc(0)


def _mark_from_doc(doc: MarkDoc, space: Optional[PatternSpace], base: str) -> MarkPattern:
    space = compile_space(_shape_of(doc)) if space is None else space
    return MarkPattern(space, tuple(_collect(space, doc, "mark", base)))


def parse_mark(data: Any, space: Optional[Union[SpaceDesc, PatternSpace]] = None, base: str = "$") -> MarkPattern:
    doc = validate_doc(MarkDoc, data, base)
    return _mark_from_doc(doc, None if space is None else as_space(space), base)


def serialize_mark(m: MarkPattern) -> Doc:
    return _emit(m.space, list(m.bits), "mark")


def _fn_from_doc(doc: FnDoc, space: Optional[PatternSpace], base: str) -> PatternFn:
    space = compile_space(_shape_of(doc)) if space is None else space
    return PatternFn(space, tuple(parse_rat(v) for v in _collect(space, doc, "value", base)))


def parse_function(data: Any, space: Optional[Union[SpaceDesc, PatternSpace]] = None, base: str = "$") -> PatternFn:
    doc = validate_doc(FnDoc, data, base)
    return _fn_from_doc(doc, None if space is None else as_space(space), base)


def serialize_function(f: PatternFn) -> Doc:
    return _emit(f.space, [format_rat(v) for v in f.values], "value")


# Certificates

def _region_from_doc(doc: RegionDoc, space: PatternSpace, path: str) -> Region:
    outer = _mark_from_doc(doc.outer, space, f"{path}.outer")
    minus = _mark_from_doc(doc.minus, space, f"{path}.minus")
    try:
        return DiffClosed(ClosedMark.of(outer), ClosedMark.of(minus))
    except (NotClosedError, ContainmentError):
        # rejected by the certificate checker
        return RegionMarks(outer, minus)


def _cert_from_doc(doc: CertDoc, space: PatternSpace, path: str) -> DNormCertificate:
    kind = CertKind(doc.kind)
    if kind is CertKind.LSC_SPLIT:
        return LscSplit(u=_fn_from_doc(doc.u, space, f"{path}.u"), v=_fn_from_doc(doc.v, space, f"{path}.v"))
    if kind is CertKind.NONNEG_LSC:
        return NonnegLsc()
    if kind is CertKind.SUM:
        return Sum(parts=tuple(
            (
                _fn_from_doc(part.function, space, f"{path}.parts[{k}].function"),
                _cert_from_doc(part.cert, space, f"{path}.parts[{k}].cert"),
            )
            for k, part in enumerate(doc.parts)
        ))
    if kind is CertKind.EXTENSION:
        if doc.factor not in (1, 2):
            raise SchemaError(f"extension factor must be 1 or 2, got {doc.factor}", f"{path}.factor")
        return Extension(
            region=_region_from_doc(doc.region, space, f"{path}.region"),
            inner=_cert_from_doc(doc.inner, space, f"{path}.inner"),
            factor=doc.factor,
        )
    if kind is CertKind.LOCALIZATION:
        return Localization(parts=tuple(
            (
                _region_from_doc(part.region, space, f"{path}.parts[{k}].region"),
                _cert_from_doc(part.cert, space, f"{path}.parts[{k}].cert"),
            )
            for k, part in enumerate(doc.parts)
        ))
    support = None if doc.support is None else _region_from_doc(doc.support, space, f"{path}.support")
    return ContinuousOnOpen(support=support)


def parse_certificate(data: Any, space: Union[SpaceDesc, PatternSpace]) -> DNormCertificate:
    doc = validate_doc(CertDoc, data)
    return _cert_from_doc(doc, as_space(space), "$")


def serialize_region(region: Region) -> Doc:
    return {"outer": serialize_mark(region.outer), "minus": serialize_mark(region.minus)}


def serialize_certificate(cert: DNormCertificate) -> Doc:
    doc: Doc = {"kind": cert.kind.value}
    if isinstance(cert, LscSplit):
        doc["u"] = serialize_function(cert.u)
        doc["v"] = serialize_function(cert.v)
    elif isinstance(cert, Sum):
        doc["parts"] = [{"function": serialize_function(fn), "cert": serialize_certificate(c)} for fn, c in cert.parts]
    elif isinstance(cert, Extension):
        doc["region"] = serialize_region(cert.region)
        doc["factor"] = cert.factor
        doc["inner"] = serialize_certificate(cert.inner)
    elif isinstance(cert, Localization):
        doc["parts"] = [{"region": serialize_region(r), "cert": serialize_certificate(c)} for r, c in cert.parts]
    elif isinstance(cert, ContinuousOnOpen) and cert.support is not None:
        doc["support"] = serialize_region(cert.support)
    return doc


# Results

def _addresses(m: MarkPattern) -> list[str]:
    return [format_address(a) for a in m.addresses()]


def serialize_trail(trail: DerivationTrail) -> Doc:
    return {
        "eps": format_rat(trail.eps),
        "flavor": trail.flavor.value,
        "index": trail.index,
        "sets": [_addresses(s) for s in trail.sets],
    }


def serialize_index_report(report: IndexReport) -> Doc:
    return {
        "critical": [format_rat(d) for d in report.critical],
        "indices": [{"eps": format_rat(d), "index": i} for d, i in report.indices],
        "index": report.i_f,
        "beta": report.beta,
        "beta_upper": report.beta_hor,
        "quasinorm": format_rat(report.quasinorm),
        "full_quasinorm": format_rat(report.full_quasinorm),
    }


def serialize_osc_report(report: OscReport) -> Doc:
    return {
        "domain": _addresses(report.domain),
        "upper": serialize_function(report.upper),
        "lower": serialize_function(report.lower),
        "uosc": serialize_function(report.uosc),
        "osc": serialize_function(report.osc),
        "oosc": serialize_function(report.oosc),
    }


def serialize_simple(s: SimpleDCS) -> Doc:
    return {
        "terms": [
            {"coefficient": format_rat(c), "region": serialize_region(r), "nodes": describe_region(r)}
            for c, r in s.terms
        ],
        "disjoint": s.is_disjoint(),
    }


def serialize_bounds(b: DNormBounds) -> Doc:
    return {
        "lower": format_rat(b.lower),
        "upper": format_rat(b.upper),
        "source": b.source,
        "certificate": serialize_certificate(b.certificate),
        "annotations": [
            {"label": a.label, "value": format_rat(a.value), "certified": a.certified} for a in b.annotations
        ],
    }


def serialize_verdict(v: CertificateVerdict) -> Doc:
    if v.accepted:
        return {"accepted": True, "bound": format_rat(v.bound)}
    return {"accepted": False, "path": v.path, "kind": v.kind.value if v.kind else None, "condition": v.condition}


def serialize_approx(a: SDApprox) -> Doc:
    doc: Doc = {
        "path": a.path.value,
        "n": a.n,
        "tolerance": format_rat(a.tolerance),
        "simple": serialize_simple(a.simple),
        "residual": serialize_function(a.residual),
        "residual_bound": format_rat(a.residual_bound),
        "certificate": serialize_certificate(a.certificate),
        "headline_bound": format_rat(a.headline_bound),
        "headline_certificate": serialize_certificate(a.headline_certificate),
        "trace": [
            {
                "iteration": t.iteration,
                "eps": format_rat(t.eps),
                "region_size": t.region_size,
                "h_bound": format_rat(t.h_bound),
                "g_norm": format_rat(t.g_norm),
            }
            for t in a.trace
        ],
    }
    if a.eps_used is not None:
        doc["eps_used"] = format_rat(a.eps_used)
        doc["below_seven_eta"] = a.below_seven_eta
    return doc


def serialize_sd_verdict(v: SDVerdict) -> Doc:
    return {
        "is_sd": v.is_sd,
        "index": v.index,
        "rank": v.rank,
        "quasinorm": format_rat(v.quasinorm),
        "slope_near_zero": v.slope_near_zero,
        "vanishing_product": v.vanishing_product,
        "approximation": serialize_approx(v.approximation),
    }


def serialize_witness(r: WitnessReport) -> Doc:
    return {
        "rank": r.n,
        "space": serialize_space(r.space),
        "chain": [_addresses(k) for k in r.chain],
        "E": _addresses(r.E),
        "indices": [{"eps": format_rat(e), "index": i} for e, i in r.indices],
        "lower": format_rat(r.lower),
        "upper": format_rat(r.upper),
        "expected_upper": format_rat(r.expected_upper),
        "certificate": serialize_certificate(r.certificate),
    }


def serialize_prop15(r: Prop15Report) -> Doc:
    return {
        "rows": [
            {
                "n": row.n,
                "eps": format_rat(row.eps),
                "index": row.index,
                "product": format_rat(row.product),
                "norm_bound": format_rat(row.norm_bound),
            }
            for row in r.rows
        ],
        "conclusion": r.conclusion,
        "truncation_bound": format_rat(r.truncation_bound),
        "truncation_products": [{"n": n, "product": format_rat(p)} for n, p in r.truncation_products],
        "note": r.note,
    }
