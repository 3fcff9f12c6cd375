import json
from fractions import Fraction

import pytest

from app.analysis.dnorm import RegionMarks, check_certificate, validate_certificate
from app.analysis.func import indicator
from app.analysis.witness import verify_witness
from app.errors import SchemaError
from app.services.serialization import (
    canonical_json,
    digest,
    json_path,
    load_json,
    parse_certificate,
    parse_function,
    parse_mark,
    parse_space,
    serialize_certificate,
    serialize_function,
    serialize_mark,
    serialize_space,
)
from app.topology.space import LEAF, compile_space, homogeneous


def test_leaf_document():
    assert parse_space({"leaf": True}) == LEAF
    assert serialize_space(LEAF) == {"leaf": True}


def test_space_round_trip(T2):
    doc = serialize_space(T2)
    assert doc == {"prefix": [], "cycle": [{"prefix": [], "cycle": [{"leaf": True}]}]}
    assert compile_space(parse_space(doc)) == T2


def test_function_round_trip(chi_E2):
    doc = serialize_function(chi_E2)
    assert doc["value"] == "1"
    assert doc["cycle"][0]["cycle"][0] == {"value": "1"}
    assert parse_function(doc) == chi_E2
    assert parse_function(doc, space=homogeneous(2)) == chi_E2


def test_non_canonical_value_is_located():
    doc = {"value": "0", "prefix": [], "cycle": [{"value": "2/4"}]}
    with pytest.raises(SchemaError) as info:
        parse_function(doc)
    assert info.value.path == "$.cycle[0].value"


@pytest.mark.parametrize(
    "doc,path",
    [
        ({"prefix": [], "cycle": []}, "$"),
        ({"leaf": False}, "$"),
        ({"leaf": True, "cycle": [{"leaf": True}]}, "$"),
        ({"leaf": True, "colour": "red"}, "$.colour"),
    ],
)
def test_malformed_space_documents(doc, path):
    with pytest.raises(SchemaError) as info:
        parse_space(doc)
    assert info.value.path == path


def test_mark_shape_must_match_space(T2):
    with pytest.raises(SchemaError) as info:
        parse_mark({"mark": True, "cycle": [{"mark": False}]}, space=T2)
    assert info.value.path == "$.cycle[0]"
    assert parse_mark(serialize_mark(parse_mark({"mark": True, "cycle": [{"mark": False}]}))).bits == (True, False)


def test_witness_certificate_round_trip():
    report = verify_witness(3, (Fraction(1),))
    doc = serialize_certificate(report.certificate)
    parsed = parse_certificate(doc, report.space)
    assert serialize_certificate(parsed) == doc
    assert validate_certificate(indicator(report.E), parsed) == report.upper


def test_unknown_certificate_kind(T1):
    with pytest.raises(SchemaError) as info:
        parse_certificate({"kind": "magic"}, T1)
    assert info.value.path == "$"


def test_extension_factor_is_one_or_two(T1):
    region = {"outer": {"mark": True, "cycle": [{"mark": False}]}, "minus": {"mark": False, "cycle": [{"mark": False}]}}
    doc = {"kind": "extension", "region": region, "inner": {"kind": "nonneg_lsc"}, "factor": 3}
    with pytest.raises(SchemaError) as info:
        parse_certificate(doc, T1)
    assert info.value.path == "$.factor"


def test_open_region_is_left_to_the_checker(T1, chi_root):
    region = {"outer": {"mark": False, "cycle": [{"mark": True}]}, "minus": {"mark": False, "cycle": [{"mark": False}]}}
    doc = {"kind": "extension", "region": region, "inner": {"kind": "nonneg_lsc"}, "factor": 1}
    cert = parse_certificate(doc, T1)
    assert isinstance(cert.region, RegionMarks)
    verdict = check_certificate(chi_root, cert)
    assert not verdict.accepted
    assert verdict.path == "$.region.outer"
    assert verdict.condition == "outer mark is not closed"


def test_digest_ignores_key_order():
    assert digest({"a": 1, "b": [1, 2]}) == digest({"b": [1, 2], "a": 1})
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    assert digest({"a": 1}) != digest({"a": 2})


def test_json_path():
    assert json_path(()) == "$"
    assert json_path(("cycle", 0, "value")) == "$.cycle[0].value"


def test_load_json(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"leaf": True}))
    assert load_json(good) == {"leaf": True}
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        load_json(bad)
    with pytest.raises(SchemaError):
        load_json(tmp_path / "missing.json")
