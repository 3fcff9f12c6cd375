from fractions import Fraction

import pytest

from app.config import Settings
from app.errors import SchemaError
from app.rationals import format_rat, parse_rat


@pytest.mark.parametrize("text,value", [("0", 0), ("3", 3), ("-1/2", Fraction(-1, 2)), ("7/3", Fraction(7, 3))])
def test_parse_rat_accepts_canonical(text, value):
    assert parse_rat(text) == value
    assert format_rat(parse_rat(text)) == text


@pytest.mark.parametrize("text", ["2/4", "+1", "1/1", "0.5", "-0", "abc", "1/0", " 1"])
def test_parse_rat_rejects_non_canonical(text):
    with pytest.raises(SchemaError):
        parse_rat(text)


def test_parse_rat_rejects_numbers():
    with pytest.raises(SchemaError):
        parse_rat(1)


def test_settings_lists():
    settings = Settings(witness_eps_grid="1/10, 1/2,1", oracle_copies="2,3")
    assert settings.rationals(settings.witness_eps_grid) == [Fraction(1, 10), Fraction(1, 2), Fraction(1)]
    assert settings.integers(settings.oracle_copies) == [2, 3]
    with pytest.raises(SchemaError):
        settings.rationals("2/4")
