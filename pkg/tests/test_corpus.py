import pytest

from app.analysis.func import is_continuous, is_lsc, is_usc
from app.config import Settings
from app.errors import SchemaError
from app.models import CorpusSpec
from app.services.corpus import (
    corpus_digest,
    default_spec,
    derive_seed,
    generate_corpus,
    pairs,
    pinned_entries,
)
from app.services.serialization import validate_doc


def test_empty_count_keeps_pinned_entries():
    spec = CorpusSpec(seed=3, count=0, max_rank=2)
    entries = generate_corpus(spec)
    assert [e.label for e in entries] == [e.label for e in pinned_entries(spec)]
    assert [e.label for e in entries] == [
        "const-1-leaf",
        "const-0-T1",
        "const-1-T1",
        "chi-K1-T1",
        "chi-E-T1",
        "const-0-T2",
        "const-1-T2",
        "chi-K1-T2",
        "chi-K2-T2",
        "chi-E-T2",
        "chi-E-T3",
        "chi-E-T4",
    ]


def test_even_height_witnesses_reach_rank_4(default_corpus):
    witnesses = {e.label: e for e in default_corpus if e.label.startswith("chi-E-")}
    assert sorted(witnesses) == ["chi-E-T1", "chi-E-T2", "chi-E-T3", "chi-E-T4"]
    assert witnesses["chi-E-T4"].space.rank == 4
    assert witnesses["chi-E-T4"].group == -4


def test_generation_is_deterministic(small_spec, small_corpus):
    again = generate_corpus(small_spec)
    assert corpus_digest(again) == corpus_digest(small_corpus)
    other = generate_corpus(small_spec.model_copy(update={"seed": 8}))
    assert corpus_digest(other) != corpus_digest(small_corpus)


def test_derive_seed_separates_streams():
    assert derive_seed(1, "space", 0) == derive_seed(1, "space", 0)
    assert derive_seed(1, "space", 0) != derive_seed(1, "function", 0, 0)
    assert 0 <= derive_seed(2**63, "x") < 2**64


def test_ranks_stay_below_the_cap(small_corpus):
    assert all(entry.space.rank <= 2 for entry in small_corpus if not entry.label.startswith("chi-E-"))
    assert {entry.space.rank for entry in small_corpus} >= {0, 1, 2}


def test_kinds_match_their_semicontinuity(small_corpus):
    for entry in small_corpus:
        if entry.kind == "continuous":
            assert is_continuous(entry.f), entry.label
        elif entry.kind == "usc":
            assert is_usc(entry.f), entry.label
        elif entry.kind == "lsc":
            assert is_lsc(entry.f), entry.label


def test_pairs_share_a_space(small_corpus):
    found = pairs(small_corpus)
    assert found
    assert all(a.space == b.space for a, b in found)
    assert all(a.group == b.group for a, b in found)


def test_corpus_spec_bounds():
    with pytest.raises(SchemaError) as info:
        validate_doc(CorpusSpec, {"max_rank": 5})
    assert info.value.path == "$.max_rank"
    with pytest.raises(SchemaError) as info:
        validate_doc(CorpusSpec, {"value_set": ["2/4"]})
    assert info.value.path == "$.value_set[0]"
    with pytest.raises(SchemaError):
        validate_doc(CorpusSpec, {"value_set": []})


def test_default_spec_follows_settings():
    spec = default_spec(Settings(corpus_seed=11, corpus_count=9, corpus_values="0, 1/2"))
    assert spec.seed == 11
    assert spec.count == 9
    assert spec.value_set == ["0", "1/2"]


def test_default_corpus_size(default_corpus):
    assert len(default_corpus) >= 200
    assert sum(entry.kind == "continuous" for entry in default_corpus) >= 50
    assert len(pairs(default_corpus)) >= 200
    assert all(entry.f.sup_norm <= 1 for entry in default_corpus)
    assert len({entry.digest for entry in default_corpus}) == len(default_corpus)
