import asyncio

import pytest

from app.config import Settings
from app.errors import PreconditionError
from app.services.suites import SUITE_NAMES, SUITES, _guarded, run_suite, run_suites


@pytest.mark.parametrize("name", list(SUITES))
def test_suite_passes_on_small_corpus(name, small_corpus, settings):
    result = asyncio.run(run_suite(name, small_corpus, settings))
    assert result.violations == []
    assert result.checked > 0
    assert result.ok


def test_all_expands_to_every_suite(small_corpus, settings):
    results = asyncio.run(run_suites(["all"], small_corpus[:6], settings))
    assert [r.name for r in results] == list(SUITES)
    assert SUITE_NAMES[-1] == "all"


def test_results_do_not_depend_on_worker_count(small_corpus, settings):
    one = asyncio.run(run_suite("identities", small_corpus, settings.model_copy(update={"suite_workers": 1})))
    many = asyncio.run(run_suite("identities", small_corpus, settings))
    assert (one.checked, one.violations) == (many.checked, many.violations)


def test_engine_errors_become_violations():
    def failing():
        raise PreconditionError("no luck", "/c0")

    assert _guarded("entry", failing) == ["PreconditionError: no luck (at /c0)"]
    assert _guarded("entry", lambda: []) == []


@pytest.mark.parametrize("name", ["sandwich", "algebra", "oracle", "witness", "prop15"])
def test_acceptance_on_default_corpus(name, default_corpus):
    result = asyncio.run(run_suite(name, default_corpus, Settings()))
    assert result.violations == []
