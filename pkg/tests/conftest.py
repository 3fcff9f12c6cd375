from fractions import Fraction

import pytest

from app.analysis.func import PatternFn, indicator
from app.config import Settings
from app.models import CorpusSpec
from app.services.corpus import generate_corpus
from app.topology.space import MarkPattern, compile_space, homogeneous


@pytest.fixture
def T1():
    return compile_space(homogeneous(1))


@pytest.fixture
def T2():
    return compile_space(homogeneous(2))


@pytest.fixture
def chi_E2(T2):
    """Indicator of the even-height nodes of T_2: root and leaves."""
    return indicator(MarkPattern(T2, (True, False, True)))


@pytest.fixture
def chi_root(T1):
    return PatternFn(T1, (Fraction(1), Fraction(0)))


@pytest.fixture
def seed():
    return 7


@pytest.fixture(scope="session")
def small_spec():
    return CorpusSpec(seed=7, count=24, max_rank=2)


@pytest.fixture(scope="session")
def small_corpus(small_spec):
    return generate_corpus(small_spec)


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(CorpusSpec(seed=1, count=200, max_rank=3))


@pytest.fixture
def settings():
    return Settings(witness_max_rank=3, suite_workers=4)
