from fractions import Fraction

from hypothesis import strategies as st

from app.analysis.func import PatternFn
from app.topology.space import LEAF, LimitNode, MarkPattern, compile_space

VALUES = (Fraction(0), Fraction(1), Fraction(-1), Fraction(1, 2), Fraction(-1, 2), Fraction(1, 3))


def _extend(children):
    return st.builds(
        LimitNode,
        prefix=st.lists(children, max_size=2).map(tuple),
        cycle=st.lists(children, min_size=1, max_size=2).map(tuple),
    )


descs = st.recursive(st.just(LEAF), _extend, max_leaves=8)
spaces = descs.map(compile_space)


@st.composite
def functions(draw, space=None):
    space = space if space is not None else draw(spaces)
    values = draw(st.lists(st.sampled_from(VALUES), min_size=space.size, max_size=space.size))
    return PatternFn(space, tuple(values))


@st.composite
def marks(draw, space=None):
    space = space if space is not None else draw(spaces)
    bits = draw(st.lists(st.booleans(), min_size=space.size, max_size=space.size))
    return MarkPattern(space, tuple(bits))


@st.composite
def function_pairs(draw):
    space = draw(spaces)
    return draw(functions(space)), draw(functions(space))
