import numpy as np
import pytest
from hypothesis import settings

from ppwave.expr import BinOp, Call, Num, Var

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_exprs(n: int):
    """Hypothesis strategy for expressions that are smooth and finite on [-1, 1]^(n+1)."""
    from hypothesis import strategies as st

    leaves = st.one_of(
        st.sampled_from([Var("u")] + [Var(f"x{i + 1}") for i in range(n)]),
        st.floats(-2, 2, allow_nan=False).map(lambda v: Num(round(v, 3))),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(["sin", "cos", "atan"]), children).map(lambda t: Call(*t)),
            children.map(lambda c: Call("exp", BinOp("*", Num(0.3), c))),
            children.map(lambda c: BinOp("^", c, Num(2.0))),
            children.map(lambda c: Call("sqrt", BinOp("+", Num(1.0), BinOp("^", c, Num(2.0))))),
        )

    return st.recursive(leaves, extend, max_leaves=8)


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion; failures stay failures."""

    def record(key: str, title: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {key} {title}: {detail}"
        ACCEPTANCE[key] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
