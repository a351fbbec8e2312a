import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afields import autodiff as ad
from afields.polynomial import PolyArray

coef = st.floats(-3, 3, allow_nan=False)
exps = st.lists(st.integers(0, 3), min_size=2, max_size=2)
monomials = st.lists(st.tuples(coef, exps), min_size=1, max_size=4)


def test_json_round_trip_and_evaluation():
    table = [[1.5, [[2.0, [1, 0]], [-1.0, [0, 2]]]], [0, [[1.0, [1, 1]]]]]
    p = PolyArray.from_json(table, 2)
    assert p.shape == (2, 2)
    val = p(np.array([2.0, 3.0]))
    np.testing.assert_allclose(val.astype(float), [[1.5, 4.0 - 9.0], [0.0, 6.0]])
    again = PolyArray.from_json(p.to_json(), 2)
    np.testing.assert_allclose(again(np.array([2.0, 3.0])).astype(float), val.astype(float))


def test_bad_tables_rejected():
    with pytest.raises(ValueError):
        PolyArray.from_json([[1.0, [1]]], 2)
    with pytest.raises(ValueError):
        PolyArray.from_json([1.0, [2.0, 3.0]], 1)
    with pytest.raises(ValueError):
        PolyArray.constant([1.0], 1)(np.array([1.0, 2.0]))


@settings(max_examples=40, deadline=None)
@given(monomials, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_symbolic_derivative_matches_ad(monos, a, b):
    p = PolyArray((1,), 2, {(0,): tuple((c, tuple(e)) for c, e in monos)})
    x = np.array([a, b])
    exact = p.derivative()(x).astype(float)[0]
    d = ad.derivatives(lambda v: p(v), x)
    np.testing.assert_allclose(d.grad[0], exact, rtol=1e-12, atol=1e-12)


def test_padding_ignores_extra_variables():
    p = PolyArray.from_json([[[1.0, [2]]]], 1).padded(2)
    assert p.nvars == 3
    assert float(p(np.array([3.0, 7.0, -1.0]))[0]) == 9.0


def test_constant_detection():
    assert PolyArray.constant(np.eye(2), 3).is_constant()
    assert not PolyArray.from_json([[[1.0, [1]]]], 1).is_constant()
