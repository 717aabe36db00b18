import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rawdann.tensor import DimensionError, elementwise, glorot_bound, glorot_init, matmul


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(a, np.eye(2)), a)


def test_matmul_column():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(a, [[0.0], [1.0]]), [[2.0], [4.0]])


def test_matmul_zeros(rng):
    out = matmul(np.zeros((1, 3)), rng.standard_normal((3, 2)))
    np.testing.assert_array_equal(out, np.zeros((1, 2)))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_matches_loops(rng):
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
    expected = [[sum(a[i, k] * b[k, j] for k in range(4)) for j in range(2)] for i in range(3)]
    np.testing.assert_allclose(matmul(a, b), expected, rtol=0, atol=1e-12)


def test_elementwise():
    np.testing.assert_array_equal(elementwise([1.0, 2.0], [3.0, 4.0], "add"), [4.0, 6.0])
    x = np.array([0.3, -2.0, 5.0])
    np.testing.assert_array_equal(elementwise(x, np.zeros_like(x), "mul"), np.zeros(3))
    np.testing.assert_array_equal(elementwise(x, x, "sub"), np.zeros(3))


def test_elementwise_errors():
    with pytest.raises(DimensionError):
        elementwise(np.zeros(2), np.zeros(3), "add")
    with pytest.raises(ValueError):
        elementwise(np.zeros(2), np.zeros(2), "div")


def test_ops_are_pure(rng):
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    a0, b0 = a.copy(), b.copy()
    matmul(a, b)
    for op in ("add", "sub", "mul"):
        elementwise(a, b, op)
    np.testing.assert_array_equal(a, a0)
    np.testing.assert_array_equal(b, b0)


def test_glorot_bound():
    assert glorot_bound(2, 4) == 1.0
    with pytest.raises(ValueError):
        glorot_bound(0, 3)
    with pytest.raises(ValueError):
        glorot_init(3, -1, (3, 3), np.random.default_rng(0))


def test_glorot_deterministic():
    a = glorot_init(5, 7, (5, 7), np.random.default_rng(42))
    b = glorot_init(5, 7, (5, 7), np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)
    assert a.dtype == np.float64


def test_glorot_statistics():
    w = glorot_init(3, 3, (100_000,), np.random.default_rng(0))
    assert np.all(np.abs(w) <= 1.0)
    # uniform on [-1, 1]: sigma = 1/sqrt(3); standard error of the mean over 1e5 draws
    assert abs(w.mean()) < 3 * (1 / np.sqrt(3)) / np.sqrt(len(w))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 50), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_glorot_within_bound(fan_in, fan_out, seed):
    w = glorot_init(fan_in, fan_out, (fan_in, fan_out), np.random.default_rng(seed))
    assert np.all(np.abs(w) <= glorot_bound(fan_in, fan_out))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4),
       st.integers(0, 2**32 - 1))
def test_matmul_associative(m, k, n, p, seed):
    r = np.random.default_rng(seed)
    a, b, c = r.standard_normal((m, k)), r.standard_normal((k, n)), r.standard_normal((n, p))
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=0, atol=1e-9)
