import numpy as np
import pytest

from rawdann import gradcheck
from rawdann.layers import (
    AvgPool1D, Conv1D, Dense, GradientReversal, ReLU, StateError, softmax_cross_entropy,
)
from rawdann.tensor import DimensionError


def conv_reference(x, w, b, stride):
    """Nested-loop oracle for valid strided 1-d convolution."""
    bsz, c_in, t = x.shape
    c_out, _, k = w.shape
    t_out = (t - k) // stride + 1
    out = np.zeros((bsz, c_out, t_out))
    for n in range(bsz):
        for o in range(c_out):
            for m in range(t_out):
                acc = b[o]
                for c in range(c_in):
                    for j in range(k):
                        acc += w[o, c, j] * x[n, c, m * stride + j]
                out[n, o, m] = acc
    return out


def make_conv(c_in, c_out, k, stride, w=None, backend=None):
    layer = Conv1D(c_in, c_out, k, stride, np.random.default_rng(0), backend=backend)
    if w is not None:
        layer.params["w"] = np.asarray(w, dtype=np.float64).reshape(c_out, c_in, k)
    return layer


def test_conv_example(backend):
    layer = make_conv(1, 1, 2, 1, [1.0, 0.0], backend)
    out = layer.forward(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
    np.testing.assert_array_equal(out, [[[1.0, 2.0, 3.0]]])


def test_conv_matches_reference(rng, backend):
    layer = make_conv(3, 4, 5, 3, backend=backend)
    layer.params["b"] = rng.standard_normal(4)
    x = rng.standard_normal((2, 3, 23))
    ref = conv_reference(x, layer.params["w"], layer.params["b"], 3)
    np.testing.assert_allclose(layer.forward(x), ref, rtol=0, atol=1e-12)


def test_conv_zero_kernel(rng, backend):
    layer = make_conv(1, 2, 4, 2, np.zeros(8), backend)
    out = layer.forward(rng.standard_normal((1, 1, 11)))
    np.testing.assert_array_equal(out, np.zeros((1, 2, 4)))


def test_conv_large_output_length():
    layer = make_conv(1, 1, 64, 31)
    assert layer.output_length(4960) == 158
    assert layer.forward(np.zeros((1, 1, 4960))).shape == (1, 1, 158)


@pytest.mark.parametrize("t,k,s", [(10, 3, 1), (10, 3, 2), (17, 5, 4), (5, 5, 3), (100, 7, 9)])
def test_conv_length_formula(t, k, s):
    out = make_conv(1, 1, k, s).forward(np.ones((1, 1, t)))
    assert out.shape[2] == (t - k) // s + 1


def test_conv_errors():
    layer = make_conv(1, 1, 5, 1)
    with pytest.raises(DimensionError):
        layer.forward(np.zeros((1, 1, 4)))
    with pytest.raises(DimensionError):
        layer.forward(np.zeros((1, 2, 10)))
    with pytest.raises(StateError):
        make_conv(1, 1, 2, 1).backward(np.zeros((1, 1, 3)))


def test_conv_backward_zero_grad(rng, backend):
    layer = make_conv(2, 3, 3, 2, backend=backend)
    x = rng.standard_normal((2, 2, 9))
    out = layer.forward(x)
    gx = layer.backward(np.zeros_like(out))
    np.testing.assert_array_equal(gx, np.zeros_like(x))
    np.testing.assert_array_equal(layer.grads["w"], 0.0)
    np.testing.assert_array_equal(layer.grads["b"], 0.0)


def test_conv_unit_kernel_passes_gradient(rng, backend):
    layer = make_conv(1, 1, 1, 1, [1.0], backend)
    x = rng.standard_normal((2, 1, 6))
    layer.forward(x)
    g = rng.standard_normal((2, 1, 6))
    np.testing.assert_array_equal(layer.backward(g), g)


@pytest.mark.parametrize("seed", range(5))
def test_conv_gradcheck(seed, backend):
    rng = np.random.default_rng(seed)
    layer = Conv1D(3, 4, 5, 2, rng, backend=backend)
    layer.params["b"] = rng.standard_normal(4)
    assert gradcheck.check_layer(layer, rng.standard_normal((2, 3, 16)), rng) < 1e-4


def test_backends_agree(rng):
    from rawdann import kernels

    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled extension not built")
    x, w, b = rng.standard_normal((3, 4, 50)), rng.standard_normal((6, 4, 7)), rng.standard_normal(6)
    py, ext = kernels.get_backend("python"), kernels.get_backend("compiled")
    np.testing.assert_allclose(py.conv1d_forward(x, w, b, 3), ext.conv1d_forward(x, w, b, 3),
                               rtol=0, atol=1e-12)
    g = rng.standard_normal((3, 6, 15))
    for a, c in zip(py.conv1d_backward(x, w, g, 3), ext.conv1d_backward(x, w, g, 3)):
        np.testing.assert_allclose(a, c, rtol=0, atol=1e-12)


def test_avgpool_examples():
    pool = AvgPool1D(2)
    np.testing.assert_array_equal(pool.forward(np.array([[[1.0, 3.0, 5.0, 7.0]]])), [[[2.0, 6.0]]])
    np.testing.assert_array_equal(pool.forward(np.array([[[1.0, 2.0, 3.0]]])), [[[1.5]]])
    x = np.array([[[4.0, -1.0, 2.5]]])
    np.testing.assert_array_equal(AvgPool1D(1).forward(x), x)


def test_avgpool_reference(rng):
    x = rng.standard_normal((2, 3, 11))
    ref = np.array([[[x[b, c, 3 * i:3 * i + 3].mean() for i in range(3)]
                     for c in range(3)] for b in range(2)])
    np.testing.assert_allclose(AvgPool1D(3).forward(x), ref, rtol=0, atol=1e-15)


def test_avgpool_errors():
    with pytest.raises(DimensionError):
        AvgPool1D(4).forward(np.zeros((1, 1, 3)))
    with pytest.raises(ValueError):
        AvgPool1D(0)


def test_avgpool_backward_spreads_uniformly():
    pool = AvgPool1D(2)
    pool.forward(np.zeros((1, 1, 5)))
    g = pool.backward(np.array([[[1.0, 2.0]]]))
    np.testing.assert_array_equal(g, [[[0.5, 0.5, 1.0, 1.0, 0.0]]])


def test_avgpool_mean_preservation():
    pool = AvgPool1D(3)
    pool.forward(np.zeros((1, 2, 9)))
    spread = pool.backward(np.full((1, 2, 3), 7.0)) * 3
    np.testing.assert_allclose(pool.forward(spread), np.full((1, 2, 3), 7.0))


def test_relu():
    relu = ReLU()
    np.testing.assert_array_equal(relu.forward(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(relu.backward(np.array([5.0, 5.0, 5.0])), [0.0, 0.0, 5.0])
    x = np.array([0.1, 3.0, 7.0])
    np.testing.assert_array_equal(relu.forward(x), x)


def test_dense_identity():
    layer = Dense(3, 3, np.random.default_rng(0))
    layer.params["w"] = np.eye(3)
    x = np.array([[1.0, -2.0, 0.5]])
    np.testing.assert_array_equal(layer.forward(x), x)


def test_dense_batch_decomposition(rng):
    layer = Dense(4, 3, rng)
    x = rng.standard_normal((2, 4))
    both = layer.forward(x)
    np.testing.assert_allclose(both[0], layer.forward(x[:1])[0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(both[1], layer.forward(x[1:])[0], rtol=0, atol=1e-15)


def test_dense_width_error():
    with pytest.raises(DimensionError):
        Dense(4, 3, np.random.default_rng(0)).forward(np.zeros((2, 5)))


@pytest.mark.parametrize("seed", range(5))
def test_layer_gradchecks(seed):
    rng = np.random.default_rng(seed)
    assert gradcheck.check_layer(Dense(5, 4, rng), rng.standard_normal((3, 5)), rng) < 1e-4
    assert gradcheck.check_layer(AvgPool1D(2), rng.standard_normal((2, 3, 9)), rng) < 1e-4
    assert gradcheck.check_layer(ReLU(), gradcheck._relu_input(rng, (4, 6)), rng) < 1e-4
    assert gradcheck.check_softmax_ce(rng) < 1e-4


def test_cross_entropy_uniform():
    loss, _ = softmax_cross_entropy(np.zeros((3, 4)), [0, 1, 3])
    assert loss == pytest.approx(np.log(4), abs=1e-15)
    assert loss == pytest.approx(1.38629, abs=1e-5)


def test_cross_entropy_confident():
    logits = np.array([[50.0, 0.0, 0.0, 0.0]])
    loss, _ = softmax_cross_entropy(logits, [0])
    assert 0.0 <= loss < 1e-20


def test_cross_entropy_grad_rows_sum_to_zero(rng):
    _, grad = softmax_cross_entropy(rng.standard_normal((6, 5)) * 10, rng.integers(0, 5, 6))
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)


def test_cross_entropy_is_stable_and_nonnegative(rng):
    for scale in (1.0, 100.0, 1e4):
        loss, grad = softmax_cross_entropy(rng.standard_normal((8, 3)) * scale, rng.integers(0, 3, 8))
        assert loss >= 0 and np.isfinite(loss) and np.all(np.isfinite(grad))


def test_cross_entropy_label_range():
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), [0, 3])
    with pytest.raises(ValueError):
        softmax_cross_entropy(np.zeros((2, 3)), [-1, 0])


def test_grl_forward_identity():
    x = np.array([0.1, -0.7])
    out = GradientReversal(0.3).forward(x)
    assert out.tobytes() == x.tobytes()


def test_grl_backward_examples():
    grl = GradientReversal(1.0)
    grl.forward(np.zeros(2))
    np.testing.assert_array_equal(grl.backward(np.array([0.5, -0.2])), [-0.5, 0.2])
    grl.lam = 0.0
    np.testing.assert_array_equal(grl.backward(np.array([0.5, -0.2])), [0.0, 0.0])


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
def test_grl_backward_exact(rng, lam):
    grl = GradientReversal(lam)
    x = rng.standard_normal((4, 3))
    assert np.array_equal(grl.forward(x), x)
    g = rng.standard_normal((4, 3))
    assert np.array_equal(grl.backward(g), -lam * g)


def test_grl_twice_is_identity(rng):
    a, b = GradientReversal(1.0), GradientReversal(1.0)
    x = rng.standard_normal(5)
    b.forward(a.forward(x))
    g = rng.standard_normal(5)
    assert np.array_equal(a.backward(b.backward(g)), g)


def test_grl_rejects_negative():
    with pytest.raises(ValueError):
        GradientReversal(-0.1)
