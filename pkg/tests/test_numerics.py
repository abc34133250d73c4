"""Tensor engine tests: forward values against hand oracles, gradients
against central finite differences."""
import numpy as np
import pytest

import narvc.numerics as N
from narvc.errors import (
    ConfigError,
    DimensionError,
    MaskError,
    NumericsError,
    StateError,
    UsageError,
)


def fd_ok(fn, point, **kw):
    rep = N.grad_check(fn, N.Tensor(point), **kw)
    assert rep.passed, f"max_rel_err={rep.max_rel_err:.3e}"
    return rep


# ---------------------------------------------------------------------------
# construction / finiteness
# ---------------------------------------------------------------------------


def test_tensor_rejects_nonfinite():
    with pytest.raises(NumericsError):
        N.Tensor([1.0, np.nan])
    with pytest.raises(NumericsError):
        N.Tensor([np.inf])


def test_op_output_nonfinite_is_error():
    x = N.Tensor([800.0])
    with pytest.raises(NumericsError):
        N.exp(x)  # overflows to inf


def test_log_of_zero_is_error_not_silent():
    with pytest.raises(NumericsError):
        N.log(N.Tensor([0.0]))


# ---------------------------------------------------------------------------
# backward bookkeeping
# ---------------------------------------------------------------------------


def test_backward_sum_gives_ones():
    x = N.Tensor([3.0, 4.0, 5.0], requires_grad=True)
    with N.Graph() as g:
        loss = N.tsum(x)
    g.backward(loss)
    np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])


def test_backward_chain_rule_square():
    x = N.Tensor([1.0, 2.0], requires_grad=True)
    with N.Graph() as g:
        loss = N.tsum(N.mul(x, x))
    g.backward(loss)
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_backward_accumulates_over_fanout():
    x = N.Tensor([1.0, 1.0], requires_grad=True)
    with N.Graph() as g:
        loss = N.add(N.tsum(x), N.tsum(x))
    g.backward(loss)
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_double_backward_is_state_error():
    x = N.Tensor([1.0], requires_grad=True)
    with N.Graph() as g:
        loss = N.tsum(x)
    g.backward(loss)
    with pytest.raises(StateError):
        g.backward(loss)


def test_nonscalar_loss_is_usage_error():
    x = N.Tensor([1.0, 2.0], requires_grad=True)
    with N.Graph() as g:
        y = N.mul(x, 2.0)
    with pytest.raises(UsageError):
        g.backward(y)


def test_nested_graphs_rejected():
    with N.Graph():
        with pytest.raises(StateError):
            with N.Graph():
                pass


# ---------------------------------------------------------------------------
# stop_gradient
# ---------------------------------------------------------------------------


def test_stop_gradient_forward_identity():
    x = N.Tensor([[1.5, -2.0]])
    y = N.stop_gradient(x)
    np.testing.assert_array_equal(y.data, x.data)


def test_stop_gradient_blocks_grad():
    x = N.Tensor([1.0, 2.0], requires_grad=True)
    w = N.Tensor([3.0, 4.0], requires_grad=True)
    with N.Graph() as g:
        loss = N.tsum(N.mul(N.stop_gradient(x), w))
    g.backward(loss)
    np.testing.assert_array_equal(w.grad, [1.0, 2.0])
    assert x.grad is None


def test_stop_gradient_idempotent():
    x = N.Tensor([1.0, 2.0], requires_grad=True)
    y = N.stop_gradient(N.stop_gradient(x))
    np.testing.assert_array_equal(y.data, x.data)
    assert not y.requires_grad


# ---------------------------------------------------------------------------
# conv1d / depthwise
# ---------------------------------------------------------------------------


def test_conv1d_identity_kernel():
    x = N.Tensor([[1.0], [2.0], [3.0], [4.0]])
    k = N.Tensor([[[1.0]]])  # K=1, Cin=1, Cout=1
    b = N.Tensor([0.0])
    y = N.conv1d(x, k, b)
    np.testing.assert_array_equal(y.data[:, 0], [1, 2, 3, 4])


def test_conv1d_same_padding_hand_value():
    # ones kernel K=3 over [1,1,1] with zero padding: [0+1+1, 1+1+1, 1+1+0]
    x = N.Tensor([[1.0], [1.0], [1.0]])
    k = N.Tensor(np.ones((3, 1, 1)))
    y = N.conv1d(x, k, N.Tensor([0.0]))
    np.testing.assert_array_equal(y.data[:, 0], [2, 3, 2])


def test_conv1d_even_kernel_same_is_config_error():
    x = N.Tensor(np.zeros((4, 1)))
    k = N.Tensor(np.zeros((2, 1, 1)))
    with pytest.raises(ConfigError):
        N.conv1d(x, k, N.Tensor([0.0]), padding="same")


def test_conv1d_channel_mismatch():
    x = N.Tensor(np.zeros((4, 2)))
    k = N.Tensor(np.zeros((3, 3, 1)))
    with pytest.raises(DimensionError):
        N.conv1d(x, k)


def test_conv1d_causal_does_not_peek_ahead():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 2))
    k = N.Tensor(rng.standard_normal((3, 2, 2)))
    y0 = N.conv1d(N.Tensor(x), k, padding="causal").data
    x2 = x.copy()
    x2[4:] += 1.0  # future change
    y1 = N.conv1d(N.Tensor(x2), k, padding="causal").data
    np.testing.assert_array_equal(y0[:4], y1[:4])


def test_depthwise_identity_and_isolation():
    x = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    k = N.Tensor(np.ones((1, 2)))
    y = N.depthwise_conv1d(N.Tensor(x), k)
    np.testing.assert_array_equal(y.data, x)
    # channel 1 all-zero stays all-zero regardless of channel 0
    k3 = N.Tensor(np.ones((3, 2)))
    y3 = N.depthwise_conv1d(N.Tensor(x), k3)
    np.testing.assert_array_equal(y3.data[:, 1], [0, 0, 0])


def test_depthwise_hand_value():
    # ones kernel K=3 over [1,2,3]: [0+1+2, 1+2+3, 2+3+0]
    x = N.Tensor([[1.0], [2.0], [3.0]])
    k = N.Tensor(np.ones((3, 1)))
    y = N.depthwise_conv1d(x, k)
    np.testing.assert_array_equal(y.data[:, 0], [3, 6, 5])


def test_depthwise_channel_mismatch():
    with pytest.raises(DimensionError):
        N.depthwise_conv1d(N.Tensor(np.zeros((3, 2))), N.Tensor(np.zeros((3, 4))))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def test_layer_norm_constant_row_collapses_to_offset():
    x = N.Tensor([[5.0, 5.0, 5.0]])
    y = N.layer_norm(x, N.ones(3), N.zeros(3))
    np.testing.assert_allclose(y.data, [[0, 0, 0]], atol=1e-6)


def test_layer_norm_two_point_row():
    # row [1,3]: mean 2, population std 1
    y = N.layer_norm(N.Tensor([[1.0, 3.0]]), N.ones(2), N.zeros(2), eps=1e-12)
    np.testing.assert_allclose(y.data, [[-1.0, 1.0]], atol=1e-5)


def test_layer_norm_zero_gain_gives_offset():
    x = N.Tensor(np.random.default_rng(1).standard_normal((4, 3)))
    off = N.Tensor([1.0, 2.0, 3.0])
    y = N.layer_norm(x, N.zeros(3), off)
    np.testing.assert_allclose(y.data, np.tile(off.data, (4, 1)))


def test_layer_norm_row_statistics():
    rng = np.random.default_rng(2)
    x = N.Tensor(rng.standard_normal((10, 32)))
    y = N.layer_norm(x, N.ones(32), N.zeros(32), eps=1e-12).data
    assert np.abs(y.mean(axis=1)).max() < 1e-9
    assert np.abs(y.var(axis=1) - 1.0).max() < 1e-6


def test_batch_norm_train_event_free_on_normalized_input():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((200, 4))
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    st = N.BatchNormState(4)
    y = N.batch_norm_1d(N.Tensor(x), N.ones(4), N.zeros(4), st, "train")
    np.testing.assert_allclose(y.data, x, atol=1e-4)


def test_batch_norm_infer_is_pure():
    rng = np.random.default_rng(4)
    x = N.Tensor(rng.standard_normal((8, 3)))
    st = N.BatchNormState(3)
    N.batch_norm_1d(x, N.ones(3), N.zeros(3), st, "train")
    m0, v0 = st.mean.copy(), st.var.copy()
    y1 = N.batch_norm_1d(x, N.ones(3), N.zeros(3), st, "infer").data
    y2 = N.batch_norm_1d(x, N.ones(3), N.zeros(3), st, "infer").data
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_array_equal(st.mean, m0)
    np.testing.assert_array_equal(st.var, v0)


def test_batch_norm_single_frame_train():
    st = N.BatchNormState(2)
    off = N.Tensor([0.5, -0.5])
    y = N.batch_norm_1d(N.Tensor([[3.0, 7.0]]), N.ones(2), off, st, "train")
    np.testing.assert_allclose(y.data, [[0.5, -0.5]])


def test_batch_norm_infer_without_stats_is_state_error():
    st = N.BatchNormState(2)
    with pytest.raises(StateError):
        N.batch_norm_1d(N.Tensor([[1.0, 2.0]]), N.ones(2), N.zeros(2), st, "infer")


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def test_swish_values():
    y = N.swish(N.Tensor([0.0])).data
    assert y[0] == 0.0
    # 1 * sigmoid(1) = 1/(1+e^-1)
    y1 = N.swish(N.Tensor([1.0])).item()
    assert abs(y1 - 0.7310585786300049) < 1e-9


def test_glu_zero_gate_halves():
    a = np.array([2.0, -4.0, 6.0])
    x = N.Tensor(np.concatenate([a, np.zeros(3)]))
    y = N.glu(x).data
    np.testing.assert_allclose(y, a / 2.0)


def test_glu_odd_extent_rejected():
    with pytest.raises(DimensionError):
        N.glu(N.Tensor([1.0, 2.0, 3.0]))


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------


def test_softmax_uniform():
    y = N.softmax_lastdim(N.Tensor([[7.0, 7.0, 7.0]])).data
    np.testing.assert_allclose(y, [[1 / 3, 1 / 3, 1 / 3]])


def test_softmax_large_values_stable():
    y = N.softmax_lastdim(N.Tensor([[1000.0, 0.0]])).data
    assert np.all(np.isfinite(y))
    np.testing.assert_allclose(y, [[1.0, 0.0]], atol=1e-300)


def test_softmax_mask_renormalizes():
    mask = np.array([[True, True, False]])
    y = N.softmax_lastdim(N.Tensor([[0.0, 0.0, 0.0]]), mask).data
    np.testing.assert_allclose(y, [[0.5, 0.5, 0.0]])
    assert y[0, 2] == 0.0


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((20, 9)) * 10
    y = N.softmax_lastdim(N.Tensor(x)).data
    np.testing.assert_allclose(y.sum(axis=1), np.ones(20), atol=1e-12)


def test_softmax_fully_masked_row_is_error():
    with pytest.raises(MaskError):
        N.softmax_lastdim(N.Tensor([[1.0, 2.0]]), np.array([[False, False]]))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_tensor_file_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(6)
    arr = rng.standard_normal((5, 7)).astype(np.float32).astype(np.float64)
    p = tmp_path / "t.nvc"
    N.save_tensor(p, arr)
    back = N.load_tensor(p)
    np.testing.assert_array_equal(back, arr)
    # resaving the loaded data reproduces the file byte for byte
    p2 = tmp_path / "t2.nvc"
    N.save_tensor(p2, back)
    assert p.read_bytes() == p2.read_bytes()


def test_tensor_file_layout(tmp_path):
    p = tmp_path / "t.nvc"
    N.save_tensor(p, np.array([[1.0, 2.0]]))
    raw = p.read_bytes()
    assert raw[:4] == b"NVC1"
    assert int.from_bytes(raw[4:8], "little") == 2  # rank
    assert int.from_bytes(raw[8:16], "little") == 1
    assert int.from_bytes(raw[16:24], "little") == 2
    assert np.frombuffer(raw[24:], dtype="<f4").tolist() == [1.0, 2.0]


def test_container_roundtrip(tmp_path):
    tensors = {"a": np.arange(6, dtype=np.float64).reshape(2, 3), "b": np.array([1.5])}
    p = tmp_path / "c.nvc"
    N.save_container(p, tensors, meta="k=v\n", dtype="f8")
    back, meta = N.load_container(p)
    assert meta == "k=v\n"
    assert set(back) == {"a", "b"}
    np.testing.assert_array_equal(back["a"], tensors["a"])


# ---------------------------------------------------------------------------
# gradient checks: every differentiable primitive at random points
# ---------------------------------------------------------------------------


def test_grad_check_simple_quadratic():
    rep = fd_ok(lambda x: N.tsum(N.mul(x, x)), np.array([1.0, 2.0, 3.0]))
    assert rep.max_rel_err < 1e-6


def test_grad_check_layernorm_of_swish():
    rng = np.random.default_rng(7)

    def f(x):
        return N.layer_norm(N.swish(x), N.ones(6), N.zeros(6))

    fd_ok(f, rng.standard_normal((4, 6)))


def test_grad_check_detects_stop_gradient_mismatch():
    # analytic grad is 0 where finite differences see a slope: expected failure
    rep = N.grad_check(lambda x: N.tsum(N.mul(N.stop_gradient(x), x)),
                       N.Tensor([1.0, 2.0]))
    assert not rep.passed


def test_grad_check_nondeterministic_fn_rejected():
    state = {"n": 0}

    def f(x):
        state["n"] += 1
        return N.mul(x, float(state["n"]))

    with pytest.raises(UsageError):
        N.grad_check(f, N.Tensor([1.0]))


@pytest.mark.parametrize("seed", range(10))
def test_primitives_grad_check_random_points(seed):
    rng = np.random.default_rng(100 + seed)
    x_mat = rng.standard_normal((5, 4))
    w = N.Tensor(rng.standard_normal((4, 3)))
    k = N.Tensor(rng.standard_normal((3, 4, 2)))
    dk = N.Tensor(rng.standard_normal((5, 4)))
    gain = N.Tensor(rng.standard_normal(4))
    offset = N.Tensor(rng.standard_normal(4))

    conv_bias = N.Tensor(rng.standard_normal(2))
    cases = {
        "add": lambda x: N.add(x, gain),  # row-broadcast bias add
        "mul": lambda x: N.mul(x, 1.7),
        "matmul": lambda x: N.matmul(x, w),
        "conv1d": lambda x: N.conv1d(x, k, conv_bias),
        "conv1d_causal": lambda x: N.conv1d(x, k, padding="causal"),
        "depthwise": lambda x: N.depthwise_conv1d(x, dk),
        "layer_norm": lambda x: N.layer_norm(x, gain, offset),
        "softmax": lambda x: N.softmax_lastdim(x),
        "swish": N.swish,
        "relu": N.relu,
        "tanh": N.tanh,
        "sigmoid": N.sigmoid,
        "glu": N.glu,
        "abs": N.tabs,
        "square": N.square,
        "exp": lambda x: N.exp(N.mul(x, 0.3)),
        "transpose": lambda x: N.transpose(x, (1, 0)),
        "index_rows": lambda x: N.index_rows(x, np.array([0, 0, 2, 4, 1])),
        "sum_axis": lambda x: N.tsum(x, axis=0),
        "mean": lambda x: N.tmean(x),
    }
    for name, f in cases.items():
        rep = N.grad_check(f, N.Tensor(x_mat))
        assert rep.passed, f"{name}: max_rel_err={rep.max_rel_err:.3e}"


def test_batch_norm_grad_check_both_modes():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((6, 3))
    gain = N.Tensor(rng.standard_normal(3))
    offset = N.Tensor(rng.standard_normal(3))
    st = N.BatchNormState(3)
    N.batch_norm_1d(N.Tensor(x), gain, offset, st, "train")  # populate stats

    fd_ok(lambda t: N.batch_norm_1d(t, gain, offset, st.copy(), "train"), x)
    fd_ok(lambda t: N.batch_norm_1d(t, gain, offset, st.copy(), "infer"), x)


def test_dropout_mask_and_scale():
    rng = np.random.default_rng(12)
    x = N.Tensor(np.ones((50, 20)), requires_grad=True)
    with N.Graph() as g:
        y = N.dropout(x, 0.5, rng)
        loss = N.tsum(y)
    g.backward(loss)
    vals = np.unique(y.data)
    assert set(vals.tolist()) <= {0.0, 2.0}
    np.testing.assert_array_equal(x.grad, y.data)  # grad equals kept-mask * 2
