import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trajgan.autodiff import (
    Adam,
    AdamState,
    LstmCellParams,
    Tensor,
    adam_apply,
    backward,
    current_tape,
    decode_checkpoint,
    encode_checkpoint,
    forward_op,
    lstm_sequence,
    lstm_step,
    no_grad,
    ops,
)
from trajgan.autodiff.gradcheck import check_gradients, numeric_gradient, relative_error
from trajgan.errors import CheckpointError, ContractError, DimensionError, NumericError


def param(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0.0, scale, shape), requires_grad=True)


# ---------------------------------------------------------------- forward examples


def test_matmul_identity():
    out = forward_op("matmul", [np.eye(2), np.array([[3.0], [4.0]])])
    np.testing.assert_array_equal(out.data, [[3.0], [4.0]])


def test_softmax_uniform():
    np.testing.assert_allclose(ops.softmax(np.zeros(3)).data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_sigmoid_zero():
    assert ops.sigmoid(0.0).item() == 0.5


def test_shape_mismatch_is_dimension_error():
    with pytest.raises(DimensionError):
        ops.add(np.ones((2, 3)), np.ones((4, 5)))
    with pytest.raises(DimensionError):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_non_finite_output_names_op():
    with pytest.raises(NumericError) as info:
        ops.log(Tensor(np.array([0.0, 1.0]), requires_grad=True))
    assert info.value.op == "log"


def test_unknown_kind():
    with pytest.raises(ContractError):
        forward_op("conv", [np.ones(2)])


def test_recorded_only_when_grad_needed():
    tape = current_tape()
    ops.add(np.ones(2), np.ones(2))
    assert len(tape) == 0
    x = Tensor(np.ones(2), requires_grad=True)
    y = ops.add(x, 1.0)
    assert len(tape) == 1 and y.tape_id == 0
    with no_grad():
        z = ops.add(x, 1.0)
    assert len(tape) == 1 and z.tape_id is None


# ---------------------------------------------------------------- backward examples


def test_square_gradient():
    x = Tensor(3.0, requires_grad=True)
    backward(ops.mul(x, x))
    assert x.grad == 6.0


def test_sum_sigmoid_matches_finite_differences(rng):
    w = param(rng, 4, 5)
    x = param(rng, 5, 1)

    def loss():
        return ops.sum(ops.sigmoid(ops.matmul(w, x)))

    errs = check_gradients(loss, {"w": w, "x": x})
    assert max(errs.values()) < 1e-6


def test_constant_loss_is_noop():
    a = Tensor(np.ones(3))
    loss = ops.sum(ops.mul(a, 2.0))
    backward(loss)
    assert a.grad is None
    assert len(current_tape()) == 0


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(ops.mul(x, 2.0))


def test_tape_is_consumed_and_visited_in_reverse():
    order = []
    x = Tensor(np.ones(2), requires_grad=True)
    y = ops.tanh(x)
    z = ops.sum(ops.mul(y, y))
    tape = current_tape()
    kinds = [n.kind for n in tape.nodes]
    for node in tape.nodes:
        fn = node.backward_fn

        def spy(g, fn=fn, idx=node.index):
            order.append(idx)
            return fn(g)

        node.backward_fn = spy
    backward(z)
    assert order == sorted(order, reverse=True) and len(order) == len(kinds)
    assert len(tape) == 0 and x.grad is not None


def test_gradient_accumulates_over_shared_use():
    x = Tensor(2.0, requires_grad=True)
    backward(ops.add(ops.mul(x, 3.0), ops.mul(x, x)))
    assert x.grad == 3.0 + 4.0


# ---------------------------------------------------------------- op-wide gradient property

UNARY = ["tanh", "sigmoid", "exp", "square", "neg"]


@given(kind=st.sampled_from(UNARY), rows=st.integers(1, 32), cols=st.integers(1, 32),
       seed=st.integers(0, 2**31))
def test_unary_ops_gradcheck(kind, rows, cols, seed):
    rng = np.random.default_rng(seed)
    x = param(rng, rows, cols, scale=0.5)
    proj = rng.normal(size=(rows, cols))
    errs = check_gradients(lambda: ops.sum(ops.mul(forward_op(kind, [x]), proj)), {"x": x})
    assert errs["x"] < 1e-6


@given(rows=st.integers(1, 16), seed=st.integers(0, 2**31))
def test_positive_domain_ops_gradcheck(rows, seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.uniform(0.5, 3.0, (rows, 3)), requires_grad=True)
    proj = rng.normal(size=(rows, 3))
    loss = lambda: ops.sum(ops.mul(ops.add(ops.sqrt(x), ops.log(x)), proj))  # noqa: E731
    assert check_gradients(loss, {"x": x})["x"] < 1e-6


def _binary_case(kind, rng, rows, cols):
    a = param(rng, rows, cols)
    if kind == "matmul":
        b = param(rng, cols, 3)
    elif kind == "div":
        b = Tensor(rng.uniform(0.5, 2.0, (rows, cols)), requires_grad=True)
    else:
        b = param(rng, rows, cols)
    return a, b


@given(kind=st.sampled_from(["add", "sub", "mul", "div", "matmul", "squared_error"]),
       rows=st.integers(1, 12), cols=st.integers(1, 12), seed=st.integers(0, 2**31))
def test_binary_ops_gradcheck(kind, rows, cols, seed):
    rng = np.random.default_rng(seed)
    a, b = _binary_case(kind, rng, rows, cols)
    out_shape = forward_op(kind, [a, b]).shape
    current_tape().clear()
    proj = rng.normal(size=out_shape)
    errs = check_gradients(lambda: ops.sum(ops.mul(forward_op(kind, [a, b]), proj)), {"a": a, "b": b})
    assert max(errs.values()) < 1e-6


@given(rows=st.integers(1, 10), cols=st.integers(1, 10), seed=st.integers(0, 2**31))
def test_structural_ops_gradcheck(rows, cols, seed):
    rng = np.random.default_rng(seed)
    a = param(rng, rows, cols)
    b = param(rng, rows, cols)
    p1 = rng.normal(size=(2 * rows, cols))
    p2 = rng.normal(size=(rows, 2, cols))

    def loss():
        c = ops.concat([a, b], axis=0)
        s = ops.stack([a, ops.tanh(b)], axis=1)
        t = ops.transpose(ops.reshape(a, (cols, rows)))
        r = ops.sum(ops.mul(c, p1)) + ops.sum(ops.mul(s, p2))
        r = r + ops.sum(ops.cumsum(t, axis=0)) + ops.mean(a[:, -1]) + ops.sum(ops.mean(b, axis=0))
        return r + ops.sum(a[np.array([0, 0])])

    errs = check_gradients(loss, {"a": a, "b": b})
    assert max(errs.values()) < 1e-6


@given(n=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_softmax_and_linear_gradcheck(n, seed):
    rng = np.random.default_rng(seed)
    x = param(rng, n, 5)
    w = param(rng, 4, 5)
    b = param(rng, 4)
    proj = rng.normal(size=(n, 4))
    mask = rng.random((n, 4)) < 0.7
    mask[:, 0] = True

    def loss():
        return ops.sum(ops.mul(ops.softmax(ops.linear(x, w, b), axis=-1, mask=mask), proj))

    errs = check_gradients(loss, {"x": x, "w": w, "b": b})
    assert max(errs.values()) < 1e-6


@given(n=st.integers(1, 20), seed=st.integers(0, 2**31))
def test_bce_gradcheck(n, seed):
    rng = np.random.default_rng(seed)
    p = Tensor(rng.uniform(0.05, 0.95, n), requires_grad=True)
    t = rng.integers(0, 2, n).astype(np.float64)
    errs = check_gradients(lambda: ops.sum(ops.bce(p, t)), {"p": p})
    assert errs["p"] < 1e-6


def test_bce_exact_zero_at_perfect_labels():
    assert ops.sum(ops.bce(np.array([1.0, 0.0]), np.array([1.0, 0.0]))).item() == 0.0


@given(rows=st.integers(1, 16), cols=st.integers(1, 16), seed=st.integers(0, 2**31))
def test_softmax_is_distribution(rows, cols, seed):
    x = np.random.default_rng(seed).normal(0, 20, (rows, cols))
    p = ops.softmax(x, axis=-1).data
    assert (p >= 0).all()
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_replay_determinism(rng):
    w = rng.normal(size=(6, 4))
    x = rng.normal(size=(4, 1))

    def run():
        wt = Tensor(w.copy(), requires_grad=True)
        out = ops.sum(ops.tanh(ops.matmul(wt, x)))
        backward(out)
        return out.data.tobytes(), wt.grad.tobytes()

    assert run() == run()


# ---------------------------------------------------------------- LSTM


def test_lstm_zero_params_zero_output(rng):
    p = LstmCellParams.init(3, 4, rng).zero_()
    h, c = lstm_step(p, rng.normal(size=3), np.zeros(4), np.zeros(4))
    assert not h.data.any() and not c.data.any()


def test_lstm_forget_bias_and_init_bounds(rng):
    p = LstmCellParams.init(5, 8, rng)
    assert (p.bias.data[8:16] == 1.0).all()
    bound = 1.0 / math.sqrt(8)
    assert np.abs(p.input_weights.data).max() <= bound
    assert p.input_weights.shape == (32, 5) and p.recurrent_weights.shape == (32, 8)


def test_lstm_step_gradcheck(rng):
    p = LstmCellParams.init(3, 4, rng)
    x = param(rng, 3)
    h = param(rng, 4, scale=0.5)
    c = param(rng, 4, scale=0.5)

    def loss():
        h2, c2 = lstm_step(p, x, h, c)
        return ops.add(ops.sum(h2), ops.mul(ops.sum(c2), 0.3))

    params = dict(p.named_parameters(), x=x, h=h, c=c)
    assert max(check_gradients(loss, params).values()) < 1e-6


def test_lstm_step_deterministic(rng):
    p = LstmCellParams.init(3, 4, rng)
    x = rng.normal(size=3)
    a = lstm_step(p, x, np.zeros(4), np.zeros(4))
    b = lstm_step(p, x, np.zeros(4), np.zeros(4))
    assert a[0].data.tobytes() == b[0].data.tobytes()


def test_lstm_step_dimension_mismatch(rng):
    p = LstmCellParams.init(3, 4, rng)
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(5), np.zeros(4), np.zeros(4))
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(3), np.zeros(3), np.zeros(4))


def test_lstm_sequence_matches_stepwise(rng):
    p = LstmCellParams.init(3, 4, rng)
    xs = rng.normal(size=(2, 5, 3))
    seq = lstm_sequence(p, xs).data
    h = np.zeros((2, 4))
    c = np.zeros((2, 4))
    for t in range(5):
        ht, ct = lstm_step(p, xs[:, t], h, c)
        h, c = ht.data, ct.data
        np.testing.assert_allclose(seq[:, t], h, rtol=0, atol=1e-14)


def test_lstm_sequence_gradcheck(rng):
    p = LstmCellParams.init(3, 4, rng)
    xs = param(rng, 2, 6, 3)
    proj = rng.normal(size=(2, 6, 4))
    params = dict(p.named_parameters(), xs=xs)
    errs = check_gradients(lambda: ops.sum(ops.mul(lstm_sequence(p, xs), proj)), params)
    assert max(errs.values()) < 1e-6


# ---------------------------------------------------------------- Adam


def test_adam_first_step_analytic():
    x = Tensor(np.array([0.0]), requires_grad=True)
    x.grad = np.array([1.0])
    state = AdamState()
    adam_apply(state, [x])
    expected = -0.001 * (1.0 / (1.0 + 1e-8))
    assert abs(x.data[0] - expected) < 1e-18
    assert state.step == 1 and x.grad is None


def test_adam_zero_gradient_keeps_params(rng):
    x = param(rng, 3)
    before = x.data.copy()
    x.grad = np.zeros(3)
    adam_apply(AdamState(), [x])
    np.testing.assert_array_equal(x.data, before)


def test_adam_symmetric_updates():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = Adam([a, b])
    for g in (0.3, -1.2, 0.7):
        a.grad = np.full(2, g)
        b.grad = np.full(2, g)
        opt.step()
    assert a.data.tobytes() == b.data.tobytes()
    assert opt.state.step == 3
    assert opt.state.m[0].shape == a.shape


def test_adam_missing_grad():
    with pytest.raises(ContractError):
        adam_apply(AdamState(), [Tensor(np.ones(2), requires_grad=True)])


@given(g=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8))
def test_adam_lr_zero_fixed(g):
    x = Tensor(np.ones(len(g)), requires_grad=True)
    x.grad = np.array(g)
    adam_apply(AdamState(lr=0.0), [x])
    np.testing.assert_array_equal(x.data, np.ones(len(g)))


# ---------------------------------------------------------------- checkpoint and oracle helpers


@given(shapes=st.lists(st.lists(st.integers(0, 4), max_size=3), max_size=5), seed=st.integers(0, 2**31))
def test_checkpoint_roundtrip_bit_exact(shapes, seed):
    rng = np.random.default_rng(seed)
    arrays = {f"p{i}/w": np.asarray(rng.normal(size=tuple(s))) for i, s in enumerate(shapes)}
    blob = encode_checkpoint(arrays)
    assert blob[:4] == b"TGF1"
    back = decode_checkpoint(blob)
    assert list(back) == list(arrays)
    for k in arrays:
        assert back[k].shape == arrays[k].shape
        assert back[k].tobytes() == arrays[k].tobytes()
    assert encode_checkpoint(back) == blob


def test_checkpoint_rejects_garbage():
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"NOPE\x01\x00\x00\x00")
    blob = encode_checkpoint({"a": np.ones(3)})
    with pytest.raises(CheckpointError):
        decode_checkpoint(blob[:-3])


def test_relative_error_conventions():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1.0]), np.array([0.0])) == 1.0


def test_numeric_gradient_quadratic():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    g = numeric_gradient(lambda: ops.sum(ops.square(x)), x)
    np.testing.assert_allclose(g, [2.0, -4.0], rtol=1e-9)
