import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eedgcnn.tensor import ShapeError, Tape, Tensor, forward_op
from oracles import grad_check

TOL = 1e-4


def param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_elementwise_multiply():
    out = Tape().mul(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
    assert out.data.tolist() == [3.0, 8.0]


def test_sigmoid_at_zero():
    assert Tape().sigmoid(Tensor([0.0])).data.tolist() == [0.5]


def test_affine_identity():
    out = Tape().affine(Tensor([1.0, 1.0]), Tensor(np.eye(2)), Tensor(np.zeros(2)))
    assert out.data.tolist() == [1.0, 1.0]


def test_sum_of_squares_gradient():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(tape.mul(x, x)))
    assert x.grad.tolist() == [2.0, 4.0, 6.0]


def test_sigmoid_gradient_at_zero_weight():
    w = Tensor([0.0], requires_grad=True)
    tape = Tape()
    tape.backward(tape.sigmoid(tape.mul(w, Tensor([1.0]))))
    assert w.grad.tolist() == [0.25]


def test_reused_node_accumulates():
    x = Tensor([1.5, -2.0], requires_grad=True)
    tape = Tape()
    tape.backward(tape.sum(tape.add(x, x)))
    assert x.grad.tolist() == [2.0, 2.0]


def test_non_scalar_loss_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    tape = Tape()
    with pytest.raises(ShapeError):
        tape.backward(tape.scale(x, 2.0))


def test_broadcasting_is_not_silent():
    with pytest.raises(ShapeError):
        Tape().add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))


def test_embedding_rejects_out_of_range():
    table = Tensor(np.arange(6.0).reshape(3, 2))
    with pytest.raises(IndexError):
        Tape().embedding(table, [3])
    with pytest.raises(IndexError):
        Tape().embedding(table, [-1])


def test_embedding_returns_exact_rows():
    table = Tensor(np.arange(6.0).reshape(3, 2))
    out = Tape().embedding(table, [2, 0, -1], allow_pad=True)
    assert out.data.tolist() == [[4.0, 5.0], [0.0, 1.0], [0.0, 0.0]]


def test_dropout_identity_at_eval():
    x = Tensor(np.ones((4, 5)))
    assert Tape(training=False).dropout(x, 0.5) is x


def test_dropout_inverted_scaling():
    tape = Tape(seed=3)
    x = Tensor(np.ones((200, 50)), requires_grad=True)
    out = tape.dropout(x, 0.2).data
    kept = out[out > 0]
    assert np.allclose(kept, 1.25)
    assert 0.15 < np.mean(out == 0) < 0.25


def test_unknown_op_kind():
    with pytest.raises(ValueError):
        forward_op(Tape(), "matmul_fused", Tensor([1.0]))


# finite-difference checks, one per primitive ---------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_grad_elementwise(seed):
    rng = np.random.default_rng(seed)
    a, b = param(rng, 3, 4), param(rng, 3, 4)

    def build(t):
        y = t.mul(t.sigmoid(a), t.add(b, t.scale(a, 0.7)))
        return t.sum(t.relu(t.add(y, Tensor(np.full((3, 4), 0.05)))))

    assert grad_check(build, [a, b]) < TOL


@pytest.mark.parametrize("seed", range(5))
def test_grad_structural(seed):
    rng = np.random.default_rng(seed)
    a, b = param(rng, 2, 3, 2), param(rng, 2, 3, 4)
    keep = np.array([[1, 0, 1], [1, 1, 0]])

    def build(t):
        c = t.concat([a, b], axis=-1)
        c = t.mask(c, keep)
        r = t.reshape(c, (6, 6))
        return t.sum(t.mul(r, r))

    assert grad_check(build, [a, b]) < TOL


@pytest.mark.parametrize("seed", range(5))
def test_grad_embedding(seed):
    rng = np.random.default_rng(seed)
    table = param(rng, 5, 3)
    ids = np.array([[0, 2, 2], [4, -1, 0]])
    w = Tensor(rng.normal(size=(2, 3, 3)))

    def build(t):
        return t.sum(t.mul(t.embedding(table, ids, allow_pad=True), w))

    assert grad_check(build, [table]) < TOL


@pytest.mark.parametrize("seed", range(5))
def test_grad_affine(seed):
    rng = np.random.default_rng(seed)
    x, W, b = param(rng, 2, 5, 4), param(rng, 4, 3), param(rng, 3)

    def build(t):
        y = t.affine(x, W, b)
        return t.sum(t.mul(y, y))

    assert grad_check(build, [x, W, b]) < TOL


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("dilation", [1, 2, 4])
def test_grad_conv1d(seed, dilation):
    rng = np.random.default_rng(seed)
    x, W, b = param(rng, 2, 9, 3), param(rng, 3, 3, 2), param(rng, 2)
    probe = Tensor(rng.normal(size=(2, 9, 2)))

    def build(t):
        return t.sum(t.mul(t.conv1d(x, W, b, dilation=dilation), probe))

    assert grad_check(build, [x, W, b]) < TOL


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("reduction", ["sum", "mean"])
def test_grad_softmax_xent(seed, reduction):
    rng = np.random.default_rng(seed)
    logits = param(rng, 6, 5)
    targets = np.eye(5)[rng.integers(5, size=6)]

    def build(t):
        return t.softmax_xent(logits, targets, reduction=reduction)

    assert grad_check(build, [logits]) < TOL


def test_xent_rejects_soft_targets():
    with pytest.raises(ValueError):
        Tape().softmax_xent(Tensor(np.zeros((1, 3))), [[0.5, 0.5, 0.0]])


# properties ---------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_forward_backward_deterministic(seed):
    def run():
        rng = np.random.default_rng(seed)
        x, W = param(rng, 7, 3), param(rng, 3, 3, 3)
        tape = Tape(seed=seed)
        y = tape.dropout(tape.conv1d(x, W, dilation=2), 0.3)
        loss = tape.sum(tape.mul(y, y))
        tape.backward(loss)
        return loss.data.tobytes(), x.grad.tobytes(), W.grad.tobytes()

    assert run() == run()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.integers(1, 4))
def test_fan_out_gradient_is_sum(values, copies):
    x = Tensor(np.array(values), requires_grad=True)
    tape = Tape()
    acc = x
    for _ in range(copies):
        acc = tape.add(acc, x)
    tape.backward(tape.sum(acc))
    assert np.array_equal(x.grad, np.full(len(values), copies + 1.0))


def test_leaf_grads_accumulate_across_backward_calls():
    x = Tensor([1.0, 2.0], requires_grad=True)
    for _ in range(2):
        tape = Tape()
        tape.backward(tape.sum(tape.scale(x, 3.0)))
    assert x.grad.tolist() == [6.0, 6.0]
