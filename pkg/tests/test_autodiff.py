import numpy as np
import numpy.testing as npt
import pytest

from trajcast.autodiff import (
    Tensor,
    backward,
    concat,
    exp,
    fd_gradient,
    masked_softmax_rows,
    matmul,
    mul,
    narrow,
    no_grad,
    reduce_sum,
    relu,
    reshape,
    row_norms,
    square,
    sub,
    transpose,
)

H = 1e-5


def rel_err(analytic, fd):
    return np.abs(analytic - fd).max() / max(np.abs(fd).max(), 1e-4)


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        backward(t + 1.0)


def test_sum_of_matmul_gradient_is_outer_product():
    # loss = sum(W @ x) with x fixed: dloss/dW[i, j] = sum_k x[j, k]
    rng = np.random.default_rng(0)
    w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    x = Tensor(rng.normal(size=(4, 5)))
    backward(reduce_sum(matmul(w, x)))
    expected = np.tile(x.data.sum(axis=1), (3, 1))
    npt.assert_allclose(w.grad, expected, rtol=1e-12)
    fd = fd_gradient(lambda: matmul(w, x).data.sum(), w, h=H)
    assert rel_err(w.grad, fd) < 1e-6


def test_unused_parameter_gradient_untouched():
    used = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    unused = Tensor(np.array([[3.0]]), requires_grad=True)
    backward(reduce_sum(square(used)))
    assert unused.grad is None
    npt.assert_allclose(used.grad, 2.0 * used.data)


def test_gradients_accumulate_across_backward_calls():
    p = Tensor(np.array([2.0]), requires_grad=True)
    backward(reduce_sum(square(p)))
    backward(reduce_sum(square(p)))
    npt.assert_allclose(p.grad, [8.0])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_elementwise_and_shape_ops_match_fd(seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
    c = Tensor(rng.normal(size=(6,)), requires_grad=True)

    def forward():
        h = relu(a + mul(b, 0.7)) + c  # broadcast bias
        h = concat([h, square(sub(a, b))], axis=1)
        h = narrow(h, 1, 2, 10)
        h = reshape(exp(mul(h, 0.1)), (8, 4))
        n = row_norms(h)
        return mul(reduce_sum(n), 0.25)

    loss = forward()
    backward(loss)
    for t in (a, b, c):
        fd = fd_gradient(lambda: forward().item(), t, h=H)
        assert rel_err(t.grad, fd) < 1e-6


def test_transpose_matches_fd():
    rng = np.random.default_rng(7)
    a = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    loss = reduce_sum(square(matmul(transpose(a), a)))
    backward(loss)
    fd = fd_gradient(lambda: (square(matmul(transpose(a), a))).data.sum(), a, h=H)
    assert rel_err(a.grad, fd) < 1e-6


def test_row_norms_zero_row_uses_zero_subgradient():
    a = Tensor(np.array([[0.0, 0.0], [3.0, 4.0]]), requires_grad=True)
    backward(reduce_sum(row_norms(a)))
    npt.assert_allclose(a.grad, [[0.0, 0.0], [0.6, 0.8]])


def test_detach_blocks_gradient():
    p = Tensor(np.array([[2.0]]), requires_grad=True)
    backward(reduce_sum(mul(p.detach(), p)))
    npt.assert_allclose(p.grad, [[2.0]])  # only the non-detached factor


def test_no_grad_skips_recording():
    p = Tensor(np.array([[2.0]]), requires_grad=True)
    with no_grad():
        out = square(p)
    assert out._parents == ()
    assert not out.requires_grad


# masked softmax -------------------------------------------------------------


def test_softmax_uniform_logits_full_mask():
    out = masked_softmax_rows(Tensor(np.zeros((2, 4))), np.ones((2, 4)))
    npt.assert_allclose(out.data, 0.25)


def test_softmax_single_survivor():
    out = masked_softmax_rows(Tensor(np.array([[0.0, 0.0]])), np.array([[1.0, 0.0]]))
    npt.assert_allclose(out.data, [[1.0, 0.0]])


def test_softmax_hand_value():
    logits = np.log(np.array([[1.0, 2.0, 3.0]]))
    out = masked_softmax_rows(Tensor(logits), np.ones((1, 3)))
    npt.assert_allclose(out.data, [[1 / 6, 2 / 6, 3 / 6]], rtol=1e-12)


def test_softmax_rows_are_probability_vectors_on_support(rng):
    for _ in range(25):
        n, m = rng.integers(1, 6), rng.integers(1, 6)
        logits = rng.normal(scale=3.0, size=(n, m))
        mask = (rng.random((n, m)) < 0.6).astype(float)
        out = masked_softmax_rows(Tensor(logits), mask).data
        assert (out[mask == 0] == 0.0).all()
        sums = out.sum(axis=1)
        support = mask.sum(axis=1) > 0
        npt.assert_allclose(sums[support], 1.0, rtol=1e-12)
        npt.assert_allclose(sums[~support], 0.0)


def test_softmax_gradient_matches_fd(rng):
    logits = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    mask = np.array(
        [[1, 1, 0, 1], [1, 0, 0, 0], [1, 1, 1, 1]], dtype=float
    )
    weights = Tensor(rng.normal(size=(3, 4)))

    def forward():
        return reduce_sum(mul(masked_softmax_rows(logits, mask), weights))

    backward(forward())
    fd = fd_gradient(lambda: forward().item(), logits, h=H)
    assert rel_err(logits.grad, fd) < 1e-6
