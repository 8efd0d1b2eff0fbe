import numpy as np
import pytest

from graphclust import autodiff as ad
from graphclust.autodiff import Adam, NumericFault, ShapeError, Tape, Tensor

import gradcheck


@pytest.mark.parametrize("name", gradcheck.OPS + gradcheck.COMPOSITES)
def test_gradients_match_finite_differences(name):
    worst = max(gradcheck.relative_error(name, seed) for seed in range(20))
    assert worst < gradcheck.REL_TOL


def test_sigmoid_of_zero():
    assert np.all(ad.sigmoid(Tensor(np.zeros((2, 3)))).value == 0.5)


def test_matmul_identity():
    x = np.random.default_rng(0).normal(size=(3, 4))
    assert np.array_equal(ad.matmul(Tensor(np.eye(3)), Tensor(x)).value, x)


def test_sigmoid_derivative_at_zero():
    a = Tensor(np.zeros((2, 2)), requires_grad=True)
    with Tape() as t:
        loss = ad.sum_all(ad.sigmoid(a))
    t.backward(loss)
    assert np.allclose(a.grad, 0.25)


def test_sum_grad_is_ones():
    w = Tensor(np.random.default_rng(1).normal(size=(3, 2)), requires_grad=True)
    with Tape() as t:
        loss = ad.sum_all(w)
    t.backward(loss)
    assert np.array_equal(w.grad, np.ones((3, 2)))


def test_linear_grad():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 3))
    w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    with Tape() as t:
        loss = ad.sum_all(ad.matmul(Tensor(x), w))
    t.backward(loss)
    assert np.allclose(w.grad, x.T @ np.ones((4, 2)))


def test_gradients_accumulate_until_zeroed():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    for _ in range(2):
        with Tape() as t:
            loss = ad.sum_all(w)
        t.backward(loss)
    assert np.array_equal(w.grad, 2 * np.ones((2, 2)))
    w.zero_grad()
    assert w.grad is None


def test_reused_tensor_sums_paths():
    w = Tensor([[3.0]], requires_grad=True)
    with Tape() as t:
        loss = ad.elementwise_mul(w, w) + ad.scalar_mul(w, 2.0)
    t.backward(loss)
    assert w.grad[0, 0] == pytest.approx(8.0)


def test_detach_blocks_gradient():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as t:
        h = ad.scalar_mul(w, 3.0)
        loss = ad.sum_all(ad.elementwise_mul(h, h.detach()))
    t.backward(loss)
    assert np.allclose(w.grad, 9.0)  # d/dw (3w * const 3) = 9


def test_ops_outside_tape_are_constants():
    w = Tensor(np.ones((1, 1)), requires_grad=True)
    out = ad.scalar_mul(w, 2.0)
    assert not out.requires_grad


def test_backward_requires_scalar():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as t:
        out = ad.scalar_mul(w, 2.0)
    with pytest.raises(ShapeError):
        t.backward(out)


def test_single_backward_per_tape():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as t:
        loss = ad.sum_all(w)
    t.backward(loss)
    with pytest.raises(RuntimeError):
        t.backward(loss)


@pytest.mark.parametrize("op, args", [
    (ad.matmul, ((2, 3), (2, 3))),
    (ad.add, ((2, 3), (3, 2))),
    (ad.add_row_broadcast, ((2, 3), (2, 3))),
    (ad.concat_cols, ((2, 3), (3, 3))),
    (ad.elementwise_mul, ((2, 3), (2, 2))),
])
def test_shape_errors_name_the_op(op, args):
    with pytest.raises(ShapeError, match=op.__name__):
        op(*(Tensor(np.zeros(s)) for s in args))


def test_log_clamps_and_counts_faults():
    a = Tensor(np.array([[0.0, -1.0, 1.0]]), requires_grad=True)
    with Tape() as t:
        out = ad.log(a)
    assert t.faults == 2
    assert np.allclose(out.value, [[np.log(1e-12), np.log(1e-12), 0.0]])


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_non_finite_values_raise():
    with pytest.raises(NumericFault):
        ad.scalar_mul(Tensor([[1e308]]), 10.0)


def test_only_2d_tensors():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2, 2)))
    assert Tensor(3.0).shape == (1, 1) and Tensor([1.0, 2.0]).shape == (1, 2)


def test_bce_is_stable_for_large_logits():
    x = Tensor(np.array([[800.0, -800.0]]), requires_grad=True)
    with Tape() as t:
        loss = ad.bce_with_logits(x, np.array([[1.0, 0.0]]))
    t.backward(loss)
    assert loss.item() == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(x.grad))


def test_bce_matches_direct_formula():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 4))
    y = (rng.random((4, 4)) < 0.5).astype(float)
    s = 1 / (1 + np.exp(-x))
    ref = -(2.0 * y * np.log(s) + (1 - y) * np.log(1 - s)).mean()
    assert ad.bce_with_logits(Tensor(x), y, pos_weight=2.0).item() == pytest.approx(ref)


# -------------------------------------------------------------------- Adam

def test_adam_zero_grad_no_change():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    w.grad = np.zeros((2, 2))
    ad.adam_step([w], lr=0.1, t=1)
    assert np.array_equal(w.value, np.ones((2, 2)))


def test_adam_constant_grad_moves_against_sign():
    w = Tensor(np.zeros((1, 2)), requires_grad=True)
    opt = Adam([w], lr=0.01)
    for _ in range(50):
        w.grad = np.array([[1.0, -2.0]])
        opt.step()
    assert w.value[0, 0] < 0 < w.value[0, 1]


def test_adam_quadratic_bowl():
    w = Tensor(np.random.default_rng(0).normal(size=(3, 3)), requires_grad=True)
    opt = Adam([w], lr=0.01)
    for step in range(2000):
        opt.zero_grad()
        with Tape() as t:
            loss = ad.sum_all(ad.elementwise_mul(w, w))
        t.backward(loss)
        opt.step()
        if loss.item() < 1e-3:
            break
    assert float((w.value ** 2).sum()) < 1e-3


def test_tape_replay_is_bitwise_deterministic():
    def trajectory():
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(8, 4)))
        w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        opt = Adam([w], lr=0.05)
        losses = []
        for _ in range(30):
            opt.zero_grad()
            with Tape() as t:
                z = ad.matmul(x, w)
                loss = ad.bce_with_logits(ad.matmul(z, ad.transpose(z)), np.eye(8))
            t.backward(loss)
            opt.step()
            losses.append(loss.item())
        return np.array(losses)

    assert np.array_equal(trajectory(), trajectory())
