import numpy as np
import pytest

from rfcnn.autograd import (
    Parameter,
    Tape,
    Tensor,
    add,
    conv2d,
    dropout,
    fill_missing_grads,
    is_grad_enabled,
    linear,
    maxpool2d,
    no_grad,
    relu,
    scale,
    sgd_step,
    softmax_cross_entropy,
    total,
)
from rfcnn.errors import DimensionError, NumericError, StateError


def test_tape_orders_nodes_in_reverse_execution():
    w = Parameter(np.array([1.0, 2.0]))
    a = scale(w, 2.0)
    b = relu(a)
    c = total(add(b, a))
    tape = Tape.from_output(c)
    seqs = [n._seq for n in tape.nodes]
    assert seqs == sorted(seqs, reverse=True)
    assert len(tape) == 4


def test_shared_subexpression_accumulates():
    w = Parameter(np.array([3.0]))
    a = scale(w, 2.0)
    total(add(a, a)).backward()
    assert w.grad[0] == 4.0


def test_backward_twice_accumulates_into_leaf():
    w = Parameter(np.array([1.0, -1.0]))
    total(scale(w, 3.0)).backward()
    total(scale(w, 3.0)).backward()
    np.testing.assert_array_equal(w.grad, [6.0, 6.0])


def test_nonscalar_backward_needs_grad():
    w = Parameter(np.ones(3))
    with pytest.raises(ValueError):
        scale(w, 2.0).backward()


def test_no_grad_records_nothing():
    w = Parameter(np.ones(2))
    with no_grad():
        assert not is_grad_enabled()
        out = scale(w, 2.0)
    assert is_grad_enabled()
    assert out._backward is None and not out.requires_grad


def test_non_finite_forward_raises():
    w = Parameter(np.array([1e308]))
    with np.errstate(over="ignore"), pytest.raises(NumericError):
        scale(w, 10.0)


def test_conv_output_side_follows_valid_formula():
    x = Tensor(np.zeros((3, 224, 224)))
    w = Parameter(np.zeros((2, 3, 3, 3)))
    b = Parameter(np.zeros(2))
    assert conv2d(x, w, b).shape == (2, 222, 222)
    assert conv2d(x, w, b, stride=2, padding=1).shape == (2, 112, 112)


def test_conv_matches_naive_loop(rng):
    x = rng.standard_normal((2, 3, 7, 6))
    w = rng.standard_normal((4, 3, 3, 2))
    b = rng.standard_normal(4)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b), stride=2).data
    ho, wo = (7 - 3) // 2 + 1, (6 - 2) // 2 + 1
    ref = np.zeros((2, 4, ho, wo))
    for n in range(2):
        for o in range(4):
            for i in range(ho):
                for j in range(wo):
                    ref[n, o, i, j] = (x[n, :, 2 * i:2 * i + 3, 2 * j:2 * j + 2] * w[o]).sum() + b[o]
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_conv_rejects_channel_mismatch():
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.zeros((2, 5, 5))), Tensor(np.zeros((1, 3, 3, 3))), Tensor(np.zeros(1)))


def test_maxpool_tie_goes_to_first_maximum():
    x = Parameter(np.ones((1, 2, 2)))
    total(maxpool2d(x, 2)).backward()
    np.testing.assert_array_equal(x.grad[0], [[1.0, 0.0], [0.0, 0.0]])


def test_maxpool_rejects_oversized_window():
    with pytest.raises(DimensionError):
        maxpool2d(Tensor(np.zeros((1, 2, 2))), 3)


def test_linear_shape_check():
    with pytest.raises(DimensionError):
        linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))), Tensor(np.zeros(5)))


def test_cross_entropy_of_uniform_logits_is_log_c():
    loss = softmax_cross_entropy(Tensor(np.zeros((4, 3))), [0, 1, 2, 0])
    assert loss.item() == pytest.approx(np.log(3.0), abs=1e-15)


def test_cross_entropy_label_range():
    with pytest.raises(ValueError):
        softmax_cross_entropy(Tensor(np.zeros((2, 2))), [0, 2])


def test_dropout_is_inverted_and_identity_at_eval(rng):
    x = Tensor(np.ones((200, 50)))
    assert dropout(x, 0.5, False, rng) is x
    y = dropout(x, 0.5, True, rng).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05
    with pytest.raises(ValueError):
        dropout(x, 1.0, True, rng)


def test_sgd_single_step():
    w = Parameter(np.array([1.0]))
    w.grad = np.array([1.0])
    sgd_step([w], lr=0.01, momentum=0.0, weight_decay=0.0)
    assert w.data[0] == pytest.approx(0.99, abs=1e-15)
    assert w.grad is None


def test_sgd_momentum_matches_unrolled_recurrence():
    w = Parameter(np.array([2.0]))
    lr, m, wd = 0.1, 0.9, 0.01
    g1, g2 = 0.5, -0.25
    w.grad = np.array([g1])
    sgd_step([w], lr, m, wd)
    w.grad = np.array([g2])
    sgd_step([w], lr, m, wd)
    v1 = g1 + wd * 2.0
    w1 = 2.0 - lr * v1
    v2 = m * v1 + g2 + wd * w1
    assert w.data[0] == pytest.approx(w1 - lr * v2, abs=1e-15)


def test_sgd_zero_grad_zero_decay_is_noop():
    w = Parameter(np.array([0.3, -0.7]))
    fill_missing_grads([w])
    sgd_step([w], 0.5, 0.9, 0.0)
    np.testing.assert_array_equal(w.data, [0.3, -0.7])


def test_sgd_missing_grad_is_state_error():
    with pytest.raises(StateError):
        sgd_step([Parameter(np.zeros(2), name="w")], 0.1, 0.9, 0.0)
