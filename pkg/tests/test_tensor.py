import numpy as np
import pytest

from tsc_hybrid.gradcheck import max_relative_error
from tsc_hybrid.tensor import ShapeError, Tensor, concat, default_dtype, get_default_dtype, matmul, no_grad


def test_default_dtype_is_float32_and_switchable():
    assert Tensor([1.0]).dtype == np.float32
    with default_dtype(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert get_default_dtype() is np.float32


def test_shape_and_size_agree():
    t = Tensor(np.zeros((2, 3, 4)))
    assert t.shape == (2, 3, 4)
    assert int(np.prod(t.shape)) == t.size


def test_matmul_identity():
    b = Tensor(np.random.default_rng(0).normal(size=(3, 3)))
    np.testing.assert_array_equal(matmul(Tensor(np.eye(3)), b).data, b.data)


def test_matmul_hand_computed():
    out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[1.0], [1.0]])
    np.testing.assert_array_equal(out.data, [[3.0], [7.0]])


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_matmul_grad_matches_finite_differences():
    rng = np.random.default_rng(1)
    with default_dtype(np.float64):
        a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        assert max_relative_error(lambda: (a @ b).sum(), [a, b]) < 1e-4


def test_batched_matmul_grad():
    rng = np.random.default_rng(2)
    with default_dtype(np.float64):
        a = Tensor(rng.normal(size=(2, 3, 4, 5)), requires_grad=True)
        b = Tensor(rng.normal(size=(5, 2)), requires_grad=True)
        assert max_relative_error(lambda: ((a @ b) ** 2).sum(), [a, b]) < 1e-4


def test_square_grad():
    x = Tensor(3.0, requires_grad=True)
    (x * x).backward()
    assert x.grad == pytest.approx(6.0)


def test_shared_subexpression_accumulates():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    (a.sum() + a.sum()).backward()
    np.testing.assert_array_equal(a.grad, np.full((2, 3), 2.0))


def test_dag_grad_is_sum_of_paths():
    rng = np.random.default_rng(3)
    with default_dtype(np.float64):
        x = Tensor(rng.normal(size=4), requires_grad=True)
        y = x * 2.0
        z = y.exp() + y * y + x
        z.sum().backward()
        expected = 2.0 * np.exp(2 * x.data) + 8.0 * x.data + 1.0
        np.testing.assert_allclose(x.grad, expected, rtol=1e-12)


def test_backward_requires_scalar():
    with pytest.raises(ShapeError):
        Tensor(np.ones(3), requires_grad=True).exp().backward()


def test_non_grad_tensor_never_gets_grad():
    a = Tensor(np.ones(3), requires_grad=True)
    c = Tensor(np.ones(3))
    (a * c).sum().backward()
    assert c.grad is None
    assert a.grad is not None


def test_intermediates_get_grad_buffers():
    a = Tensor(np.ones(3), requires_grad=True)
    mid = a * 2.0
    (mid * mid).sum().backward()
    assert mid.grad is not None and mid.grad.shape == mid.shape


def test_no_grad_records_nothing():
    a = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        b = a * 2.0
    assert not b.requires_grad


@pytest.mark.parametrize(
    "fn",
    [
        lambda a, b: a + b,
        lambda a, b: a - b,
        lambda a, b: a * b,
        lambda a, b: a / (b * b + 1.0),
        lambda a, b: (a * b).tanh(),
        lambda a, b: (a * a + 1.0).log() + (b * 0.1).exp(),
        lambda a, b: (a * a + 1.0).sqrt() * b,
        lambda a, b: (a ** 3) - b,
        lambda a, b: (a.reshape(3, 2).transpose() @ b.reshape(3, 2)).swapaxes(0, 1),
        lambda a, b: a[1:, ::2] * b[:, 0:1].mean(axis=0, keepdims=True),
        lambda a, b: concat([a, b * 2.0], axis=0),
    ],
)
def test_elementwise_and_shape_op_grads(fn):
    rng = np.random.default_rng(4)
    with default_dtype(np.float64):
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        w = rng.normal(size=fn(a, b).shape)
        assert max_relative_error(lambda: (fn(a, b) * w).sum(), [a, b]) < 1e-4


def test_broadcast_bias_grad():
    rng = np.random.default_rng(5)
    with default_dtype(np.float64):
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3,)), requires_grad=True)
        w = rng.normal(size=(4, 3))
        assert max_relative_error(lambda: ((x + b) * w).sum(), [x, b]) < 1e-4


def test_fancy_index_accumulates_repeats():
    a = Tensor(np.arange(4.0), requires_grad=True)
    a[np.array([0, 0, 2])].sum().backward()
    np.testing.assert_array_equal(a.grad, [2.0, 0.0, 1.0, 0.0])


def test_deterministic_ops():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(8, 8)).astype(np.float32)
    r1 = (Tensor(x) @ Tensor(x)).tanh().data
    r2 = (Tensor(x) @ Tensor(x)).tanh().data
    assert r1.tobytes() == r2.tobytes()
