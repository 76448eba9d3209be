import math

import numpy as np
import pytest

from tsc_hybrid.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from tsc_hybrid.optim import Adam, MissingGradError
from tsc_hybrid.tensor import Tensor, default_dtype


def test_first_step_moves_by_lr_against_gradient_sign():
    p = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    opt = Adam([p], lr=0.01)
    p.grad = np.array([3.0, -0.2, 7.0], dtype=np.float32)
    start = p.data.copy()
    opt.step()
    np.testing.assert_allclose(p.data - start, -0.01 * np.sign([3.0, -0.2, 7.0]), rtol=1e-5)


def test_zero_grad_leaves_params_unchanged():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    for _ in range(3):
        p.grad = np.zeros(2, dtype=np.float32)
        opt.step()
    np.testing.assert_array_equal(p.data, [1.0, 2.0])
    assert opt.state.step == 3


def test_missing_grad_raises():
    p = Tensor(np.ones(2), requires_grad=True, name="w")
    with pytest.raises(MissingGradError, match="w"):
        Adam([p]).step()


def test_frozen_param_rejected():
    with pytest.raises(ValueError):
        Adam([Tensor(np.ones(2))])


def _scalar_adam_reference(w, grad_fn, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    return w


def test_quadratic_converges_and_matches_scalar_recurrence():
    reference = _scalar_adam_reference(0.0, lambda w: 2 * (w - 2.0), lr=0.1, steps=100)
    with default_dtype(np.float64):
        w = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam([w], lr=0.1)
        for _ in range(100):
            opt.zero_grad()
            ((w - 2.0) ** 2).sum().backward()
            opt.step()
    assert abs(w.data[0] - 2.0) < 0.1
    assert w.data[0] == pytest.approx(reference, rel=1e-12)


def test_moment_buffers_match_param_shapes():
    ps = [Tensor(np.ones((2, 3)), requires_grad=True), Tensor(np.ones(4), requires_grad=True)]
    opt = Adam(ps)
    for p in ps:
        p.grad = np.ones_like(p.data)
    opt.step()
    assert [m.shape for m in opt.state.m] == [(2, 3), (4,)]
    assert [v.shape for v in opt.state.v] == [(2, 3), (4,)]


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    params = {"enc.w": rng.normal(size=(3, 4, 2)).astype(np.float32), "b": np.arange(5, dtype=np.float32),
              "scalar": np.array(1.5, dtype=np.float32)}
    path = tmp_path / "ck.bin"
    save_checkpoint(path, params)
    raw = path.read_bytes()
    assert raw[:4] == b"TSC1"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 3
    loaded = load_checkpoint(path)
    assert list(loaded) == list(params)
    for k in params:
        np.testing.assert_array_equal(loaded[k], params[k])


def test_checkpoint_layout_bytes(tmp_path):
    path = tmp_path / "one.bin"
    save_checkpoint(path, {"ab": np.array([[1.0, 2.0]], dtype=np.float32)})
    expected = (
        b"TSC1" + (1).to_bytes(4, "little") + (1).to_bytes(4, "little")
        + (2).to_bytes(4, "little") + b"ab" + (2).to_bytes(4, "little")
        + (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
        + np.array([1.0, 2.0], dtype="<f4").tobytes()
    )
    assert path.read_bytes() == expected


def test_checkpoint_rejects_bad_magic_and_truncation(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    good = tmp_path / "good.bin"
    save_checkpoint(good, {"w": np.ones(10, dtype=np.float32)})
    bad.write_bytes(good.read_bytes()[:-3])
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
