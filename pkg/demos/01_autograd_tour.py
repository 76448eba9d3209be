"""A short walk through the tensor engine: build a graph, backprop, compare with finite differences."""
import numpy as np

from tsc_hybrid import ops
from tsc_hybrid.gradcheck import max_relative_error
from tsc_hybrid.tensor import Tensor, default_dtype

rng = np.random.default_rng(0)

# A scalar function of two leaves.  Every op records how to push gradients back.
a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
loss = ((a @ b).tanh() ** 2).mean()
loss.backward()
print("loss", loss.item())
print("dL/da\n", a.grad)

# Same-padded convolution followed by batchnorm and relu, the building block of the conv encoders.
with default_dtype(np.float64):
    x = Tensor(rng.normal(size=(2, 3, 16)), requires_grad=True)
    w = Tensor(rng.normal(size=(5, 3, 7)) * 0.3, requires_grad=True)
    gamma, beta = Tensor(np.ones(5), requires_grad=True), Tensor(np.zeros(5), requires_grad=True)

    def block():
        h = ops.conv1d(x, w, None, padding="same")
        h = ops.batchnorm1d(h, gamma, beta, np.zeros(5), np.ones(5), training=True)
        return (ops.relu(h) * np.linspace(-1, 1, 16)).sum()

    err = max_relative_error(block, [x, w, gamma, beta])
    print(f"conv/bn/relu block: max relative gradient error {err:.2e}")

# Causal attention: position t never sees positions after t.
q = Tensor(rng.normal(size=(1, 1, 6, 4)))
out = ops.attention(q, q, q, causal_mask=True)
changed = q.data.copy()
changed[..., 4:, :] += 10.0
out2 = ops.attention(Tensor(changed), Tensor(changed), Tensor(changed), causal_mask=True)
print("prefix unchanged after editing the last two positions:",
      np.allclose(out.data[..., :4, :], out2.data[..., :4, :]))
