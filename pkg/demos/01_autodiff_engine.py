"""Tour of the tensor engine: forward ops, backward pass, gradient checking.

The library trains its networks with a small reverse-mode autodiff
engine over float64 numpy arrays. This script builds a few graphs by
hand and verifies the analytic gradients against finite differences.

Run: python3 demos/01_autodiff_engine.py
"""

import numpy as np

from mambatab import tensor as T
from mambatab.tensor import NumericsError, Tensor

print("=== scalars ===")
w = Tensor(5.0, requires_grad=True)
loss = (w - 3.0) * (w - 3.0)
loss.backward()
print(f"d/dw (w-3)^2 at w=5  ->  {w.grad}   (expected 4.0)")

print("\n=== a tiny network ===")
rng = np.random.default_rng(0)
x = Tensor(rng.uniform(-1, 1, size=(4, 3)))
W = Tensor(rng.uniform(-1, 1, size=(3, 2)), requires_grad=True)
b = Tensor(np.zeros(2), requires_grad=True)
out = T.silu(T.linear(x, W, b)).sum()
out.backward()
print(f"output            {out.item():+.6f}")
print(f"gradient shapes   W: {W.grad.shape}, b: {b.grad.shape}")

# Central finite differences reproduce the analytic gradient entry by entry.
eps = 1e-5
flat = W.data.reshape(-1)
numeric = np.zeros_like(flat)
for i in range(flat.size):
    orig = flat[i]
    flat[i] = orig + eps
    hi = T.silu(T.linear(x, W, b)).sum().item()
    flat[i] = orig - eps
    lo = T.silu(T.linear(x, W, b)).sum().item()
    flat[i] = orig
    numeric[i] = (hi - lo) / (2 * eps)
err = np.max(np.abs(numeric.reshape(W.shape) - W.grad))
print(f"finite-difference check: max abs deviation {err:.2e}")

print("\n=== the layers the model is made of ===")
u = Tensor(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1))
kernel = Tensor([[1.0, 1.0]])  # width-2 causal kernel
conv = T.causal_conv1d(u, kernel, T.zeros(1))
print(f"causal conv of [1,2,3] with kernel [1,1]: {conv.data.ravel()}  (past + present)")

xln = Tensor([[1.0, 3.0]])
ln = T.layer_norm(xln, Tensor(np.ones(2)), T.zeros(2))
print(f"layer norm of [1, 3]: {np.round(ln.data, 5).ravel()}")

print("\n=== numerics guardrail ===")
try:
    T.texp(Tensor(1e4))
except NumericsError as e:
    print(f"exp(1e4) raises immediately instead of propagating inf: {e}")
