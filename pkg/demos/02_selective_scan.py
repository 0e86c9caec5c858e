"""The state-space core: discretization, the scan recurrence, selectivity.

A continuous system dh/dt = a*h + b*u becomes the discrete recurrence
h_k = exp(delta*a) h_{k-1} + delta_b u_k under a zero-order hold. The
"selective" part: delta, b, and c are generated per token from the
input, so the layer decides at every step how much to remember.

Run: python3 demos/02_selective_scan.py
"""

import math

import numpy as np

from mambatab import ssm, tensor as T
from mambatab.tensor import Tensor

print("=== zero-order-hold discretization ===")
for a, b, delta in [(-2.0, 1.0, 0.5), (-0.1, 2.0, 1.0), (0.0, 2.0, 0.3)]:
    a_bar, b_bar = ssm.discretize(a, b, delta)
    print(f"a={a:+.1f} b={b:+.1f} delta={delta:.1f}  ->  "
          f"a_bar={a_bar:.6f}  b_bar={b_bar:.6f}")
print("the a=0 row uses the analytic limit b_bar = delta*b")

print("\n=== the recurrence, unrolled by hand ===")
# exp(delta*a) = 0.5 per step, unit input hold; state halves then absorbs 1.
delta = Tensor(np.ones((1, 5, 1)))
a = Tensor(np.full((1, 1), math.log(0.5)))
ones = Tensor(np.ones((1, 5, 1)))
out = ssm.selective_scan(ones, delta, ones, ones, a, T.zeros(1))
print(f"outputs:   {np.round(out.data.ravel(), 4)}")
print("limit of h_k = 0.5*h + 1 is 2:", np.round(out.data.ravel()[-1], 4))

print("\n=== content-dependent forgetting ===")
# Same input everywhere, but a large step size at one position makes the
# state decay hard there: perturbations before it are wiped out.
rng = np.random.default_rng(0)
L = 10
u = rng.uniform(-1, 1, size=(1, L, 1))
base_delta = np.full((1, L, 1), 0.05)
wipe_delta = base_delta.copy()
wipe_delta[0, 5, 0] = 8.0  # exp(8 * a) ~ 0 for a = -2

for name, dl in [("small steps", base_delta), ("big step at k=5", wipe_delta)]:
    bumped = u.copy()
    bumped[0, 0, 0] += 1.0
    coeffs = dict(b_t=Tensor(np.ones((1, L, 1))), c_t=Tensor(np.ones((1, L, 1))),
                  a=Tensor([[-2.0]]), d_skip=T.zeros(1))
    y0 = ssm.selective_scan(Tensor(u), Tensor(dl), **coeffs).data
    y1 = ssm.selective_scan(Tensor(bumped), Tensor(dl), **coeffs).data
    influence = abs(y1[0, -1, 0] - y0[0, -1, 0])
    print(f"{name:18s} influence of u_0 on x_L: {influence:.2e}")

print("\n=== the full gated block preserves shape ===")
params = ssm.init_mamba_block(embed_dim=8, expand=2, state_size=4, d_conv=4,
                              rng=np.random.default_rng(1))
x = Tensor(rng.normal(size=(3, 1, 8)))
y = ssm.mamba_block_forward(params, x)
n_params = sum(t.size for _, t in params.named_parameters())
print(f"block: {x.shape} -> {y.shape}, {n_params} learnable scalars")
print(f"closed-form count agrees: "
      f"{ssm.block_param_count(8, 2, 4, 4, ssm.dt_rank_for(8))}")
