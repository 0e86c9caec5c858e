"""Shared oracles for the test suite.

Everything here is independent of the library code paths it checks:
finite-difference gradients, a per-element scan recurrence in plain
Python loops, O(m^2) pairwise AUROC counting, and a 50-digit reference
for the zero-order-hold closed form.
"""

from __future__ import annotations

import mpmath
import numpy as np


def mp_discretize(a: float, b: float, delta: float) -> tuple[float, float]:
    """High-precision (exp(delta*a), (exp(delta*a)-1)/a * b), limit at a=0."""
    with mpmath.workdps(50):
        a_mp, b_mp, d_mp = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(delta)
        a_bar = mpmath.e ** (d_mp * a_mp)
        if a == 0.0:
            b_bar = d_mp * b_mp
        else:
            b_bar = (mpmath.e ** (d_mp * a_mp) - 1) / a_mp * b_mp
        return float(a_bar), float(b_bar)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom))


def finite_difference_grad(loss_fn, param, eps: float = 1e-5) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``param``.

    ``loss_fn`` must recompute the scalar loss from ``param.data`` each call.
    """
    flat = param.data.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = loss_fn()
        flat[i] = orig - eps
        lo = loss_fn()
        flat[i] = orig
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad.reshape(param.data.shape)


def check_gradients(build_loss, params, eps: float = 1e-5, tol: float = 1e-4) -> float:
    """Assert analytic grads of ``build_loss()`` match central differences.

    ``build_loss`` constructs the loss tensor fresh from the current
    parameter data. Returns the worst relative error seen.
    """
    loss = build_loss()
    for p in params:
        p.zero_grad()
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = finite_difference_grad(lambda: build_loss().item(), p, eps=eps)
        err = relative_error(analytic, numeric)
        worst = max(worst, err)
        assert err < tol, f"gradient mismatch {err:.3e} on parameter of shape {p.shape}"
    return worst


def naive_selective_scan(u, delta, B_t, C_t, A, D_skip):
    """Per-element recurrence h_k = exp(delta*a) h_{k-1} + delta*b u_k, x_k = C h_k + D u_k.

    Plain Python loops over batch, time, channel, and state; the slow
    reference the batched implementation must match.
    """
    u = np.asarray(u, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    B_t = np.asarray(B_t, dtype=np.float64)
    C_t = np.asarray(C_t, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    D_skip = np.asarray(D_skip, dtype=np.float64)
    nb, nl, nd = u.shape
    nn = A.shape[1]
    out = np.zeros((nb, nl, nd))
    for b in range(nb):
        for d in range(nd):
            h = [0.0] * nn
            for k in range(nl):
                x = 0.0
                for n in range(nn):
                    h[n] = np.exp(delta[b, k, d] * A[d, n]) * h[n] \
                        + delta[b, k, d] * B_t[b, k, n] * u[b, k, d]
                    x += C_t[b, k, n] * h[n]
                out[b, k, d] = x + D_skip[d] * u[b, k, d]
    return out


def pairwise_auroc(scores, labels) -> float:
    """O(m^2) Mann-Whitney: concordant pairs count 1, ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))
