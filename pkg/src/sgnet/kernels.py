"""Hot numeric kernels in two interchangeable flavors.

Every kernel has a pure-numpy implementation and a numba @njit twin compiled
from explicit loops. The active set is chosen at import time: numba when it
imports cleanly, unless the environment variable SGNET_NUMBA is set to
"0"/"false"/"off". Both flavors are kept importable (IMPLEMENTATIONS) so the
equivalence tests and benchmarks/bench_kernels.py can compare them directly.

Matrix products are deliberately absent: BLAS via numpy already wins there.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import erf as _erf

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _numba_requested() -> bool:
    return os.environ.get("SGNET_NUMBA", "1").strip().lower() not in ("0", "false", "off")


try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


# ---------------------------------------------------------------- numpy ----

def gelu_fwd_np(x):
    """Exact-erf GeLU: x * Phi(x)."""
    return x * 0.5 * (1.0 + _erf(x / _SQRT2))


def gelu_bwd_np(x, gy):
    """d/dx [x*Phi(x)] = Phi(x) + x*phi(x)."""
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    cdf = 0.5 * (1.0 + _erf(x / _SQRT2))
    return gy * (cdf + x * phi)


def softmax_rows_fwd_np(z):
    """Row softmax of z; -inf entries come out as exact zeros.

    Callers place -inf at masked positions; every row must keep at least
    one finite entry.
    """
    zmax = np.max(z, axis=1, keepdims=True)
    e = np.exp(z - zmax)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_rows_bwd_np(p, gy):
    dot = np.sum(p * gy, axis=1, keepdims=True)
    return p * (gy - dot)


def layer_norm_fwd_np(x, gain, bias, eps):
    """Row-wise normalization; returns (y, xhat, istd) for the backward pass."""
    mean = np.mean(x, axis=1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=1, keepdims=True)
    istd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * istd
    return xhat * gain + bias, xhat, istd[:, 0]


def layer_norm_bwd_np(xhat, istd, gain, gy):
    d = xhat.shape[1]
    ggain = np.sum(gy * xhat, axis=0)
    gbias = np.sum(gy, axis=0)
    gh = gy * gain
    gx = istd[:, None] * (
        gh
        - np.mean(gh, axis=1, keepdims=True)
        - xhat * np.mean(gh * xhat, axis=1, keepdims=True)
    )
    assert gx.shape[1] == d
    return gx, ggain, gbias


def adam_step_np(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """One decoupled-weight-decay Adam update, in place on p/m/v.

    bc1, bc2 are the bias-correction factors 1-beta^t for the current step.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / bc1
    vhat = v / bc2
    p -= lr * (mhat / (np.sqrt(vhat) + eps) + weight_decay * p)


def embed_bwd_np(gy, ids, gtable):
    """Scatter-add row gradients back into the embedding table, in place."""
    np.add.at(gtable, ids, gy)


# ---------------------------------------------------------------- numba ----

if HAVE_NUMBA:

    @njit(cache=True)
    def gelu_fwd_nb(x):
        out = np.empty_like(x)
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                v = x[i, j]
                out[i, j] = v * 0.5 * (1.0 + math.erf(v / _SQRT2))
        return out

    @njit(cache=True)
    def gelu_bwd_nb(x, gy):
        out = np.empty_like(x)
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                v = x[i, j]
                cdf = 0.5 * (1.0 + math.erf(v / _SQRT2))
                phi = _INV_SQRT_2PI * math.exp(-0.5 * v * v)
                out[i, j] = gy[i, j] * (cdf + v * phi)
        return out

    @njit(cache=True)
    def softmax_rows_fwd_nb(z):
        out = np.empty_like(z)
        for i in range(z.shape[0]):
            zmax = -np.inf
            for j in range(z.shape[1]):
                if z[i, j] > zmax:
                    zmax = z[i, j]
            total = 0.0
            for j in range(z.shape[1]):
                e = math.exp(z[i, j] - zmax)
                out[i, j] = e
                total += e
            for j in range(z.shape[1]):
                out[i, j] /= total
        return out

    @njit(cache=True)
    def softmax_rows_bwd_nb(p, gy):
        out = np.empty_like(p)
        for i in range(p.shape[0]):
            dot = 0.0
            for j in range(p.shape[1]):
                dot += p[i, j] * gy[i, j]
            for j in range(p.shape[1]):
                out[i, j] = p[i, j] * (gy[i, j] - dot)
        return out

    @njit(cache=True)
    def layer_norm_fwd_nb(x, gain, bias, eps):
        n, d = x.shape
        y = np.empty_like(x)
        xhat = np.empty_like(x)
        istd = np.empty(n, dtype=x.dtype)
        for i in range(n):
            mean = 0.0
            for j in range(d):
                mean += x[i, j]
            mean /= d
            var = 0.0
            for j in range(d):
                diff = x[i, j] - mean
                var += diff * diff
            var /= d
            s = 1.0 / math.sqrt(var + eps)
            istd[i] = s
            for j in range(d):
                h = (x[i, j] - mean) * s
                xhat[i, j] = h
                y[i, j] = h * gain[j] + bias[j]
        return y, xhat, istd

    @njit(cache=True)
    def layer_norm_bwd_nb(xhat, istd, gain, gy):
        n, d = xhat.shape
        gx = np.empty_like(xhat)
        ggain = np.zeros(d, dtype=xhat.dtype)
        gbias = np.zeros(d, dtype=xhat.dtype)
        for i in range(n):
            m1 = 0.0
            m2 = 0.0
            for j in range(d):
                gh = gy[i, j] * gain[j]
                m1 += gh
                m2 += gh * xhat[i, j]
                ggain[j] += gy[i, j] * xhat[i, j]
                gbias[j] += gy[i, j]
            m1 /= d
            m2 /= d
            for j in range(d):
                gh = gy[i, j] * gain[j]
                gx[i, j] = istd[i] * (gh - m1 - xhat[i, j] * m2)
        return gx, ggain, gbias

    @njit(cache=True)
    def adam_step_nb(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
        for i in range(p.shape[0]):
            for j in range(p.shape[1]):
                gij = g[i, j]
                m[i, j] = beta1 * m[i, j] + (1.0 - beta1) * gij
                v[i, j] = beta2 * v[i, j] + (1.0 - beta2) * gij * gij
                mhat = m[i, j] / bc1
                vhat = v[i, j] / bc2
                p[i, j] -= lr * (mhat / (math.sqrt(vhat) + eps) + weight_decay * p[i, j])

    @njit(cache=True)
    def embed_bwd_nb(gy, ids, gtable):
        for r in range(ids.shape[0]):
            row = ids[r]
            for j in range(gy.shape[1]):
                gtable[row, j] += gy[r, j]


IMPLEMENTATIONS = {
    "numpy": {
        "gelu_fwd": gelu_fwd_np,
        "gelu_bwd": gelu_bwd_np,
        "softmax_rows_fwd": softmax_rows_fwd_np,
        "softmax_rows_bwd": softmax_rows_bwd_np,
        "layer_norm_fwd": layer_norm_fwd_np,
        "layer_norm_bwd": layer_norm_bwd_np,
        "adam_step": adam_step_np,
        "embed_bwd": embed_bwd_np,
    }
}
if HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "gelu_fwd": gelu_fwd_nb,
        "gelu_bwd": gelu_bwd_nb,
        "softmax_rows_fwd": softmax_rows_fwd_nb,
        "softmax_rows_bwd": softmax_rows_bwd_nb,
        "layer_norm_fwd": layer_norm_fwd_nb,
        "layer_norm_bwd": layer_norm_bwd_nb,
        "adam_step": adam_step_nb,
        "embed_bwd": embed_bwd_nb,
    }

ACTIVE = "numba" if USE_NUMBA else "numpy"
_active = IMPLEMENTATIONS[ACTIVE]

gelu_fwd = _active["gelu_fwd"]
gelu_bwd = _active["gelu_bwd"]
softmax_rows_fwd = _active["softmax_rows_fwd"]
softmax_rows_bwd = _active["softmax_rows_bwd"]
layer_norm_fwd = _active["layer_norm_fwd"]
layer_norm_bwd = _active["layer_norm_bwd"]
adam_step = _active["adam_step"]
embed_bwd = _active["embed_bwd"]


def warmup() -> None:
    """Force-compile the active kernel set on tiny inputs (no-op for numpy)."""
    for dtype in (np.float32, np.float64):
        x = np.ones((2, 3), dtype=dtype)
        g = np.full((2, 3), 0.5, dtype=dtype)
        vec = np.ones(3, dtype=dtype)
        gelu_bwd(x, gelu_fwd(x))
        p = softmax_rows_fwd(x)
        softmax_rows_bwd(p, g)
        _, xhat, istd = layer_norm_fwd(x, vec, np.zeros(3, dtype=dtype), 1e-5)
        layer_norm_bwd(xhat, istd, vec, g)
        adam_step(x.copy(), g, np.zeros_like(x), np.zeros_like(x),
                  1e-3, 0.9, 0.999, 1e-8, 0.0, 0.1, 0.001)
        embed_bwd(g, np.array([0, 1], dtype=np.int64), np.zeros((4, 3), dtype=dtype))
