"""Independent reference implementations used to check the real ones.

Everything here is deliberately naive (nested loops, scalar arithmetic) and
shares no code with the package.
"""

import math

import numpy as np


def conv2d_naive(x, kernels, bias, stride, pad):
    """Six-nested-loop cross-correlation reference."""
    c_in, h, w = x.shape
    k, _, kh, kw = kernels.shape
    xp = np.zeros((c_in, h + 2 * pad, w + 2 * pad))
    xp[:, pad : pad + h, pad : pad + w] = x
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((k, h_out, w_out))
    for f in range(k):
        for i in range(h_out):
            for j in range(w_out):
                acc = bias[f]
                for c in range(c_in):
                    for di in range(kh):
                        for dj in range(kw):
                            acc += kernels[f, c, di, dj] * xp[c, i * stride + di, j * stride + dj]
                out[f, i, j] = acc
    return out


def maxpool_naive(x, k, stride):
    """Windowed-max reference (values only)."""
    c_in, h, w = x.shape
    h_out = (h - k) // stride + 1
    w_out = (w - k) // stride + 1
    out = np.zeros((c_in, h_out, w_out))
    for c in range(c_in):
        for i in range(h_out):
            for j in range(w_out):
                out[c, i, j] = x[c, i * stride : i * stride + k, j * stride : j * stride + k].max()
    return out


def numeric_grad(f, x, step=1e-6):
    """Central finite differences of a scalar function at array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp.flat[i] += step
        xm = x.copy()
        xm.flat[i] -= step
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def max_rel_err(analytic, numeric):
    """Worst elementwise relative error, floored so near-zero pairs compare sanely."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def exact_sum(values):
    """Order-independent exact float sum."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())
