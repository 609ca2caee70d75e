"""Layer primitives: forward/backward pairs over dense float64 arrays.

Tensors are plain C-contiguous ``numpy.float64`` arrays (shape + flat
row-major storage).  Every operation here is a pure function of its inputs;
nothing mutates its arguments, so values can be shared freely.

Conventions, fixed once and relied on by the tests:

* convolution is cross-correlation (no kernel flip), zero padding only,
  floor-division output sizing,
* the ReLU subgradient at exactly 0 is 0,
* max-pool ties route gradient to the first element of the window in
  row-major order,
* score index 0 is benign, index 1 is porn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .labels import label_index


class ScorePair(NamedTuple):
    """Normalized two-class confidences; benign + porn == 1."""

    benign: float
    porn: float


@dataclass
class LayerGrad:
    """Gradients produced by one layer's backward pass.

    ``param_grads`` is empty for parameterless layers; each gradient has the
    shape of the value it differentiates.
    """

    input_grad: np.ndarray
    param_grads: dict[str, np.ndarray] = field(default_factory=dict)


def tensor(values, shape=None) -> np.ndarray:
    """Materialize a finite float64 tensor, optionally reshaped."""
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if shape is not None:
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains NaN or Inf")
    return arr


# ---------------------------------------------------------------------------
# convolution


def _conv_out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _check_conv_args(input, kernels, stride, pad):
    if input.ndim != 3:
        raise ValueError(f"conv2d input must be [C,H,W], got shape {tuple(input.shape)}")
    if kernels.ndim != 4:
        raise ValueError(f"conv2d kernels must be [K,C,kh,kw], got shape {tuple(kernels.shape)}")
    if kernels.shape[1] != input.shape[0]:
        raise ValueError(
            f"channel mismatch: input shape {tuple(input.shape)} has {input.shape[0]} "
            f"channels but kernels shape {tuple(kernels.shape)} expect {kernels.shape[1]}"
        )
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if pad < 0:
        raise ValueError(f"pad must be nonnegative, got {pad}")
    _, h, w = input.shape
    _, _, kh, kw = kernels.shape
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ValueError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}"
        )


def conv2d_forward(
    input: np.ndarray,
    kernels: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """Cross-correlate [C,H,W] with [K,C,kh,kw] kernels; returns [K,H',W']."""
    _check_conv_args(input, kernels, stride, pad)
    k, _, kh, kw = kernels.shape
    if bias.shape != (k,):
        raise ValueError(f"bias shape {tuple(bias.shape)} does not match {k} kernels")
    _, h, w = input.shape
    h_out = _conv_out_size(h, kh, stride, pad)
    w_out = _conv_out_size(w, kw, stride, pad)

    x = np.pad(input, ((0, 0), (pad, pad), (pad, pad))) if pad else input
    out = np.empty((k, h_out, w_out))
    out[:] = bias[:, None, None]
    # Accumulate one kernel offset at a time; each step is a (K,C)x(C,HW) product.
    for di in range(kh):
        rows = slice(di, di + (h_out - 1) * stride + 1, stride)
        for dj in range(kw):
            cols = slice(dj, dj + (w_out - 1) * stride + 1, stride)
            out += np.tensordot(kernels[:, :, di, dj], x[:, rows, cols], axes=([1], [0]))
    return out


def conv2d_backward(
    input: np.ndarray,
    kernels: np.ndarray,
    stride: int,
    pad: int,
    upstream_grad: np.ndarray,
) -> LayerGrad:
    """Gradients of conv2d_forward w.r.t. input, kernels and bias."""
    _check_conv_args(input, kernels, stride, pad)
    k, c, kh, kw = kernels.shape
    _, h, w = input.shape
    h_out = _conv_out_size(h, kh, stride, pad)
    w_out = _conv_out_size(w, kw, stride, pad)
    if upstream_grad.shape != (k, h_out, w_out):
        raise ValueError(
            f"upstream shape {tuple(upstream_grad.shape)} does not match "
            f"conv output shape {(k, h_out, w_out)}"
        )

    x = np.pad(input, ((0, 0), (pad, pad), (pad, pad))) if pad else input
    kernel_grad = np.empty_like(kernels)
    input_grad_padded = np.zeros_like(x)
    for di in range(kh):
        rows = slice(di, di + (h_out - 1) * stride + 1, stride)
        for dj in range(kw):
            cols = slice(dj, dj + (w_out - 1) * stride + 1, stride)
            patch = x[:, rows, cols]
            kernel_grad[:, :, di, dj] = np.tensordot(
                upstream_grad, patch, axes=([1, 2], [1, 2])
            )
            input_grad_padded[:, rows, cols] += np.tensordot(
                kernels[:, :, di, dj], upstream_grad, axes=([0], [0])
            )
    input_grad = input_grad_padded[:, pad : pad + h, pad : pad + w] if pad else input_grad_padded
    bias_grad = upstream_grad.sum(axis=(1, 2))
    return LayerGrad(input_grad, {"kernels": kernel_grad, "bias": bias_grad})


# ---------------------------------------------------------------------------
# activation


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is 0.
    return np.where(x > 0.0, upstream, 0.0)


# ---------------------------------------------------------------------------
# max pooling


def maxpool_forward(input: np.ndarray, k: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-window maximum over [C,H,W]; returns (output, argmax flat indices).

    The indices point into the flattened input and always name the first
    maximum of each window in row-major order, so backward routing is
    deterministic under ties.
    """
    if k < 1 or stride < 1:
        raise ValueError(f"pool size and stride must be positive, got k={k} stride={stride}")
    if input.ndim != 3:
        raise ValueError(f"maxpool input must be [C,H,W], got shape {tuple(input.shape)}")
    c, h, w = input.shape
    if k > h or k > w:
        raise ValueError(f"pool window {k} exceeds input {h}x{w}")
    h_out = (h - k) // stride + 1
    w_out = (w - k) // stride + 1

    # Candidates stacked in row-major window order; argmax then picks the
    # first occurrence on ties.
    cand = np.empty((k * k, c, h_out, w_out))
    for di in range(k):
        rows = slice(di, di + (h_out - 1) * stride + 1, stride)
        for dj in range(k):
            cols = slice(dj, dj + (w_out - 1) * stride + 1, stride)
            cand[di * k + dj] = input[:, rows, cols]
    winner = cand.argmax(axis=0)
    out = np.take_along_axis(cand, winner[None], axis=0)[0]

    di, dj = winner // k, winner % k
    row = np.arange(h_out)[None, :, None] * stride + di
    col = np.arange(w_out)[None, None, :] * stride + dj
    chan = np.arange(c)[:, None, None]
    indices = (chan * h + row) * w + col
    return out, indices


def maxpool_backward(
    indices: np.ndarray, upstream: np.ndarray, input_shape: tuple[int, int, int]
) -> np.ndarray:
    """Route each upstream element to its stored argmax position."""
    if indices.shape != upstream.shape:
        raise ValueError(
            f"indices shape {tuple(indices.shape)} does not match upstream {tuple(upstream.shape)}"
        )
    grad = np.zeros(int(np.prod(input_shape)))
    np.add.at(grad, indices.ravel(), upstream.ravel())
    return grad.reshape(input_shape)


# ---------------------------------------------------------------------------
# fully connected


def fc_forward(input: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y = W x + b for input [N], weights [M,N], bias [M]."""
    if input.ndim != 1 or weights.ndim != 2 or weights.shape[1] != input.shape[0]:
        raise ValueError(
            f"fc dimension mismatch: input {tuple(input.shape)}, weights {tuple(weights.shape)}"
        )
    if bias.shape != (weights.shape[0],):
        raise ValueError(f"fc bias shape {tuple(bias.shape)} does not match {weights.shape[0]} outputs")
    return weights @ input + bias


def fc_backward(input: np.ndarray, weights: np.ndarray, upstream: np.ndarray) -> LayerGrad:
    if upstream.shape != (weights.shape[0],):
        raise ValueError(
            f"fc upstream shape {tuple(upstream.shape)} does not match {weights.shape[0]} outputs"
        )
    return LayerGrad(
        weights.T @ upstream,
        {"weights": np.outer(upstream, input), "bias": upstream.copy()},
    )


# ---------------------------------------------------------------------------
# softmax head and loss


def softmax2(logits: np.ndarray) -> ScorePair:
    """2-way softmax with max subtraction; output sums to 1."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (2,):
        raise ValueError(f"softmax2 expects exactly 2 logits, got shape {tuple(logits.shape)}")
    if np.isnan(logits).any():
        raise ValueError("softmax2 rejects NaN logits")
    shifted = logits - logits.max()
    e = np.exp(shifted)
    s = e / e.sum()
    return ScorePair(float(s[0]), float(s[1]))


def cross_entropy_loss(scores: ScorePair, label: str) -> float:
    """-log of the true-class score, clamped below at 1e-12."""
    p = max(scores[label_index(label)], 1e-12)
    return -float(np.log(p))


def cross_entropy_logit_grad(scores: ScorePair, label: str) -> np.ndarray:
    """Combined softmax + cross-entropy gradient w.r.t. the logits."""
    grad = np.array([scores.benign, scores.porn])
    grad[label_index(label)] -= 1.0
    return grad


# ---------------------------------------------------------------------------
# optimizer


def sgd_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    learning_rate: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
    velocities: dict[str, np.ndarray] | None = None,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """One momentum-SGD update: v <- m*v - lr*(g + wd*w); w <- w + v.

    Pure: returns fresh (params, velocities) dicts.  Parameters without a
    gradient entry are carried over untouched.
    """
    if learning_rate <= 0:
        raise ValueError(f"learning rate must be positive, got {learning_rate}")
    velocities = velocities or {}
    new_params: dict[str, np.ndarray] = {}
    new_velocities: dict[str, np.ndarray] = {}
    for name, w in params.items():
        g = grads.get(name)
        if g is None:
            new_params[name] = w
            continue
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {w.shape}")
        v = velocities.get(name)
        v = np.zeros_like(w) if v is None else v
        v = momentum * v - learning_rate * (g + weight_decay * w)
        new_velocities[name] = v
        new_params[name] = w + v
    return new_params, new_velocities
