"""Fused differentiable kernels: softmax family and scaled dot-product attention."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, ordered_sum

# Additive bias for masked attention keys. Large enough that exp() underflows
# to exactly 0, small enough to stay finite.
MASK_BIAS = -1e30


def _sorted_sum(x: np.ndarray, axis: int = -1) -> np.ndarray:
    moved = np.sort(np.moveaxis(x, axis, -1), axis=-1)
    return np.expand_dims(ordered_sum(moved), axis)


def _softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    return z / _sorted_sum(z, axis)


def softmax(x, axis: int = -1) -> Tensor:
    """Max-shifted softmax; the normaliser is summed in sorted order."""
    x = as_tensor(x)
    p = _softmax_np(x.data, axis)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return Tensor._result(p, (x,), backward, "softmax")


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(_sorted_sum(np.exp(shifted), axis))
    out = shifted - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(out, (x,), backward, "log_softmax")


def entropy_from_logits(x, axis: int = -1) -> Tensor:
    """Shannon entropy (nats) of softmax(x) along ``axis``."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    logp = shifted - np.log(_sorted_sum(np.exp(shifted), axis))
    p = np.exp(logp)
    h = -(p * logp).sum(axis=axis)

    def backward(g):
        g = np.expand_dims(g, axis)
        # dH/dx_j = -p_j (log p_j + H)
        return (-g * p * (logp + np.expand_dims(h, axis)),)

    return Tensor._result(h, (x,), backward, "entropy")


def attention(q: Tensor, k: Tensor, v: Tensor, key_bias: np.ndarray | None = None,
              exact_order: bool = False) -> Tensor:
    """Scaled dot-product attention over the last two axes of ``(..., T, dh)`` inputs.

    ``key_bias`` is a constant additive term broadcast against the
    ``(..., T_q, T_k)`` logits (use ``MASK_BIAS`` to drop a key).

    With ``exact_order`` every reduction over the key axis is performed on
    sorted addends, which makes the result bitwise equivariant under any
    joint permutation of the sequence positions.
    """
    qd, kd, vd = q.data, k.data, v.data
    dh = qd.shape[-1]
    scale = 1.0 / np.sqrt(dh)
    if exact_order:
        logits = ordered_sum(qd[..., :, None, :] * kd[..., None, :, :]) * scale
    else:
        logits = np.matmul(qd, np.swapaxes(kd, -1, -2)) * scale
    if key_bias is not None:
        logits = logits + key_bias
    p = _softmax_np(logits, -1)
    if exact_order:
        terms = p[..., :, None, :] * np.swapaxes(vd, -1, -2)[..., None, :, :]
        out = ordered_sum(np.sort(terms, axis=-1))
    else:
        out = np.matmul(p, vd)

    def backward(g):
        gp = np.matmul(g, np.swapaxes(vd, -1, -2))
        gv = np.matmul(np.swapaxes(p, -1, -2), g)
        gl = p * (gp - (gp * p).sum(-1, keepdims=True)) * scale
        gq = np.matmul(gl, kd)
        gk = np.matmul(np.swapaxes(gl, -1, -2), qd)
        return gq, gk, gv

    return Tensor._result(out, (q, k, v), backward, "attention")


def normalize_rows(x, axis: int = -1) -> Tensor:
    """``x / ||x||`` along ``axis``; zero vectors map to zero."""
    x = as_tensor(x)
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    safe = np.where(norm > 0, norm, 1.0)
    y = np.where(norm > 0, x.data / safe, 0.0)

    def backward(g):
        proj = (g * y).sum(axis=axis, keepdims=True)
        return (np.where(norm > 0, (g - y * proj) / safe, 0.0),)

    return Tensor._result(y, (x,), backward, "normalize_rows")
