"""Neural building blocks expressed over plain ``{name: Tensor}`` parameter maps."""
from __future__ import annotations

import numpy as np

from .functional import MASK_BIAS, attention
from .tensor import Tensor, canonical_sum, mul, reshape, relu, transpose


class ConfigError(ValueError):
    """Inconsistent model or layer configuration."""


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int, prefix: str) -> dict[str, Tensor]:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return {
        f"{prefix}.W": Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True, name=f"{prefix}.W"),
        f"{prefix}.b": Tensor(np.zeros(fan_out), requires_grad=True, name=f"{prefix}.b"),
    }


def linear(x: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    return x @ params[f"{prefix}.W"] + params[f"{prefix}.b"]


def mlp(x: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    """One hidden layer with ReLU."""
    return linear(relu(linear(x, params, f"{prefix}.fc1")), params, f"{prefix}.fc2")


def sinusoidal_table(n_pos: int, dim: int) -> np.ndarray:
    pos = np.arange(n_pos)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def init_msa(rng: np.random.Generator, d_model: int, heads: int, prefix: str) -> dict[str, Tensor]:
    if d_model % heads:
        raise ConfigError(f"d_model={d_model} is not divisible by heads={heads}")
    params: dict[str, Tensor] = {}
    for proj in ("q", "k", "v", "o"):
        params.update(init_linear(rng, d_model, d_model, f"{prefix}.{proj}"))
    return params


def split_heads(x: Tensor, heads: int) -> Tensor:
    b, t, d = x.shape
    return transpose(reshape(x, (b, t, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    b, h, t, dh = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (b, t, h * dh))


def multi_head_self_attention(
    x: Tensor,
    params: dict[str, Tensor],
    prefix: str,
    heads: int,
    pos_embed: Tensor | None = None,
    key_mask: np.ndarray | None = None,
    exact_order: bool = False,
) -> Tensor:
    """Self-attention over ``x`` of shape ``(T, d)`` or ``(B, T, d)``.

    ``pos_embed`` (``(>=T, d)``) is added to the input first. ``key_mask`` is a
    boolean ``(B, T)`` array marking valid positions.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1, *x.shape))
    b, t, d = x.shape
    if d % heads:
        raise ConfigError(f"d_model={d} is not divisible by heads={heads}")
    if pos_embed is not None:
        if pos_embed.shape[0] < t:
            raise ConfigError(f"position table covers {pos_embed.shape[0]} steps, input has {t}")
        x = x + (pos_embed if pos_embed.shape[0] == t else pos_embed[:t])
    q = split_heads(linear(x, params, f"{prefix}.q"), heads)
    k = split_heads(linear(x, params, f"{prefix}.k"), heads)
    v = split_heads(linear(x, params, f"{prefix}.v"), heads)
    bias = None
    if key_mask is not None:
        bias = np.where(key_mask, 0.0, MASK_BIAS)[:, None, None, :]
    out = linear(merge_heads(attention(q, k, v, bias, exact_order=exact_order)), params, f"{prefix}.o")
    if squeeze:
        out = reshape(out, out.shape[1:])
    return out


def mean_pool(x: Tensor, axis: int = -2, mask: np.ndarray | None = None) -> Tensor:
    """Order-independent mean over ``axis``; ``mask`` (same leading shape) selects rows."""
    if mask is None:
        return mul(canonical_sum(x, axis), 1.0 / x.shape[axis])
    m = mask.astype(np.float64)
    counts = m.sum(axis=-1, keepdims=True)
    return mul(canonical_sum(x * m[..., None], axis), 1.0 / counts)
