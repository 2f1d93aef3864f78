"""Adam with an epoch-level cosine-annealed learning rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError, Tensor


def cosine_lr(base_lr: float, epoch: int, max_epochs: int) -> float:
    """``base_lr * (1 + cos(pi * e / E)) / 2``, clamped to 0 past the last epoch."""
    if epoch >= max_epochs:
        return 0.0
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max_epochs))


@dataclass
class AdamState:
    base_lr: float = 1e-5
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    max_epochs: int = 10
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr(self, epoch: int) -> float:
        return cosine_lr(self.base_lr, epoch, self.max_epochs)


def adam_step(
    state: AdamState,
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    epoch: int,
) -> dict[str, Tensor]:
    """One bias-corrected Adam update. Returns new leaf tensors; ``params`` is untouched.

    Parameters without an entry in ``grads`` are treated as having zero gradient.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {params[name].shape} for {name!r}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    b1, b2 = state.betas
    lr = state.lr(epoch)
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    out: dict[str, Tensor] = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        out[name] = Tensor(p.data - update, requires_grad=p.requires_grad, name=name)
    return out
