"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor


class NonDeterminismError(RuntimeError):
    """Two forward passes at identical parameters disagreed."""


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str | None
    worst_index: tuple[int, ...] | None
    n_checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def relative_error(analytic: float, numeric: float, floor: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords: int = 512,
    seed: int = 0,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare ``f``'s analytic gradient against ``(f(θ+h) - f(θ-h)) / 2h``.

    At most ``max_coords`` coordinates per parameter tensor are probed, drawn
    with ``seed``. Relative error uses ``max(|a|, |n|, floor)`` as the
    denominator so gradients that are zero up to rounding do not blow up.
    """
    loss = f(params)
    again = f(params)
    if loss.data.tobytes() != again.data.tobytes():
        raise NonDeterminismError(f"forward passes disagree: {loss.item()!r} vs {again.item()!r}")
    grads = loss.backward()
    by_name = {name: grads.get(p) for name, p in params.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_param = worst_index = None
    n_checked = 0
    for name in sorted(params):
        p = params[name]
        if not p.requires_grad:
            continue
        analytic = by_name[name]
        if analytic is None:
            analytic = np.zeros_like(p.data)
        flat = np.arange(p.size)
        if p.size > max_coords:
            flat = np.sort(rng.choice(p.size, size=max_coords, replace=False))
        for k in flat:
            idx = np.unravel_index(int(k), p.shape)
            base = p.data.copy()
            base[idx] += h
            plus = f({**params, name: Tensor(base, requires_grad=True, name=name)}).item()
            base[idx] -= 2 * h
            minus = f({**params, name: Tensor(base, requires_grad=True, name=name)}).item()
            numeric = (plus - minus) / (2 * h)
            err = relative_error(float(analytic[idx]), numeric, floor)
            n_checked += 1
            if err > worst:
                worst, worst_param, worst_index = err, name, tuple(int(i) for i in idx)
    return GradCheckReport(worst, worst_param, worst_index, n_checked, tol)
