"""Temporal views of a feature bundle: clip shuffling and the middle-clip view."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atmf import FeatureBundle


@dataclass(frozen=True)
class ClipPermutation:
    """``order[i]`` is the original clip placed at position ``i``."""

    order: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"not a permutation of 0..{len(self.order) - 1}: {self.order}")

    def inverse(self) -> "ClipPermutation":
        return ClipPermutation(tuple(int(i) for i in np.argsort(self.order)))

    @property
    def is_identity(self) -> bool:
        return all(i == o for i, o in enumerate(self.order))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def draw_shuffle(t: int, seed) -> ClipPermutation:
    """Uniform draw over the ``t! - 1`` non-identity permutations."""
    if t < 2:
        raise ValueError(f"cannot shuffle a video with T={t} clips")
    rng = _rng(seed)
    while True:
        order = rng.permutation(t)
        if (order != np.arange(t)).any():
            return ClipPermutation(tuple(int(i) for i in order))


def shuffle_clips(bundle: FeatureBundle, seed) -> tuple[FeatureBundle, ClipPermutation]:
    """Apply one shared, uniformly drawn, non-identity permutation to all three streams."""
    perm = draw_shuffle(bundle.T, seed)
    return bundle.select(np.asarray(perm.order)), perm


def middle_clip_index(t: int) -> int:
    """Index of the clip covering the point 7/16 of the way through the video.

    16 clips -> index 6 (the 7th clip); 5 clips -> index 2; 1 clip -> 0.
    """
    if t < 1:
        raise ValueError("T must be >= 1")
    return -(-7 * t // 16) - 1


def middle_clip_view(bundle: FeatureBundle) -> FeatureBundle:
    i = middle_clip_index(bundle.T)
    return bundle.select(slice(i, i + 1))
