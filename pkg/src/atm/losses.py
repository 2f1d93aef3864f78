"""Training objectives: action-centric contrastive loss, answer cross-entropy,
shuffled-video confusion (entropy) and their combination for fine-tuning."""
from __future__ import annotations

import numpy as np

from .tensorcore import Tensor, entropy_from_logits, getitem, log_softmax, matmul, mean


def contrastive_from_similarity(sim: Tensor) -> Tensor:
    """InfoNCE over a ``(B, B)`` video-by-phrase similarity matrix.

    Row ``i``'s positive is column ``i``; every other column is a negative.
    Returns the mean over rows of ``-log softmax(sim[i])[i]``.
    """
    b = sim.shape[0]
    if sim.ndim != 2 or sim.shape[1] != b:
        raise ValueError(f"similarity matrix must be square, got {sim.shape}")
    if b < 2:
        raise ValueError("contrastive loss needs a batch of at least 2 pairs")
    idx = np.arange(b)
    return -mean(getitem(log_softmax(sim, axis=1), (idx, idx)))


def accl_loss(video: Tensor, phrases: Tensor) -> Tensor:
    """Contrastive loss pairing ``video[i]`` with ``phrases[i]``, in-batch negatives."""
    if video.shape != phrases.shape:
        raise ValueError(f"video {video.shape} and phrase {phrases.shape} batches differ")
    return contrastive_from_similarity(matmul(video, phrases.T))


def cross_entropy(logits: Tensor, gold) -> Tensor:
    """``-log softmax(logits)[gold]``; per-row values when ``logits`` is ``(B, A)``."""
    n = logits.shape[-1]
    gold_arr = np.asarray(gold, dtype=np.int64)
    if (gold_arr < 0).any() or (gold_arr >= n).any():
        raise IndexError(f"gold index {gold} out of range for {n} candidates")
    logp = log_softmax(logits, axis=-1)
    if logits.ndim == 1:
        return -getitem(logp, int(gold_arr))
    if gold_arr.shape != (logits.shape[0],):
        raise ValueError("need one gold index per row")
    return -getitem(logp, (np.arange(logits.shape[0]), gold_arr))


def confusion_loss(logits: Tensor) -> Tensor:
    """Entropy of the answer distribution predicted from a shuffled video."""
    return entropy_from_logits(logits, axis=-1)


def combined_objective(
    logits: Tensor,
    gold,
    sensitive,
    shuffled_logits: Tensor | None = None,
    cf_weight: float = 1.0,
) -> Tensor:
    """Fine-tuning loss for one batch.

    ``mean_{sensitive}(CE - cf_weight * H) + mean_{insensitive}(CE)``, where
    ``H`` is the entropy of ``shuffled_logits``, whose rows correspond, in
    order, to the sensitive samples. Either group may be empty.
    """
    sensitive = np.asarray(sensitive, dtype=bool)
    ce = cross_entropy(logits, gold)
    sens_idx = np.flatnonzero(sensitive)
    if sens_idx.size == 0:
        return mean(ce)
    if shuffled_logits is None or shuffled_logits.shape[0] != sens_idx.size:
        got = None if shuffled_logits is None else shuffled_logits.shape[0]
        raise ValueError(f"{sens_idx.size} sensitive samples need shuffled logits, got {got}")
    sens_term = mean(getitem(ce, sens_idx) - cf_weight * confusion_loss(shuffled_logits))
    insens_idx = np.flatnonzero(~sensitive)
    if insens_idx.size == 0:
        return sens_term
    return sens_term + mean(getitem(ce, insens_idx))
