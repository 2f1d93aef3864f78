"""Finite-difference checks of every training objective through the full model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureBundle, shuffle_clips, stack_bundles
from .losses import accl_loss, combined_objective, confusion_loss, cross_entropy
from .model import ModelConfig, Vocab, encode_qa, encode_texts, encode_video_batch, init_params, similarity_logits
from .tensorcore import GradCheckReport, Tensor, grad_check, mean

_WORDS = "the man dog ball door opens jumps runs falls after before what happens nothing red".split()


@dataclass(frozen=True)
class GradCheckSetup:
    clips: int = 4
    d_model: int = 16
    heads: int = 2
    n_answers: int = 4
    batch: int = 4
    d_stream: int = 6
    seed: int = 0
    h: float = 1e-5
    tol: float = 1e-4
    max_coords: int = 48

    @classmethod
    def from_dict(cls, d: dict) -> "GradCheckSetup":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown gradcheck keys: {unknown}")
        return cls(**d)


def objective_grad_checks(setup: GradCheckSetup = GradCheckSetup()) -> dict[str, GradCheckReport]:
    """Grad-check accl_loss, cross_entropy, confusion_loss and the combined objective.

    Each loss is a function of all model weights on a random batch; the
    reports are keyed by loss name.
    """
    rng = np.random.default_rng(setup.seed)
    t, b, a, d = setup.clips, setup.batch, setup.n_answers, setup.d_stream

    def sentence(n):
        return " ".join(rng.choice(_WORDS, size=n))

    questions = [sentence(5) for _ in range(b)]
    answers = [[sentence(2) for _ in range(a)] for _ in range(b)]
    phrases = [sentence(2) for _ in range(b)]
    vocab = Vocab.build(_WORDS)
    config = ModelConfig(d, d, d, vocab.tokens, d_model=setup.d_model, heads=setup.heads, t_max=max(t, 2))
    params = init_params(config, seed=setup.seed)

    bundles = [FeatureBundle(f"v{i}", *(rng.normal(size=(t, d)) for _ in range(3))) for i in range(b)]
    streams = stack_bundles(bundles)
    gold = rng.integers(0, a, size=b)
    sensitive = np.arange(b) % 2 == 0
    sens_rows = np.flatnonzero(sensitive)
    if t > 1:
        shuffled = stack_bundles([shuffle_clips(bundles[r], setup.seed + int(r))[0] for r in sens_rows])
    else:
        shuffled = stack_bundles([bundles[r] for r in sens_rows])
    qa_ids = [[vocab.encode_pair(q, ans) for ans in row] for q, row in zip(questions, answers)]
    phrase_ids = [vocab.encode(p) for p in phrases]

    def model(tensors):
        return params.with_tensors(tensors)

    def logits(p):
        return similarity_logits(encode_video_batch(p, *streams), encode_qa(p, qa_ids))

    def shuffled_logits(p):
        f_qa = encode_qa(p, [qa_ids[r] for r in sens_rows])
        return similarity_logits(encode_video_batch(p, *shuffled), f_qa)

    objectives = {
        "accl_loss": lambda ts: accl_loss(encode_video_batch(model(ts), *streams), encode_texts(model(ts), phrase_ids)),
        "cross_entropy": lambda ts: mean(cross_entropy(logits(model(ts)), gold)),
        "confusion_loss": lambda ts: mean(confusion_loss(shuffled_logits(model(ts)))),
        "combined_objective": lambda ts: combined_objective(
            logits(model(ts)), gold, sensitive, shuffled_logits(model(ts))
        ),
    }
    leaves = {name: Tensor(t_.data, requires_grad=True, name=name) for name, t_ in params.tensors.items()}
    return {
        name: grad_check(f, leaves, h=setup.h, tol=setup.tol, max_coords=setup.max_coords, seed=setup.seed)
        for name, f in objectives.items()
    }
