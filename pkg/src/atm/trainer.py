"""Two-stage training: contrastive pretraining on action phrases, then
multiple-choice (or open-ended) fine-tuning with the shuffled-video confusion term."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .data import QuestionRecord, VideoQADataset, shuffle_clips, stack_bundles
from .losses import accl_loss, combined_objective, confusion_loss, cross_entropy
from .model import (
    ModelParams,
    encode_qa,
    encode_texts,
    encode_video_batch,
    encode_video_oe_batch,
    oe_logits,
    save_checkpoint,
    similarity_logits,
)
from .qparse import classify_temporal_sensitivity, extract_action_phrase
from .tensorcore import AdamState, Tensor, adam_step, getitem, mean

log = logging.getLogger(__name__)

LOG_NAME = "train_log.jsonl"
TIMING_NAME = "timing.jsonl"


class TrainError(RuntimeError):
    """Training cannot proceed with the given data or parameters."""


@dataclass(frozen=True)
class TrainConfig:
    stage: str = "finetune"
    batch_size: int = 64
    max_epochs: int = 10
    base_lr: float = 1e-5
    seed: int = 0
    shuffle_seed: int = 1
    tsc_enabled: bool = True
    cf_weight: float = 1.0
    cf_stop_text_grad: bool = False
    eval_every: int = 0
    from_scratch: bool = False

    def __post_init__(self):
        if self.stage not in ("accl", "finetune"):
            raise ValueError(f"stage must be 'accl' or 'finetune', got {self.stage!r}")
        if self.batch_size < (2 if self.stage == "accl" else 1):
            raise ValueError(f"batch_size={self.batch_size} too small for stage {self.stage}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.base_lr > 0:
            raise ValueError("base_lr must be positive")
        if self.cf_weight < 0:
            raise ValueError("cf_weight must be >= 0")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    def to_dict(self) -> dict:
        return asdict(self)


class TrainLog:
    """Per-epoch records. With ``path`` set each record is appended as one JSON line.

    Wall time goes to a sibling ``timing.jsonl`` so the main log stays
    byte-reproducible across runs.
    """

    def __init__(self, path: str | Path | None = None):
        self.records: list[dict] = []
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.write_text("")
            self.path.with_name(TIMING_NAME).write_text("")

    def append(self, record: dict, seconds: float | None = None) -> None:
        if self.records and record["epoch"] <= self.records[-1]["epoch"]:
            raise ValueError("epochs must be strictly increasing")
        self.records.append(record)
        if self.path is None:
            return
        with self.path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        if seconds is not None:
            with self.path.with_name(TIMING_NAME).open("a") as fh:
                fh.write(json.dumps({"epoch": record["epoch"], "seconds": round(seconds, 3)}) + "\n")

    def column(self, key: str) -> list:
        return [r[key] for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def make_batches(n: int, batch_size: int, seed: int, epoch: int, min_size: int = 1) -> Iterator[np.ndarray]:
    """Index batches over a seeded permutation keyed by ``(seed, epoch)``.

    The final partial batch is kept unless it is smaller than ``min_size``.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.random.default_rng([seed, epoch]).permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) >= min_size:
            yield idx


def _grads_by_name(params: ModelParams, leaves: dict[Tensor, np.ndarray]) -> dict[str, np.ndarray]:
    return {name: leaves[t] for name, t in params.tensors.items() if t in leaves}


def _uniform_t(bundles) -> None:
    ts = {b.T for b in bundles}
    if len(ts) != 1:
        raise TrainError(f"batch mixes clip counts {sorted(ts)}; videos in one dataset must share T")


def _mean_or_none(xs: list[float]) -> float | None:
    return float(np.mean(xs)) if xs else None


Callback = Callable[[int, ModelParams], dict | None]


def _end_epoch(
    epoch: int,
    params: ModelParams,
    config: TrainConfig,
    record: dict,
    train_log: TrainLog,
    started: float,
    out_dir: Path | None,
    on_eval: Callback | None,
) -> None:
    due = config.eval_every and (epoch + 1) % config.eval_every == 0
    if due and on_eval is not None:
        metrics = on_eval(epoch, params)
        if metrics:
            record["eval"] = metrics
    train_log.append(record, time.perf_counter() - started)
    if out_dir is not None and due and epoch + 1 < config.max_epochs:
        save_checkpoint(params, out_dir / f"epoch{epoch + 1:03d}.atmc")


# ---------------------------------------------------------------------------
# stage 1


def accl_pairs(dataset: VideoQADataset) -> tuple[list[tuple[str, str]], int]:
    """``(video_id, action_phrase)`` pairs and the number of questions without a phrase."""
    pairs, skipped = [], 0
    for q in dataset.questions:
        phrase = q.action_phrase if q.action_phrase is not None else extract_action_phrase(q.question_text)
        if phrase:
            pairs.append((q.video_id, phrase))
        else:
            skipped += 1
    return pairs, skipped


def pretrain_accl(
    dataset: VideoQADataset,
    params: ModelParams,
    config: TrainConfig,
    out_dir: str | Path | None = None,
    on_eval: Callback | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Align video vectors with the action phrases of their questions."""
    if config.stage != "accl":
        raise ValueError("pretrain_accl needs a config with stage='accl'")
    pairs, skipped = accl_pairs(dataset)
    if skipped:
        log.info("skipping %d questions without an action phrase", skipped)
    if len(pairs) < 2:
        raise TrainError(f"contrastive pretraining needs at least 2 (video, phrase) pairs, got {len(pairs)}")
    vocab = params.vocab
    phrase_ids = [vocab.encode(p) for _, p in pairs]
    out = Path(out_dir) if out_dir is not None else None
    train_log = TrainLog(out / LOG_NAME if out else None)
    state = AdamState(base_lr=config.base_lr, max_epochs=config.max_epochs)

    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        losses = []
        for idx in make_batches(len(pairs), config.batch_size, config.seed, epoch, min_size=2):
            bundles = [dataset.bundles[pairs[i][0]] for i in idx]
            _uniform_t(bundles)
            f_v = encode_video_batch(params, *stack_bundles(bundles))
            f_c = encode_texts(params, [phrase_ids[i] for i in idx])
            loss = accl_loss(f_v, f_c)
            grads = _grads_by_name(params, loss.backward())
            params = params.with_tensors(adam_step(state, params.tensors, grads, epoch), stage="accl")
            losses.append(float(loss.data))
        record = {
            "epoch": epoch,
            "stage": "accl",
            "lr": state.lr(epoch),
            "loss_accl": _mean_or_none(losses),
            "n_batches": len(losses),
            "n_pairs": len(pairs),
            "skipped_no_phrase": skipped,
        }
        _end_epoch(epoch, params, config, record, train_log, started, out, on_eval)
        log.info("accl epoch %d loss %.4f", epoch, record["loss_accl"] or float("nan"))

    params = params.with_tensors(params.tensors, stage="accl")
    if out is not None:
        save_checkpoint(params, out / "final.atmc")
    return params, train_log


# ---------------------------------------------------------------------------
# stage 2


def _sensitive(q: QuestionRecord) -> bool:
    if q.temporal_sensitive is not None:
        return q.temporal_sensitive
    return classify_temporal_sensitivity(q.question_text)


def _sample_seeds(shuffle_seed: int, epoch: int, n: int) -> np.ndarray:
    """One permutation seed per training sample, fresh every epoch."""
    return np.random.default_rng([shuffle_seed, epoch, 0x5C]).integers(0, 2**63 - 1, size=n)


def finetune_videoqa(
    dataset: VideoQADataset,
    params: ModelParams,
    config: TrainConfig,
    out_dir: str | Path | None = None,
    on_eval: Callback | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Answer-selection training; sensitive questions also pay the confusion term."""
    if config.stage != "finetune":
        raise ValueError("finetune_videoqa needs a config with stage='finetune'")
    if params.stage == "init" and not config.from_scratch:
        raise TrainError("refusing to fine-tune untrained parameters; pretrain first or set from_scratch")
    if not dataset.questions:
        raise TrainError("dataset has no questions")
    mcfg = params.config
    open_ended = mcfg.open_ended
    use_tsc = config.tsc_enabled and config.cf_weight > 0 and not open_ended
    vocab = params.vocab
    questions = dataset.questions
    sensitive = np.array([_sensitive(q) for q in questions])
    if open_ended:
        answer_index = {a: i for i, a in enumerate(mcfg.answers)}
        missing = sorted({q.gold for q in questions} - set(answer_index))
        if missing:
            raise TrainError(f"gold answers missing from the global answer list: {missing[:5]}")
        gold = np.array([answer_index[q.gold] for q in questions])
        q_ids = [vocab.encode(q.question_text) for q in questions]
        answer_ids = [vocab.encode(a) for a in mcfg.answers]
    else:
        gold = np.array([q.gold_index for q in questions])
        qa_ids = [[vocab.encode_pair(q.question_text, a) for a in q.candidates] for q in questions]

    out = Path(out_dir) if out_dir is not None else None
    train_log = TrainLog(out / LOG_NAME if out else None)
    state = AdamState(base_lr=config.base_lr, max_epochs=config.max_epochs)

    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        seeds = _sample_seeds(config.shuffle_seed, epoch, len(questions))
        totals, ces, ents = [], [], []
        skipped_t1 = 0
        for idx in make_batches(len(questions), config.batch_size, config.seed, epoch):
            bundles = [dataset.bundles[questions[i].video_id] for i in idx]
            _uniform_t(bundles)
            streams = stack_bundles(bundles)
            if open_ended:
                f_q = encode_texts(params, [q_ids[i] for i in idx])
                f_qv = encode_video_oe_batch(params, *streams, f_q)
                f_a = encode_texts(params, answer_ids)
                logits = oe_logits(f_qv, f_q, f_a)
                ce = cross_entropy(logits, gold[idx])
                loss = mean(ce)
                ces.append(float(loss.data))
            else:
                f_v = encode_video_batch(params, *streams)
                f_qa = encode_qa(params, [qa_ids[i] for i in idx])
                logits = similarity_logits(f_v, f_qa)
                sens = sensitive[idx].copy() if use_tsc else np.zeros(len(idx), dtype=bool)
                if use_tsc and bundles[0].T < 2:
                    skipped_t1 += int(sens.sum())
                    sens[:] = False
                shuffled_logits = None
                rows = np.flatnonzero(sens)
                if rows.size:
                    shuffled = [shuffle_clips(bundles[r], int(seeds[idx[r]]))[0] for r in rows]
                    f_v_shuf = encode_video_batch(params, *stack_bundles(shuffled))
                    f_qa_sens = getitem(f_qa, rows)
                    if config.cf_stop_text_grad:
                        f_qa_sens = Tensor(f_qa_sens.data)
                    shuffled_logits = similarity_logits(f_v_shuf, f_qa_sens)
                    ents.append(float(confusion_loss(shuffled_logits).data.mean()))
                loss = combined_objective(logits, gold[idx], sens, shuffled_logits, config.cf_weight)
                ces.append(float(cross_entropy(logits, gold[idx]).data.mean()))
            grads = _grads_by_name(params, loss.backward())
            params = params.with_tensors(adam_step(state, params.tensors, grads, epoch), stage="finetune")
            totals.append(float(loss.data))
        record = {
            "epoch": epoch,
            "stage": "finetune",
            "lr": state.lr(epoch),
            "loss": _mean_or_none(totals),
            "loss_ce": _mean_or_none(ces),
            "shuffled_entropy": _mean_or_none(ents),
            "n_batches": len(totals),
            "tsc": use_tsc,
            "cf_skipped_t1": skipped_t1,
        }
        _end_epoch(epoch, params, config, record, train_log, started, out, on_eval)
        log.info("finetune epoch %d loss %.4f", epoch, record["loss"])

    params = params.with_tensors(params.tensors, stage="finetune")
    if out is not None:
        save_checkpoint(params, out / "final.atmc")
    return params, train_log
