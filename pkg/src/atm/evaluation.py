"""Accuracy by question type under full, shuffled and middle-clip views, and
the true-temporality gap between the full and middle-clip conditions."""
from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .data import FeatureBundle, QTYPES, QuestionRecord, VideoQADataset, middle_clip_view, shuffle_clips, stack_bundles
from .model import (
    ModelParams,
    encode_qa,
    encode_texts,
    encode_video_batch,
    encode_video_oe_batch,
    frozen,
    oe_logits,
    similarity_logits,
)
from .tensorcore import getitem

SCHEMA_VERSION = 1
CONDITIONS = ("full", "shuffled", "middle")
TYPED = ("causal", "temporal", "descriptive")
ACC_KEYS = {"causal": "acc_c", "temporal": "acc_t", "descriptive": "acc_d", "all": "acc_all"}


class EvalError(ValueError):
    """Reports cannot be compared or read."""


@dataclass
class EvalCell:
    """Results of one condition: correct/total counts per question type."""

    condition: str
    counts: dict[str, tuple[int, int]]
    question_ids: list[str]
    predictions: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        for qt in QTYPES:
            self.counts.setdefault(qt, (0, 0))
        self.question_ids = sorted(self.question_ids)

    def count(self, qtype: str = "all") -> tuple[int, int]:
        if qtype == "all":
            return tuple(int(sum(c[k] for c in self.counts.values())) for k in (0, 1))
        return self.counts[qtype]

    def fraction(self, qtype: str = "all") -> Fraction | None:
        correct, total = self.count(qtype)
        return Fraction(correct, total) if total else None

    def accuracy(self, qtype: str = "all") -> float | None:
        f = self.fraction(qtype)
        return None if f is None else float(f)

    def to_dict(self) -> dict:
        d = {key: self.accuracy(qt) for qt, key in ACC_KEYS.items()}
        d["counts"] = {qt: {"correct": c, "total": t} for qt, (c, t) in sorted(self.counts.items())}
        d["question_ids"] = list(self.question_ids)
        return d

    @classmethod
    def from_dict(cls, condition: str, d: dict) -> "EvalCell":
        counts = {qt: (int(v["correct"]), int(v["total"])) for qt, v in d["counts"].items()}
        return cls(condition, counts, list(d["question_ids"]))


@dataclass
class EvalReport:
    cells: dict[str, EvalCell] = field(default_factory=dict)

    def add(self, cell: EvalCell) -> None:
        self.cells[cell.condition] = cell

    def deltas(self) -> dict[str, float | None] | None:
        if "full" not in self.cells or "middle" not in self.cells:
            return None
        return {qt: delta_metric(self.cells["full"], self.cells["middle"], qt) for qt in ("all", *TYPED)}

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "conditions": {name: cell.to_dict() for name, cell in self.cells.items()},
            "delta": self.deltas(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise EvalError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls({name: EvalCell.from_dict(name, c) for name, c in d["conditions"].items()})


# ---------------------------------------------------------------------------
# evaluation


def question_seed(seed: int, question_id: str) -> int:
    """Permutation seed for one question, stable across runs and evaluation order."""
    return int(np.random.default_rng([seed, zlib.crc32(question_id.encode())]).integers(0, 2**63 - 1))


def condition_view(bundle: FeatureBundle, condition: str, seed: int, question_id: str) -> FeatureBundle:
    if condition == "full":
        return bundle
    if condition == "middle":
        return middle_clip_view(bundle)
    if condition == "shuffled":
        # a one-clip video has no other order
        return bundle if bundle.T < 2 else shuffle_clips(bundle, question_seed(seed, question_id))[0]
    raise ValueError(f"unknown condition {condition!r}")


def _predict_batch(params: ModelParams, questions: list[QuestionRecord], views: list[FeatureBundle]) -> list[int]:
    vocab = params.vocab
    streams = stack_bundles(views)
    if params.config.open_ended:
        answers = params.config.answers
        f_q = encode_texts(params, [vocab.encode(q.question_text) for q in questions])
        f_qv = encode_video_oe_batch(params, *streams, f_q)
        f_a = encode_texts(params, [vocab.encode(a) for a in answers])
        return [int(i) for i in np.argmax(oe_logits(f_qv, f_q, f_a).data, axis=1)]
    f_v = encode_video_batch(params, *streams)
    by_count: dict[int, list[int]] = {}
    for i, q in enumerate(questions):
        by_count.setdefault(len(q.candidates), []).append(i)
    chosen = [0] * len(questions)
    for rows in by_count.values():
        f_qa = encode_qa(params, [[vocab.encode_pair(questions[r].question_text, a) for a in questions[r].candidates] for r in rows])
        scores = similarity_logits(getitem(f_v, np.asarray(rows)), f_qa).data
        for r, c in zip(rows, np.argmax(scores, axis=1)):
            chosen[r] = int(c)
    return chosen


def evaluate(
    dataset: VideoQADataset,
    params: ModelParams,
    condition: str = "full",
    seed: int = 0,
    batch_size: int = 64,
    threads: int = 1,
) -> EvalCell:
    """Score every question under ``condition`` and tally exact matches per type."""
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    params = frozen(params)
    questions = dataset.questions
    views = [condition_view(dataset.bundles[q.video_id], condition, seed, q.question_id) for q in questions]
    # group by clip count so every batch stacks
    groups: dict[int, list[int]] = {}
    for i, v in enumerate(views):
        groups.setdefault(v.T, []).append(i)
    batches = [rows[s:s + batch_size] for _, rows in sorted(groups.items()) for s in range(0, len(rows), batch_size)]

    def run(rows):
        return rows, _predict_batch(params, [questions[i] for i in rows], [views[i] for i in rows])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]

    answers = params.config.answers
    counts = {qt: [0, 0] for qt in QTYPES}
    predictions = {}
    for rows, chosen in results:
        for i, c in zip(rows, chosen):
            q = questions[i]
            if params.config.open_ended:
                ok = answers[c] == q.gold
            else:
                ok = c == q.gold_index
            qt = q.qtype if q.qtype in counts else "other"
            counts[qt][0] += int(ok)
            counts[qt][1] += 1
            predictions[q.question_id] = c
    return EvalCell(condition, {k: tuple(v) for k, v in counts.items()}, [q.question_id for q in questions], predictions)


# ---------------------------------------------------------------------------
# delta


def _cell(report, condition: str) -> EvalCell:
    if isinstance(report, EvalCell):
        return report
    if isinstance(report, EvalReport):
        if condition not in report.cells:
            raise EvalError(f"report has no {condition!r} condition")
        return report.cells[condition]
    raise TypeError(f"expected EvalCell or EvalReport, got {type(report).__name__}")


def delta_metric(report_full, report_middle, qtype: str = "all") -> float | None:
    """Full-video minus middle-clip accuracy, in percentage points.

    Computed from the exact count ratios, so printable inputs give exact outputs.
    Returns ``None`` when either cell for ``qtype`` is empty.
    """
    full = _cell(report_full, "full")
    middle = _cell(report_middle, "middle")
    a, b = set(full.question_ids), set(middle.question_ids)
    if a != b:
        diff = sorted(a ^ b)
        raise EvalError(f"question sets differ in {len(diff)} ids: {diff[:10]}")
    fa, fb = full.fraction(qtype), middle.fraction(qtype)
    if fa is None or fb is None:
        return None
    return float(100 * (fa - fb))


# ---------------------------------------------------------------------------
# canonical JSON


def _canon(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        if not np.isfinite(obj):
            raise EvalError(f"non-finite value {obj} in report")
        return f"{obj:.4f}"
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_canon(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (str, int, float)) or x is None for x in obj):
            return "[" + ", ".join(_canon(x) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + _canon(x, indent + 1) for x in obj) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def report_json(report: EvalReport) -> str:
    return _canon(report.to_dict()) + "\n"


def emit_report(report: EvalReport, path) -> None:
    path = Path(path)
    try:
        path.write_text(report_json(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_report(path) -> EvalReport:
    path = Path(path)
    try:
        return EvalReport.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise EvalError(f"malformed report {path}: {exc}") from None
