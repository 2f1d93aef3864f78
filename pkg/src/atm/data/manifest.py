"""Question manifests: one JSON object per line."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

QTYPES = ("causal", "temporal", "descriptive", "other")
_REQUIRED = ("question_id", "video_id", "question_text", "candidates", "gold_index")
_OPTIONAL = ("qtype", "action_phrase", "temporal_sensitive")


class ManifestError(ValueError):
    """Invalid manifest record; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    video_id: str
    question_text: str
    candidates: tuple[str, ...]
    gold_index: int
    qtype: str = "other"
    action_phrase: str | None = None
    temporal_sensitive: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if len(self.candidates) < 2:
            raise ValueError(f"{self.question_id}: need at least 2 candidates, got {len(self.candidates)}")
        if isinstance(self.gold_index, bool) or not isinstance(self.gold_index, int):
            raise ValueError(f"{self.question_id}: gold_index must be an integer")
        if not 0 <= self.gold_index < len(self.candidates):
            raise ValueError(
                f"{self.question_id}: gold_index {self.gold_index} out of range for {len(self.candidates)} candidates"
            )
        if self.qtype not in QTYPES:
            raise ValueError(f"{self.question_id}: unknown qtype {self.qtype!r}")
        if self.action_phrase is not None and self.action_phrase.lower() not in self.question_text.lower():
            raise ValueError(f"{self.question_id}: action_phrase {self.action_phrase!r} is not a substring of the question")

    @property
    def gold(self) -> str:
        return self.candidates[self.gold_index]

    def to_json(self) -> str:
        d = asdict(self)
        d["candidates"] = list(self.candidates)
        return json.dumps(d, ensure_ascii=False, sort_keys=True)


def parse_record(obj: dict, line: int | None = None) -> QuestionRecord:
    if not isinstance(obj, dict):
        raise ManifestError("record is not a JSON object", line)
    unknown = set(obj) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise ManifestError(f"unknown fields {sorted(unknown)}", line)
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise ManifestError(f"missing fields {missing}", line)
    if not isinstance(obj["candidates"], list) or not all(isinstance(c, str) for c in obj["candidates"]):
        raise ManifestError("candidates must be a list of strings", line)
    for key in ("question_id", "video_id", "question_text"):
        if not isinstance(obj[key], str):
            raise ManifestError(f"{key} must be a string", line)
    ts = obj.get("temporal_sensitive")
    if ts is not None and not isinstance(ts, bool):
        raise ManifestError("temporal_sensitive must be a boolean or null", line)
    try:
        return QuestionRecord(
            question_id=obj["question_id"],
            video_id=obj["video_id"],
            question_text=obj["question_text"],
            candidates=obj["candidates"],
            gold_index=obj["gold_index"],
            qtype=obj.get("qtype") or "other",
            action_phrase=obj.get("action_phrase"),
            temporal_sensitive=ts,
        )
    except ValueError as exc:
        raise ManifestError(str(exc), line) from None


def load_question_manifest(path) -> list[QuestionRecord]:
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", lineno) from None
            rec = parse_record(obj, lineno)
            if rec.question_id in seen:
                raise ManifestError(f"duplicate question_id {rec.question_id!r}", lineno)
            seen.add(rec.question_id)
            records.append(rec)
    return records


def write_question_manifest(records: Iterable[QuestionRecord], path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
