"""A directory of ATMF bundles plus a question manifest.

Layout::

    <root>/questions.jsonl
    <root>/features/<video_id>.atmf
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atmf import FeatureBundle, load_feature_bundle, save_feature_bundle
from .manifest import QuestionRecord, load_question_manifest, write_question_manifest

MANIFEST_NAME = "questions.jsonl"
FEATURE_DIR = "features"


@dataclass
class VideoQADataset:
    bundles: dict[str, FeatureBundle]
    questions: list[QuestionRecord]

    def __post_init__(self):
        missing = sorted({q.video_id for q in self.questions} - set(self.bundles))
        if missing:
            raise ValueError(f"questions reference unknown videos: {missing[:5]}")

    def __len__(self) -> int:
        return len(self.questions)

    def stream_dims(self) -> tuple[int, int, int]:
        b = next(iter(self.bundles.values()))
        return b.f_o.shape[1], b.f_r.shape[1], b.f_m.shape[1]


def stack_bundles(bundles: list[FeatureBundle]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch same-length bundles into three ``(B, T, D)`` arrays."""
    return tuple(np.stack([b.streams()[k] for b in bundles]) for k in range(3))


def save_dataset(ds: VideoQADataset, root) -> None:
    root = Path(root)
    (root / FEATURE_DIR).mkdir(parents=True, exist_ok=True)
    for vid in sorted(ds.bundles):
        save_feature_bundle(ds.bundles[vid], root / FEATURE_DIR / f"{vid}.atmf")
    write_question_manifest(ds.questions, root / MANIFEST_NAME)


def load_dataset(root, manifest: str | Path | None = None, threads: int = 1) -> VideoQADataset:
    root = Path(root)
    questions = load_question_manifest(manifest or root / MANIFEST_NAME)
    ids = sorted({q.video_id for q in questions})
    paths = [root / FEATURE_DIR / f"{vid}.atmf" for vid in ids]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            loaded = list(pool.map(load_feature_bundle, paths))
    else:
        loaded = [load_feature_bundle(p) for p in paths]
    return VideoQADataset(dict(zip(ids, loaded)), questions)
