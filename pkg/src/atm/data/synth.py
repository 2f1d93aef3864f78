"""Synthetic temporality benchmark.

Each video carries two action "event" signatures in its motion stream, placed
in disjoint clip ranges in random order, and one static scene signature in
every clip of its frame stream. Questions per video:

* temporal: ``what happens {after|before} <event>?`` for each of the two
  events and both relations (``temporal_questions`` of the four are kept). The
  gold answer is the other event or ``nothing`` depending on event order, so
  the same two events appear in every temporal question of a video and only
  their order separates the answers;
* descriptive: ``where is the video taken?`` -- answered by the scene.

The object stream shows one object in every clip. With probability
``static_cue`` (default 1) it is the object used by the first event, so
appearance alone reveals the order; otherwise it is drawn at random. Clip
shuffling and the middle-clip view both preserve this cue, which makes it a
shortcut a model can learn instead of reading event order.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..qparse import classify_temporal_sensitivity
from .atmf import FeatureBundle
from .dataset import VideoQADataset
from .manifest import QuestionRecord

EVENT_NAMES = (
    "raising her hand",
    "moving for a while",
    "opening the door",
    "jumping over the fence",
    "throwing the ball",
    "picking up the cup",
    "waving at the camera",
    "sitting on the chair",
)
NOTHING = "nothing"
SCENE_NAMES = (
    "kitchen", "park", "beach", "office", "garden", "street", "classroom", "forest", "library",
)
DESCRIPTIVE_QUESTION = "where is the video taken?"


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_videos: int = 512
    T: int = 16
    d_object: int = 64
    d_frame: int = 64
    d_motion: int = 64
    n_candidates: int = 5
    # norm of each signature as a fraction of sqrt(D)
    signature_scale: float = 0.125
    noise_std: float = 0.05
    temporal_questions: int = 4
    static_cue: float = 1.0
    min_event_len: int = 3
    max_event_len: int = 5
    id_prefix: str = "vid"

    def validate(self) -> None:
        if self.n_videos < 1:
            raise SynthConfigError("n_videos must be >= 1")
        if self.d_motion < len(EVENT_NAMES):
            raise SynthConfigError(
                f"d_motion={self.d_motion} cannot hold {len(EVENT_NAMES)} orthogonal event signatures"
            )
        if self.d_frame < len(SCENE_NAMES):
            raise SynthConfigError(f"d_frame={self.d_frame} cannot hold {len(SCENE_NAMES)} orthogonal scene signatures")
        if self.d_object < len(EVENT_NAMES):
            raise SynthConfigError(
                f"d_object={self.d_object} cannot hold {len(EVENT_NAMES)} orthogonal object signatures"
            )
        if not 0.0 <= self.static_cue <= 1.0:
            raise SynthConfigError("static_cue must be in [0, 1]")
        if not 1 <= self.min_event_len <= self.max_event_len:
            raise SynthConfigError("need 1 <= min_event_len <= max_event_len")
        if 2 * self.max_event_len > self.T:
            raise SynthConfigError(f"T={self.T} too short for two events of length {self.max_event_len}")
        if not 3 <= self.n_candidates <= len(EVENT_NAMES):
            raise SynthConfigError(f"n_candidates must be in [3, {len(EVENT_NAMES)}]")
        if not 1 <= self.temporal_questions <= 4:
            raise SynthConfigError("temporal_questions must be in [1, 4]")


@dataclass
class SyntheticDataset:
    dataset: VideoQADataset
    event_signatures: np.ndarray  # (n_events, d_motion), rows orthogonal
    scene_signatures: np.ndarray  # (n_scenes, d_frame)
    config: SynthConfig
    event_names: tuple[str, ...] = EVENT_NAMES
    scene_names: tuple[str, ...] = SCENE_NAMES
    layouts: dict[str, dict] = field(default_factory=dict)

    def meta(self) -> dict:
        return {
            "config": asdict(self.config),
            "event_names": list(self.event_names),
            "scene_names": list(self.scene_names),
            "nothing_answer": NOTHING,
        }


def orthogonal_signatures(rng: np.random.Generator, n: int, dim: int, norm: float) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(dim, n)))
    return q.T * norm


def _f32(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(np.float64)


def temporal_gold(relation: str, named_is_first: bool) -> bool:
    """True if the other event answers ``what happens <relation> <named>?``."""
    return (relation == "after") == named_is_first


def generate_synthetic_dataset(config: SynthConfig | None = None, seed: int = 0) -> SyntheticDataset:
    cfg = config or SynthConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    n_events = len(EVENT_NAMES)
    ev_sig = _f32(orthogonal_signatures(rng, n_events, cfg.d_motion, cfg.signature_scale * np.sqrt(cfg.d_motion)))
    sc_sig = _f32(orthogonal_signatures(rng, len(SCENE_NAMES), cfg.d_frame, cfg.signature_scale * np.sqrt(cfg.d_frame)))
    ob_sig = _f32(orthogonal_signatures(rng, n_events, cfg.d_object, cfg.signature_scale * np.sqrt(cfg.d_object)))
    bundles: dict[str, FeatureBundle] = {}
    questions: list[QuestionRecord] = []
    layouts: dict[str, dict] = {}
    width = max(4, len(str(cfg.n_videos - 1)))
    for n in range(cfg.n_videos):
        vid = f"{cfg.id_prefix}{n:0{width}d}"
        first, second = (int(e) for e in rng.choice(n_events, size=2, replace=False))
        len1, len2 = (int(x) for x in rng.integers(cfg.min_event_len, cfg.max_event_len + 1, size=2))
        start1 = int(rng.integers(0, cfg.T - len1 - len2 + 1))
        start2 = int(rng.integers(start1 + len1, cfg.T - len2 + 1))

        scene = int(rng.integers(len(SCENE_NAMES)))
        obj = first if rng.random() < cfg.static_cue else int(rng.integers(n_events))
        f_m = rng.normal(scale=cfg.noise_std, size=(cfg.T, cfg.d_motion))
        f_m[start1:start1 + len1] += ev_sig[first]
        f_m[start2:start2 + len2] += ev_sig[second]
        f_r = rng.normal(scale=cfg.noise_std, size=(cfg.T, cfg.d_frame)) + sc_sig[scene]
        f_o = rng.normal(scale=cfg.noise_std, size=(cfg.T, cfg.d_object)) + ob_sig[obj]
        bundles[vid] = FeatureBundle(vid, _f32(f_o), _f32(f_r), _f32(f_m))

        combos = [(nf, rel) for nf in (True, False) for rel in ("after", "before")]
        pool = [e for e in range(n_events) if e not in (first, second)]
        for k in rng.permutation(4)[: cfg.temporal_questions]:
            named_is_first, relation = combos[k]
            named, other = (first, second) if named_is_first else (second, first)
            gold = EVENT_NAMES[other] if temporal_gold(relation, named_is_first) else NOTHING
            distract = [EVENT_NAMES[e] for e in rng.choice(pool, size=cfg.n_candidates - 2, replace=False)]
            cands = [EVENT_NAMES[other], NOTHING, *distract]
            cands = [cands[i] for i in rng.permutation(len(cands))]
            phrase = EVENT_NAMES[named]
            qtext = f"what happens {relation} {phrase}?"
            questions.append(
                QuestionRecord(
                    question_id=f"{vid}_t{k}",
                    video_id=vid,
                    question_text=qtext,
                    candidates=cands,
                    gold_index=cands.index(gold),
                    qtype="temporal",
                    action_phrase=phrase,
                    temporal_sensitive=classify_temporal_sensitivity(qtext),
                )
            )
        others = [s for s in range(len(SCENE_NAMES)) if s != scene]
        scene_cands = [scene] + [int(s) for s in rng.choice(others, size=cfg.n_candidates - 1, replace=False)]
        scene_cands = [scene_cands[i] for i in rng.permutation(len(scene_cands))]
        questions.append(
            QuestionRecord(
                question_id=f"{vid}_d",
                video_id=vid,
                question_text=DESCRIPTIVE_QUESTION,
                candidates=[SCENE_NAMES[s] for s in scene_cands],
                gold_index=scene_cands.index(scene),
                qtype="descriptive",
                action_phrase=None,
                temporal_sensitive=classify_temporal_sensitivity(DESCRIPTIVE_QUESTION),
            )
        )
        layouts[vid] = {
            "events": [first, second],
            "ranges": [[start1, start1 + len1], [start2, start2 + len2]],
            "scene": scene,
            "object": obj,
        }
    return SyntheticDataset(VideoQADataset(bundles, questions), ev_sig, sc_sig, cfg, layouts=layouts)


def split_dataset(ds: VideoQADataset, test_fraction: float, seed: int = 0) -> tuple[VideoQADataset, VideoQADataset]:
    """Split by video so no video contributes questions to both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    vids = sorted(ds.bundles)
    n_test = max(1, int(round(test_fraction * len(vids))))
    if n_test >= len(vids):
        raise ValueError(f"cannot split {len(vids)} videos with test_fraction={test_fraction}")
    perm = np.random.default_rng(seed).permutation(len(vids))
    test_ids = {vids[i] for i in perm[:n_test]}

    def part(keep) -> VideoQADataset:
        return VideoQADataset(
            {v: b for v, b in ds.bundles.items() if keep(v)},
            [q for q in ds.questions if keep(q.video_id)],
        )

    return part(lambda v: v not in test_ids), part(lambda v: v in test_ids)
