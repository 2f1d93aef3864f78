"""End-to-end synthetic temporality experiment: the full pipeline (contrastive
pretraining, then fine-tuning with the confusion term) against an ablation
trained with plain cross-entropy only.

Run as ``python -m atm.experiment [out_dir]``.
"""
from __future__ import annotations

import json
import logging
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import SynthConfig, VideoQADataset, generate_synthetic_dataset, split_dataset
from .evaluation import CONDITIONS, EvalReport, emit_report, evaluate
from .model import ModelConfig, ModelParams, Vocab, init_params
from .trainer import TrainConfig, TrainLog, finetune_videoqa, pretrain_accl

log = logging.getLogger(__name__)

MODEL_KEYS = ("d_model", "heads", "t_max", "text_max_len", "use_pos_embed")


def derive_seed(seed: int, stream: str) -> int:
    """Independent child seed for one named use of the run seed."""
    return int(np.random.default_rng([seed, zlib.crc32(stream.encode())]).integers(0, 2**31 - 1))


def dataset_vocab(*datasets: VideoQADataset) -> Vocab:
    texts = []
    for ds in datasets:
        for q in ds.questions:
            texts.append(q.question_text)
            texts.extend(q.candidates)
            if q.action_phrase:
                texts.append(q.action_phrase)
    return Vocab.build(texts)


def build_model(dataset: VideoQADataset, seed: int, answers: tuple[str, ...] = (), **model_kw) -> ModelParams:
    """Fresh parameters sized to ``dataset``'s streams, vocabulary from its texts."""
    vocab = dataset_vocab(dataset)
    if answers:
        model_kw["open_ended"] = True
        vocab = Vocab.build([*vocab.tokens[3:], *answers])
    config = ModelConfig(*dataset.stream_dims(), vocab.tokens, answers=answers, **model_kw)
    return init_params(config, seed=seed)


@dataclass(frozen=True)
class ExperimentConfig:
    n_videos: int = 512
    clips: int = 16
    dim: int = 64
    n_candidates: int = 5
    data_seed: int = 7
    test_fraction: float = 0.25
    seed: int = 0
    d_model: int = 32
    heads: int = 4
    batch_size: int = 32
    accl_epochs: int = 5
    accl_lr: float = 3e-3
    finetune_epochs: int = 60
    finetune_lr: float = 3e-3
    cf_weight: float = 1.0
    eval_seed: int = 0


@dataclass
class ArmResult:
    name: str
    report: EvalReport
    logs: dict[str, TrainLog] = field(default_factory=dict)
    seconds: float = 0.0

    def temporal(self, condition: str) -> float:
        return self.report.cells[condition].accuracy("temporal")

    @property
    def delta(self) -> float:
        return self.report.deltas()["all"]

    def summary(self) -> dict:
        return {
            "temporal": {c: self.temporal(c) for c in CONDITIONS},
            "acc_all": {c: self.report.cells[c].accuracy() for c in CONDITIONS},
            "delta": self.delta,
            "seconds": round(self.seconds, 1),
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    arms: dict[str, ArmResult]
    seconds: float

    @property
    def delta_gain(self) -> float:
        return self.arms["full"].delta - self.arms["ablation"].delta

    def summary(self) -> dict:
        return {
            "config": asdict(self.config),
            "arms": {name: arm.summary() for name, arm in self.arms.items()},
            "delta_gain": self.delta_gain,
            "seconds": round(self.seconds, 1),
        }


def synthetic_split(config: ExperimentConfig) -> tuple[VideoQADataset, VideoQADataset]:
    synth = SynthConfig(
        n_videos=config.n_videos,
        T=config.clips,
        d_object=config.dim,
        d_frame=config.dim,
        d_motion=config.dim,
        n_candidates=config.n_candidates,
    )
    data = generate_synthetic_dataset(synth, seed=config.data_seed).dataset
    return split_dataset(data, config.test_fraction, seed=config.data_seed)


def run_arm(
    name: str,
    train: VideoQADataset,
    test: VideoQADataset,
    config: ExperimentConfig,
    accl: bool,
    tsc: bool,
    out_dir: Path | None = None,
) -> ArmResult:
    started = time.perf_counter()
    arm_dir = None
    if out_dir is not None:
        arm_dir = out_dir / name
        for stage in ("accl", "finetune") if accl else ("finetune",):
            (arm_dir / stage).mkdir(parents=True, exist_ok=True)
    params = build_model(train, derive_seed(config.seed, "init"), d_model=config.d_model, heads=config.heads, t_max=config.clips)
    logs = {}
    train_seed, shuffle_seed = derive_seed(config.seed, "batches"), derive_seed(config.seed, "shuffle")
    if accl:
        accl_cfg = TrainConfig(
            stage="accl", batch_size=config.batch_size, max_epochs=config.accl_epochs, base_lr=config.accl_lr, seed=train_seed
        )
        params, logs["accl"] = pretrain_accl(train, params, accl_cfg, out_dir=arm_dir / "accl" if arm_dir else None)
    ft_cfg = TrainConfig(
        stage="finetune",
        batch_size=config.batch_size,
        max_epochs=config.finetune_epochs,
        base_lr=config.finetune_lr,
        seed=train_seed,
        shuffle_seed=shuffle_seed,
        tsc_enabled=tsc,
        cf_weight=config.cf_weight,
        from_scratch=not accl,
    )
    params, logs["finetune"] = finetune_videoqa(train, params, ft_cfg, out_dir=arm_dir / "finetune" if arm_dir else None)
    report = EvalReport()
    for condition in CONDITIONS:
        report.add(evaluate(test, params, condition, seed=config.eval_seed))
    if arm_dir is not None:
        emit_report(report, arm_dir / "report.json")
    arm = ArmResult(name, report, logs, time.perf_counter() - started)
    log.info("%s: %s", name, arm.summary())
    return arm


def run_experiment(config: ExperimentConfig = ExperimentConfig(), out_dir: str | Path | None = None) -> ExperimentResult:
    """Train both arms on the same split and evaluate them on the held-out videos."""
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else None
    train, test = synthetic_split(config)
    arms = {
        "full": run_arm("full", train, test, config, accl=True, tsc=True, out_dir=out),
        "ablation": run_arm("ablation", train, test, config, accl=False, tsc=False, out_dir=out),
    }
    result = ExperimentResult(config, arms, time.perf_counter() - started)
    if out is not None:
        (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    return result


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    res = run_experiment(out_dir=sys.argv[1] if len(sys.argv) > 1 else None)
    print(json.dumps(res.summary(), indent=2, sort_keys=True))
