"""Command-line entry point: ``atm <subcommand> ...``.

Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
Settings come from built-in defaults, then ``--config FILE.json``, then
``key=value`` overrides; the resolved settings are written next to the outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .data import (
    SynthConfig,
    generate_synthetic_dataset,
    load_dataset,
    load_question_manifest,
    save_dataset,
    split_dataset,
    write_question_manifest,
)
from .diagnostics import GradCheckSetup, objective_grad_checks
from .evaluation import CONDITIONS, EvalReport, delta_metric, emit_report, evaluate, load_report
from .experiment import build_model, derive_seed
from .model import load_checkpoint
from .qparse import TemporalKeywords, annotate
from .trainer import TrainConfig, finetune_videoqa, pretrain_accl

log = logging.getLogger("atm")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
CONFIG_NAME = "config.json"

SYNTH_DEFAULTS = {**asdict(SynthConfig()), "test_fraction": 0.25}
MODEL_DEFAULTS = {"d_model": 512, "heads": 8, "t_max": 16, "text_max_len": 64, "use_pos_embed": True, "answers": []}
_TRAIN_OWN = {"stage", "seed", "shuffle_seed", "from_scratch"}
TRAIN_DEFAULTS = {k: v for k, v in asdict(TrainConfig()).items() if k not in _TRAIN_OWN}
EVAL_DEFAULTS = {"batch_size": 64, "conditions": list(CONDITIONS)}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration


def parse_override(item: str) -> tuple[str, object]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"override {item!r} is not key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def resolve_config(defaults: dict, config_path: str | None, overrides: list[str]) -> dict:
    """Defaults, then the JSON file, then ``key=value`` pairs; unknown keys are errors."""
    resolved = dict(defaults)
    layers = []
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {config_path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValueError(f"config {config_path} must hold a JSON object")
        layers.append(loaded)
    layers.append(dict(parse_override(o) for o in overrides))
    for layer in layers:
        unknown = sorted(set(layer) - set(defaults))
        if unknown:
            raise ValueError(f"unknown config keys {unknown}; known: {sorted(defaults)}")
        resolved.update(layer)
    return resolved


def prepare_out_dir(path: Path, force: bool) -> Path:
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        if not force:
            raise ValueError(f"{path} already exists; pass --force to overwrite")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()
    path.mkdir(parents=True, exist_ok=True)
    return path


def echo_config(path: Path, command: str, seed: int | None, settings: dict, **paths) -> None:
    record = {"command": command, "seed": seed, "settings": settings}
    record.update({k: v if v is None or isinstance(v, bool) else str(v) for k, v in paths.items()})
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _pick(settings: dict, keys) -> dict:
    return {k: settings[k] for k in keys if k in settings}


def train_config(stage: str, settings: dict, seed: int, from_scratch: bool = False) -> TrainConfig:
    keys = {f.name for f in fields(TrainConfig)} - _TRAIN_OWN
    return TrainConfig(
        stage=stage,
        seed=derive_seed(seed, "batches"),
        shuffle_seed=derive_seed(seed, "shuffle"),
        from_scratch=from_scratch,
        **_pick(settings, keys),
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    settings = resolve_config(SYNTH_DEFAULTS, args.config, args.overrides)
    if args.videos is not None:
        settings["n_videos"] = args.videos
    test_fraction = float(settings.pop("test_fraction"))
    cfg = SynthConfig(**settings)
    out = prepare_out_dir(Path(args.out), args.force)
    synth = generate_synthetic_dataset(cfg, seed=args.seed)
    if test_fraction > 0:
        train, test = split_dataset(synth.dataset, test_fraction, seed=args.seed)
        save_dataset(train, out / "train")
        save_dataset(test, out / "test")
    else:
        save_dataset(synth.dataset, out / "train")
    (out / "meta.json").write_text(json.dumps(synth.meta(), indent=2, sort_keys=True) + "\n")
    echo_config(out / CONFIG_NAME, "synth", args.seed, {**settings, "test_fraction": test_fraction})
    print(f"wrote {len(synth.dataset.bundles)} videos, {len(synth.dataset.questions)} questions to {out}")
    return 0


def cmd_parse(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ValueError(f"{out} already exists; pass --force to overwrite")
    keywords = TemporalKeywords.from_file(args.keywords) if args.keywords else None
    records = annotate(load_question_manifest(args.manifest), keywords)
    write_question_manifest(records, out)
    echo_config(out.with_name(out.name + ".config.json"), "parse", None, {}, manifest=args.manifest, keywords=args.keywords)
    n_phrase = sum(r.action_phrase is not None for r in records)
    n_sens = sum(bool(r.temporal_sensitive) for r in records)
    print(f"parsed {len(records)} questions: {n_phrase} with an action phrase, {n_sens} temporal-sensitive")
    return 0


def _initial_params(args, dataset, settings, seed):
    if args.init:
        return load_checkpoint(args.init)
    model_kw = _pick(settings, MODEL_DEFAULTS)
    answers = tuple(model_kw.pop("answers"))
    return build_model(dataset, derive_seed(seed, "init"), answers=answers, **model_kw)


def cmd_pretrain(args) -> int:
    settings = resolve_config({**MODEL_DEFAULTS, **TRAIN_DEFAULTS}, args.config, args.overrides)
    dataset = load_dataset(args.data, threads=args.threads)
    params = _initial_params(args, dataset, settings, args.seed)
    cfg = train_config("accl", settings, args.seed)
    out = prepare_out_dir(Path(args.out), args.force)
    echo_config(out / CONFIG_NAME, "pretrain", args.seed, settings, data=args.data, init=args.init)
    _, train_log = pretrain_accl(dataset, params, cfg, out_dir=out)
    print(f"accl loss {train_log.records[0]['loss_accl']:.4f} -> {train_log.records[-1]['loss_accl']:.4f}; wrote {out}")
    return 0


def cmd_finetune(args) -> int:
    settings = resolve_config({**MODEL_DEFAULTS, **TRAIN_DEFAULTS}, args.config, args.overrides)
    if not args.init and not args.from_scratch:
        raise UsageError("finetune needs --init CHECKPOINT (or --from-scratch)")
    dataset = load_dataset(args.data, threads=args.threads)
    params = _initial_params(args, dataset, settings, args.seed)
    cfg = train_config("finetune", settings, args.seed, from_scratch=args.from_scratch)
    out = prepare_out_dir(Path(args.out), args.force)
    echo_config(
        out / CONFIG_NAME, "finetune", args.seed, settings, data=args.data, init=args.init,
        from_scratch=args.from_scratch,
    )
    _, train_log = finetune_videoqa(dataset, params, cfg, out_dir=out)
    print(f"loss {train_log.records[0]['loss']:.4f} -> {train_log.records[-1]['loss']:.4f}; wrote {out}")
    return 0


def cmd_eval(args) -> int:
    settings = resolve_config(EVAL_DEFAULTS, args.config, args.overrides)
    if args.condition:
        settings["conditions"] = args.condition
    bad = sorted(set(settings["conditions"]) - set(CONDITIONS))
    if bad:
        raise ValueError(f"unknown conditions {bad}; choose from {list(CONDITIONS)}")
    dataset = load_dataset(args.data, threads=args.threads)
    params = load_checkpoint(args.checkpoint)
    out = prepare_out_dir(Path(args.out), args.force)
    echo_config(out / CONFIG_NAME, "eval", args.seed, settings, data=args.data, checkpoint=args.checkpoint)
    report = EvalReport()
    for condition in CONDITIONS:
        if condition in settings["conditions"]:
            cell = evaluate(dataset, params, condition, seed=derive_seed(args.seed, "eval"),
                            batch_size=int(settings["batch_size"]), threads=args.threads)
            report.add(cell)
            print(f"{condition:>9}: acc_all {cell.accuracy():.4f}")
    emit_report(report, out / "report.json")
    deltas = report.deltas()
    if deltas is not None and deltas["all"] is not None:
        print(f"    delta: {deltas['all']:+.2f}")
    return 0


def cmd_gradcheck(args) -> int:
    settings = resolve_config(asdict(GradCheckSetup()), args.config, args.overrides)
    setup = GradCheckSetup.from_dict(settings)
    reports = objective_grad_checks(setup)
    worst = max(r.max_rel_error for r in reports.values())
    for name, r in reports.items():
        print(f"{name:>18}: max rel error {r.max_rel_error:.3e} over {r.n_checked} coords ({r.worst_param})")
    if args.out:
        out = prepare_out_dir(Path(args.out), args.force)
        echo_config(out / CONFIG_NAME, "gradcheck", setup.seed, settings)
        summary = {name: {"max_rel_error": r.max_rel_error, "n_checked": r.n_checked, "worst_param": r.worst_param}
                   for name, r in reports.items()}
        (out / "gradcheck.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    ok = worst < setup.tol
    print(f"{'PASS' if ok else 'FAIL'}: worst {worst:.3e} vs tolerance {setup.tol:g}")
    return 0 if ok else 2


def cmd_report_delta(args) -> int:
    full = load_report(args.full)
    middle = load_report(args.middle) if args.middle else full
    value = delta_metric(full, middle, args.qtype)
    print("null" if value is None else f"{value:+.2f}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="atm", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_, seed=True, config=True):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        if seed:
            p.add_argument("--seed", type=int, default=0, help="single source of all randomness (default 0)")
        if config:
            p.add_argument("--config", help="JSON file of settings")
            p.add_argument("overrides", nargs="*", metavar="key=value", help="setting overrides (JSON values)")
        return p

    p = add("synth", cmd_synth, "generate the synthetic temporality benchmark (keys: SynthConfig fields, test_fraction)")
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, help="number of videos (overrides n_videos)")
    p.add_argument("--force", action="store_true")

    p = add("parse", cmd_parse, "fill action_phrase and temporal_sensitive in a question manifest", seed=False, config=False)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keywords", help="temporal keyword file, one entry per line")
    p.add_argument("--force", action="store_true")

    for name, func, text in (
        ("pretrain", cmd_pretrain, "action-centric contrastive pretraining"),
        ("finetune", cmd_finetune, "question-answering fine-tuning with the confusion term"),
    ):
        p = add(name, func, f"{text} (keys: model and training settings)")
        p.add_argument("--data", required=True, help="dataset directory (features/ and questions.jsonl)")
        p.add_argument("--out", required=True)
        p.add_argument("--init", help="checkpoint to start from")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--force", action="store_true")
        if name == "finetune":
            p.add_argument("--from-scratch", action="store_true", help="allow untrained starting parameters")

    p = add("eval", cmd_eval, "accuracy under full / shuffled / middle conditions and delta")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--condition", action="append", choices=CONDITIONS, help="repeatable; default all")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--force", action="store_true")

    p = add("gradcheck", cmd_gradcheck, "finite-difference check of all objectives; exit 0 iff within tolerance", seed=False)
    p.add_argument("--out", help="optional directory for gradcheck.json")
    p.add_argument("--force", action="store_true")

    p = add("report-delta", cmd_report_delta, "delta between the full and middle cells of eval reports", seed=False, config=False)
    p.add_argument("full", help="report with the full condition")
    p.add_argument("middle", nargs="?", help="report with the middle condition (default: same file)")
    p.add_argument("--qtype", default="all", choices=("all", "causal", "temporal", "descriptive"))
    return parser


def _setup_logging() -> None:
    level = os.environ.get("ATM_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ValueError(f"ATM_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
