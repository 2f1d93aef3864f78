import json
from pathlib import Path

import pytest

from atm.cli import main, resolve_config
from atm.data import load_question_manifest, write_question_manifest
from atm.data.manifest import QuestionRecord

SMALL_SYNTH = ["T=8", "d_object=16", "d_frame=16", "d_motion=16", "max_event_len=3"]
SMALL_MODEL = {"d_model": 16, "heads": 2, "t_max": 8, "batch_size": 16, "max_epochs": 2, "base_lr": 0.003}


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def small_json(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL_MODEL))
    return str(path)


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--out", str(out), "--videos", "24", "--seed", "7", *SMALL_SYNTH]) == 0
    return out


def test_synth_is_deterministic(tmp_path, synth_dir):
    again = tmp_path / "again"
    assert main(["synth", "--out", str(again), "--videos", "24", "--seed", "7", *SMALL_SYNTH]) == 0
    assert tree_bytes(synth_dir) == tree_bytes(again)
    echoed = json.loads((synth_dir / "config.json").read_text())
    assert echoed["seed"] == 7 and echoed["settings"]["n_videos"] == 24
    assert (synth_dir / "train" / "questions.jsonl").exists() and (synth_dir / "test" / "features").is_dir()


def test_output_is_not_overwritten_without_force(synth_dir, capsys):
    args = ["synth", "--out", str(synth_dir), "--videos", "24", "--seed", "8", *SMALL_SYNTH]
    assert main(args) == 1
    assert "--force" in capsys.readouterr().err
    assert main([*args, "--force"]) == 0
    assert json.loads((synth_dir / "config.json").read_text())["seed"] == 8


def test_parse_fills_every_line(tmp_path):
    src = tmp_path / "q.jsonl"
    write_question_manifest(
        [
            QuestionRecord("q1", "v", "what happens to the train after moving for a while near the end?", ("a", "b"), 0),
            QuestionRecord("q2", "v", "How many people are involved in the video?", ("a", "b"), 1),
        ],
        src,
    )
    out = tmp_path / "q.parsed.jsonl"
    assert main(["parse", "--manifest", str(src), "--out", str(out)]) == 0
    recs = load_question_manifest(out)
    assert [r.action_phrase for r in recs] == ["moving for a while", "involved in the video"]
    assert [r.temporal_sensitive for r in recs] == [True, False]
    assert (tmp_path / "q.parsed.jsonl.config.json").exists()


def test_pipeline_is_reproducible(tmp_path, synth_dir, small_json):
    def run(tag):
        root = tmp_path / tag
        pre, ft, ev = root / "pre", root / "ft", root / "ev"
        assert main(["pretrain", "--data", str(synth_dir / "train"), "--out", str(pre), "--config", small_json, "--seed", "3"]) == 0
        assert main(["finetune", "--data", str(synth_dir / "train"), "--init", str(pre / "final.atmc"),
                     "--out", str(ft), "--config", small_json, "--seed", "3"]) == 0
        assert main(["eval", "--data", str(synth_dir / "test"), "--checkpoint", str(ft / "final.atmc"),
                     "--out", str(ev), "--seed", "3", "--threads", "2"]) == 0
        return root

    a, b = run("a"), run("b")
    files_a, files_b = tree_bytes(a), tree_bytes(b)
    # timing sidecars hold wall-clock values; everything else must match byte for byte
    keys = [k for k in files_a if not k.endswith("timing.jsonl")]
    assert {"pre/final.atmc", "ft/final.atmc", "ft/train_log.jsonl", "ev/report.json"} <= set(keys)
    for k in keys:
        assert files_a[k] == files_b[k].replace(b"/b/", b"/a/"), k
    report = json.loads(files_a["ev/report.json"])
    assert set(report["conditions"]) == {"full", "shuffled", "middle"}


def test_eval_single_condition_and_report_delta(tmp_path, synth_dir, small_json, capsys):
    ft = tmp_path / "ft"
    assert main(["finetune", "--data", str(synth_dir / "train"), "--from-scratch", "--out", str(ft),
                 "--config", small_json, "max_epochs=1"]) == 0
    ev = tmp_path / "ev"
    assert main(["eval", "--data", str(synth_dir / "test"), "--checkpoint", str(ft / "final.atmc"),
                 "--out", str(ev), "--condition", "full"]) == 0
    report = json.loads((ev / "report.json").read_text())
    assert list(report["conditions"]) == ["full"] and report["delta"] is None
    assert main(["report-delta", str(ev / "report.json")]) == 1
    assert "middle" in capsys.readouterr().err


def test_finetune_requires_init_or_from_scratch(synth_dir, tmp_path, capsys):
    assert main(["finetune", "--data", str(synth_dir / "train"), "--out", str(tmp_path / "x")]) == 1
    assert "--init" in capsys.readouterr().err


def test_gradcheck_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "g.json"
    cfg.write_text(json.dumps({"max_coords": 8}))
    assert main(["gradcheck", "--config", str(cfg)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["gradcheck", "--config", str(cfg), "tol=1e-12"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["synth"],
        ["synth", "--out", "x", "no_such_key=1"],
        ["synth", "--out", "x", "notanoverride"],
        ["gradcheck", "clips=0"],
        ["eval", "--data", "d", "--checkpoint", "c", "--out", "o", "--condition", "reversed"],
    ],
)
def test_validation_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_missing_input_is_runtime_error(tmp_path):
    assert main(["pretrain", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


def test_bad_log_level(monkeypatch):
    monkeypatch.setenv("ATM_LOG", "loud")
    assert main(["gradcheck"]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "report-delta" in capsys.readouterr().out


def test_resolve_config_layers(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"a": 2, "b": "x"}')
    assert resolve_config({"a": 1, "b": "y", "c": None}, str(path), ["a=3", "c=[1, 2]"]) == {"a": 3, "b": "x", "c": [1, 2]}
    path.write_text("[1]")
    with pytest.raises(ValueError, match="object"):
        resolve_config({"a": 1}, str(path), [])
