import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from photoqa.cli import main


def run_cli(args, **kwargs):
    return main([str(a) for a in args])


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "corpus"
    code = run_cli(["gen", "--seed", 1, "--out", out,
                    "--users", 1, "--albums", 2, "--photos", 4, "--qas", 2])
    assert code == 0
    return out


def test_gen_deterministic_trees(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run_cli(["gen", "--seed", 1, "--out", out,
                        "--users", 1, "--albums", 2, "--photos", 3, "--qas", 2]) == 0
    assert tree_bytes(a) == tree_bytes(b)


def test_gen_then_ingest_accepts(gen_dir, capsys):
    assert run_cli(["--json", "ingest", "--data", gen_dir]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["photos"] == 8
    assert out["qas"] == 16


def test_ingest_rejects_broken_corpus(tmp_path, gen_dir):
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(gen_dir, broken)
    qas = (broken / "qas.json").read_text().splitlines()
    record = json.loads(qas[0])
    record["evidence_photo_ids"] = ["p999999"]
    qas[0] = json.dumps(record)
    (broken / "qas.json").write_text("\n".join(qas) + "\n")
    assert run_cli(["ingest", "--data", broken]) == 1


def test_stats_json(gen_dir, capsys, tmp_path):
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps({"what": 0.25, "when": 0.25, "who": 0.25, "where": 0.25}))
    assert run_cli(["--json", "stats", "--data", gen_dir, "--ref", ref]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(sum(out["four_w"].values()) - 1.0) < 1e-9
    assert out["kl_corpus_vs_ref"] >= -1e-12


def test_index_and_search(gen_dir, tmp_path, capsys):
    snap = tmp_path / "index.bin"
    assert run_cli(["index", "--data", gen_dir, "--out", snap]) == 0
    assert snap.exists()
    capsys.readouterr()

    # find a concept token of some photo and search for it
    photos = [json.loads(l) for l in (gen_dir / "photos.json").read_text().splitlines()]
    target = photos[0]
    key_token = target["concepts"][0]
    assert run_cli(["--json", "search", "--data", gen_dir, "--snapshot", snap,
                    "u01", key_token]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["results"][0]["photo_id"] == target["photo_id"]


def test_search_unknown_user(gen_dir):
    assert run_cli(["search", "--data", gen_dir, "nosuch", "park"]) == 1


def test_unknown_subcommand_exits_one(capsys):
    assert run_cli(["frobnicate"]) == 1


def test_unknown_flag_exits_one(gen_dir):
    assert run_cli(["gen", "--out", gen_dir, "--bogus-flag"]) == 1


def test_pretrain_train_eval_ask_cycle(gen_dir, tmp_path, capsys, monkeypatch):
    enc = tmp_path / "encoder.ckpt"
    assert run_cli(["--seed", 1, "pretrain", "--data", gen_dir, "--out", enc,
                    "--epochs", 2]) == 0
    assert enc.exists()
    capsys.readouterr()

    ckpt = tmp_path / "lookup.ckpt"
    assert run_cli(["--json", "--seed", 1, "train", "lookup", "--data", gen_dir,
                    "--out", ckpt, "--epochs", 2, "--encoder", enc]) == 0
    train_out = json.loads(capsys.readouterr().out)
    assert train_out["kind"] == "lookup"
    assert ckpt.exists()

    assert run_cli(["--json", "eval", ckpt, "--data", gen_dir, "--split", "test"]) == 0
    eval_out = json.loads(capsys.readouterr().out)
    assert eval_out["kind"] == "lookup"
    assert 0.0 <= eval_out["overall"] <= 1.0

    qa = json.loads((gen_dir / "qas.json").read_text().splitlines()[0])
    lines = [qa["question"]] + qa["choices"] + [""]
    monkeypatch.setattr("sys.stdin", __import__("io").StringIO("\n".join(lines) + "\n"))
    assert run_cli(["ask", ckpt, qa["user_id"], "--data", gen_dir]) == 0
    ask_out = capsys.readouterr().out
    assert "answer:" in ask_out
    assert "evidence photos:" in ask_out


def test_ask_reprompts_on_malformed(gen_dir, tmp_path, capsys, monkeypatch):
    ckpt = tmp_path / "lookup2.ckpt"
    assert run_cli(["--seed", 2, "train", "lookup", "--data", gen_dir,
                    "--out", ckpt, "--epochs", 1]) == 0
    capsys.readouterr()
    qa = json.loads((gen_dir / "qas.json").read_text().splitlines()[0])
    # first attempt: duplicate choices -> re-prompt; second attempt valid
    lines = (
        [qa["question"]] + ["same", "same", "same", "same"]
        + [qa["question"]] + qa["choices"] + [""]
    )
    monkeypatch.setattr("sys.stdin", __import__("io").StringIO("\n".join(lines) + "\n"))
    assert run_cli(["ask", ckpt, qa["user_id"], "--data", gen_dir]) == 0
    out = capsys.readouterr()
    assert "distinct" in out.err
    assert "answer:" in out.out


def test_train_baseline_and_eval(gen_dir, tmp_path, capsys):
    ckpt = tmp_path / "logreg.ckpt"
    assert run_cli(["--seed", 3, "train", "logreg", "--data", gen_dir,
                    "--out", ckpt, "--epochs", 2]) == 0
    capsys.readouterr()
    assert run_cli(["--json", "eval", ckpt, "--data", gen_dir]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "logreg"


def test_grad_check_command(capsys):
    assert run_cli(["--json", "grad-check", "lookup"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is True
    assert run_cli(["grad-check", "embedding"]) == 0


def test_config_file_and_seed_env(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("users = 1\nalbums = 1\nphotos = 2\nqas = 1\nseed = 5\n")
    out_dir = tmp_path / "cfg_corpus"
    assert run_cli(["--json", "--config", cfg, "gen", "--out", out_dir]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["photos"] == 2

    # MEMEX_SEED provides the default seed
    monkeypatch.setenv("MEMEX_SEED", "5")
    out_env = tmp_path / "env_corpus"
    assert run_cli(["gen", "--out", out_env,
                    "--users", 1, "--albums", 1, "--photos", 2, "--qas", 1]) == 0
    assert tree_bytes(out_dir) == tree_bytes(out_env)


def test_cli_entrypoint_subprocess(gen_dir):
    env = dict(os.environ)
    result = subprocess.run(
        [sys.executable, "-m", "photoqa.cli", "ingest", "--data", str(gen_dir)],
        capture_output=True, text=True, env=env,
    )
    assert result.returncode == 0
    assert "valid corpus" in result.stdout
