from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from r2h.cli import cli
from r2h.tasks import load_dataset
from r2h.world import WorldGraph


@pytest.fixture()
def runner():
    return CliRunner()


def write_tiny_config(path, out_dir, **extra):
    doc = {
        "task": "rdh",
        "helper": "oracle",
        "seeds": [0],
        "out_dir": str(out_dir),
        "data": {"train_worlds": 3, "val_seen_worlds": 1, "val_unseen_worlds": 1,
                 "tasks_per_world": 3, "world_nodes": 14, "max_path_edges": 2},
        "episode": {"window": 3, "t_frames": 8},
        "train": {"layers": 1, "heads": 2, "width": 16, "T_frames": 8,
                  "iterations": 4, "eval_interval": 4, "eval_task_limit": 2,
                  "batch_size": 2, "k_max": 16, "max_inquiry_tokens": 16,
                  "window": 3},
    }
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


def test_gen_worlds_and_tasks_roundtrip(runner, tmp_path):
    worlds_dir = tmp_path / "worlds"
    result = runner.invoke(cli, ["gen-worlds", "--out", str(worlds_dir),
                                 "--count", "3", "--nodes", "14", "--seed", "5"])
    assert result.exit_code == 0, result.output
    files = sorted(worlds_dir.glob("*.json"))
    assert len(files) == 3

    tasks_path = tmp_path / "tasks.jsonl"
    result = runner.invoke(cli, ["gen-tasks", "--worlds", str(worlds_dir),
                                 "--out", str(tasks_path), "--per-world", "4",
                                 "--max-path-edges", "2"])
    assert result.exit_code == 0, result.output
    worlds = {g.world_id: g for g in map(WorldGraph.load, files)}
    tasks = load_dataset(tasks_path, worlds)
    assert len(tasks) == 12


def test_bench_command_prints_table(runner, tmp_path):
    config = write_tiny_config(tmp_path / "c.json", tmp_path / "out")
    result = runner.invoke(cli, ["bench", "rdh", "--config", str(config)])
    assert result.exit_code == 0, result.output
    assert "val_unseen" in result.output
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "report.txt").exists()


def test_bench_rdi_command(runner, tmp_path):
    config = write_tiny_config(tmp_path / "c.json", tmp_path / "out")
    result = runner.invoke(cli, ["bench", "rdi", "--config", str(config)])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["task"] == "rdi"


def test_train_command(runner, tmp_path):
    config = write_tiny_config(tmp_path / "c.json", tmp_path / "out")
    result = runner.invoke(cli, ["train", "--config", str(config)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "helper.json").exists()


def test_parse_command_rule_backend(runner, tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text(json.dumps({"response": "I would go back."}) + "\n"
                   + json.dumps({"response": "go left, then stop at the rug."}) + "\n")
    dst = tmp_path / "out.jsonl"
    result = runner.invoke(cli, ["parse", "--in", str(src), "--out", str(dst),
                                 "--backend", "rule"])
    assert result.exit_code == 0, result.output
    lines = [json.loads(line) for line in dst.read_text().splitlines()]
    assert lines[0]["steps"] == ["Go back."]
    assert lines[0]["target"] == "1. go back."
    assert lines[1]["steps"] == ["Go left.", "Stop at the rug."]


def test_cli_error_paths(runner, tmp_path):
    # missing config file
    result = runner.invoke(cli, ["bench", "rdh", "--config",
                                 str(tmp_path / "absent.toml")])
    assert result.exit_code != 0
    # bad task type is a click usage error
    result = runner.invoke(cli, ["bench", "fly", "--config", "x"])
    assert result.exit_code != 0


def test_main_emits_structured_error(tmp_path):
    import subprocess
    import sys
    proc = subprocess.run(
        [sys.executable, "-m", "r2h.cli", "bench", "rdh", "--config",
         str(tmp_path / "missing.toml")],
        capture_output=True, text=True)
    assert proc.returncode == 2
    err = json.loads(proc.stderr.strip().splitlines()[-1])
    assert set(err) == {"code", "message"}
