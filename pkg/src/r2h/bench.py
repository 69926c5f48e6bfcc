"""Suite orchestration: benchmark data, RDH/RdI runs, ablation grid, reports."""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import EchoHelper, EmptyHelper, OracleHelper
from .dialog import EpisodeResult, run_rdh_episode, run_rdi_episode
from .helper import HelperConfig, NeuralHelper
from .metrics import EpisodeStats, MetricReport, bleu2, rouge_l
from .performer import PerformerConfig
from .tasks import TaskInstance, load_dataset, synthesize_tasks, SynthesisParams
from .training import train_helper
from .world import WorldGraph, WorldParams, generate_world

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class BenchError(ValueError):
    """Invalid bench configuration."""


@dataclass(frozen=True)
class DataConfig:
    # synthesis route
    train_worlds: int = 40
    val_seen_worlds: int = 5
    val_unseen_worlds: int = 5
    tasks_per_world: int = 20
    world_nodes: int = 30
    world_seed: int = 0
    task_seed: int = 0
    max_path_edges: int = 3
    # file route: worlds directory plus one task file per split
    worlds_dir: str | None = None
    tasks_train: str | None = None
    tasks_val_seen: str | None = None
    tasks_val_unseen: str | None = None


@dataclass(frozen=True)
class EpisodeConfig:
    max_turns: int = 8
    step_budget_factor: int = 3
    success_radius: float = 3.0
    window: int = 5
    t_frames: int = 16
    rdh_turn: str | int = "all"  # every recorded turn, or "last", or an index


@dataclass(frozen=True)
class BenchConfig:
    task: str = "rdh"  # rdh | rdi
    helper: str = "oracle"  # oracle | empty | echo | path to a checkpoint
    splits: tuple[str, ...] = ("val_seen", "val_unseen")
    seeds: tuple[int, ...] = (0,)
    out_dir: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    performer: PerformerConfig = field(default_factory=PerformerConfig)
    train: HelperConfig = field(default_factory=HelperConfig)

    def __post_init__(self) -> None:
        if self.task not in ("rdh", "rdi"):
            raise BenchError(f"task must be rdh or rdi, got {self.task!r}")
        if not self.seeds:
            raise BenchError("seeds must be nonempty")


def load_config(path: str | Path) -> BenchConfig:
    """Read a TOML or JSON bench configuration file."""
    path = Path(path)
    if path.suffix == ".toml":
        doc = tomllib.loads(path.read_text())
    elif path.suffix == ".json":
        doc = json.loads(path.read_text())
    else:
        raise BenchError(f"config must be .toml or .json: {path}")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> BenchConfig:
    doc = dict(doc)
    data = DataConfig(**doc.pop("data", {}))
    episode = EpisodeConfig(**doc.pop("episode", {}))
    performer = PerformerConfig(**doc.pop("performer", {}))
    train = HelperConfig.from_json_dict(doc.pop("train", {}))
    if "seeds" in doc:
        doc["seeds"] = tuple(doc["seeds"])
    if "splits" in doc:
        doc["splits"] = tuple(doc["splits"])
    return BenchConfig(data=data, episode=episode, performer=performer,
                       train=train, **doc)


@dataclass
class Benchmark:
    """Worlds plus per-split task lists."""

    worlds: dict[str, WorldGraph]
    tasks: dict[str, list[TaskInstance]]


def synthesize_benchmark(data: DataConfig) -> Benchmark:
    """Deterministic synthetic benchmark: unseen worlds never appear in train;
    the seen validation split reuses train worlds with freshly sampled tasks."""
    synth = SynthesisParams(max_path_edges=data.max_path_edges)
    worlds: dict[str, WorldGraph] = {}
    train_ids, seen_ids, unseen_ids = [], [], []
    for i in range(data.train_worlds):
        g = generate_world(data.world_seed + i, WorldParams(node_count=data.world_nodes),
                           world_id=f"train-{i:03d}", split_tag="train")
        worlds[g.world_id] = g
        train_ids.append(g.world_id)
    for i in range(data.val_unseen_worlds):
        g = generate_world(data.world_seed + 10_000 + i,
                           WorldParams(node_count=data.world_nodes),
                           world_id=f"unseen-{i:03d}", split_tag="val_unseen")
        worlds[g.world_id] = g
        unseen_ids.append(g.world_id)
    seen_ids = train_ids[: data.val_seen_worlds]

    def tasks_for(ids: list[str], seed_base: int) -> list[TaskInstance]:
        out: list[TaskInstance] = []
        for j, wid in enumerate(ids):
            out.extend(synthesize_tasks(worlds[wid], seed=seed_base + j,
                                        n=data.tasks_per_world, params=synth))
        return out

    return Benchmark(worlds=worlds, tasks={
        "train": tasks_for(train_ids, data.task_seed),
        "val_seen": tasks_for(seen_ids, data.task_seed + 10_000),
        "val_unseen": tasks_for(unseen_ids, data.task_seed + 20_000),
    })


def load_benchmark(data: DataConfig) -> Benchmark:
    worlds_dir = Path(data.worlds_dir)
    worlds = {}
    for path in sorted(worlds_dir.glob("*.json")):
        g = WorldGraph.load(path)
        worlds[g.world_id] = g
    if not worlds:
        raise BenchError(f"no world files in {worlds_dir}")
    tasks = {}
    for split, path in (("train", data.tasks_train),
                        ("val_seen", data.tasks_val_seen),
                        ("val_unseen", data.tasks_val_unseen)):
        tasks[split] = load_dataset(path, worlds) if path else []
    return Benchmark(worlds=worlds, tasks=tasks)


def build_benchmark(data: DataConfig) -> Benchmark:
    return load_benchmark(data) if data.worlds_dir else synthesize_benchmark(data)


def make_helper(spec: str, g: WorldGraph, task: TaskInstance,
                neural: NeuralHelper | None):
    if spec == "oracle":
        return OracleHelper(g, task)
    if spec == "empty":
        return EmptyHelper()
    if spec == "echo":
        return EchoHelper()
    if neural is not None:
        return neural
    raise BenchError(f"unknown helper spec {spec!r}")


def _load_neural(spec: str) -> NeuralHelper | None:
    if spec in ("oracle", "empty", "echo"):
        return None
    path = Path(spec)
    if not path.exists():
        raise BenchError(f"helper checkpoint not found: {spec}")
    return NeuralHelper.load(path)


@dataclass
class SuiteReport:
    task: str
    helper: str
    seeds: tuple[int, ...]
    reports: dict[str, MetricReport]
    episodes: dict[str, list[EpisodeResult]]

    def to_json_dict(self) -> dict:
        return {
            "task": self.task,
            "helper": self.helper,
            "seeds": list(self.seeds),
            "splits": {
                split: {
                    "aggregate": self.reports[split].to_json_dict(),
                    "episodes": [e.to_json_dict() for e in self.episodes[split]],
                }
                for split in sorted(self.reports)
            },
        }


def _rdh_turn_indices(task: TaskInstance, episode: EpisodeConfig) -> list[int]:
    if episode.rdh_turn == "all":
        return list(range(len(task.turns)))
    if episode.rdh_turn == "last":
        return [len(task.turns) - 1]
    return [min(int(episode.rdh_turn), len(task.turns) - 1)]


def run_suite(cfg: BenchConfig, bench: Benchmark | None = None) -> SuiteReport:
    """Run every (task, seed) episode per split and aggregate metrics.

    Deterministic given the config: task order, seeds, and all RNG streams are
    derived from configured values only.
    """
    bench = bench or build_benchmark(cfg.data)
    neural = _load_neural(cfg.helper)
    ep = cfg.episode
    reports: dict[str, MetricReport] = {}
    episodes: dict[str, list[EpisodeResult]] = {}
    for split in cfg.splits:
        tasks = bench.tasks.get(split, [])
        if not tasks:
            raise BenchError(f"no tasks for split {split!r}")
        results: list[EpisodeResult] = []
        gp_values: list[float] = []
        stats: list[EpisodeStats] = []
        bleu_values: list[float] = []
        rouge_values: list[float] = []
        for seed in cfg.seeds:
            for i, task in enumerate(tasks):
                g = bench.worlds[task.world_id]
                helper = make_helper(cfg.helper, g, task, neural)
                if cfg.task == "rdh":
                    runs = [("rdh", turn) for turn in _rdh_turn_indices(task, ep)]
                else:
                    runs = [("rdi", 0)]
                for kind, turn in runs:
                    episode_seed = int(np.random.SeedSequence(
                        (seed, i, turn)).generate_state(1)[0])
                    performer = replace(cfg.performer, seed=episode_seed)
                    if kind == "rdh":
                        result = run_rdh_episode(
                            g, task, turn, helper, performer,
                            window=ep.window, t_frames=ep.t_frames,
                            step_budget_factor=ep.step_budget_factor,
                            success_radius=ep.success_radius, seed=episode_seed)
                        reference = task.turns[turn].response
                        candidate = result.dialog.turns[-1].response
                        bleu_values.append(bleu2(candidate, [reference]))
                        rouge_values.append(rouge_l(candidate, reference))
                    else:
                        result = run_rdi_episode(
                            g, task, helper, performer,
                            max_turns=ep.max_turns, window=ep.window,
                            t_frames=ep.t_frames,
                            step_budget_factor=ep.step_budget_factor,
                            success_radius=ep.success_radius, seed=episode_seed)
                    results.append(result)
                    gp_values.append(result.gp)
                    stats.append(EpisodeStats(result.success, result.shortest_length,
                                              result.final_state.distance_traveled))
        reports[split] = MetricReport.aggregate(
            split, gp_values, stats,
            bleu_values=bleu_values if cfg.task == "rdh" else None,
            rouge_values=rouge_values if cfg.task == "rdh" else None)
        episodes[split] = results
    report = SuiteReport(cfg.task, cfg.helper, cfg.seeds, reports, episodes)
    if cfg.out_dir:
        write_suite_report(report, cfg.out_dir)
    return report


def format_table(reports: dict[str, MetricReport]) -> str:
    """Aligned-column text table, one row per split."""
    headers = ["split", "count", "GP", "SPL", "SR", "PWSR", "B2", "R"]
    rows = [headers]
    for split in sorted(reports):
        r = reports[split]
        rows.append([
            split, str(r.count), f"{r.gp:.3f}", f"{r.spl:.3f}", f"{r.sr:.3f}",
            f"{r.pwsr:.3f}",
            "-" if r.bleu2 is None else f"{r.bleu2:.3f}",
            "-" if r.rouge_l is None else f"{r.rouge_l:.3f}",
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def write_suite_report(report: SuiteReport, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_json_dict(), sort_keys=True, indent=1) + "\n")
    (out_dir / "report.txt").write_text(format_table(report.reports))
    return json_path


def train_from_config(cfg: BenchConfig, bench: Benchmark | None = None,
                      progress=None):
    """Train a helper on the benchmark's train split; returns the TrainResult."""
    bench = bench or build_benchmark(cfg.data)
    if not bench.tasks.get("train"):
        raise BenchError("training split is empty")
    out_dir = Path(cfg.out_dir or "runs/train")
    return train_helper(bench.worlds, bench.tasks["train"],
                        bench.tasks.get("val_unseen", []), cfg.train, out_dir,
                        progress=progress)


def run_ablation(cfg: BenchConfig, bench: Benchmark | None = None,
                 progress=None) -> dict:
    """Train/evaluate the 2x2 {cos_mask} x {parse_by_step} grid with shared data.

    Every cell sees identical worlds, task lists, and seeds; the returned
    document carries per-cell unseen/seen metrics and pairwise GP deltas.
    """
    bench = bench or build_benchmark(cfg.data)
    out_root = Path(cfg.out_dir or "runs/ablation")
    cells: dict[str, dict] = {}
    for seed in cfg.seeds:
        for cos in (True, False):
            for parse in (True, False):
                name = f"seed{seed}-cos_{'on' if cos else 'off'}-parse_{'on' if parse else 'off'}"
                train_cfg = replace(cfg.train, cos_mask=cos, parse_by_step=parse, seed=seed)
                cell_dir = out_root / name
                result = train_helper(bench.worlds, bench.tasks["train"],
                                      bench.tasks.get("val_unseen", []),
                                      train_cfg, cell_dir, progress=progress)
                eval_cfg = replace(cfg, task="rdh", helper=str(result.checkpoint_path),
                                   out_dir=None, seeds=(seed,))
                suite = run_suite(eval_cfg, bench)
                cells[name] = {
                    "seed": seed,
                    "cos_mask": cos,
                    "parse_by_step": parse,
                    "best_step": result.best_step,
                    "metrics": {split: suite.reports[split].to_json_dict()
                                for split in suite.reports},
                }
    deltas = _ablation_deltas(cells, cfg.seeds)
    doc = {"cells": cells, "deltas": deltas}
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "ablation.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return doc


def _ablation_deltas(cells: dict[str, dict], seeds: tuple[int, ...]) -> dict:
    def gp(seed: int, cos: bool, parse: bool, split: str) -> float:
        name = f"seed{seed}-cos_{'on' if cos else 'off'}-parse_{'on' if parse else 'off'}"
        return cells[name]["metrics"][split]["gp"]

    deltas: dict[str, dict] = {}
    for split in ("val_seen", "val_unseen"):
        per_seed = {
            "cos_effect_at_parse_on": [gp(s, True, True, split) - gp(s, False, True, split)
                                       for s in seeds],
            "cos_effect_at_parse_off": [gp(s, True, False, split) - gp(s, False, False, split)
                                        for s in seeds],
            "parse_effect_at_cos_on": [gp(s, True, True, split) - gp(s, True, False, split)
                                       for s in seeds],
            "parse_effect_at_cos_off": [gp(s, False, True, split) - gp(s, False, False, split)
                                        for s in seeds],
        }
        deltas[split] = per_seed
    return deltas
