"""Helper training loop: corpus construction, batch sampling, checkpoint selection."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import neuralcore as nc
from .dialog import run_rdh_episode
from .helper import (
    HelperConfig,
    NeuralHelper,
    TrainingDiverged,
    TrainingExample,
    Vocabulary,
    assemble_batch,
    encode_example,
    init_params,
    save_helper,
    train_step,
)
from .parse_step import rule_parse, steps_to_target
from .performer import PerformerConfig
from .tasks import TaskInstance
from .world import WorldGraph, sample_observations


def training_target(response: str, use_parse: bool) -> str:
    """Supervision string: numbered steps when Parse-by-Step is on, raw text otherwise."""
    if use_parse:
        return steps_to_target(rule_parse(response))
    return response.lower()


def corpus_texts(worlds: dict[str, WorldGraph], tasks: list[TaskInstance]) -> list[str]:
    """All inquiry, raw-response, and parsed-target strings (vocabulary source)."""
    texts: list[str] = []
    for task in tasks:
        for turn in task.turns:
            texts.append(turn.inquiry)
            texts.append(training_target(turn.response, use_parse=False))
            texts.append(training_target(turn.response, use_parse=True))
    return texts


def build_examples(worlds: dict[str, WorldGraph], tasks: list[TaskInstance],
                   cfg: HelperConfig, vocab: Vocabulary) -> list[TrainingExample]:
    """One training triple per recorded turn, observed at the turn's position."""
    examples = []
    for task in tasks:
        g = worlds[task.world_id]
        for turn in task.turns:
            obs = sample_observations(g, turn.performer_node, task.goal_node,
                                      window=cfg.window, t_frames=cfg.t_frames)
            target = training_target(turn.response, cfg.parse_by_step)
            examples.append(encode_example(vocab, cfg, turn.inquiry, target, obs))
    return examples


def evaluate_mean_gp(worlds: dict[str, WorldGraph], tasks: list[TaskInstance],
                     helper, cfg: HelperConfig, limit: int | None = None) -> float:
    """Mean goal progress over every recorded turn, noiseless performer."""
    chosen = tasks if limit is None else tasks[:limit]
    noiseless = PerformerConfig(noise=0.0)
    gps = []
    for i, task in enumerate(chosen):
        g = worlds[task.world_id]
        for turn in range(len(task.turns)):
            result = run_rdh_episode(g, task, turn, helper, noiseless,
                                     window=cfg.window, t_frames=cfg.t_frames,
                                     seed=i)
            gps.append(result.gp)
    return float(np.mean(gps)) if gps else 0.0


@dataclass
class TrainResult:
    checkpoint_path: Path
    vocab: Vocabulary
    best_step: int
    best_gp: float
    history: list[dict] = field(default_factory=list)


def train_helper(worlds: dict[str, WorldGraph], train_tasks: list[TaskInstance],
                 val_tasks: list[TaskInstance], cfg: HelperConfig,
                 out_dir: str | Path, progress=None) -> TrainResult:
    """Train on oracle turns; keep the checkpoint with the best validation GP.

    Periodic snapshots land in out_dir/checkpoint_latest.json; the selected
    parameters are written to out_dir/helper.json. A non-finite loss saves the
    last good parameters before raising.
    """
    if not train_tasks:
        raise ValueError("training split is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    final_path = out_dir / "helper.json"

    vocab = Vocabulary.build(corpus_texts(worlds, train_tasks), cfg.max_vocab)
    examples = build_examples(worlds, train_tasks, cfg, vocab)
    params = init_params(cfg, len(vocab))
    optimizer = nc.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)

    def snapshot() -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in params.items()}

    def validation_gp() -> float:
        if not val_tasks:
            return 0.0
        helper = NeuralHelper(params, cfg, vocab)
        return evaluate_mean_gp(worlds, val_tasks, helper, cfg,
                                limit=cfg.eval_task_limit)

    history: list[dict] = []
    best = {"step": 0, "gp": -np.inf, "params": snapshot()}
    last_good = best["params"]

    step = 0
    try:
        for step in range(1, cfg.iterations + 1):
            idx = rng.integers(0, len(examples), size=cfg.batch_size)
            batch = assemble_batch([examples[int(i)] for i in idx], cfg,
                                   len(vocab), seed=step)
            l_mlm, l_sparse = train_step(batch, params, optimizer, cfg)
            if step % 100 == 0 or step == cfg.iterations:
                history.append({"step": step, "l_mlm": l_mlm, "l_sparse": l_sparse})
                if progress:
                    progress(history[-1])
                last_good = snapshot()
            if step % cfg.eval_interval == 0 or step == cfg.iterations:
                gp = validation_gp()
                history.append({"step": step, "val_gp": gp})
                if progress:
                    progress(history[-1])
                if gp > best["gp"]:
                    best = {"step": step, "gp": gp, "params": snapshot()}
                save_helper(out_dir / "checkpoint_latest.json", params, cfg, vocab,
                            extra_meta={"step": step})
    except TrainingDiverged:
        tensors = {k: nc.Tensor(v, requires_grad=True) for k, v in last_good.items()}
        save_helper(final_path, tensors, cfg, vocab,
                    extra_meta={"step": step, "diverged": True})
        raise

    if cfg.iterations == 0 or not np.isfinite(best["gp"]):
        chosen = {"step": step, "gp": 0.0, "params": snapshot()}
    else:
        chosen = best
    tensors = {k: nc.Tensor(v, requires_grad=True) for k, v in chosen["params"].items()}
    save_helper(final_path, tensors, cfg, vocab,
                extra_meta={"step": chosen["step"], "val_gp": float(chosen["gp"])})
    return TrainResult(final_path, vocab, chosen["step"], float(chosen["gp"]), history)
