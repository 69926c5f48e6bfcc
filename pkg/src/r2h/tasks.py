"""Task instances, oracle dialog synthesis, JSONL ingestion, and data splits.

Oracle responses are free-form "go to the <room>, then ..." sentences covering
the full remaining route to the goal from the turn's position, closed by a
"stop at the <target>" clause. The rule parser recovers the step structure, so
replaying any single oracle response with a noiseless performer reaches the
goal from that turn onward.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .world import WorldGraph, distances_from, shortest_path


class DatasetError(ValueError):
    """Malformed or invariant-violating dataset content."""


@dataclass(frozen=True)
class OracleTurn:
    performer_node: str
    inquiry: str
    response: str


@dataclass(frozen=True)
class TaskInstance:
    task_id: str
    world_id: str
    start_node: str
    goal_node: str
    target_label: str
    turns: tuple[OracleTurn, ...]

    def to_json_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "world_id": self.world_id,
            "start": self.start_node,
            "goal": self.goal_node,
            "target": self.target_label,
            "turns": [
                {"performer_node": t.performer_node, "inquiry": t.inquiry,
                 "response": t.response}
                for t in self.turns
            ],
        }


def make_inquiry_text(target_label: str, room_label: str) -> str:
    return f"where should I go to find the {target_label}? i am in the {room_label}."


def oracle_steps(g: WorldGraph, current: str, goal: str, target_label: str) -> list[str]:
    """Imperative clauses for the remaining shortest route, ending with a stop clause."""
    path, _ = shortest_path(g, current, goal)
    steps = [f"go to the {g.node(n).room_label}" for n in path[1:]]
    steps.append(f"stop at the {target_label}")
    return steps


def oracle_response(g: WorldGraph, current: str, goal: str, target_label: str) -> str:
    return ", then ".join(oracle_steps(g, current, goal, target_label)) + "."


@dataclass(frozen=True)
class SynthesisParams:
    tasks_per_world: int = 20
    max_path_edges: int = 3
    min_goal_distance: float = 3.0  # keeps every inquiry position outside the success radius
    turn_every_edges: int = 3
    vary_phrasing: bool = True  # human-like verb/filler noise in recorded responses


_STEP_VERBS = ("go to the", "head to the", "walk to the",
               "move to the", "proceed to the", "continue to the")
_ACK_RATE = 0.35
_APOLOGY_RATE = 0.2


def stylize_response(steps: list[str], rng: np.random.Generator) -> str:
    """Human-flavored rendering of canonical steps: varied verbs plus fillers.

    Every clause keeps its room/target word, so the rule parser recovers an
    executable step list; acknowledgements and apologies are the noise the
    step normalization is meant to strip.
    """
    clauses = []
    for step in steps[:-1]:
        room = step.rsplit(" ", 1)[1]
        verb = _STEP_VERBS[int(rng.integers(len(_STEP_VERBS)))]
        clauses.append(f"{verb} {room}")
    clauses.append(steps[-1])
    text = ", then ".join(clauses) + "."
    if rng.random() < _ACK_RATE:
        text = "yeah " + text
    if rng.random() < _APOLOGY_RATE:
        text += " and sorry about the mixup at first."
    return text


def _turn_boundaries(path: list[str], dist_to_goal: dict[str, float],
                     params: SynthesisParams) -> list[int]:
    edges = len(path) - 1
    seg = max(1, math.ceil(edges / params.turn_every_edges))
    boundaries = [0]
    idx = seg
    while idx < edges:
        if dist_to_goal[path[idx]] > params.min_goal_distance:
            boundaries.append(idx)
        idx += seg
    return boundaries


def synthesize_tasks(g: WorldGraph, seed: int, n: int,
                     params: SynthesisParams | None = None) -> list[TaskInstance]:
    """Sample n tasks with oracle dialogs. Deterministic in (g, seed, n, params)."""
    if n <= 0:
        raise DatasetError(f"task count must be positive, got {n}")
    params = params or SynthesisParams()
    candidates: list[tuple[str, str, str]] = []
    for goal_vp in g.nodes:
        if not goal_vp.object_labels:
            continue
        dist = distances_from(g, goal_vp.id)
        for start_vp in g.nodes:
            if start_vp.id == goal_vp.id:
                continue
            if dist[start_vp.id] <= params.min_goal_distance:
                continue
            path, _ = shortest_path(g, start_vp.id, goal_vp.id)
            if len(path) - 1 > params.max_path_edges:
                continue
            for target in goal_vp.object_labels:
                # the target must single out the goal along the route
                if any(target in g.node(node).object_labels for node in path[:-1]):
                    continue
                candidates.append((start_vp.id, goal_vp.id, target))
    if not candidates:
        raise DatasetError(
            f"world {g.world_id} admits no tasks under {params}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=min(n, len(candidates)), replace=False)
    if len(picks) < n:
        extra = rng.choice(len(candidates), size=n - len(picks), replace=True)
        picks = np.concatenate([picks, extra])

    tasks = []
    for k, i in enumerate(picks):
        start, goal, target = candidates[int(i)]
        path, _ = shortest_path(g, start, goal)
        dist = distances_from(g, goal)

        def record_response(node: str) -> str:
            steps = oracle_steps(g, node, goal, target)
            if params.vary_phrasing:
                return stylize_response(steps, rng)
            return ", then ".join(steps) + "."

        turns = tuple(
            OracleTurn(
                performer_node=path[idx],
                inquiry=make_inquiry_text(target, g.node(path[idx]).room_label),
                response=record_response(path[idx]),
            )
            for idx in _turn_boundaries(path, dist, params)
        )
        tasks.append(TaskInstance(
            task_id=f"{g.world_id}-s{seed}-t{k:03d}",
            world_id=g.world_id,
            start_node=start,
            goal_node=goal,
            target_label=target,
            turns=turns,
        ))
    return tasks


def save_dataset(tasks: list[TaskInstance], path: str | Path) -> None:
    with open(path, "w") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_json_dict(), sort_keys=True) + "\n")


def load_dataset(path: str | Path, worlds: dict[str, WorldGraph]) -> list[TaskInstance]:
    """Parse and validate a JSONL task file; errors carry 1-based line numbers."""
    tasks: list[TaskInstance] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as err:
                raise DatasetError(f"line {lineno}: malformed JSON ({err})") from None
            try:
                task = _validate_record(doc, worlds)
            except DatasetError as err:
                raise DatasetError(f"line {lineno}: {err}") from None
            tasks.append(task)
    return tasks


def _validate_record(doc: dict, worlds: dict[str, WorldGraph]) -> TaskInstance:
    for key in ("task_id", "world_id", "start", "goal", "target", "turns"):
        if key not in doc:
            raise DatasetError(f"missing field {key!r}")
    g = worlds.get(doc["world_id"])
    if g is None:
        raise DatasetError(f"unknown world_id {doc['world_id']!r}")
    for node_key in ("start", "goal"):
        if not g.has_node(doc[node_key]):
            raise DatasetError(f"{node_key} node {doc[node_key]!r} not in world")
    if doc["start"] == doc["goal"]:
        raise DatasetError("start equals goal")
    goal_vp = g.node(doc["goal"])
    if doc["target"] not in goal_vp.object_labels:
        raise DatasetError(
            f"goal node lacks target label {doc['target']!r}")
    turns = []
    for i, t in enumerate(doc["turns"]):
        if not str(t.get("inquiry", "")).strip():
            raise DatasetError(f"turn {i}: empty inquiry")
        if not g.has_node(t.get("performer_node", "")):
            raise DatasetError(f"turn {i}: unknown performer_node")
        turns.append(OracleTurn(t["performer_node"], t["inquiry"], t["response"]))
    return TaskInstance(doc["task_id"], doc["world_id"], doc["start"],
                        doc["goal"], doc["target"], tuple(turns))


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[str, ...]
    val_seen: tuple[str, ...]
    val_unseen: tuple[str, ...]


def split_seen_unseen(world_ids: list[str], ratio: float, seed: int) -> SplitAssignment:
    """Reserve round(ratio * N) worlds as unseen; seen validation reuses train worlds."""
    if len(world_ids) < 3:
        raise DatasetError(f"need at least 3 worlds, got {len(world_ids)}")
    if not 0.0 < ratio < 1.0:
        raise DatasetError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    order = list(world_ids)
    rng.shuffle(order)
    n_unseen = max(1, round(ratio * len(order)))
    if n_unseen >= len(order):
        raise DatasetError("unseen split would consume every world")
    unseen = tuple(sorted(order[:n_unseen]))
    train = tuple(sorted(order[n_unseen:]))
    n_seen = min(n_unseen, len(train))
    seen = tuple(sorted(train[int(i)] for i in
                        rng.choice(len(train), size=n_seen, replace=False)))
    return SplitAssignment(train=train, val_seen=seen, val_unseen=unseen)
