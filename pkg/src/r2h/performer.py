"""Scripted task performer: grounds parsed step instructions on the graph.

Each move step names a room or object label; the performer moves to the
matching neighbor, breaking label ties toward the neighbor minimizing
edge length plus remaining distance so that correct instructions trace an
exact shortest path. A stop step halts at the named label (moving first if
the label sits one edge away). Unmatchable steps block step consumption,
which doubles as the inquiry trigger during live interaction.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .parse_step import rule_parse
from .world import OBJECT_LABELS, ROOM_LABELS, Action, NavState, WorldGraph, distances_from

_WORD_RE = re.compile(r"[a-z0-9]+")
_KNOWN_LABELS = set(ROOM_LABELS) | set(OBJECT_LABELS)


@dataclass(frozen=True)
class PerformerConfig:
    noise: float = 0.0
    inquire_policy: str = "on_exhausted_steps"  # or "every_k"
    every_k: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise must be in [0, 1], got {self.noise}")
        if self.inquire_policy not in ("on_exhausted_steps", "every_k"):
            raise ValueError(f"unknown inquire policy {self.inquire_policy!r}")
        if self.every_k < 1:
            raise ValueError(f"every_k must be >= 1, got {self.every_k}")


def should_inquire(steps_remaining: int, blocked: bool, actions_taken: int,
                   config: PerformerConfig) -> bool:
    """No usable steps always triggers; the every_k policy also fires on action cadence."""
    if steps_remaining == 0 or blocked:
        return True
    if config.inquire_policy == "every_k":
        return actions_taken > 0 and actions_taken % config.every_k == 0
    return False


def make_inquiry(g: WorldGraph, state: NavState, target_label: str) -> str:
    room = g.node(state.current_node).room_label
    return f"where should I go to find the {target_label}? i am in the {room}."


def _step_labels(text: str) -> list[str]:
    return [w for w in _WORD_RE.findall(text.lower()) if w in _KNOWN_LABELS]


def _is_stop_step(text: str) -> bool:
    return "stop" in _WORD_RE.findall(text.lower())


def _node_matches(g: WorldGraph, node_id: str, labels: list[str]) -> bool:
    vp = g.node(node_id)
    return vp.room_label in labels or any(obj in labels for obj in vp.object_labels)


class ScriptedPerformer:
    """Executes steps for one episode; owns its RNG and pending-step queue."""

    def __init__(self, g: WorldGraph, goal_node: str, config: PerformerConfig,
                 seed: int | None = None):
        self.g = g
        self.goal_node = goal_node
        self.config = config
        self.rng = np.random.default_rng(config.seed if seed is None else seed)
        self.dist_to_goal = distances_from(g, goal_node)
        self.steps: list[str] = []
        self.step_idx = 0
        self.actions_taken = 0
        self.blocked = False

    @property
    def steps_remaining(self) -> int:
        return len(self.steps) - self.step_idx

    def consume_response(self, response: str) -> None:
        """Replace pending steps with the parsed form of a fresh response."""
        text = response.strip()
        self.steps = [s.text for s in rule_parse(text)] if text else []
        self.step_idx = 0
        self.blocked = False

    def should_inquire(self) -> bool:
        return should_inquire(self.steps_remaining, self.blocked,
                              self.actions_taken, self.config)

    def next_action(self, state: NavState) -> Action | None:
        """Next grounded action, or None when steps are exhausted or unmatchable."""
        while self.step_idx < len(self.steps):
            text = self.steps[self.step_idx]
            labels = _step_labels(text)
            if _is_stop_step(text):
                if not labels or _node_matches(self.g, state.current_node, labels):
                    self.step_idx += 1
                    return self._count(Action.stop())
                move = self._move_toward(state, labels)
                if move is not None:
                    return self._count(self._with_noise(state, move))
                self.blocked = True
                return None
            if not labels:
                self.step_idx += 1  # discourse step ("Yeah."): nothing to ground
                continue
            move = self._move_toward(state, labels)
            if move is not None:
                self.step_idx += 1
                return self._count(self._with_noise(state, move))
            if _node_matches(self.g, state.current_node, labels):
                self.step_idx += 1  # already where this step points
                continue
            self.blocked = True
            return None
        return None

    def _move_toward(self, state: NavState, labels: list[str]) -> Action | None:
        matches = [
            (nb, w) for nb, w in self.g.neighbors(state.current_node)
            if _node_matches(self.g, nb, labels)
        ]
        if not matches:
            return None
        best = min(matches, key=lambda nw: (nw[1] + self.dist_to_goal[nw[0]], nw[0]))
        return Action.move(best[0])

    def _with_noise(self, state: NavState, action: Action) -> Action:
        if self.config.noise > 0 and self.rng.random() < self.config.noise:
            others = [nb for nb, _ in self.g.neighbors(state.current_node)
                      if nb != action.target]
            if others:
                return Action.move(others[int(self.rng.integers(len(others)))])
        return action

    def _count(self, action: Action) -> Action:
        self.actions_taken += 1
        return action


def follow_steps(steps: list[str], state: NavState, g: WorldGraph,
                 config: PerformerConfig, goal_node: str,
                 seed: int | None = None) -> tuple[list[Action], NavState, str]:
    """Run steps to completion from state; returns (actions, final state, status).

    Status is "stopped", "exhausted", or "blocked".
    """
    from .world import apply_action

    performer = ScriptedPerformer(g, goal_node, config, seed=seed)
    performer.steps = list(steps)
    actions: list[Action] = []
    while True:
        action = performer.next_action(state)
        if action is None:
            return actions, state, "blocked" if performer.blocked else "exhausted"
        actions.append(action)
        state = apply_action(g, state, action)
        if action.kind == "stop":
            return actions, state, "stopped"
