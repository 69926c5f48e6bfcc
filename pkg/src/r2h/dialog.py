"""RDH and RdI episode state machines.

RDH replays a recorded dialog prefix, asks the helper for one fresh response,
and hands the resulting history to the performer from the turn's position.
RdI starts with no history: the performer inquires when its policy fires and
acts on each fresh response until it stops, arrives, or exhausts its budgets.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .metrics import EpisodeStats, goal_progress, spl, success
from .performer import PerformerConfig, ScriptedPerformer, make_inquiry
from .tasks import TaskInstance
from .world import (
    DEFAULT_T_FRAMES,
    DEFAULT_WINDOW,
    NavState,
    ObservationSequence,
    WorldGraph,
    apply_action,
    sample_observations,
    shortest_path,
)

DEFAULT_SUCCESS_RADIUS = 3.0
DEFAULT_STEP_BUDGET_FACTOR = 3
DEFAULT_MAX_TURNS = 8


class DialogError(ValueError):
    """Invalid dialog construction or episode configuration."""


@dataclass(frozen=True)
class DialogTurn:
    inquiry: str
    response: str
    provenance: str  # "oracle" | "helper"


@dataclass(frozen=True)
class DialogHistory:
    turns: tuple[DialogTurn, ...] = ()

    def __len__(self) -> int:
        return len(self.turns)


def append_turn(h: DialogHistory, inquiry: str, response: str,
                provenance: str) -> DialogHistory:
    """New history with one appended turn; the input history is untouched."""
    if not inquiry.strip():
        raise DialogError("inquiry must be nonempty")
    if provenance not in ("oracle", "helper"):
        raise DialogError(f"unknown provenance {provenance!r}")
    return DialogHistory(h.turns + (DialogTurn(inquiry, response, provenance),))


class Helper(Protocol):
    """Anything that can answer an inquiry from observations and dialog context."""

    def respond(self, inquiry: str, obs: ObservationSequence,
                history: DialogHistory) -> str: ...


@dataclass
class EpisodeResult:
    task_id: str
    start_node: str
    final_state: NavState
    dialog: DialogHistory
    success: bool
    gp: float
    spl: float
    pwsr: float
    turn_count: int
    shortest_length: float
    end_reason: str

    def to_json_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "start_node": self.start_node,
            "final_state": self.final_state.to_json_dict(),
            "dialog": [
                {"inquiry": t.inquiry, "response": t.response, "provenance": t.provenance}
                for t in self.dialog.turns
            ],
            "success": self.success,
            "gp": self.gp,
            "spl": self.spl,
            "pwsr": self.pwsr,
            "turn_count": self.turn_count,
            "shortest_length": self.shortest_length,
            "end_reason": self.end_reason,
        }


def episode_metrics(g: WorldGraph, goal: str, start: str, final: NavState,
                    radius: float = DEFAULT_SUCCESS_RADIUS):
    """(gp, success, spl_term, stats) recomputed purely from the trajectory."""
    gp = goal_progress(g, start, final.current_node, goal)
    _, shortest = shortest_path(g, start, goal)
    ok = success(g, final.current_node, goal, radius=radius)
    stats = EpisodeStats(ok, shortest, final.distance_traveled)
    return gp, ok, spl([stats]), stats


def _finish(g: WorldGraph, task: TaskInstance, start: str, state: NavState,
            dialog: DialogHistory, radius: float, end_reason: str) -> EpisodeResult:
    gp, ok, spl_term, stats = episode_metrics(g, task.goal_node, start, state, radius)
    return EpisodeResult(
        task_id=task.task_id,
        start_node=start,
        final_state=state,
        dialog=dialog,
        success=ok,
        gp=gp,
        spl=spl_term,
        pwsr=spl_term,
        turn_count=len(dialog),
        shortest_length=stats.shortest_length,
        end_reason=end_reason,
    )


def _step_budget(g: WorldGraph, start: str, goal: str, factor: int) -> int:
    path, _ = shortest_path(g, start, goal)
    return factor * max(1, len(path) - 1)


def run_rdh_episode(g: WorldGraph, task: TaskInstance, turn_index: int,
                    helper: Helper, performer_config: PerformerConfig,
                    *, window: int = DEFAULT_WINDOW,
                    t_frames: int = DEFAULT_T_FRAMES,
                    step_budget_factor: int = DEFAULT_STEP_BUDGET_FACTOR,
                    success_radius: float = DEFAULT_SUCCESS_RADIUS,
                    seed: int = 0) -> EpisodeResult:
    """One response into a recorded history, then scripted navigation on it.

    The oracle prefix before turn_index is passed through verbatim; the
    performer acts on the helper's fresh response from the turn's position.
    """
    if not 0 <= turn_index < len(task.turns):
        raise DialogError(
            f"turn index {turn_index} out of range for {len(task.turns)} turns")
    if step_budget_factor < 1:
        raise DialogError("step budget factor must be >= 1")
    turn = task.turns[turn_index]

    prefix = DialogHistory()
    for prior in task.turns[:turn_index]:
        prefix = append_turn(prefix, prior.inquiry, prior.response, "oracle")

    obs = sample_observations(g, turn.performer_node, task.goal_node,
                              window=window, t_frames=t_frames)
    response = helper.respond(turn.inquiry, obs, prefix)
    dialog = append_turn(prefix, turn.inquiry, response, "helper")

    state = NavState.initial(g, turn.performer_node)
    performer = ScriptedPerformer(g, task.goal_node, performer_config, seed=seed)
    performer.consume_response(response)
    budget = _step_budget(g, turn.performer_node, task.goal_node, step_budget_factor)

    end_reason = "exhausted"
    while True:
        action = performer.next_action(state)
        if action is None:
            end_reason = "blocked" if performer.blocked else "exhausted"
            break
        state = apply_action(g, state, action)
        if action.kind == "stop":
            end_reason = "stop"
            break
        if performer.actions_taken >= budget:
            end_reason = "budget"
            break
    return _finish(g, task, turn.performer_node, state, dialog, success_radius, end_reason)


def run_rdi_episode(g: WorldGraph, task: TaskInstance, helper: Helper,
                    performer_config: PerformerConfig,
                    *, max_turns: int = DEFAULT_MAX_TURNS,
                    window: int = DEFAULT_WINDOW,
                    t_frames: int = DEFAULT_T_FRAMES,
                    step_budget_factor: int = DEFAULT_STEP_BUDGET_FACTOR,
                    success_radius: float = DEFAULT_SUCCESS_RADIUS,
                    seed: int = 0) -> EpisodeResult:
    """Live loop: the performer inquires when needed and acts on each response.

    Observations for every response are sampled at the performer's current
    node at inquiry time. Terminates on stop, goal arrival, step budget, or
    the turn budget.
    """
    if max_turns < 1:
        raise DialogError(f"max_turns must be >= 1, got {max_turns}")
    if step_budget_factor < 1:
        raise DialogError("step budget factor must be >= 1")

    state = NavState.initial(g, task.start_node)
    performer = ScriptedPerformer(g, task.goal_node, performer_config, seed=seed)
    dialog = DialogHistory()
    budget = _step_budget(g, task.start_node, task.goal_node, step_budget_factor)

    end_reason = "max_turns"
    while True:
        if performer.should_inquire():
            needs_steps = performer.steps_remaining == 0 or performer.blocked
            if len(dialog) < max_turns:
                inquiry = make_inquiry(g, state, task.target_label)
                obs = sample_observations(g, state.current_node, task.goal_node,
                                          window=window, t_frames=t_frames)
                response = helper.respond(inquiry, obs, dialog)
                dialog = append_turn(dialog, inquiry, response, "helper")
                performer.consume_response(response)
                if performer.steps_remaining == 0:
                    continue  # unusable response; re-inquire while turns remain
            elif needs_steps:
                end_reason = "max_turns"
                break
            # else: cadence policy wanted a refresh but turns are spent; keep moving
        action = performer.next_action(state)
        if action is None:
            continue  # blocked or exhausted: loop back to the inquiry gate
        state = apply_action(g, state, action)
        if action.kind == "stop":
            end_reason = "stop"
            break
        if state.current_node == task.goal_node:
            end_reason = "goal"
            break
        if performer.actions_taken >= budget:
            end_reason = "budget"
            break
    return _finish(g, task, task.start_node, state, dialog, success_radius, end_reason)
