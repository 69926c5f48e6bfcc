"""Built-in reference helpers: oracle replay, empty responder, inquiry echo."""
from __future__ import annotations

from dataclasses import dataclass

from .dialog import DialogHistory
from .tasks import TaskInstance, oracle_response
from .world import ObservationSequence, WorldGraph


@dataclass
class OracleHelper:
    """Answers with exact remaining-route steps from the performer's position."""

    g: WorldGraph
    task: TaskInstance

    def respond(self, inquiry: str, obs: ObservationSequence,
                history: DialogHistory) -> str:
        current = obs.source_nodes[0]
        return oracle_response(self.g, current, self.task.goal_node,
                               self.task.target_label)


class EmptyHelper:
    """Lower bound: never says anything."""

    def respond(self, inquiry: str, obs: ObservationSequence,
                history: DialogHistory) -> str:
        return ""


class EchoHelper:
    """Trivial baseline: parrots the inquiry back."""

    def respond(self, inquiry: str, obs: ObservationSequence,
                history: DialogHistory) -> str:
        return inquiry
