"""HTTP session service for the human-performer mode.

A human (through the web client) takes the performer role: they see the
current room and neighbor directions, move or stop, ask the helper questions,
and rate the responses at the end. Sessions are mutually exclusive per id;
finished sessions are immutable and append one record to the results log.
"""
from __future__ import annotations

import json
import math
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .bench import Benchmark
from .dialog import DialogHistory, append_turn, episode_metrics
from .baselines import EchoHelper, EmptyHelper, OracleHelper
from .helper import NeuralHelper
from .tasks import TaskInstance
from .world import Action, NavState, WorldGraph, apply_action, sample_observations

_OCTANTS = ("east", "northeast", "north", "northwest",
            "west", "southwest", "south", "southeast")


class GatewayError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _direction(dx: float, dy: float) -> str:
    angle = math.atan2(dy, dx)
    return _OCTANTS[int(round(angle / (math.pi / 4))) % 8]


class CreateSessionBody(BaseModel):
    task_id: str
    helper: str = "oracle"


class ActionBody(BaseModel):
    type: str  # "move" | "stop"
    target: str | None = None


class AskBody(BaseModel):
    text: str
    client_turn_id: str | None = None  # retry dedupe token


class FinishBody(BaseModel):
    naturalness: float
    faithfulness: float


@dataclass
class Session:
    session_id: str
    task: TaskInstance
    g: WorldGraph
    helper: object
    state: NavState
    dialog: DialogHistory = field(default_factory=DialogHistory)
    status: str = "active"  # active | stopped | finished
    ratings: dict | None = None
    metrics: dict | None = None
    seen_asks: dict[str, str] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class Gateway:
    """Session registry plus the task/world/helper context it serves."""

    def __init__(self, bench: Benchmark, results_log: str | Path,
                 neural: NeuralHelper | None = None,
                 success_radius: float = 3.0, window: int = 5,
                 t_frames: int = 16):
        self.worlds = bench.worlds
        self.tasks: dict[str, TaskInstance] = {}
        for split_tasks in bench.tasks.values():
            for task in split_tasks:
                self.tasks[task.task_id] = task
        self.results_log = Path(results_log)
        self.neural = neural
        self.success_radius = success_radius
        self.window = window
        self.t_frames = t_frames
        self.sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    # -- helpers ------------------------------------------------------------

    def _make_helper(self, spec: str, g: WorldGraph, task: TaskInstance):
        if spec == "oracle":
            return OracleHelper(g, task)
        if spec == "empty":
            return EmptyHelper()
        if spec == "echo":
            return EchoHelper()
        if spec == "model":
            if self.neural is None:
                raise GatewayError(400, "no_model",
                                   "server started without a model checkpoint")
            return self.neural
        raise GatewayError(400, "bad_helper", f"unknown helper {spec!r}")

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise GatewayError(404, "not_found", f"unknown session {session_id!r}")
        return session

    def _view(self, s: Session) -> dict:
        vp = s.g.node(s.state.current_node)
        neighbors = [
            {
                "node": nb,
                "room": s.g.node(nb).room_label,
                "direction": _direction(s.g.node(nb).x - vp.x, s.g.node(nb).y - vp.y),
                "distance": round(w, 3),
            }
            for nb, w in s.g.neighbors(s.state.current_node)
        ]
        view = {
            "session_id": s.session_id,
            "task_id": s.task.task_id,
            "target": s.task.target_label,
            "status": s.status,
            "current_room": vp.room_label,
            "current_node": s.state.current_node,
            "neighbors": neighbors,
            "steps_taken": len(s.state.path_taken) - 1,
            "distance_traveled": s.state.distance_traveled,
            "dialog": [
                {"inquiry": t.inquiry, "response": t.response}
                for t in s.dialog.turns
            ],
        }
        if s.metrics is not None:
            view["metrics"] = s.metrics
        return view

    def _compute_metrics(self, s: Session) -> dict:
        gp, ok, spl_term, stats = episode_metrics(
            s.g, s.task.goal_node, s.task.start_node, s.state,
            radius=self.success_radius)
        return {
            "gp": gp,
            "success": ok,
            "spl": spl_term,
            "sr": 1.0 if ok else 0.0,
            "shortest_length": stats.shortest_length,
            "taken_length": stats.taken_length,
        }

    # -- operations ----------------------------------------------------------

    def create_session(self, body: CreateSessionBody) -> dict:
        task = self.tasks.get(body.task_id)
        if task is None:
            raise GatewayError(404, "not_found", f"unknown task {body.task_id!r}")
        g = self.worlds[task.world_id]
        helper = self._make_helper(body.helper, g, task)
        session = Session(
            session_id=uuid.uuid4().hex,
            task=task,
            g=g,
            helper=helper,
            state=NavState.initial(g, task.start_node),
        )
        with self._registry_lock:
            self.sessions[session.session_id] = session
        return self._view(session)

    def get_state(self, session_id: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            return self._view(session)

    def act(self, session_id: str, body: ActionBody) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status != "active":
                raise GatewayError(409, "finished", "session is no longer active")
            if body.type == "stop":
                session.state = apply_action(session.g, session.state, Action.stop())
                session.status = "stopped"
                session.metrics = self._compute_metrics(session)
            elif body.type == "move":
                if not body.target:
                    raise GatewayError(400, "bad_move", "move requires a target")
                try:
                    session.state = apply_action(session.g, session.state,
                                                 Action.move(body.target))
                except Exception as err:
                    raise GatewayError(400, "illegal_move", str(err)) from None
            else:
                raise GatewayError(400, "bad_action", f"unknown action {body.type!r}")
            return self._view(session)

    def ask(self, session_id: str, body: AskBody) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status != "active":
                raise GatewayError(409, "finished", "session is no longer active")
            text = body.text.strip()
            if not text:
                raise GatewayError(400, "empty_question", "question must be nonempty")
            if body.client_turn_id and body.client_turn_id in session.seen_asks:
                view = self._view(session)
                view["response"] = session.seen_asks[body.client_turn_id]
                return view
            obs = sample_observations(session.g, session.state.current_node,
                                      session.task.goal_node,
                                      window=self.window, t_frames=self.t_frames)
            response = session.helper.respond(text, obs, session.dialog)
            session.dialog = append_turn(session.dialog, text, response, "helper")
            if body.client_turn_id:
                session.seen_asks[body.client_turn_id] = response
            view = self._view(session)
            view["response"] = response
            return view

    def finish(self, session_id: str, body: FinishBody) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status == "finished":
                raise GatewayError(409, "finished", "session already finished")
            for name, value in (("naturalness", body.naturalness),
                                ("faithfulness", body.faithfulness)):
                if not 0.0 <= value <= 1.0:
                    raise GatewayError(400, "bad_rating",
                                       f"{name} must be in [0, 1], got {value}")
            if session.status == "active":
                session.state = apply_action(session.g, session.state, Action.stop())
                session.status = "stopped"
            if session.metrics is None:
                session.metrics = self._compute_metrics(session)
            session.ratings = {"naturalness": body.naturalness,
                               "faithfulness": body.faithfulness}
            session.status = "finished"
            record = {
                "session_id": session.session_id,
                "task_id": session.task.task_id,
                "world_id": session.task.world_id,
                "start_node": session.task.start_node,
                "goal_node": session.task.goal_node,
                "path_taken": list(session.state.path_taken),
                "distance_traveled": session.state.distance_traveled,
                "dialog": [
                    {"inquiry": t.inquiry, "response": t.response}
                    for t in session.dialog.turns
                ],
                "metrics": session.metrics,
                "ratings": session.ratings,
            }
            self.results_log.parent.mkdir(parents=True, exist_ok=True)
            with open(self.results_log, "a") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
            view = self._view(session)
            view["record"] = record
            return view


def read_results(path: str | Path) -> list[dict]:
    """Load the append-only results log."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def create_app(gateway: Gateway, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="r2h human-performer gateway")

    @app.exception_handler(GatewayError)
    async def handle_gateway_error(request: Request, err: GatewayError):
        return JSONResponse(status_code=err.status,
                            content={"code": err.code, "message": err.message})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        return gateway.create_session(body)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return gateway.get_state(session_id)

    @app.post("/sessions/{session_id}/action")
    def act(session_id: str, body: ActionBody):
        return gateway.act(session_id, body)

    @app.post("/sessions/{session_id}/ask")
    def ask(session_id: str, body: AskBody):
        return gateway.ask(session_id, body)

    @app.post("/sessions/{session_id}/finish")
    def finish(session_id: str, body: FinishBody):
        return gateway.finish(session_id, body)

    @app.get("/tasks")
    def list_tasks():
        return {"tasks": sorted(gateway.tasks)}

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
