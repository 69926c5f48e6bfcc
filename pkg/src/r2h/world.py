"""Synthetic navigation environment: viewpoint graphs, shortest paths, observation sampling.

Observation frames are symbolic stand-ins for rendered views.  Each frame is a
D_OBS vector laid out as:

    room one-hot | object multi-hot | unit vector toward goal (2) | normalized remaining distance

The room/object blocks are static per viewpoint; the goal-relative tail is
computed by the sampler for the episode at hand.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ROOM_LABELS = (
    "kitchen", "hallway", "lobby", "bedroom", "bathroom", "office",
    "library", "garage", "balcony", "studio", "pantry", "lounge",
)
OBJECT_LABELS = (
    "plant", "sofa", "table", "lamp", "mirror", "piano", "vase",
    "bookshelf", "clock", "rug",
)

D_OBS = len(ROOM_LABELS) + len(OBJECT_LABELS) + 3
DISTANCE_SCALE = 30.0  # meters; normalizer for the remaining-distance channel

DEFAULT_WINDOW = 5
DEFAULT_T_FRAMES = 16

SPLIT_TAGS = ("train", "val_seen", "val_unseen")


class WorldError(ValueError):
    """Invalid world construction or unknown node reference."""


@dataclass(frozen=True)
class Viewpoint:
    id: str
    x: float
    y: float
    room_label: str
    object_labels: tuple[str, ...]

    def static_feature(self) -> np.ndarray:
        """Room one-hot concatenated with object multi-hot."""
        vec = np.zeros(len(ROOM_LABELS) + len(OBJECT_LABELS), dtype=np.float64)
        vec[ROOM_LABELS.index(self.room_label)] = 1.0
        for obj in self.object_labels:
            vec[len(ROOM_LABELS) + OBJECT_LABELS.index(obj)] = 1.0
        return vec


@dataclass
class WorldGraph:
    """Weighted undirected viewpoint graph. Immutable after construction."""

    world_id: str
    split_tag: str
    nodes: tuple[Viewpoint, ...]
    edges: tuple[tuple[str, str, float], ...]
    _by_id: dict[str, Viewpoint] = field(init=False, repr=False)
    _adj: dict[str, tuple[tuple[str, float], ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.split_tag not in SPLIT_TAGS:
            raise WorldError(f"unknown split tag: {self.split_tag!r}")
        self._by_id = {vp.id: vp for vp in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise WorldError("duplicate node ids")
        adj: dict[str, list[tuple[str, float]]] = {vp.id: [] for vp in self.nodes}
        for a, b, length in self.edges:
            if a not in self._by_id or b not in self._by_id:
                raise WorldError(f"edge endpoint not a node: ({a}, {b})")
            if length <= 0:
                raise WorldError(f"edge length must be positive: ({a}, {b}, {length})")
            adj[a].append((b, length))
            adj[b].append((a, length))
        self._adj = {k: tuple(sorted(v)) for k, v in adj.items()}
        if len(self.nodes) > 1 and not self._connected():
            raise WorldError("graph is not connected")

    def _connected(self) -> bool:
        seen = {self.nodes[0].id}
        stack = [self.nodes[0].id]
        while stack:
            for nb, _ in self._adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def node(self, node_id: str) -> Viewpoint:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise WorldError(f"unknown node id: {node_id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def neighbors(self, node_id: str) -> tuple[tuple[str, float], ...]:
        self.node(node_id)
        return self._adj[node_id]

    def with_split(self, split_tag: str) -> "WorldGraph":
        return replace(self, split_tag=split_tag)

    def to_json_dict(self) -> dict:
        return {
            "world_id": self.world_id,
            "split_tag": self.split_tag,
            "nodes": [
                {"id": vp.id, "x": vp.x, "y": vp.y, "room": vp.room_label,
                 "objects": list(vp.object_labels)}
                for vp in self.nodes
            ],
            "edges": [[a, b, length] for a, b, length in self.edges],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "WorldGraph":
        nodes = tuple(
            Viewpoint(n["id"], float(n["x"]), float(n["y"]), n["room"],
                      tuple(n["objects"]))
            for n in doc["nodes"]
        )
        edges = tuple((a, b, float(length)) for a, b, length in doc["edges"])
        return WorldGraph(doc["world_id"], doc["split_tag"], nodes, edges)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=1) + "\n")

    @staticmethod
    def load(path: str | Path) -> "WorldGraph":
        return WorldGraph.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Action:
    kind: str  # "move" | "stop"
    target: str | None = None

    @staticmethod
    def move(target: str) -> "Action":
        return Action("move", target)

    @staticmethod
    def stop() -> "Action":
        return Action("stop")


@dataclass(frozen=True)
class NavState:
    world_id: str
    current_node: str
    path_taken: tuple[str, ...]
    distance_traveled: float
    terminal: bool = False

    @staticmethod
    def initial(g: WorldGraph, start: str) -> "NavState":
        g.node(start)
        return NavState(g.world_id, start, (start,), 0.0)

    def to_json_dict(self) -> dict:
        return {
            "world_id": self.world_id,
            "current_node": self.current_node,
            "path_taken": list(self.path_taken),
            "distance_traveled": self.distance_traveled,
            "terminal": self.terminal,
        }


@dataclass(frozen=True)
class ObservationSequence:
    frames: np.ndarray          # (t_frames, D_OBS)
    validity: np.ndarray        # (t_frames,) bool, padding is False
    source_nodes: tuple[str, ...]

    @property
    def valid_count(self) -> int:
        return int(self.validity.sum())


@dataclass(frozen=True)
class WorldParams:
    node_count: int = 30
    k_nearest: int = 3
    scale: float = 20.0
    min_objects: int = 0
    max_objects: int = 3


def generate_world(seed: int, params: WorldParams, world_id: str | None = None,
                   split_tag: str = "train") -> WorldGraph:
    """Random geometric graph over a scale x scale square with k-NN edges.

    Components are bridged by their globally nearest cross pair, so the result
    is always connected. Deterministic in (seed, params).
    """
    n = params.node_count
    if n < 2:
        raise WorldError(f"node_count must be >= 2, got {n}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, params.scale, size=(n, 2))
    ids = [f"n{i:03d}" for i in range(n)]
    rooms = [ROOM_LABELS[int(rng.integers(len(ROOM_LABELS)))] for _ in range(n)]
    objects: list[tuple[str, ...]] = []
    for _ in range(n):
        count = int(rng.integers(params.min_objects, params.max_objects + 1))
        picks = rng.choice(len(OBJECT_LABELS), size=count, replace=False)
        objects.append(tuple(sorted(OBJECT_LABELS[int(i)] for i in picks)))
    if not any(objects):
        objects[0] = (OBJECT_LABELS[int(rng.integers(len(OBJECT_LABELS)))],)

    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    k = min(params.k_nearest, n - 1)
    edge_set: set[tuple[int, int]] = set()
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")
        picked = 0
        for j in order:
            j = int(j)
            if j == i:
                continue
            edge_set.add((min(i, j), max(i, j)))
            picked += 1
            if picked >= k:
                break

    # union-find to bridge disconnected components
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edge_set:
        parent[find(a)] = find(b)
    while True:
        roots = sorted({find(i) for i in range(n)})
        if len(roots) == 1:
            break
        comp0 = [i for i in range(n) if find(i) == roots[0]]
        rest = [i for i in range(n) if find(i) != roots[0]]
        best = min(((dist[i, j], i, j) for i in comp0 for j in rest))
        _, i, j = best
        edge_set.add((min(i, j), max(i, j)))
        parent[find(i)] = find(j)

    nodes = tuple(
        Viewpoint(ids[i], float(pts[i, 0]), float(pts[i, 1]), rooms[i], objects[i])
        for i in range(n)
    )
    edges = tuple(
        (ids[a], ids[b], float(dist[a, b])) for a, b in sorted(edge_set)
    )
    wid = world_id if world_id is not None else f"world-{seed:05d}"
    return WorldGraph(wid, split_tag, nodes, edges)


def shortest_path(g: WorldGraph, src: str, dst: str) -> tuple[list[str], float]:
    """Dijkstra path and length from src to dst. Deterministic tie-breaking by node id."""
    g.node(src)
    g.node(dst)
    if src == dst:
        return [src], 0.0
    best: dict[str, float] = {src: 0.0}
    prev: dict[str, str] = {}
    heap: list[tuple[float, str]] = [(0.0, src)]
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            break
        for nb, w in g.neighbors(u):
            nd = d + w
            if nb not in best or nd < best[nb]:
                best[nb] = nd
                prev[nb] = u
                heapq.heappush(heap, (nd, nb))
    if dst not in best:
        raise WorldError(f"no path from {src} to {dst}")
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    path.reverse()
    return path, best[dst]


def distances_from(g: WorldGraph, src: str) -> dict[str, float]:
    """Shortest-path distance from src to every node."""
    g.node(src)
    best: dict[str, float] = {src: 0.0}
    heap: list[tuple[float, str]] = [(0.0, src)]
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for nb, w in g.neighbors(u):
            nd = d + w
            if nb not in best or nd < best[nb]:
                best[nb] = nd
                heapq.heappush(heap, (nd, nb))
    return best


def observation_frame(g: WorldGraph, node_id: str, goal: str) -> np.ndarray:
    """Single D_OBS frame for node_id in an episode targeting goal."""
    vp = g.node(node_id)
    gp = g.node(goal)
    static = vp.static_feature()
    delta = np.array([gp.x - vp.x, gp.y - vp.y], dtype=np.float64)
    norm = float(np.hypot(delta[0], delta[1]))
    direction = delta / norm if norm > 0 else np.zeros(2)
    _, remaining = shortest_path(g, node_id, goal)
    tail = np.array([direction[0], direction[1], remaining / DISTANCE_SCALE])
    return np.concatenate([static, tail])


def sample_observations(g: WorldGraph, current: str, goal: str,
                        window: int = DEFAULT_WINDOW,
                        t_frames: int = DEFAULT_T_FRAMES) -> ObservationSequence:
    """Features of the next min(window, remaining) shortest-path nodes, padded to t_frames."""
    if window < 1:
        raise WorldError(f"window must be >= 1, got {window}")
    path, _ = shortest_path(g, current, goal)
    take = path[: min(window, len(path))]
    frames = np.zeros((t_frames, D_OBS), dtype=np.float64)
    validity = np.zeros(t_frames, dtype=bool)
    for i, node_id in enumerate(take[:t_frames]):
        frames[i] = observation_frame(g, node_id, goal)
        validity[i] = True
    return ObservationSequence(frames, validity, tuple(take[:t_frames]))


def apply_action(g: WorldGraph, s: NavState, action: Action) -> NavState:
    """Advance navigation state. Stop marks the state terminal without moving."""
    if s.terminal:
        raise WorldError("cannot act on a terminal state")
    if action.kind == "stop":
        return replace(s, terminal=True)
    if action.kind != "move":
        raise WorldError(f"unknown action kind: {action.kind!r}")
    for nb, w in g.neighbors(s.current_node):
        if nb == action.target:
            return NavState(
                world_id=s.world_id,
                current_node=nb,
                path_taken=s.path_taken + (nb,),
                distance_traveled=s.distance_traveled + w,
            )
    raise WorldError(
        f"{action.target!r} is not a neighbor of {s.current_node!r}"
    )
