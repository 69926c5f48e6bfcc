from __future__ import annotations

import pytest

from r2h.tasks import (
    DatasetError,
    SynthesisParams,
    TaskInstance,
    load_dataset,
    oracle_response,
    oracle_steps,
    save_dataset,
    split_seen_unseen,
    synthesize_tasks,
)
from r2h.world import Viewpoint, WorldGraph, WorldParams, generate_world, shortest_path


def path_world() -> WorldGraph:
    # chain n0 - n1 - n2 - n3 with 4m edges; plant only at n3
    nodes = (
        Viewpoint("n0", 0.0, 0.0, "kitchen", ()),
        Viewpoint("n1", 4.0, 0.0, "hallway", ("sofa",)),
        Viewpoint("n2", 8.0, 0.0, "lobby", ()),
        Viewpoint("n3", 12.0, 0.0, "bedroom", ("plant",)),
    )
    edges = (("n0", "n1", 4.0), ("n1", "n2", 4.0), ("n2", "n3", 4.0))
    return WorldGraph("w-path", "train", nodes, edges)


def test_oracle_steps_cover_remaining_route():
    g = path_world()
    steps = oracle_steps(g, "n0", "n3", "plant")
    assert steps == [
        "go to the hallway", "go to the lobby", "go to the bedroom",
        "stop at the plant",
    ]
    assert oracle_response(g, "n2", "n3", "plant") == "go to the bedroom, then stop at the plant."


def test_synthesize_adjacent_pair_has_move_and_stop():
    g = path_world()
    params = SynthesisParams(max_path_edges=1, min_goal_distance=3.0)
    tasks = synthesize_tasks(g, seed=0, n=4, params=params)
    for task in tasks:
        path, _ = shortest_path(g, task.start_node, task.goal_node)
        assert len(path) == 2
        steps = oracle_steps(g, task.start_node, task.goal_node, task.target_label)
        assert len(steps) == 2  # one move plus the stop clause


def test_synthesize_deterministic():
    g = generate_world(3, WorldParams(node_count=20))
    a = synthesize_tasks(g, seed=5, n=10)
    b = synthesize_tasks(g, seed=5, n=10)
    assert a == b
    c = synthesize_tasks(g, seed=6, n=10)
    assert a != c


def test_synthesize_validates_inputs():
    g = path_world()
    with pytest.raises(DatasetError):
        synthesize_tasks(g, seed=0, n=0)


def test_synthesized_tasks_satisfy_invariants():
    g = generate_world(11, WorldParams(node_count=25))
    tasks = synthesize_tasks(g, seed=2, n=15)
    assert len(tasks) == 15
    for task in tasks:
        assert task.start_node != task.goal_node
        assert task.target_label in g.node(task.goal_node).object_labels
        assert len(task.turns) >= 1
        assert task.turns[0].performer_node == task.start_node
        for turn in task.turns:
            assert turn.inquiry
            assert turn.response
            _, d = shortest_path(g, turn.performer_node, task.goal_node)
            assert d > 3.0  # inquiry positions sit outside the success radius


def test_dataset_roundtrip(tmp_path):
    g = generate_world(7, WorldParams(node_count=20))
    tasks = synthesize_tasks(g, seed=1, n=8)
    path = tmp_path / "tasks.jsonl"
    save_dataset(tasks, path)
    loaded = load_dataset(path, {g.world_id: g})
    assert loaded == tasks


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path, {}) == []


def test_load_single_valid_record(tmp_path):
    g = path_world()
    task = TaskInstance("t0", "w-path", "n0", "n3", "plant", ())
    path = tmp_path / "one.jsonl"
    save_dataset([task], path)
    assert len(load_dataset(path, {"w-path": g})) == 1


def test_load_reports_line_numbers(tmp_path):
    g = path_world()
    good = TaskInstance("t0", "w-path", "n0", "n3", "plant", ())
    bad = TaskInstance("t1", "w-path", "n0", "n2", "plant", ())  # n2 lacks plant
    path = tmp_path / "bad.jsonl"
    save_dataset([good, bad], path)
    with pytest.raises(DatasetError, match="line 2"):
        load_dataset(path, {"w-path": g})


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "garbage.jsonl"
    path.write_text('{"task_id": "x"\n')
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(path, {})


def test_load_rejects_unknown_world(tmp_path):
    task = TaskInstance("t0", "nowhere", "n0", "n3", "plant", ())
    path = tmp_path / "w.jsonl"
    save_dataset([task], path)
    with pytest.raises(DatasetError, match="unknown world_id"):
        load_dataset(path, {})


def test_load_rejects_start_equals_goal(tmp_path):
    g = path_world()
    task = TaskInstance("t0", "w-path", "n3", "n3", "plant", ())
    path = tmp_path / "eq.jsonl"
    save_dataset([task], path)
    with pytest.raises(DatasetError, match="start equals goal"):
        load_dataset(path, {"w-path": g})


def test_split_counts_and_disjointness():
    ids = [f"w{i}" for i in range(10)]
    split = split_seen_unseen(ids, ratio=0.2, seed=0)
    assert len(split.val_unseen) == 2
    assert set(split.val_unseen) & set(split.train) == set()
    assert set(split.val_seen) <= set(split.train)
    assert set(split.train) | set(split.val_unseen) == set(ids)


def test_split_deterministic():
    ids = [f"w{i}" for i in range(9)]
    assert split_seen_unseen(ids, 0.25, seed=3) == split_seen_unseen(ids, 0.25, seed=3)
    assert split_seen_unseen(ids, 0.25, seed=3) != split_seen_unseen(ids, 0.25, seed=4)


def test_split_requires_three_worlds():
    with pytest.raises(DatasetError):
        split_seen_unseen(["a", "b"], 0.5, seed=0)
