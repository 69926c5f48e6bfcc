"""Secondary acceptance: scripted human-performer session through the web stack.

Requires the built web client (frontend/dist); the primary suite never touches
this module's subject and runs fully without it.
"""
from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from r2h.bench import DataConfig, synthesize_benchmark
from r2h.metrics import goal_progress, success
from r2h.ui_gateway import Gateway, create_app, read_results

DIST = Path(__file__).resolve().parent.parent / "frontend" / "dist"

pytestmark = pytest.mark.skipif(
    not (DIST / "index.html").exists(),
    reason="secondary component not built (frontend/dist missing)")


def test_secondary_scripted_session_end_to_end(tmp_path):
    bench = synthesize_benchmark(DataConfig(
        train_worlds=3, val_seen_worlds=1, val_unseen_worlds=1,
        tasks_per_world=4, world_nodes=18, max_path_edges=3))
    results_log = tmp_path / "results.jsonl"
    gateway = Gateway(bench, results_log)
    client = TestClient(create_app(gateway, ui_dir=DIST))

    # the web client bundle is served from the gateway root
    page = client.get("/")
    assert page.status_code == 200 and "main.js" in page.text
    assert client.get("/main.js").status_code == 200
    assert client.get("/style.css").status_code == 200

    task = bench.tasks["val_unseen"][0]
    g = bench.worlds[task.world_id]

    # create -> 3 moves -> 2 asks -> stop -> ratings, exactly as the client does
    view = client.post("/sessions", json={"task_id": task.task_id,
                                          "helper": "oracle"}).json()
    sid = view["session_id"]

    for _ in range(3):
        target = view["neighbors"][0]["node"]
        resp = client.post(f"/sessions/{sid}/action",
                           json={"type": "move", "target": target})
        assert resp.status_code == 200, resp.text
        view = resp.json()
    assert view["steps_taken"] == 3

    for i, question in enumerate(["where should i go now?",
                                  "am i close to the target?"]):
        resp = client.post(f"/sessions/{sid}/ask",
                           json={"text": question, "client_turn_id": f"turn-{i}"})
        assert resp.status_code == 200
        view = resp.json()
        assert view["response"]
    assert len(view["dialog"]) == 2

    stopped = client.post(f"/sessions/{sid}/action", json={"type": "stop"}).json()
    assert stopped["status"] == "stopped"

    finished = client.post(f"/sessions/{sid}/finish",
                           json={"naturalness": 0.72, "faithfulness": 0.75})
    assert finished.status_code == 200
    record = finished.json()["record"]

    # ratings round-trip verbatim
    assert record["ratings"] == {"naturalness": 0.72, "faithfulness": 0.75}

    # persisted GP / SR equal offline recomputation exactly
    end = record["path_taken"][-1]
    gp_offline = goal_progress(g, task.start_node, end, task.goal_node)
    ok_offline = success(g, end, task.goal_node)
    assert record["metrics"]["gp"] == gp_offline
    assert record["metrics"]["success"] == ok_offline
    assert record["metrics"]["sr"] == (1.0 if ok_offline else 0.0)

    persisted = read_results(results_log)
    assert len(persisted) == 1
    assert persisted[0] == record
    assert persisted[0]["dialog"][0]["inquiry"] == "where should i go now?"

    print("[PASS] secondary: scripted session persisted; GP/SR match offline; "
          "ratings round-trip")
