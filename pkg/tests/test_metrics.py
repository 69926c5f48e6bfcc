from __future__ import annotations

import math

import pytest

from r2h.metrics import (
    EpisodeStats,
    MetricReport,
    bleu2,
    goal_progress,
    goal_progress_from_taken,
    pwsr,
    rouge_l,
    spl,
    success,
)
from r2h.world import WorldParams, generate_world, shortest_path

from oracles import brute_force_shortest
from test_world import small_graph


# --- graph metrics -----------------------------------------------------------

def test_goal_progress_reaching_goal():
    g = small_graph()
    _, d = shortest_path(g, "n0", "n3")
    assert goal_progress(g, "n0", "n3", "n3") == pytest.approx(d)


def test_goal_progress_no_movement_is_zero():
    g = small_graph()
    assert goal_progress(g, "n0", "n0", "n3") == 0.0


def test_goal_progress_five_node_instance_matches_brute_force():
    nodes_edges = (
        ["a", "b", "c", "d", "e"],
        [("a", "b", 2.0), ("b", "c", 2.5), ("c", "d", 1.5), ("d", "e", 3.0),
         ("a", "e", 11.0), ("b", "d", 5.0)],
    )
    from r2h.world import Viewpoint, WorldGraph
    nodes = tuple(Viewpoint(n, float(i), 0.0, "kitchen", ()) for i, n in enumerate(nodes_edges[0]))
    g = WorldGraph("w5", "train", nodes, tuple(nodes_edges[1]))
    _, d_start = brute_force_shortest(*nodes_edges, "a", "e")
    _, d_end = brute_force_shortest(*nodes_edges, "c", "e")
    assert d_start == 9.0 and d_end == 4.5
    assert goal_progress(g, "a", "c", "e") == pytest.approx(d_start - d_end)


def test_goal_progress_antisymmetry_and_bound():
    g = generate_world(4, WorldParams(node_count=10))
    ids = [vp.id for vp in g.nodes]
    goal = ids[-1]
    for start in ids[:5]:
        for end in ids[:5]:
            gp = goal_progress(g, start, end, goal)
            assert gp == pytest.approx(-goal_progress(g, end, start, goal))
            _, d = shortest_path(g, start, goal)
            assert gp <= d + 1e-12


def test_goal_progress_from_taken_variant():
    g = small_graph()
    # walked 7.0 along n0-n1-n3, remaining 0
    assert goal_progress_from_taken(g, 7.0, "n3", "n3") == pytest.approx(7.0)
    assert goal_progress_from_taken(g, 0.0, "n0", "n3") == pytest.approx(-7.0)


def test_success_cases():
    g = small_graph()
    assert success(g, "n3", "n3", radius=0.0)
    assert not success(g, "n1", "n3", radius=0.0)
    _, d = shortest_path(g, "n1", "n3")
    assert success(g, "n1", "n3", radius=d)  # closed-ball boundary
    with pytest.raises(ValueError):
        success(g, "n1", "n3", radius=-1.0)


def test_spl_and_pwsr():
    one_perfect = [EpisodeStats(True, 5.0, 5.0)]
    assert spl(one_perfect) == 1.0
    assert pwsr(one_perfect) == 1.0
    assert spl([EpisodeStats(False, 5.0, 5.0)]) == 0.0
    assert spl([EpisodeStats(True, 5.0, 10.0)]) == 0.5
    # shorter-than-shortest taken path cannot exceed 1
    assert spl([EpisodeStats(True, 5.0, 2.0)]) == 1.0
    with pytest.raises(ValueError):
        spl([])


def test_spl_never_exceeds_sr():
    import random
    rng = random.Random(0)
    episodes = [
        EpisodeStats(rng.random() < 0.5, rng.uniform(1, 10), rng.uniform(0, 20))
        for _ in range(200)
    ]
    sr = sum(e.success for e in episodes) / len(episodes)
    assert spl(episodes) <= sr + 1e-12


# --- language metrics --------------------------------------------------------

def test_bleu2_identical():
    assert bleu2("go to the kitchen", ["go to the kitchen"]) == pytest.approx(1.0)


def test_bleu2_zero_bigram_overlap_is_tiny():
    score = bleu2("alpha beta gamma", ["delta epsilon zeta"])
    assert 0.0 <= score < 1e-3


def test_bleu2_hand_computed_fixture():
    # candidate "go to the kitchen" vs reference "go to the red kitchen":
    #   p1 = 4/4 (all unigrams appear), p2 = 2/3 ("go to", "to the" match; "the kitchen" does not)
    #   brevity = exp(1 - 5/4) since candidate length 4 < reference length 5
    expected = math.exp(1.0 - 5.0 / 4.0) * math.sqrt(1.0 * (2.0 / 3.0))
    assert bleu2("go to the kitchen", ["go to the red kitchen"]) == pytest.approx(expected, abs=1e-9)


def test_bleu2_empty_candidate():
    assert bleu2("", ["anything"]) == 0.0


def test_rouge_l_identical():
    assert rouge_l("enter the bedroom", "enter the bedroom") == pytest.approx(1.0)


def test_rouge_l_disjoint():
    assert rouge_l("alpha beta", "gamma delta") == 0.0


def test_rouge_l_hand_computed_fixture():
    # LCS("a b c d", "a c d b") = "a c d" (length 3): P = 3/4, R = 3/4, F1 = 0.75
    assert rouge_l("a b c d", "a c d b") == pytest.approx(0.75, abs=1e-9)


def test_rouge_l_empty():
    assert rouge_l("", "") == 0.0


# --- report ------------------------------------------------------------------

def test_metric_report_aggregates_are_means():
    stats = [EpisodeStats(True, 4.0, 4.0), EpisodeStats(False, 4.0, 1.0)]
    report = MetricReport.aggregate("val_unseen", [3.0, 1.0], stats,
                                    bleu_values=[1.0, 0.0], rouge_values=[1.0, 0.5])
    assert report.count == 2
    assert report.gp == pytest.approx(2.0)
    assert report.sr == pytest.approx(0.5)
    assert report.spl == pytest.approx(0.5)
    assert report.pwsr == report.spl
    assert report.bleu2 == pytest.approx(0.5)
    assert report.rouge_l == pytest.approx(0.75)
    assert 0.0 <= report.sr <= 1.0 and 0.0 <= report.spl <= 1.0
