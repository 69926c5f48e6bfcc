"""Property tests for the spec invariants that quantify over inputs."""
from __future__ import annotations

from hypothesis import given, settings, strategies as st

from r2h.helper import Vocabulary
from r2h.metrics import EpisodeStats, bleu2, goal_progress, rouge_l, spl
from r2h.parse_step import rule_parse, steps_to_target
from r2h.performer import PerformerConfig, ScriptedPerformer
from r2h.tasks import synthesize_tasks
from r2h.world import (
    NavState,
    WorldParams,
    apply_action,
    generate_world,
    sample_observations,
    shortest_path,
)

WORDS = st.sampled_from(
    "go walk head turn the kitchen lobby garage plant sofa left right stop at to".split())
STEP = st.lists(WORDS, min_size=2, max_size=6).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(STEP, min_size=1, max_size=5))
def test_parse_idempotence_on_formatted_steps(clauses):
    formatted = " ".join(f"{i + 1}. {c}." for i, c in enumerate(clauses))
    first = rule_parse(formatted)
    second = rule_parse(steps_to_target(first))
    assert [s.text for s in second] == [s.text for s in first]


@settings(max_examples=60, deadline=None)
@given(st.lists(STEP, min_size=1, max_size=5))
def test_target_tokenize_detokenize_roundtrip(clauses):
    # training targets survive the tokenizer exactly (pipeline equality)
    target = steps_to_target(rule_parse(" , then ".join(clauses) + "."))
    vocab = Vocabulary.build([target], max_size=256)
    assert vocab.decode(vocab.encode(target)) == target


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(st.booleans(), st.floats(0.1, 50.0), st.floats(0.0, 100.0)),
    min_size=1, max_size=40))
def test_spl_bounded_by_success_rate(rows):
    stats = [EpisodeStats(s, l, p) for s, l, p in rows]
    sr = sum(e.success for e in stats) / len(stats)
    value = spl(stats)
    assert 0.0 <= value <= sr + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.text(alphabet="abcdef ", min_size=0, max_size=40),
       st.text(alphabet="abcdef ", min_size=0, max_size=40))
def test_language_metrics_bounded(cand, ref):
    assert 0.0 <= bleu2(cand, [ref]) <= 1.0
    assert 0.0 <= rouge_l(cand, ref) <= 1.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 500), st.integers(0, 11), st.integers(0, 11), st.integers(0, 11))
def test_goal_progress_antisymmetric(seed, a, b, goal):
    g = generate_world(seed % 5, WorldParams(node_count=12))
    ids = [vp.id for vp in g.nodes]
    start, end, target = ids[a], ids[b], ids[goal]
    assert goal_progress(g, start, end, target) == -goal_progress(g, end, start, target)
    _, bound = shortest_path(g, start, target)
    assert goal_progress(g, start, end, target) <= bound + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 4), st.integers(0, 10_000))
def test_random_walks_never_teleport(world_seed, walk_seed):
    import numpy as np

    g = generate_world(world_seed, WorldParams(node_count=10))
    rng = np.random.default_rng(walk_seed)
    state = NavState.initial(g, g.nodes[int(rng.integers(len(g.nodes)))].id)
    for _ in range(12):
        nbs = g.neighbors(state.current_node)
        target = nbs[int(rng.integers(len(nbs)))][0]
        from r2h.world import Action
        state = apply_action(g, state, Action.move(target))
    for a, b in zip(state.path_taken, state.path_taken[1:]):
        assert any(nb == b for nb, _ in g.neighbors(a))
    total = sum(
        next(w for nb, w in g.neighbors(a) if nb == b)
        for a, b in zip(state.path_taken, state.path_taken[1:]))
    assert abs(total - state.distance_traveled) < 1e-9


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200))
def test_sampler_frame_counts(world_seed, task_seed):
    g = generate_world(world_seed % 6, WorldParams(node_count=18))
    tasks = synthesize_tasks(g, seed=task_seed, n=3)
    for task in tasks:
        path, _ = shortest_path(g, task.start_node, task.goal_node)
        obs = sample_observations(g, task.start_node, task.goal_node,
                                  window=5, t_frames=16)
        assert obs.frames.shape[0] == 16
        assert obs.valid_count == min(5, len(path))
        assert list(obs.validity[obs.valid_count:]) == [False] * (16 - obs.valid_count)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 300))
def test_recorded_oracle_dialogs_replay_to_goal(seed):
    # every recorded turn's styled response, parsed and executed noiselessly
    # from its turn position, ends at the goal along an exact shortest path
    g = generate_world(seed % 4 + 50, WorldParams(node_count=22))
    for task in synthesize_tasks(g, seed=seed, n=4):
        for turn in task.turns:
            performer = ScriptedPerformer(g, task.goal_node, PerformerConfig())
            performer.consume_response(turn.response)
            state = NavState.initial(g, turn.performer_node)
            while True:
                action = performer.next_action(state)
                if action is None:
                    break
                state = apply_action(g, state, action)
                if action.kind == "stop":
                    break
            assert state.current_node == task.goal_node
            _, shortest = shortest_path(g, turn.performer_node, task.goal_node)
            assert state.distance_traveled == shortest
