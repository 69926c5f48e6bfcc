"""Throwaway prototype of the training/eval loop to validate learning-signal targets."""
import sys
import time

import numpy as np

from r2h import helper as H
from r2h import neuralcore as nc
from r2h.baselines import EmptyHelper, OracleHelper
from r2h.dialog import run_rdh_episode
from r2h.parse_step import rule_parse, steps_to_target
from r2h.performer import PerformerConfig
from r2h.tasks import SynthesisParams, synthesize_tasks
from r2h.world import WorldParams, generate_world, sample_observations

SEED = int(sys.argv[1])
COS = sys.argv[2] != "off"
ITER = int(sys.argv[3])
MAX_EDGES = int(sys.argv[4]) if len(sys.argv) > 4 else 3
TURN = int(sys.argv[5]) if len(sys.argv) > 5 else 0  # eval turn index

cfg = H.HelperConfig(seed=SEED, cos_mask=COS, iterations=ITER)
synth = SynthesisParams(max_path_edges=MAX_EDGES)
t0 = time.time()

train_worlds = [generate_world(1000 + i, WorldParams(node_count=30)) for i in range(40)]
unseen_worlds = [generate_world(9000 + i, WorldParams(node_count=30), split_tag="val_unseen") for i in range(5)]
train_tasks = [(g, t) for i, g in enumerate(train_worlds) for t in synthesize_tasks(g, seed=500 + i, n=20, params=synth)]
unseen_tasks = [(g, t) for i, g in enumerate(unseen_worlds) for t in synthesize_tasks(g, seed=7 + i, n=20, params=synth)]

texts, triples = [], []
for g, task in train_tasks:
    for turn in task.turns:
        obs = sample_observations(g, turn.performer_node, task.goal_node, cfg.window, cfg.t_frames)
        target = steps_to_target(rule_parse(turn.response))
        texts += [turn.inquiry, target]
        triples.append((turn.inquiry, target, obs))
vocab = H.Vocabulary.build(texts, cfg.max_vocab)
examples = [H.encode_example(vocab, cfg, iq, tg, obs) for iq, tg, obs in triples]
print(f"examples {len(examples)}, vocab {len(vocab)}, prep {time.time()-t0:.1f}s", flush=True)

noiseless = PerformerConfig(noise=0.0)

def eval_gp(h):
    gps, wins = [], 0
    for i, (g, task) in enumerate(unseen_tasks):
        res = run_rdh_episode(g, task, min(TURN, len(task.turns) - 1), h, noiseless, seed=i)
        gps.append(res.gp)
        wins += res.success
    return float(np.mean(gps)), wins / len(unseen_tasks)

params = H.init_params(cfg, len(vocab))
opt = nc.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
rng = np.random.default_rng(cfg.seed)
for step in range(1, cfg.iterations + 1):
    idx = rng.integers(0, len(examples), size=cfg.batch_size)
    batch = H.assemble_batch([examples[int(i)] for i in idx], cfg, len(vocab), seed=step)
    lm, ls = H.train_step(batch, params, opt, cfg)
    if step % 1000 == 0:
        gp, sr = eval_gp(H.NeuralHelper(params, cfg, vocab))
        print(f"step {step}: mlm {lm:.4f} sparse {ls:.4f} | unseen GP {gp:.3f} SR {sr:.3f} ({time.time()-t0:.0f}s)", flush=True)

helper = H.NeuralHelper(params, cfg, vocab)
gp_model, sr_model = eval_gp(helper)
gp_oracle, _ = eval_gp(None) if False else (0.0, 0.0)
oracle_gps, empty_gps = [], []
for i, (g, task) in enumerate(unseen_tasks):
    oracle_gps.append(run_rdh_episode(g, task, min(TURN, len(task.turns) - 1), OracleHelper(g, task), noiseless, seed=i).gp)
    empty_gps.append(run_rdh_episode(g, task, min(TURN, len(task.turns) - 1), EmptyHelper(), noiseless, seed=i).gp)
gp_oracle, gp_empty = float(np.mean(oracle_gps)), float(np.mean(empty_gps))

for g, task in unseen_tasks[:3]:
    turn = task.turns[min(TURN, len(task.turns) - 1)]
    obs = sample_observations(g, turn.performer_node, task.goal_node, cfg.window, cfg.t_frames)
    print("  oracle:", turn.response)
    print("  model :", helper.respond(turn.inquiry, obs, None))

print(f"RESULT seed={SEED} cos={COS} edges={MAX_EDGES} turn={TURN}: "
      f"model GP {gp_model:.3f} SR {sr_model:.3f} | oracle {gp_oracle:.3f} | empty {gp_empty:.3f} | "
      f"bar {gp_empty + 0.5 * (gp_oracle - gp_empty):.3f} | {time.time()-t0:.0f}s", flush=True)
