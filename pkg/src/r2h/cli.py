"""Command-line interface: data generation, training, benchmarking, parsing, serving."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import (
    BenchError,
    build_benchmark,
    format_table,
    load_config,
    run_ablation,
    run_suite,
    train_from_config,
)
from .parse_step import (
    ParseStepError,
    RemoteBackend,
    RuleBackend,
    parse_by_step,
    steps_to_target,
)
from .tasks import DatasetError, SynthesisParams, save_dataset, synthesize_tasks
from .world import SPLIT_TAGS, WorldGraph, WorldParams, generate_world


@click.group()
def cli() -> None:
    """Benchmark harness for conversational navigation helpers."""


@cli.command("gen-worlds")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--count", default=10, show_default=True)
@click.option("--nodes", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--split", default="train", type=click.Choice(SPLIT_TAGS), show_default=True)
def gen_worlds(out_dir: Path, count: int, nodes: int, seed: int, split: str) -> None:
    """Generate synthetic worlds as one JSON file each."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        g = generate_world(seed + i, WorldParams(node_count=nodes),
                           world_id=f"{split}-{seed + i:05d}", split_tag=split)
        g.save(out_dir / f"{g.world_id}.json")
    click.echo(f"wrote {count} worlds to {out_dir}")


@cli.command("gen-tasks")
@click.option("--worlds", "worlds_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--per-world", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-path-edges", default=3, show_default=True)
def gen_tasks(worlds_dir: Path, out_path: Path, per_world: int, seed: int,
              max_path_edges: int) -> None:
    """Synthesize tasks with oracle dialogs for every world in a directory."""
    params = SynthesisParams(max_path_edges=max_path_edges)
    tasks = []
    world_files = sorted(worlds_dir.glob("*.json"))
    if not world_files:
        raise BenchError(f"no world files in {worlds_dir}")
    for i, path in enumerate(world_files):
        g = WorldGraph.load(path)
        tasks.extend(synthesize_tasks(g, seed=seed + i, n=per_world, params=params))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(tasks, out_path)
    click.echo(f"wrote {len(tasks)} tasks to {out_path}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def train(config_path: Path) -> None:
    """Train the helper per the [train] section of a bench config."""
    cfg = load_config(config_path)

    def progress(entry: dict) -> None:
        click.echo("  " + json.dumps(entry, sort_keys=True))

    result = train_from_config(cfg, progress=progress)
    click.echo(f"checkpoint: {result.checkpoint_path} "
               f"(best step {result.best_step}, val GP {result.best_gp:.3f})")


@cli.command("bench")
@click.argument("task_type", type=click.Choice(["rdh", "rdi"]))
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def bench_cmd(task_type: str, config_path: Path) -> None:
    """Run an evaluation suite and print the metric table."""
    from dataclasses import replace

    cfg = replace(load_config(config_path), task=task_type)
    report = run_suite(cfg)
    click.echo(format_table(report.reports), nl=False)
    if cfg.out_dir:
        click.echo(f"report written to {cfg.out_dir}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
def ablate(config_path: Path) -> None:
    """Train and evaluate the 2x2 COS-mask x Parse-by-Step grid."""
    cfg = load_config(config_path)
    doc = run_ablation(cfg)
    for name in sorted(doc["cells"]):
        cell = doc["cells"][name]
        unseen = cell["metrics"].get("val_unseen", {})
        click.echo(f"{name}: unseen GP {unseen.get('gp', float('nan')):.3f} "
                   f"SR {unseen.get('sr', float('nan')):.3f}")
    click.echo(f"ablation report in {cfg.out_dir or 'runs/ablation'}")


@cli.command("parse")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--backend", default="rule", type=click.Choice(["rule", "remote"]),
              show_default=True)
@click.option("--endpoint", default=None, help="remote completion endpoint URL")
@click.option("--timeout", default=10.0, show_default=True)
def parse_cmd(in_path: Path, out_path: Path, backend: str, endpoint: str | None,
              timeout: float) -> None:
    """Normalize JSONL responses ({"response": ...}) into step lists."""
    if backend == "remote":
        if not endpoint:
            raise ParseStepError("remote backend requires --endpoint")
        chosen = RemoteBackend(endpoint=endpoint, timeout=timeout)
    else:
        chosen = RuleBackend()
    count = 0
    with open(in_path) as src, open(out_path, "w") as dst:
        for lineno, line in enumerate(src, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            text = doc.get("response", doc.get("text"))
            if not text:
                raise DatasetError(f"line {lineno}: no 'response' or 'text' field")
            steps = parse_by_step(text, chosen)
            doc["steps"] = [s.text for s in steps]
            doc["target"] = steps_to_target(steps)
            dst.write(json.dumps(doc, sort_keys=True) + "\n")
            count += 1
    click.echo(f"parsed {count} responses to {out_path}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--checkpoint", default=None, type=click.Path(path_type=Path),
              help="helper checkpoint served as helper='model'")
@click.option("--ui", "ui_dir", default=None, type=click.Path(path_type=Path),
              help="static web client directory (defaults to ./frontend/dist)")
@click.option("--results-log", default="runs/human/results.jsonl", show_default=True)
def serve(config_path: Path, port: int, host: str, checkpoint: Path | None,
          ui_dir: Path | None, results_log: str) -> None:
    """Serve the human-performer session API and web client."""
    import uvicorn

    from .helper import NeuralHelper
    from .ui_gateway import Gateway, create_app

    cfg = load_config(config_path)
    bench = build_benchmark(cfg.data)
    neural = NeuralHelper.load(checkpoint) if checkpoint else None
    if ui_dir is None and Path("frontend/dist").exists():
        ui_dir = Path("frontend/dist")
    gateway = Gateway(bench, results_log, neural=neural,
                      success_radius=cfg.episode.success_radius,
                      window=cfg.episode.window, t_frames=cfg.episode.t_frames)
    app = create_app(gateway, ui_dir=ui_dir)
    click.echo(f"serving on http://{host}:{port} (ui: {ui_dir or 'none'})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main() -> None:
    """Entry point with structured error reporting and exit codes."""
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as err:
        err.show()
        sys.exit(err.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except Exception as err:  # noqa: BLE001 - structured CLI error surface
        print(json.dumps({"code": type(err).__name__, "message": str(err)}),
              file=sys.stderr)
        sys.exit(2)


if __name__ == "__main__":
    main()
