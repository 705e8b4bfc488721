"""Command-line entry points: batch simulation, live campaigns, one-shot decoding."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .campaign import AWAITING, EXHAUSTED, CampaignStore
from .core import Group, GroupBatch, NoiseModel, Prior
from .decoder import hybrid_decode
from .posterior import SmcConfig
from .simulator import SimulationConfig, run_batch, write_trajectories
from .streams import DECODE, stream


@click.group()
def main():
    """Adaptive group testing: simulate policies or run live campaigns."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--runs", default=100, show_default=True, help="Monte Carlo repetitions.")
@click.option("--seed", default=0, show_default=True, help="Master seed; run i derives from (seed, i).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--parallelism", default=1, show_default=True, help="Worker processes; results are order-stable.")
@click.option(
    "--thresholds",
    default="0.03,0.10",
    show_default=True,
    help="Comma-separated marginal cutoffs for the metrics table.",
)
def simulate(config_path, runs, seed, out_dir, parallelism, thresholds):
    """Run a policy on synthetic cohorts and write metrics.csv + trajectories.jsonl."""
    with open(config_path) as fh:
        config = SimulationConfig.from_dict(json.load(fh))
    cuts = tuple(float(t) for t in thresholds.split(","))
    table, trajectories = run_batch(config, runs, seed, parallelism=parallelism, thresholds=cuts)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectories(out / "trajectories.jsonl", trajectories)
    name = config.policy.get("name", "policy")
    (out / "metrics.csv").write_text(table.to_csv())
    final = [r for r in table.rows if r.cycle == config.cycles]
    for row in final:
        sens = "n/a" if row.mean_sensitivity is None else f"{row.mean_sensitivity:.4f}"
        spec = "n/a" if row.mean_specificity is None else f"{row.mean_specificity:.4f}"
        click.echo(
            f"{name} cycle={row.cycle} threshold={row.threshold:g} "
            f"sensitivity={sens} specificity={spec} runs={row.n_runs}"
        )
    click.echo(f"wrote {out / 'metrics.csv'} and {out / 'trajectories.jsonl'}")


@main.group()
def campaign():
    """Live campaigns backed by an append-only event log."""


@campaign.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data", "data_dir", default="./campaigns", show_default=True, type=click.Path(file_okay=False))
@click.option("--ui", "ui_dir", default=None, type=click.Path(file_okay=False), help="Static console to mount at /ui.")
def serve(port, host, data_dir, ui_dir):
    """Serve the campaign HTTP API."""
    import uvicorn

    from .service import create_app

    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    uvicorn.run(create_app(data_dir, ui_dir), host=host, port=port)


@campaign.command()
@click.option("--id", "campaign_id", required=True)
@click.option("--data", "data_dir", default="./campaigns", show_default=True, type=click.Path(file_okay=False))
def step(campaign_id, data_dir):
    """Propose the next batch, read outcomes from stdin, fold them in."""
    store = CampaignStore(data_dir)
    state = store.get(campaign_id)
    if state.status == EXHAUSTED:
        click.echo("campaign is exhausted; nothing to propose")
        return
    if state.status != AWAITING:
        state = store.propose(campaign_id)
        if state.status == EXHAUSTED:
            click.echo("policy proposed no further tests; campaign exhausted")
            return
    assert state.pending is not None
    click.echo(f"proposal {state.pending_seq} ({state.pending.k} tests):")
    for idx, members in enumerate(state.pending.member_lists()):
        click.echo(f"  test {idx}: individuals {' '.join(map(str, members))}")
    raw = click.prompt(f"enter {state.pending.k} outcomes (0/1, space-separated)")
    outcomes = [int(tok) for tok in raw.replace(",", " ").split()]
    state = store.submit(campaign_id, outcomes, state.pending_seq)
    ranked = np.argsort(-state.marginal, kind="stable")[:10]
    click.echo(f"cycle {state.cycle} complete; top marginals:")
    for i in ranked:
        click.echo(f"  individual {i}: {state.marginal[i]:.4f}")


@main.command()
@click.option("--tests", "tests_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n", required=True, type=int, help="Cohort size.")
@click.option("--q", default=0.05, show_default=True, help="Shared prior infection rate.")
@click.option("--specificity", default=0.97, show_default=True)
@click.option("--sensitivity", default=0.85, show_default=True)
@click.option("--seed", default=0, show_default=True)
def decode(tests_path, n, q, specificity, sensitivity, seed):
    """Posterior marginals for recorded tests (one "i j k : outcome" line each)."""
    groups: list[Group] = []
    outcomes: list[int] = []
    with open(tests_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if ":" not in text:
                raise click.ClickException(
                    f"{tests_path}:{lineno}: expected 'members : outcome'"
                )
            left, right = text.rsplit(":", 1)
            members = [int(tok) for tok in left.replace(",", " ").split()]
            if not members:
                raise click.ClickException(f"{tests_path}:{lineno}: empty group")
            outcome = int(right.strip())
            if outcome not in (0, 1):
                raise click.ClickException(f"{tests_path}:{lineno}: outcome must be 0 or 1")
            groups.append(Group(members))
            outcomes.append(outcome)
    if not groups:
        raise click.ClickException("no tests found in input")
    n_max = max(g.size for g in groups)
    prior = Prior.uniform(n, q)
    noise = NoiseModel(np.full(n_max, specificity), np.full(n_max, sensitivity))
    marginal = hybrid_decode(
        GroupBatch(groups),
        np.asarray(outcomes, dtype=np.uint8),
        noise,
        prior,
        SmcConfig(),
        stream(seed, 1, DECODE),
    )
    for i, value in enumerate(marginal):
        click.echo(f"{i}\t{value:.6f}")


if __name__ == "__main__":
    sys.exit(main())
