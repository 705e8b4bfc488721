"""Policy simulation harness.

Each run draws a hidden truth, then alternates policy proposals, noisy
outcome sampling, optional particle-posterior maintenance (only for
policies that consume it) and hybrid decoding, for a fixed number of
cycles.  Truth parameters and the parameters the policy/decoder believe
in are deliberately separate so misspecification studies are just two
different config blocks.

Every stochastic consumer draws from its own (seed, cycle, label)
stream, so a run is reproducible bit for bit, independent of batching
or parallelism, and a run's policy-side streams can be replayed by a
live campaign fed the same outcomes.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import streams
from .core import GroupBatch, NoiseModel, Prior, sample_outcomes
from .decoder import hybrid_decode
from .policies import Policy, PolicyContext, build_policy
from .posterior import SequentialPosterior, SmcConfig

TRAJECTORY_VERSION = 1


@dataclass(frozen=True)
class DecoderConfig:
    max_iterations: int = 1000
    tolerance: float = 0.02


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    k: int
    cycles: int
    n_max: int
    truth_prior: Prior
    truth_noise: NoiseModel
    policy_prior: Prior
    policy_noise: NoiseModel
    policy: dict
    smc: SmcConfig = SmcConfig()
    decoder: DecoderConfig = DecoderConfig()

    def __post_init__(self):
        if self.truth_prior.n != self.n or self.policy_prior.n != self.n:
            raise ValueError("prior lengths must match n")
        for noise in (self.truth_noise, self.policy_noise):
            if noise.n_max < self.n_max:
                raise ValueError("noise tables must cover pool sizes up to n_max")
        if self.k < 1 or self.cycles < 1:
            raise ValueError("k and cycles must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimulationConfig":
        n = int(raw["n"])
        n_max = int(raw["n_max"])
        truth = raw.get("truth", {})
        model = raw.get("policy_model", truth)
        return cls(
            n=n,
            k=int(raw["k"]),
            cycles=int(raw["cycles"]),
            n_max=n_max,
            truth_prior=_prior_from(truth, n),
            truth_noise=_noise_from(truth.get("noise", {}), n_max),
            policy_prior=_prior_from(model, n),
            policy_noise=_noise_from(model.get("noise", {}), n_max),
            policy=dict(raw.get("policy", {"name": "random"})),
            smc=SmcConfig(**raw.get("smc", {})),
            decoder=DecoderConfig(**raw.get("decoder", {})),
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "cycles": self.cycles,
            "n_max": self.n_max,
            "truth": {
                "rates": self.truth_prior.rates.tolist(),
                "noise": _noise_to_dict(self.truth_noise),
            },
            "policy_model": {
                "rates": self.policy_prior.rates.tolist(),
                "noise": _noise_to_dict(self.policy_noise),
            },
            "policy": dict(self.policy),
            "smc": vars(self.smc).copy(),
            "decoder": vars(self.decoder).copy(),
        }


def _prior_from(block: dict, n: int) -> Prior:
    if "rates" in block:
        rates = np.asarray(block["rates"], dtype=float)
        if rates.size != n:
            raise ValueError("per-individual rates must have length n")
        return Prior(rates)
    return Prior.uniform(n, float(block.get("q", 0.05)))


def _noise_from(block: dict, n_max: int) -> NoiseModel:
    def table(v, default):
        if v is None:
            v = default
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 0:
            return np.full(n_max, float(arr))
        if arr.size < n_max:
            raise ValueError("noise table shorter than n_max")
        return arr[:n_max]

    return NoiseModel(
        table(block.get("specificity"), 0.97), table(block.get("sensitivity"), 0.85)
    )


def _noise_to_dict(noise: NoiseModel) -> dict:
    return {
        "specificity": noise.specificity.tolist(),
        "sensitivity": noise.sensitivity.tolist(),
    }


@dataclass(frozen=True)
class CycleRecord:
    batch: GroupBatch
    outcomes: np.ndarray
    marginal: np.ndarray
    elapsed: float


@dataclass(frozen=True)
class Trajectory:
    run_index: int
    seed: int
    x_truth: np.ndarray
    records: tuple[CycleRecord, ...]

    def to_dict(self) -> dict:
        return {
            "version": TRAJECTORY_VERSION,
            "run": self.run_index,
            "seed": self.seed,
            "truth": self.x_truth.astype(int).tolist(),
            "cycles": [
                {
                    "groups": rec.batch.member_lists(),
                    "outcomes": rec.outcomes.astype(int).tolist(),
                    "marginal": [float(v) for v in rec.marginal],
                    "elapsed": rec.elapsed,
                }
                for rec in self.records
            ],
        }


def run_simulation(config: SimulationConfig, seed: int, run_index: int = 0) -> Trajectory:
    """One complete campaign against a sampled truth; exactly `cycles` records."""
    rng_truth = streams.stream(seed, 0, streams.TRUTH)
    x_truth = (rng_truth.random(config.n) < config.truth_prior.rates).astype(np.uint8)
    policy = build_policy(config.policy, config.n, config.n_max, config.k)
    posterior = None
    if policy.needs_posterior:
        posterior = SequentialPosterior(
            config.policy_prior,
            config.policy_noise,
            config.smc,
            streams.stream(seed, 0, streams.PARTICLES),
        )
    history: list[tuple[GroupBatch, np.ndarray]] = []
    marginal = config.policy_prior.rates.copy()
    records: list[CycleRecord] = []
    for t in range(1, config.cycles + 1):
        started = time.perf_counter()
        ctx = PolicyContext(
            t=t,
            n=config.n,
            n_max=config.n_max,
            budget=config.k,
            history=history,
            pending=(),
            prior=config.policy_prior,
            noise=config.policy_noise,
            marginal=marginal,
            posterior=posterior.cloud if posterior is not None else None,
            rng=streams.stream(seed, t, streams.SELECT),
        )
        batch = policy.step(ctx, config.k)
        outcomes = sample_outcomes(
            batch, x_truth, config.truth_noise, streams.stream(seed, t, streams.NOISE)
        )
        if posterior is not None:
            posterior.update(batch, outcomes, streams.stream(seed, t, streams.SMC))
        history.append((batch, outcomes))
        flat_batch, flat_y = flatten_history(history)
        marginal = hybrid_decode(
            flat_batch,
            flat_y,
            config.policy_noise,
            config.policy_prior,
            config.smc,
            streams.stream(seed, t, streams.DECODE),
            config.decoder.max_iterations,
            config.decoder.tolerance,
        )
        records.append(
            CycleRecord(batch, outcomes, marginal, time.perf_counter() - started)
        )
    return Trajectory(run_index, seed, x_truth, tuple(records))


def flatten_history(
    history: Sequence[tuple[GroupBatch, np.ndarray]]
) -> tuple[GroupBatch, np.ndarray]:
    groups = tuple(g for batch, _ in history for g in batch)
    outcomes = (
        np.concatenate([np.asarray(y, dtype=np.uint8) for _, y in history])
        if history
        else np.zeros(0, dtype=np.uint8)
    )
    return GroupBatch(groups), outcomes


def sensitivity_specificity(
    marginal: np.ndarray, threshold: float, truth: np.ndarray
) -> tuple[float | None, float | None]:
    """Per-run confusion rates; None when a class is empty (undefined, not an error)."""
    marginal = np.asarray(marginal, dtype=float)
    truth = np.asarray(truth).astype(bool)
    flagged = marginal > threshold
    pos = int(truth.sum())
    neg = truth.size - pos
    sens = float((flagged & truth).sum() / pos) if pos else None
    spec = float((~flagged & ~truth).sum() / neg) if neg else None
    return sens, spec


@dataclass(frozen=True)
class MetricsRow:
    policy: str
    cycle: int
    threshold: float
    mean_sensitivity: float | None
    mean_specificity: float | None
    n_runs: int
    n_sens_defined: int


@dataclass(frozen=True)
class MetricsTable:
    rows: tuple[MetricsRow, ...]

    def to_csv(self) -> str:
        lines = ["policy,cycle,threshold,mean_sensitivity,mean_specificity,n_runs,n_sens_defined"]
        for r in self.rows:
            sens = "" if r.mean_sensitivity is None else repr(r.mean_sensitivity)
            spec = "" if r.mean_specificity is None else repr(r.mean_specificity)
            lines.append(
                f"{r.policy},{r.cycle},{r.threshold!r},{sens},{spec},{r.n_runs},{r.n_sens_defined}"
            )
        return "\n".join(lines) + "\n"

    def lookup(self, cycle: int, threshold: float) -> MetricsRow:
        for r in self.rows:
            if r.cycle == cycle and r.threshold == threshold:
                return r
        raise KeyError((cycle, threshold))


def aggregate_metrics(
    policy_name: str, trajectories: Sequence[Trajectory], thresholds: Sequence[float]
) -> MetricsTable:
    rows = []
    if not trajectories:
        return MetricsTable(())
    cycles = len(trajectories[0].records)
    for cycle in range(1, cycles + 1):
        for threshold in thresholds:
            sens_vals, spec_vals = [], []
            for tr in trajectories:
                sens, spec = sensitivity_specificity(
                    tr.records[cycle - 1].marginal, threshold, tr.x_truth
                )
                if sens is not None:
                    sens_vals.append(sens)
                if spec is not None:
                    spec_vals.append(spec)
            rows.append(
                MetricsRow(
                    policy=policy_name,
                    cycle=cycle,
                    threshold=float(threshold),
                    mean_sensitivity=float(np.mean(sens_vals)) if sens_vals else None,
                    mean_specificity=float(np.mean(spec_vals)) if spec_vals else None,
                    n_runs=len(trajectories),
                    n_sens_defined=len(sens_vals),
                )
            )
    return MetricsTable(tuple(rows))


def _simulate_one(args: tuple) -> Trajectory:
    config, master_seed, index = args
    return run_simulation(config, streams.run_seed(master_seed, index), run_index=index)


def run_batch(
    config: SimulationConfig,
    runs: int,
    master_seed: int,
    parallelism: int = 1,
    thresholds: Sequence[float] = (0.03, 0.10),
) -> tuple[MetricsTable, list[Trajectory]]:
    """Simulate `runs` independent campaigns; results don't depend on parallelism.

    Run i always uses the stream family derived from (master_seed, i)
    and results are aggregated in run order, so any worker count gives
    byte-identical metrics and trajectories.
    """
    jobs = [(config, master_seed, i) for i in range(runs)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            trajectories = list(pool.map(_simulate_one, jobs, chunksize=1))
    else:
        trajectories = [_simulate_one(job) for job in jobs]
    name = config.policy.get("name", "policy")
    return aggregate_metrics(name, trajectories, thresholds), trajectories


def frontier(
    trajectories: Sequence[Trajectory], cycle: int, thresholds: Iterable[float]
) -> list[tuple[float, float | None, float | None]]:
    """(threshold, mean specificity, mean sensitivity) sweep at one cycle."""
    out = []
    for threshold in thresholds:
        sens_vals, spec_vals = [], []
        for tr in trajectories:
            sens, spec = sensitivity_specificity(
                tr.records[cycle - 1].marginal, threshold, tr.x_truth
            )
            if sens is not None:
                sens_vals.append(sens)
            if spec is not None:
                spec_vals.append(spec)
        out.append(
            (
                float(threshold),
                float(np.mean(spec_vals)) if spec_vals else None,
                float(np.mean(sens_vals)) if sens_vals else None,
            )
        )
    return out


def write_trajectories(path: str | Path, trajectories: Sequence[Trajectory]):
    with open(path, "w") as fh:
        for tr in trajectories:
            fh.write(json.dumps(tr.to_dict()) + "\n")


def read_trajectories(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
