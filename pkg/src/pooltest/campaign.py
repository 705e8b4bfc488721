"""Live testing campaigns.

A campaign is the interactive twin of a simulated run: same policy
engine, same posterior updates, same decoder, but outcomes arrive from
the outside world.  All state derives from an append-only JSON-lines
event log (created / proposed / observed, strictly alternating after
creation), so reloading a campaign replays the log through the exact
code paths that produced it; with the campaign's fixed seed feeding the
same per-cycle streams, the replayed state is byte-identical.

Events are persisted before any in-memory state mutates.  Submissions
are computed on the side first: if the evidence is degenerate (only
possible with noiseless assays) nothing is written and the campaign is
left untouched.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import streams
from .core import GroupBatch, NoiseModel, Prior, as_outcomes
from .decoder import hybrid_decode
from .policies import Policy, PolicyContext, build_policy
from .posterior import (
    DegenerateEvidenceError,
    ParticlePosterior,
    SmcConfig,
    prior_particles,
    smc_update,
)
from .simulator import DecoderConfig, _noise_from, _noise_to_dict, _prior_from, flatten_history

READY = "ready-to-propose"
AWAITING = "awaiting-results"
EXHAUSTED = "exhausted"

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class CampaignError(Exception):
    """Base for campaign-layer failures; kind drives the HTTP status mapping."""

    kind = "invalid"


class UnknownCampaignError(CampaignError):
    kind = "not-found"


class DuplicateCampaignError(CampaignError):
    kind = "conflict"


class WrongStatusError(CampaignError):
    kind = "conflict"


class StaleSubmissionError(CampaignError):
    kind = "conflict"


class DegenerateSubmissionError(CampaignError):
    kind = "conflict"


class CorruptLogError(CampaignError):
    kind = "invalid"


@dataclass(frozen=True)
class CampaignConfig:
    id: str
    seed: int
    n: int
    k: int
    n_max: int
    prior: Prior
    noise: NoiseModel
    policy: dict
    smc: SmcConfig = SmcConfig()
    decoder: DecoderConfig = DecoderConfig()

    def __post_init__(self):
        if not _ID_RE.match(self.id):
            raise ValueError("campaign id must match [A-Za-z0-9_-]{1,64}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.prior.n != self.n:
            raise ValueError("prior length must match n")
        if self.noise.n_max < self.n_max:
            raise ValueError(f"noise tables must cover pool sizes up to n_max={self.n_max}")
        if self.k < 1:
            raise ValueError("k must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "CampaignConfig":
        for key in ("id", "seed", "n", "k", "n_max"):
            if key not in raw:
                raise ValueError(f"missing required field {key!r}")
        n = int(raw["n"])
        n_max = int(raw["n_max"])
        return cls(
            id=str(raw["id"]),
            seed=int(raw["seed"]),
            n=n,
            k=int(raw["k"]),
            n_max=n_max,
            prior=_prior_from(raw, n),
            noise=_noise_from(raw.get("noise", {}), n_max),
            policy=dict(raw.get("policy", {"name": "random"})),
            smc=SmcConfig(**raw.get("smc", {})),
            decoder=DecoderConfig(**raw.get("decoder", {})),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "n": self.n,
            "k": self.k,
            "n_max": self.n_max,
            "rates": self.prior.rates.tolist(),
            "noise": _noise_to_dict(self.noise),
            "policy": dict(self.policy),
            "smc": vars(self.smc).copy(),
            "decoder": vars(self.decoder).copy(),
        }


class Campaign:
    """In-memory campaign state; every transition flows through apply_* methods."""

    def __init__(self, config: CampaignConfig):
        self.config = config
        self.policy: Policy = build_policy(config.policy, config.n, config.n_max, config.k)
        self.cloud: ParticlePosterior | None = None
        if self.policy.needs_posterior:
            self.cloud = prior_particles(
                config.prior,
                config.smc.num_particles,
                streams.stream(config.seed, 0, streams.PARTICLES),
            )
        self.history: list[tuple[GroupBatch, np.ndarray]] = []
        self.marginal: np.ndarray = config.prior.rates.copy()
        self.status = READY
        self.pending: GroupBatch | None = None
        self.pending_seq: int | None = None
        self.next_seq = 1  # seq 0 is the created event

    @property
    def cycle(self) -> int:
        return len(self.history)

    def compute_proposal(self) -> GroupBatch:
        t = self.cycle + 1
        ctx = PolicyContext(
            t=t,
            n=self.config.n,
            n_max=self.config.n_max,
            budget=self.config.k,
            history=self.history,
            pending=(),
            prior=self.config.prior,
            noise=self.config.noise,
            marginal=self.marginal,
            posterior=self.cloud,
            rng=streams.stream(self.config.seed, t, streams.SELECT),
        )
        return self.policy.step(ctx, self.config.k)

    def apply_proposed(self, batch: GroupBatch, seq: int):
        if batch.k == 0:
            self.status = EXHAUSTED
            self.pending = None
            self.pending_seq = None
        else:
            self.pending = batch
            self.pending_seq = seq
            self.status = AWAITING
        self.next_seq = seq + 1

    def compute_observation(self, outcomes) -> tuple[ParticlePosterior | None, np.ndarray]:
        """Posterior/marginal after the pending batch's outcomes; no state is touched."""
        assert self.pending is not None
        t = self.cycle + 1
        y = as_outcomes(outcomes, self.pending.k)
        cloud = self.cloud
        if cloud is not None:
            cloud, _ = smc_update(
                cloud,
                self.pending,
                y,
                self.config.noise,
                self.config.smc,
                streams.stream(self.config.seed, t, streams.SMC),
                prior=self.config.prior,
                history=self.history,
            )
        flat_batch, flat_y = flatten_history(self.history + [(self.pending, y)])
        marginal = hybrid_decode(
            flat_batch,
            flat_y,
            self.config.noise,
            self.config.prior,
            self.config.smc,
            streams.stream(self.config.seed, t, streams.DECODE),
            self.config.decoder.max_iterations,
            self.config.decoder.tolerance,
        )
        return cloud, marginal

    def apply_observed(
        self, outcomes, seq: int, cloud: ParticlePosterior | None, marginal: np.ndarray
    ):
        assert self.pending is not None
        y = as_outcomes(outcomes, self.pending.k)
        self.history.append((self.pending, y))
        self.cloud = cloud
        self.marginal = marginal
        self.pending = None
        self.pending_seq = None
        self.status = READY
        self.next_seq = seq + 1

    def tests_performed(self) -> int:
        return sum(batch.k for batch, _ in self.history)

    def public_view(self) -> dict:
        marginal = [float(v) for v in self.marginal]
        return {
            "id": self.config.id,
            "status": self.status,
            "n": self.config.n,
            "k": self.config.k,
            "cycle": self.cycle,
            "tests_performed": self.tests_performed(),
            "pending": None
            if self.pending is None
            else {"sequence": self.pending_seq, "groups": self.pending.member_lists()},
            "marginal": marginal,
            "ranking": [int(i) for i in np.argsort(-self.marginal, kind="stable")],
            "policy": dict(self.config.policy),
        }


def _replay(config: CampaignConfig, events: Sequence[dict]) -> Campaign:
    campaign = Campaign(config)
    expect = "proposed"
    for ev in events:
        kind = ev.get("kind")
        seq = int(ev.get("seq", -1))
        if kind != expect:
            raise CorruptLogError(f"event {seq}: expected {expect!r}, found {kind!r}")
        if seq != campaign.next_seq:
            raise CorruptLogError(f"event sequence gap at {seq}")
        if kind == "proposed":
            batch = campaign.compute_proposal()
            recorded = ev["payload"]["groups"]
            if batch.member_lists() != [list(map(int, g)) for g in recorded]:
                raise CorruptLogError(
                    f"event {seq}: replayed proposal diverges from the recorded groups"
                )
            campaign.apply_proposed(batch, seq)
            expect = "observed" if batch.k else None
        else:
            outcomes = ev["payload"]["outcomes"]
            cloud, marginal = campaign.compute_observation(outcomes)
            campaign.apply_observed(outcomes, seq, cloud, marginal)
            expect = "proposed"
        if expect is None:
            break
    return campaign


class CampaignStore:
    """One JSONL event file per campaign under a data directory."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._campaigns: dict[str, Campaign] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _path(self, campaign_id: str) -> Path:
        return self.data_dir / f"{campaign_id}.jsonl"

    def _lock(self, campaign_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(campaign_id, threading.Lock())

    def _append(self, campaign_id: str, event: dict):
        line = json.dumps(event, separators=(",", ":"))
        with open(self._path(campaign_id), "a") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.jsonl"))

    def create(self, raw_config: dict) -> Campaign:
        try:
            config = CampaignConfig.from_dict(raw_config)
        except (ValueError, TypeError) as exc:
            raise CampaignError(str(exc)) from exc
        with self._lock(config.id):
            if config.id in self._campaigns or self._path(config.id).exists():
                raise DuplicateCampaignError(f"campaign {config.id!r} already exists")
            try:
                campaign = Campaign(config)
            except ValueError as exc:
                raise CampaignError(str(exc)) from exc
            self._append(
                config.id,
                {"seq": 0, "kind": "created", "time": time.time(), "payload": config.to_dict()},
            )
            self._campaigns[config.id] = campaign
            return campaign

    def get(self, campaign_id: str) -> Campaign:
        with self._lock(campaign_id):
            return self._load_locked(campaign_id)

    def _load_locked(self, campaign_id: str) -> Campaign:
        if campaign_id in self._campaigns:
            return self._campaigns[campaign_id]
        path = self._path(campaign_id)
        if not _ID_RE.match(campaign_id) or not path.exists():
            raise UnknownCampaignError(f"no campaign {campaign_id!r}")
        events = self.events(campaign_id)
        if not events or events[0].get("kind") != "created":
            raise CorruptLogError(f"campaign {campaign_id!r} log has no creation record")
        try:
            config = CampaignConfig.from_dict(events[0]["payload"])
        except (ValueError, TypeError, KeyError) as exc:
            raise CorruptLogError(f"bad creation record: {exc}") from exc
        campaign = _replay(config, events[1:])
        self._campaigns[campaign_id] = campaign
        return campaign

    def events(self, campaign_id: str) -> list[dict]:
        path = self._path(campaign_id)
        if not _ID_RE.match(campaign_id) or not path.exists():
            raise UnknownCampaignError(f"no campaign {campaign_id!r}")
        out = []
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    out.append(json.loads(line))
        return out

    def propose(self, campaign_id: str) -> Campaign:
        with self._lock(campaign_id):
            campaign = self._load_locked(campaign_id)
            if campaign.status != READY:
                raise WrongStatusError(
                    f"campaign is {campaign.status}; proposals need {READY}"
                )
            batch = campaign.compute_proposal()
            seq = campaign.next_seq
            self._append(
                campaign_id,
                {
                    "seq": seq,
                    "kind": "proposed",
                    "time": time.time(),
                    "payload": {"groups": batch.member_lists()},
                },
            )
            campaign.apply_proposed(batch, seq)
            return campaign

    def submit(self, campaign_id: str, outcomes, sequence: int | None = None) -> Campaign:
        with self._lock(campaign_id):
            campaign = self._load_locked(campaign_id)
            if campaign.status != AWAITING or campaign.pending is None:
                raise WrongStatusError(
                    f"campaign is {campaign.status}; results need {AWAITING}"
                )
            if sequence is not None and sequence != campaign.pending_seq:
                raise StaleSubmissionError(
                    f"submission targets proposal {sequence}, pending is {campaign.pending_seq}"
                )
            try:
                y = as_outcomes(outcomes, campaign.pending.k)
            except ValueError as exc:
                raise CampaignError(str(exc)) from exc
            try:
                cloud, marginal = campaign.compute_observation(y)
            except DegenerateEvidenceError as exc:
                raise DegenerateSubmissionError(
                    f"outcomes are impossible under the campaign's model: {exc}"
                ) from exc
            seq = campaign.next_seq
            self._append(
                campaign_id,
                {
                    "seq": seq,
                    "kind": "observed",
                    "time": time.time(),
                    "payload": {"outcomes": y.astype(int).tolist()},
                },
            )
            campaign.apply_observed(y, seq, cloud, marginal)
            return campaign

    def reload(self, campaign_id: str) -> Campaign:
        """Drop the cached state and rebuild it from the log (replay path)."""
        with self._lock(campaign_id):
            self._campaigns.pop(campaign_id, None)
            return self._load_locked(campaign_id)
