"""Greedy construction of informative test batches.

Groups are built one slot at a time.  Within a group the search
alternates rounds of forward adds (argmax utility over remaining
individuals) and backward removals (argmax over single deletions),
accepting a move only when the utility of the whole batch under
construction strictly improves.  A group finalizes when a round
accepts nothing or the group hits the size cap; construction halts
early when a fresh group cannot improve on the batch at all.

Both entry points share this skeleton and its tie-breaking (lowest
individual index wins), differing only in how candidate batches are
scored: greedy_mimax keeps a running table of outcome-prefix
probabilities per particle so each add/remove is a couple of matrix
products, while greedy_generic re-scores candidate batches with the
generic expected-utility evaluator and accepts any reward function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .core import Group, GroupBatch, NoiseModel, binary_entropy, entropy_nats
from .posterior import ParticlePosterior
from .utility import MAX_BATCH_GROUPS, PhiFn, expected_utility

IMPROVEMENT_TOL = 1e-12


@dataclass(frozen=True)
class GreedyConfig:
    k: int
    n_max: int
    forward: int = 3
    backward: int = 2

    def __post_init__(self):
        if self.k < 1 or self.k > MAX_BATCH_GROUPS:
            raise ValueError(f"k must lie in 1..{MAX_BATCH_GROUPS}")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")
        if self.forward < 1 or self.backward < 0 or self.forward <= self.backward:
            raise ValueError("need forward > backward >= 0 with at least one forward step")


class _MiScorer:
    """Incremental batch MI: accepted groups live in a (N, 2^j) prefix-outcome table."""

    def __init__(self, p: ParticlePosterior, noise: NoiseModel):
        self.X = p.states
        self.w = p.weights
        self.noise = noise
        self.P = np.ones((p.num_particles, 1))
        self.h_acc = 0.0
        self.base = 0.0
        self.counts = np.zeros(p.num_particles, dtype=np.int32)
        self.size = 0

    def baseline(self) -> float:
        return self.base

    def begin_group(self):
        self.counts[:] = 0
        self.size = 0

    def _scores(self, T: np.ndarray, size: int) -> np.ndarray:
        sigma = self.noise.sigma(size)
        rho = self.noise.rho(size)
        Tf = T.astype(float)
        pos = (1.0 - sigma) + rho * Tf
        Q1 = (pos * self.w) @ self.P
        Q0 = ((1.0 - pos) * self.w) @ self.P
        h_out = -(xlogy(Q0, Q0).sum(axis=1) + xlogy(Q1, Q1).sum(axis=1))
        h_cond = self.h_acc + binary_entropy(sigma) + self.noise.gamma(size) * (Tf @ self.w)
        return h_out - h_cond

    def eval_adds(self, cands: np.ndarray) -> np.ndarray:
        T = self.X[:, cands].T.astype(bool) | (self.counts > 0)
        return self._scores(T, self.size + 1)

    def eval_removals(self, members: np.ndarray) -> np.ndarray:
        T = (self.counts - self.X[:, members].T.astype(np.int32)) > 0
        return self._scores(T, self.size - 1)

    def add(self, u: int):
        self.counts += self.X[:, u]
        self.size += 1

    def remove(self, u: int):
        self.counts -= self.X[:, u]
        self.size -= 1

    def commit_group(self, members):
        status = (self.counts > 0).astype(float)
        sigma = self.noise.sigma(self.size)
        rho = self.noise.rho(self.size)
        p1 = (1.0 - sigma) + rho * status
        self.P = np.hstack([self.P * (1.0 - p1)[:, None], self.P * p1[:, None]])
        self.h_acc += binary_entropy(sigma) + self.noise.gamma(self.size) * float(self.w @ status)
        self.base = entropy_nats(self.w @ self.P) - self.h_acc


class _GenericScorer:
    """Scores candidate batches with expected_utility; any reward function."""

    def __init__(self, p: ParticlePosterior, noise: NoiseModel, phi: PhiFn):
        self.p = p
        self.noise = noise
        self.phi = phi
        self.accepted: list[Group] = []
        self.members: list[int] = []
        self.base = expected_utility(p, GroupBatch(()), noise, phi)

    def baseline(self) -> float:
        return self.base

    def begin_group(self):
        self.members = []

    def _score_with(self, group_members) -> float:
        batch = GroupBatch(tuple(self.accepted) + (Group.of(group_members),))
        return expected_utility(self.p, batch, self.noise, self.phi)

    def eval_adds(self, cands: np.ndarray) -> np.ndarray:
        return np.array([self._score_with(self.members + [int(u)]) for u in cands])

    def eval_removals(self, members: np.ndarray) -> np.ndarray:
        return np.array(
            [self._score_with([v for v in self.members if v != int(u)]) for u in members]
        )

    def add(self, u: int):
        self.members.append(u)

    def remove(self, u: int):
        self.members.remove(u)

    def commit_group(self, members):
        self.accepted.append(Group.of(members))
        self.base = expected_utility(
            self.p, GroupBatch(tuple(self.accepted)), self.noise, self.phi
        )


def _grow_group(scorer, n: int, cfg: GreedyConfig) -> list[int] | None:
    members: list[int] = []
    current = scorer.baseline()
    scorer.begin_group()
    while True:
        moved = False
        adds_this_round = 0
        for _ in range(cfg.forward):
            if len(members) >= cfg.n_max:
                break
            cands = np.setdiff1d(np.arange(n), members)
            if cands.size == 0:
                break
            scores = scorer.eval_adds(cands)
            best = int(np.argmax(scores))
            if scores[best] > current + IMPROVEMENT_TOL:
                u = int(cands[best])
                members.append(u)
                scorer.add(u)
                current = float(scores[best])
                adds_this_round += 1
                moved = True
            else:
                break
        if len(members) >= cfg.n_max:
            break
        if cfg.backward and adds_this_round >= 2:
            for _ in range(cfg.backward):
                if len(members) <= 1:
                    break
                cands = np.asarray(sorted(members))
                scores = scorer.eval_removals(cands)
                best = int(np.argmax(scores))
                if scores[best] > current + IMPROVEMENT_TOL:
                    u = int(cands[best])
                    members.remove(u)
                    scorer.remove(u)
                    current = float(scores[best])
                    moved = True
                else:
                    break
        if not moved:
            break
    if not members:
        return None
    ordered = sorted(members)
    scorer.commit_group(ordered)
    return ordered


def _greedy(scorer, n: int, cfg: GreedyConfig) -> GroupBatch:
    groups: list[Group] = []
    for _ in range(cfg.k):
        members = _grow_group(scorer, n, cfg)
        if members is None:
            break
        groups.append(Group.of(members))
    return GroupBatch(tuple(groups))


def greedy_mimax(p: ParticlePosterior, noise: NoiseModel, cfg: GreedyConfig) -> GroupBatch:
    """Batch of up to k groups greedily maximizing mutual information."""
    return _greedy(_MiScorer(p, noise), p.n, cfg)


def greedy_generic(
    p: ParticlePosterior, noise: NoiseModel, cfg: GreedyConfig, phi: PhiFn
) -> GroupBatch:
    """Same greedy search driven by an arbitrary terminal reward."""
    return _greedy(_GenericScorer(p, noise, phi), p.n, cfg)
