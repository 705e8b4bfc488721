"""Core model for noisy pooled testing.

A population of n individuals has a hidden binary infection state x.
A test pools a group g of individuals and returns a noisy binary
outcome: with the group's true status defined as 1 when any member is
infected, the assay reports

    P(Y = 1 | x) = 1 - sigma_g + rho_g * status(g, x)

where sigma_g is the specificity and s_g the sensitivity for a pool of
size |g|, and rho_g = sigma_g + s_g - 1 > 0 so that a positive result
always raises the odds of infection.  All likelihood arithmetic is done
in natural-log space; impossible outcomes under a noiseless model give
-inf rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

MAX_INDIVIDUALS = 1024


def binary_entropy(u) -> float | np.ndarray:
    """Entropy of a Bernoulli(u) variable in nats. h(0) = h(1) = 0."""
    u = np.asarray(u, dtype=float)
    out = -(xlogy(u, u) + xlogy(1.0 - u, 1.0 - u))
    return float(out) if out.ndim == 0 else out


def entropy_nats(weights: np.ndarray) -> float:
    """Entropy of a discrete distribution, ignoring zero-mass entries."""
    w = np.asarray(weights, dtype=float)
    return float(-np.sum(xlogy(w, w)))


@dataclass(frozen=True)
class Prior:
    """Independent per-individual infection rates q_i, each in (0, 1)."""

    rates: np.ndarray

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if rates.ndim != 1 or rates.size == 0:
            raise ValueError("prior rates must be a non-empty vector")
        if rates.size > MAX_INDIVIDUALS:
            raise ValueError(f"population size {rates.size} exceeds {MAX_INDIVIDUALS}")
        if np.any(rates <= 0.0) or np.any(rates >= 1.0):
            raise ValueError("prior rates must lie strictly inside (0, 1)")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def uniform(cls, n: int, q: float) -> "Prior":
        return cls(np.full(n, float(q)))

    @property
    def n(self) -> int:
        return self.rates.size

    def log_odds(self) -> np.ndarray:
        """log(q_i / (1 - q_i)) per individual."""
        return np.log(self.rates) - np.log1p(-self.rates)

    def log_pmf(self, x: np.ndarray) -> float:
        x = as_state(x, self.n)
        return float(np.sum(np.where(x == 1, np.log(self.rates), np.log1p(-self.rates))))


@dataclass(frozen=True)
class NoiseModel:
    """Size-indexed assay error rates for pools of size 1 .. n_max.

    specificity[z-1] and sensitivity[z-1] apply to pools of z members.
    Both must lie in (0, 1] and satisfy specificity + sensitivity > 1
    for every size (tests are better than coin flips).
    """

    specificity: np.ndarray
    sensitivity: np.ndarray

    def __post_init__(self):
        spec = np.atleast_1d(np.asarray(self.specificity, dtype=float))
        sens = np.atleast_1d(np.asarray(self.sensitivity, dtype=float))
        if spec.shape != sens.shape or spec.ndim != 1 or spec.size == 0:
            raise ValueError("specificity and sensitivity must be equal-length vectors")
        for name, v in (("specificity", spec), ("sensitivity", sens)):
            if np.any(v <= 0.0) or np.any(v > 1.0):
                raise ValueError(f"{name} entries must lie in (0, 1]")
        if np.any(spec + sens - 1.0 <= 0.0):
            raise ValueError("specificity + sensitivity must exceed 1 for every pool size")
        object.__setattr__(self, "specificity", spec)
        object.__setattr__(self, "sensitivity", sens)

    @classmethod
    def constant(cls, specificity: float, sensitivity: float, n_max: int) -> "NoiseModel":
        return cls(np.full(n_max, float(specificity)), np.full(n_max, float(sensitivity)))

    @property
    def n_max(self) -> int:
        return self.specificity.size

    def _check_size(self, size: int) -> int:
        if not 1 <= size <= self.n_max:
            raise ValueError(f"pool size {size} outside modelled range 1..{self.n_max}")
        return size

    def sigma(self, size: int) -> float:
        return float(self.specificity[self._check_size(size) - 1])

    def s(self, size: int) -> float:
        return float(self.sensitivity[self._check_size(size) - 1])

    def rho(self, size: int) -> float:
        return self.sigma(size) + self.s(size) - 1.0

    def gamma(self, size: int) -> float:
        """Entropy gap h(s_z) - h(sigma_z) from the pooled-test MI identity."""
        return binary_entropy(self.s(size)) - binary_entropy(self.sigma(size))

    def log_likelihood(self, y: int, status: int, size: int) -> float:
        """log P(Y = y | group status), -inf for impossible outcomes."""
        p1 = 1.0 - self.sigma(size) + self.rho(size) * status
        p = p1 if y else 1.0 - p1
        return math.log(p) if p > 0.0 else -math.inf


@dataclass(frozen=True)
class Group:
    """A pool: a set of individual indices, stored sorted."""

    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(sorted(int(i) for i in self.members))
        if not members:
            raise ValueError("a group must contain at least one individual")
        if members[0] < 0 or members[-1] >= MAX_INDIVIDUALS:
            raise ValueError("group members must be indices in [0, %d)" % MAX_INDIVIDUALS)
        if len(set(members)) != len(members):
            raise ValueError("group members must be distinct")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, members: Iterable[int]) -> "Group":
        return cls(tuple(members))

    @property
    def size(self) -> int:
        return len(self.members)

    def indices(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.intp)


@dataclass(frozen=True)
class GroupBatch:
    """An ordered batch of groups tested in one cycle."""

    groups: tuple[Group, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))

    @classmethod
    def of(cls, member_lists: Iterable[Iterable[int]]) -> "GroupBatch":
        return cls(tuple(Group.of(m) for m in member_lists))

    @property
    def k(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __len__(self):
        return len(self.groups)

    def member_lists(self) -> list[list[int]]:
        return [list(g.members) for g in self.groups]


def as_state(x, n: int | None = None) -> np.ndarray:
    """Validate and coerce an infection state vector to uint8 0/1."""
    x = np.atleast_1d(np.asarray(x))
    if x.ndim != 1:
        raise ValueError("state must be a vector")
    if n is not None and x.size != n:
        raise ValueError(f"state has length {x.size}, expected {n}")
    if x.size > MAX_INDIVIDUALS:
        raise ValueError(f"state length {x.size} exceeds {MAX_INDIVIDUALS}")
    out = x.astype(np.uint8)
    if np.any((out != 0) & (out != 1)):
        raise ValueError("state entries must be 0 or 1")
    return out


def as_outcomes(y, k: int) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y)).astype(np.uint8)
    if y.shape != (k,):
        raise ValueError(f"expected {k} outcomes, got shape {y.shape}")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("outcomes must be 0 or 1")
    return y


def group_status(group: Group, x: np.ndarray) -> int:
    """1 if any member of the group is infected under x, else 0."""
    x = as_state(x)
    idx = group.indices()
    if idx[-1] >= x.size:
        raise ValueError("group refers to individuals outside the state vector")
    return int(x[idx].any())


def test_log_likelihood(group: Group, y: int, x: np.ndarray, noise: NoiseModel) -> float:
    """log P(Y = y | x) for a single pooled test."""
    return noise.log_likelihood(int(y), group_status(group, x), group.size)


def batch_log_likelihood(batch: GroupBatch, outcomes, x: np.ndarray, noise: NoiseModel) -> float:
    """Joint log-likelihood of a batch; outcomes are independent given x."""
    y = as_outcomes(outcomes, batch.k)
    return sum(test_log_likelihood(g, int(yi), x, noise) for g, yi in zip(batch, y))


def batch_statuses(batch: GroupBatch, states: np.ndarray) -> np.ndarray:
    """Group status per (group, particle): (k, N) uint8 for states (N, n)."""
    states = np.asarray(states)
    out = np.empty((batch.k, states.shape[0]), dtype=np.uint8)
    for i, g in enumerate(batch):
        out[i] = states[:, g.indices()].any(axis=1)
    return out


def outcome_log_probs(group_size: int, y: int, noise: NoiseModel) -> tuple[float, float]:
    """(log P(y | status=0), log P(y | status=1)) for one test."""
    return (
        noise.log_likelihood(y, 0, group_size),
        noise.log_likelihood(y, 1, group_size),
    )


def batch_log_likelihood_particles(
    batch: GroupBatch, outcomes, states: np.ndarray, noise: NoiseModel
) -> np.ndarray:
    """Vectorized batch log-likelihood for a particle matrix (N, n)."""
    y = as_outcomes(outcomes, batch.k)
    ll = np.zeros(states.shape[0])
    for i, g in enumerate(batch):
        l0, l1 = outcome_log_probs(g.size, int(y[i]), noise)
        status = states[:, g.indices()].any(axis=1)
        ll += np.where(status, l1, l0)
    return ll


def sample_outcomes(
    batch: GroupBatch, x_truth: np.ndarray, noise: NoiseModel, rng: np.random.Generator
) -> np.ndarray:
    """Draw one noisy outcome per group given the true state."""
    x = as_state(x_truth)
    p_pos = np.array(
        [1.0 - noise.sigma(g.size) + noise.rho(g.size) * group_status(g, x) for g in batch]
    )
    return (rng.random(batch.k) < p_pos).astype(np.uint8)
