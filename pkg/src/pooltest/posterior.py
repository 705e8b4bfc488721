"""Posterior representations over infection states.

Two representations are maintained:

* ExactPosterior enumerates all 2^n states for small n and is the
  ground truth the samplers are tested against.
* ParticlePosterior is a weighted particle cloud updated by a tempered
  sequential Monte Carlo bridge: each new batch of test results is
  annealed in through a likelihood exponent gamma that rises from 0 to
  1 on an adaptive schedule chosen so the effective sample size stays
  at a configured target, with systematic resampling and a few sweeps
  of a Metropolised Gibbs kernel between exponent increments.

The tempered target at exponent gamma is

    prior(x) * prod_past L_b(x) * L_new(x)^gamma

so the bridge always starts from the full posterior of the history so
far and ends at the posterior including the new batch.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .core import (
    GroupBatch,
    NoiseModel,
    Prior,
    as_outcomes,
    as_state,
    batch_log_likelihood_particles,
    entropy_nats,
    outcome_log_probs,
    MAX_INDIVIDUALS,
)

EXACT_MAX_N = 24
SNAPSHOT_VERSION = 1


class DegenerateEvidenceError(ValueError):
    """Raised when no state (or no particle) can explain the observed outcomes."""


def enumerate_states(n: int) -> np.ndarray:
    """All 2^n infection states as an (2^n, n) uint8 matrix, index = sum x_i 2^i."""
    if n > EXACT_MAX_N:
        raise ValueError(f"refusing to enumerate 2^{n} states")
    codes = np.arange(1 << n, dtype=np.uint32)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


@dataclass(frozen=True)
class ExactPosterior:
    """Normalized log-mass over all 2^n states, state index = sum x_i 2^i."""

    n: int
    log_mass: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= EXACT_MAX_N:
            raise ValueError(f"exact posterior supports 1 <= n <= {EXACT_MAX_N}")
        lm = np.asarray(self.log_mass, dtype=float)
        if lm.shape != (1 << self.n,):
            raise ValueError("log mass must have 2^n entries")
        object.__setattr__(self, "log_mass", lm)

    @classmethod
    def from_prior(cls, prior: Prior) -> "ExactPosterior":
        n = prior.n
        codes = np.arange(1 << n, dtype=np.uint32)
        lm = np.zeros(1 << n)
        for i in range(n):
            bit = (codes >> i) & 1
            lm += np.where(bit == 1, math.log(prior.rates[i]), math.log1p(-prior.rates[i]))
        return cls(n, lm - logsumexp(lm))

    def updated(self, batch: GroupBatch, outcomes, noise: NoiseModel) -> "ExactPosterior":
        """Condition on a batch of outcomes; raises if no state survives."""
        y = as_outcomes(outcomes, batch.k)
        codes = np.arange(1 << self.n, dtype=np.uint32)
        lm = self.log_mass.copy()
        for g, yi in zip(batch, y):
            mask = np.uint32(sum(1 << i for i in g.members))
            status = (codes & mask) != 0
            l0, l1 = outcome_log_probs(g.size, int(yi), noise)
            lm += np.where(status, l1, l0)
        total = logsumexp(lm)
        if not np.isfinite(total):
            raise DegenerateEvidenceError("observed outcomes are impossible under the model")
        return ExactPosterior(self.n, lm - total)

    def marginal(self) -> np.ndarray:
        """Per-individual infection probability."""
        mass = np.exp(self.log_mass)
        codes = np.arange(1 << self.n, dtype=np.uint32)
        out = np.empty(self.n)
        for i in range(self.n):
            out[i] = mass[((codes >> i) & 1) == 1].sum()
        return out

    def log_pmf(self, x) -> float:
        x = as_state(x, self.n)
        idx = int(np.sum(x.astype(np.uint64) << np.arange(self.n, dtype=np.uint64)))
        return float(self.log_mass[idx])

    def to_particles(self) -> "ParticlePosterior":
        return ParticlePosterior(enumerate_states(self.n), np.exp(self.log_mass))


def exact_update(
    e: ExactPosterior, batch: GroupBatch, outcomes, noise: NoiseModel
) -> ExactPosterior:
    return e.updated(batch, outcomes, noise)


@dataclass(frozen=True)
class ParticlePosterior:
    """Weighted particle cloud: states (N, n) uint8, weights summing to 1."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.uint8)
        w = np.asarray(self.weights, dtype=float)
        if states.ndim != 2 or states.shape[0] == 0:
            raise ValueError("states must be a non-empty (N, n) matrix")
        if states.shape[1] > MAX_INDIVIDUALS:
            raise ValueError(f"state width exceeds {MAX_INDIVIDUALS}")
        if np.any(states > 1):
            raise ValueError("states must be 0/1")
        if w.shape != (states.shape[0],):
            raise ValueError("weights must match the particle count")
        if np.any(w < 0) or not np.isfinite(w).all():
            raise ValueError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must carry positive total mass")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", w / total)

    @property
    def num_particles(self) -> int:
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def marginal(self) -> np.ndarray:
        return self.weights @ self.states

    def entropy(self) -> float:
        """Entropy of the weight vector, duplicates not merged."""
        return entropy_nats(self.weights)

    def to_snapshot(self) -> dict:
        packed = np.packbits(self.states, axis=1)
        return {
            "version": SNAPSHOT_VERSION,
            "n": self.n,
            "num_particles": self.num_particles,
            "packed_states": base64.b64encode(packed.tobytes()).decode("ascii"),
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_snapshot(cls, snap: dict) -> "ParticlePosterior":
        if snap.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {snap.get('version')!r}")
        n = int(snap["n"])
        count = int(snap["num_particles"])
        raw = base64.b64decode(snap["packed_states"])
        packed = np.frombuffer(raw, dtype=np.uint8).reshape(count, -1)
        states = np.unpackbits(packed, axis=1, count=n)
        weights = np.asarray(snap["weights"], dtype=float)
        return cls(states, weights)


def prior_particles(prior: Prior, num_particles: int, rng: np.random.Generator) -> ParticlePosterior:
    """iid draws from the prior with uniform weights."""
    if num_particles < 1:
        raise ValueError("need at least one particle")
    states = (rng.random((num_particles, prior.n)) < prior.rates).astype(np.uint8)
    return ParticlePosterior(states, np.full(num_particles, 1.0 / num_particles))


def ess(weights: np.ndarray) -> float:
    """Normalized effective sample size 1 / (N * sum w_i^2), in [1/N, 1]."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must carry positive mass")
    w = w / total
    return float(1.0 / (w.size * np.sum(w * w)))


def _reweighted(weights: np.ndarray, log_liks: np.ndarray, delta: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lw = np.where(weights > 0, np.log(np.where(weights > 0, weights, 1.0)), -np.inf)
    if delta != 0.0:
        lw = lw + delta * log_liks
    m = np.max(lw)
    if not np.isfinite(m):
        raise DegenerateEvidenceError("reweighting left no particle with positive mass")
    w = np.exp(lw - m)
    return w / w.sum()


def next_temperature(
    gamma: float,
    weights: np.ndarray,
    log_liks: np.ndarray,
    target_ess: float = 0.9,
    tol: float = 1e-4,
    max_iter: int = 60,
) -> float:
    """Next likelihood exponent on the tempering schedule.

    Picks gamma' in (gamma, 1] by bisection so that reweighting the
    cloud by likelihood^(gamma' - gamma) realizes the target effective
    sample size, clamping to 1 when even the full remaining step keeps
    the ESS at or above target.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("current exponent must lie in [0, 1)")
    w = np.asarray(weights, dtype=float)
    ll = np.asarray(log_liks, dtype=float)
    if np.any(np.isnan(ll)):
        raise ValueError("log-likelihoods must not be NaN")
    if not np.any(np.isfinite(ll) & (w > 0)):
        raise DegenerateEvidenceError("no weighted particle has positive likelihood")

    def ess_at(delta: float) -> float:
        return ess(_reweighted(w, ll, delta))

    remaining = 1.0 - gamma
    if ess_at(remaining) >= target_ess:
        return 1.0
    lo, hi = 0.0, remaining
    mid = hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        e = ess_at(mid)
        if abs(e - target_ess) <= tol:
            break
        if e > target_ess:
            lo = mid
        else:
            hi = mid
    return gamma + mid


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling; returns integer replication counts summing to N."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must carry positive mass")
    w = w / total
    N = w.size
    points = (rng.random() + np.arange(N)) / N
    cum = np.cumsum(w)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, points, side="right")
    return np.bincount(np.minimum(idx, N - 1), minlength=N)


def gibbs_sweep(
    x: np.ndarray, log_pmf: Callable[[np.ndarray], float], rng: np.random.Generator
) -> np.ndarray:
    """One systematic-scan Gibbs sweep drawing each coordinate from its full conditional."""
    x = as_state(x).copy()
    for j in range(x.size):
        x[j] = 1
        lp1 = log_pmf(x)
        x[j] = 0
        lp0 = log_pmf(x)
        if lp1 == -math.inf and lp0 == -math.inf:
            raise ValueError(f"coordinate {j}: state has zero mass either way")
        x[j] = 1 if rng.random() < expit(lp1 - lp0) else 0
    return x


def modified_gibbs_sweep(
    x: np.ndarray, log_pmf: Callable[[np.ndarray], float], rng: np.random.Generator
) -> np.ndarray:
    """One sweep of the Metropolised flip kernel.

    Each coordinate in turn proposes flipping its bit and accepts with
    probability min(1, pi(flip)/pi(current)).  Compared with the full
    conditional draw this never wastes a uniform on re-sampling the
    same value, which mixes faster on sticky posteriors.
    """
    x = as_state(x).copy()
    lp_cur = log_pmf(x)
    for j in range(x.size):
        x[j] ^= 1
        lp_flip = log_pmf(x)
        if math.log(rng.random()) < lp_flip - lp_cur:
            lp_cur = lp_flip
        else:
            x[j] ^= 1
    return x


def kernel_transition_matrix(log_pmf_table: np.ndarray, kind: str = "modified_gibbs") -> np.ndarray:
    """Exact transition matrix of one sweep over a fully enumerated target.

    log_pmf_table holds log target mass for state index sum x_i 2^i.
    Useful for checking invariance: pi @ P == pi.
    """
    lm = np.asarray(log_pmf_table, dtype=float)
    size = lm.size
    n = size.bit_length() - 1
    if 1 << n != size:
        raise ValueError("table length must be a power of two")
    P = np.eye(size)
    for j in range(n):
        Tj = np.zeros((size, size))
        for z in range(size):
            zf = z ^ (1 << j)
            if kind == "modified_gibbs":
                if lm[z] == -np.inf and lm[zf] == -np.inf:
                    alpha = 0.0
                else:
                    alpha = float(min(1.0, np.exp(min(lm[zf] - lm[z], 0.0))))
                Tj[z, zf] += alpha
                Tj[z, z] += 1.0 - alpha
            elif kind == "gibbs":
                hi, lo_ = (z | (1 << j)), (z & ~(1 << j))
                if lm[hi] == -np.inf and lm[lo_] == -np.inf:
                    Tj[z, z] = 1.0
                else:
                    p1 = float(expit(lm[hi] - lm[lo_]))
                    Tj[z, hi] += p1
                    Tj[z, lo_] += 1.0 - p1
            else:
                raise ValueError(f"unknown kernel kind {kind!r}")
        P = P @ Tj
    return P


@dataclass(frozen=True)
class SmcConfig:
    num_particles: int = 10_000
    target_ess: float = 0.9
    mcmc_sweeps: int = 4
    kernel: str = "modified_gibbs"
    bisection_tol: float = 1e-4
    bisection_max_iter: int = 60

    def __post_init__(self):
        if self.num_particles < 1:
            raise ValueError("num_particles must be positive")
        if not 0.0 < self.target_ess <= 1.0:
            raise ValueError("target_ess must lie in (0, 1]")
        if self.mcmc_sweeps < 1:
            raise ValueError("mcmc_sweeps must be positive")
        if self.kernel not in ("modified_gibbs", "gibbs"):
            raise ValueError("kernel must be 'modified_gibbs' or 'gibbs'")


@dataclass(frozen=True)
class BridgeStep:
    gamma: float
    ess: float
    accept_rate: float | None


@dataclass(frozen=True)
class TemperingTrace:
    steps: tuple[BridgeStep, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        gammas = self.gammas
        if gammas:
            if any(b <= a for a, b in zip(gammas, gammas[1:])) or gammas[0] <= 0.0:
                raise ValueError("tempering exponents must be strictly increasing and positive")
            if gammas[-1] != 1.0:
                raise ValueError("tempering schedule must end exactly at 1")

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(s.gamma for s in self.steps)


class _TemperedTarget:
    """Mutable per-particle bookkeeping for the annealed posterior.

    Keeps, per test, the count of infected members in each particle so
    a coordinate flip only touches the tests containing that
    coordinate.  New-batch factors enter with exponent gamma, history
    factors with exponent 1.
    """

    def __init__(
        self,
        prior: Prior,
        noise: NoiseModel,
        history: Sequence[tuple[GroupBatch, np.ndarray]],
        batch: GroupBatch,
        outcomes: np.ndarray,
        states: np.ndarray,
    ):
        self.prior_lodds = prior.log_odds()
        self.states = states
        n = prior.n
        self.tests: list[tuple[np.ndarray, bool, float, float]] = []
        for hb, hy in history:
            hy = as_outcomes(hy, hb.k)
            for g, yi in zip(hb, hy):
                l0, l1 = outcome_log_probs(g.size, int(yi), noise)
                self.tests.append((g.indices(), False, l0, l1))
        self.new_slice = slice(len(self.tests), len(self.tests) + batch.k)
        for g, yi in zip(batch, outcomes):
            l0, l1 = outcome_log_probs(g.size, int(yi), noise)
            self.tests.append((g.indices(), True, l0, l1))
        by_coord: list[list[int]] = [[] for _ in range(n)]
        for b, (idx, _, _, _) in enumerate(self.tests):
            for j in idx:
                by_coord[j].append(b)
        self.tests_by_coord = [np.asarray(v, dtype=np.intp) for v in by_coord]
        self.counts = np.zeros((len(self.tests), states.shape[0]), dtype=np.int32)
        for b, (idx, _, _, _) in enumerate(self.tests):
            self.counts[b] = states[:, idx].sum(axis=1)

    def reindex(self, take: np.ndarray):
        self.states = self.states[take]
        self.counts = self.counts[:, take]

    def new_batch_log_liks(self) -> np.ndarray:
        ll = np.zeros(self.states.shape[0])
        for b in range(self.new_slice.start, self.new_slice.stop):
            _, _, l0, l1 = self.tests[b]
            ll = ll + np.where(self.counts[b] > 0, l1, l0)
        return ll

    def sweep(self, gamma: float, rng: np.random.Generator, kernel: str) -> float:
        """One vectorized systematic sweep across all particles; returns move fraction."""
        X = self.states
        N = X.shape[0]
        moved = 0
        for j in range(X.shape[1]):
            bit = X[:, j].astype(np.int64)
            sign = 1 - 2 * bit
            if kernel == "modified_gibbs":
                delta = sign.astype(float) * self.prior_lodds[j]
                for b in self.tests_by_coord[j]:
                    idx, is_new, l0, l1 = self.tests[b]
                    c = self.counts[b]
                    old = c > 0
                    new = (c + sign) > 0
                    dlt = l1 - l0
                    weight = gamma if is_new else 1.0
                    with np.errstate(invalid="ignore"):
                        step = np.where(
                            old != new, dlt * (new.astype(float) - old.astype(float)), 0.0
                        )
                    delta = delta + weight * step
                with np.errstate(divide="ignore"):
                    accept = np.log(rng.random(N)) < delta
                X[accept, j] ^= 1
                if accept.any():
                    aw = np.where(accept, sign, 0).astype(np.int32)
                    for b in self.tests_by_coord[j]:
                        self.counts[b] += aw
                moved += int(accept.sum())
            else:
                d10 = np.full(N, self.prior_lodds[j])
                for b in self.tests_by_coord[j]:
                    idx, is_new, l0, l1 = self.tests[b]
                    others = self.counts[b] - bit
                    dlt = l1 - l0
                    weight = gamma if is_new else 1.0
                    contrib = np.where(others > 0, 0.0, dlt)
                    d10 = d10 + weight * contrib
                new_bit = (rng.random(N) < expit(d10)).astype(np.uint8)
                changed = new_bit != X[:, j]
                if changed.any():
                    cw = np.where(changed, new_bit.astype(np.int32) - bit.astype(np.int32), 0)
                    for b in self.tests_by_coord[j]:
                        self.counts[b] += cw
                X[:, j] = new_bit
                moved += int(changed.sum())
        return moved / (N * X.shape[1])


def smc_update(
    p: ParticlePosterior,
    batch: GroupBatch,
    outcomes,
    noise: NoiseModel,
    cfg: SmcConfig,
    rng: np.random.Generator,
    *,
    prior: Prior,
    history: Sequence[tuple[GroupBatch, np.ndarray]] = (),
) -> tuple[ParticlePosterior, TemperingTrace]:
    """Advance the particle posterior by one batch of observed outcomes.

    The cloud is assumed to target prior x history likelihoods; the new
    batch is annealed in adaptively.  An empty batch is the identity.
    Raises DegenerateEvidenceError when no particle can explain the
    outcomes (only possible with noiseless assays).
    """
    if batch.k == 0:
        return p, TemperingTrace(())
    y = as_outcomes(outcomes, batch.k)
    states = p.states.copy()
    target = _TemperedTarget(prior, noise, history, batch, y, states)
    ll_new = target.new_batch_log_liks()
    w = p.weights
    if not np.any(np.isfinite(ll_new) & (w > 0)):
        raise DegenerateEvidenceError(
            f"no particle explains outcomes {y.tolist()} for batch {batch.member_lists()}"
        )
    steps: list[BridgeStep] = []
    gamma = next_temperature(
        0.0, w, ll_new, cfg.target_ess, cfg.bisection_tol, cfg.bisection_max_iter
    )
    w = _reweighted(w, ll_new, gamma)
    steps.append(BridgeStep(gamma, ess(w), None))
    while gamma < 1.0:
        counts = systematic_resample(w, rng)
        take = np.repeat(np.arange(w.size), counts)
        target.reindex(take)
        w = np.full(w.size, 1.0 / w.size)
        moved = 0.0
        for _ in range(cfg.mcmc_sweeps):
            moved += target.sweep(gamma, rng, cfg.kernel)
        moved /= cfg.mcmc_sweeps
        ll_new = target.new_batch_log_liks()
        prev = gamma
        gamma = next_temperature(
            prev, w, ll_new, cfg.target_ess, cfg.bisection_tol, cfg.bisection_max_iter
        )
        w = _reweighted(w, ll_new, gamma - prev)
        steps.append(BridgeStep(gamma, ess(w), moved))
    return ParticlePosterior(target.states, w), TemperingTrace(tuple(steps))


class SequentialPosterior:
    """Particle posterior plus the test history that defines its target."""

    def __init__(self, prior: Prior, noise: NoiseModel, cfg: SmcConfig, rng: np.random.Generator):
        self.prior = prior
        self.noise = noise
        self.cfg = cfg
        self.cloud = prior_particles(prior, cfg.num_particles, rng)
        self.history: list[tuple[GroupBatch, np.ndarray]] = []

    def update(self, batch: GroupBatch, outcomes, rng: np.random.Generator) -> TemperingTrace:
        self.cloud, trace = smc_update(
            self.cloud,
            batch,
            outcomes,
            self.noise,
            self.cfg,
            rng,
            prior=self.prior,
            history=self.history,
        )
        self.history.append((batch, as_outcomes(outcomes, batch.k)))
        return trace

    def marginal(self) -> np.ndarray:
        return self.cloud.marginal()
