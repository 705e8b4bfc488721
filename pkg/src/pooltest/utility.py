"""Expected utility of hypothetical test batches.

Scoring a candidate batch G under the current particle posterior means
averaging a terminal reward over the 2^k possible outcome vectors:

    U(G) = sum_y P(y) * Phi(posterior weights given y, particle states)

P(y) and the conditional weights come from one likelihood table over
(outcome, particle) pairs, so the whole computation is O(2^k N k).
Mutual information has a closed form that avoids the reward evaluator:
I(X; Y_G) = H(Y_G) - sum_i [h(sigma_i) + gamma_i f(g_i)] with f(g) the
posterior probability that pool g is positive and gamma_i the entropy
gap h(s_i) - h(sigma_i).
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.special import xlogy
from scipy.stats import rankdata

from .core import GroupBatch, NoiseModel, binary_entropy, entropy_nats
from .posterior import ParticlePosterior

MAX_BATCH_GROUPS = 12
OUTCOME_MASS_FLOOR = 1e-300

PhiFn = Callable[[np.ndarray, np.ndarray], float]


def _check_batch_width(k: int):
    if k > MAX_BATCH_GROUPS:
        raise ValueError(f"batch has {k} groups; utility evaluation caps at {MAX_BATCH_GROUPS}")


def outcome_probability_table(
    p: ParticlePosterior, batch: GroupBatch, noise: NoiseModel
) -> np.ndarray:
    """P(outcome row | particle column), shape (2^k, N); row bit i is group i's result."""
    _check_batch_width(batch.k)
    states = p.states
    B = np.ones((1, states.shape[0]))
    for g in batch:
        status = states[:, g.indices()].any(axis=1).astype(float)
        p1 = 1.0 - noise.sigma(g.size) + noise.rho(g.size) * status
        B = np.vstack([B * (1.0 - p1), B * p1])
    return B


def expected_utility(
    p: ParticlePosterior, batch: GroupBatch, noise: NoiseModel, phi: PhiFn
) -> float:
    """Average of phi over hypothetical outcomes, weighted by their probability.

    Outcomes with probability below 1e-300 are skipped; their
    conditional posteriors are not defined and they contribute nothing.
    An empty batch degenerates to phi on the unconditioned posterior.
    """
    if batch.k == 0:
        return float(phi(p.weights.copy(), p.states))
    B = outcome_probability_table(p, batch, noise)
    C = B * p.weights
    D = C.sum(axis=1)
    total = 0.0
    for i in range(D.size):
        if D[i] < OUTCOME_MASS_FLOOR:
            continue
        total += D[i] * float(phi(C[i] / D[i], p.states))
    return total


def mi_of_batch(p: ParticlePosterior, batch: GroupBatch, noise: NoiseModel) -> float:
    """Mutual information between the infection state and the batch outcomes, in nats."""
    if batch.k == 0:
        return 0.0
    _check_batch_width(batch.k)
    h_cond = 0.0
    for g in batch:
        f = float(p.weights @ p.states[:, g.indices()].any(axis=1))
        h_cond += binary_entropy(noise.sigma(g.size)) + noise.gamma(g.size) * f
    D = outcome_probability_table(p, batch, noise) @ p.weights
    return entropy_nats(D) - h_cond


def mi_single_group(f: float, sigma: float, s: float) -> float:
    """Closed-form single-pool MI given the posterior positive-pool probability f."""
    if not 0.0 <= f <= 1.0:
        raise ValueError("f must be a probability")
    rho = sigma + s - 1.0
    if rho <= 0.0:
        raise ValueError("specificity + sensitivity must exceed 1")
    gamma = binary_entropy(s) - binary_entropy(sigma)
    return binary_entropy(rho * f + 1.0 - sigma) - gamma * f - binary_entropy(sigma)


def neg_entropy_phi() -> PhiFn:
    """Reward = sum_i w_i log w_i; maximizing it minimizes posterior entropy."""

    def phi(weights: np.ndarray, states: np.ndarray) -> float:
        return float(np.sum(xlogy(weights, weights)))

    return phi


def auc_of_scores(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Pairwise ranking accuracy of scores against binary labels.

    Ties get half credit.  Undefined (None) when either class is empty;
    undefined is a value here, not an error.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u = ranks[labels].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def expected_auc_phi() -> PhiFn:
    """Reward = posterior-expected AUC of the conditional marginal against each particle.

    Particles whose state is all-negative or all-positive have no
    defined AUC; the expectation renormalizes over the defined ones and
    falls back to 0.5 when none are.
    """

    def phi(weights: np.ndarray, states: np.ndarray) -> float:
        scores = weights @ states
        ranks = rankdata(scores, method="average")
        pos = states.sum(axis=1)
        neg = states.shape[1] - pos
        defined = (pos > 0) & (neg > 0)
        mass = float(weights[defined].sum())
        if mass <= 0.0:
            return 0.5
        rank_sum = states @ ranks
        with np.errstate(divide="ignore", invalid="ignore"):
            auc = (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)
        return float(np.sum(weights[defined] * auc[defined]) / mass)

    return phi
