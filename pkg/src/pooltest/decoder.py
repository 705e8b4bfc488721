"""Marginal decoding of accumulated test results.

Loopy belief propagation runs on the bipartite graph of individuals
and tests, entirely in log space.  With one message pair per edge,

    alpha_ij = -log(1 + exp(-mu_i - sum_{j' != j} beta_ij'))
    beta_ij  =  log(1 + exp(gamma0_j + sum_{i' != i} alpha_i'j))   negative test
    beta_ij  =  log(1 - exp(gamma1_j + sum_{i' != i} alpha_i'j))   positive test

with mu_i = log((1-q_i)/q_i), gamma0_j = log(rho_j/(1-s_j)) and
gamma1_j = log(rho_j/s_j).  On forests this is exact; on loopy graphs
with contradictory outcomes it can oscillate between rounds instead of
converging, which is detected from the final marginal delta.  The
hybrid decoder falls back to a fresh SMC pass over the whole history
in that case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import GroupBatch, NoiseModel, Prior, as_outcomes
from .posterior import SmcConfig, prior_particles, smc_update

SENSITIVITY_CLAMP = 1.0 - 1e-9
LOG_ONE_MINUS_EXP_CLAMP = -1e-12
MESSAGE_BOUND = 500.0
OSCILLATION_DELTA = 0.5


@dataclass(frozen=True)
class LbpReport:
    marginal: np.ndarray
    converged: bool
    iterations: int
    final_delta: float


def lbp_decode(
    batch: GroupBatch,
    outcomes,
    noise: NoiseModel,
    prior: Prior,
    max_iter: int = 1000,
    tol: float = 0.02,
) -> LbpReport:
    """Synchronous-schedule LBP marginals for a flat batch of all tests so far."""
    n = prior.n
    y = as_outcomes(outcomes, batch.k)
    if batch.k == 0:
        return LbpReport(prior.rates.copy(), True, 0, 0.0)

    mu = -prior.log_odds()
    evar_l, efac_l, gsel_l, epos_l = [], [], [], []
    for j, (g, yj) in enumerate(zip(batch, y)):
        # a sensitivity of exactly 1 makes gamma0 infinite; nudge it inside (0,1)
        s = min(noise.s(g.size), SENSITIVITY_CLAMP)
        rho = noise.sigma(g.size) + s - 1.0
        gam = np.log(rho / s) if yj else np.log(rho / (1.0 - s))
        for i in g.members:
            evar_l.append(i)
            efac_l.append(j)
            gsel_l.append(gam)
            epos_l.append(bool(yj))
    evar = np.asarray(evar_l, dtype=np.intp)
    efac = np.asarray(efac_l, dtype=np.intp)
    gsel = np.asarray(gsel_l)
    epos = np.asarray(epos_l)
    eneg = ~epos

    beta = np.zeros(evar.size)
    prev = expit(-mu)  # beta = 0 reproduces the prior
    marginal = prev
    delta = 0.0
    for it in range(1, max_iter + 1):
        beta_bar = np.bincount(evar, weights=beta, minlength=n)
        alpha = -np.logaddexp(0.0, -mu[evar] - (beta_bar[evar] - beta))
        alpha = np.maximum(alpha, -MESSAGE_BOUND)
        alpha_bar = np.bincount(efac, weights=alpha, minlength=batch.k)
        arg = gsel + alpha_bar[efac] - alpha
        beta = np.empty_like(arg)
        beta[eneg] = np.logaddexp(0.0, arg[eneg])
        beta[epos] = np.log(-np.expm1(np.minimum(arg[epos], LOG_ONE_MINUS_EXP_CLAMP)))
        beta = np.clip(beta, -MESSAGE_BOUND, MESSAGE_BOUND)
        marginal = expit(-(mu + np.bincount(evar, weights=beta, minlength=n)))
        delta = float(np.max(np.abs(marginal - prev)))
        prev = marginal
        if delta <= tol:
            return LbpReport(marginal, True, it, delta)
    return LbpReport(marginal, False, max_iter, delta)


def detect_oscillation(report: LbpReport) -> bool:
    """Non-convergence with the marginal still jumping between rounds."""
    return report.final_delta > OSCILLATION_DELTA


def hybrid_decode(
    batch: GroupBatch,
    outcomes,
    noise: NoiseModel,
    prior: Prior,
    smc_cfg: SmcConfig,
    rng: np.random.Generator,
    max_iter: int = 1000,
    tol: float = 0.02,
) -> np.ndarray:
    """LBP marginal when it converges, otherwise a fresh SMC pass from the prior."""
    report = lbp_decode(batch, outcomes, noise, prior, max_iter, tol)
    if report.converged:
        return report.marginal
    cloud = prior_particles(prior, smc_cfg.num_particles, rng)
    post, _ = smc_update(cloud, batch, outcomes, noise, smc_cfg, rng, prior=prior, history=())
    return post.marginal()
