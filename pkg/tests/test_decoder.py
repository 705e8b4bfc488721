import numpy as np
import pytest

from pooltest.core import GroupBatch, NoiseModel, Prior
from pooltest.decoder import LbpReport, detect_oscillation, hybrid_decode, lbp_decode
from pooltest.posterior import ExactPosterior, SmcConfig
from pooltest.streams import DECODE, stream

from test_posterior import random_instance

# two triangles sharing an edge with contradictory outcomes: loopy belief
# propagation never settles on this one, even after the full iteration budget
OSCILLATING = {
    "groups": [[0, 1], [1, 2], [0, 2], [2, 3], [1, 3]],
    "n": 4,
    "q": 0.3,
    "sigma": 0.99,
    "s": 0.99,
    "outcomes": [0, 1, 1, 0, 1],
}


def disjoint_instance(seed, n=12):
    """Random disjoint pools over n individuals: a forest, so LBP is exact."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n).tolist()
    groups = []
    while perm:
        size = int(rng.integers(1, 5))
        groups.append(sorted(perm[:size]))
        perm = perm[size:]
    prior = Prior(rng.uniform(0.03, 0.4, size=n))
    noise = NoiseModel.constant(
        float(rng.uniform(0.85, 0.999)), float(rng.uniform(0.7, 0.999)), 4
    )
    y = rng.integers(0, 2, size=len(groups)).astype(np.uint8)
    return prior, GroupBatch.of(groups), y, noise


def test_singleton_bayes_anchor():
    prior = Prior.uniform(1, 0.5)
    noise = NoiseModel.constant(0.97, 0.85, 1)
    rep = lbp_decode(GroupBatch.of([[0]]), [1], noise, prior)
    assert rep.converged
    assert rep.marginal[0] == pytest.approx(0.85 / 0.88, abs=1e-9)


def test_empty_batch_returns_prior():
    prior = Prior(np.array([0.1, 0.3]))
    noise = NoiseModel.constant(0.97, 0.85, 1)
    rep = lbp_decode(GroupBatch(()), np.zeros(0, dtype=np.uint8), noise, prior)
    assert rep.converged
    assert rep.iterations == 0
    np.testing.assert_allclose(rep.marginal, prior.rates)


@pytest.mark.parametrize("seed", range(8))
def test_forest_instances_match_exact_marginals(seed):
    prior, batch, y, noise = disjoint_instance(seed)
    exact = ExactPosterior.from_prior(prior).updated(batch, y, noise)
    rep = lbp_decode(batch, y, noise, prior)
    assert rep.converged
    np.testing.assert_allclose(rep.marginal, exact.marginal(), atol=1e-6)


def test_chain_overlap_still_exact():
    # pools overlapping in a path (no cycle): {0,1}, {1,2}, {2,3}
    prior = Prior.uniform(4, 0.2)
    noise = NoiseModel.constant(0.95, 0.9, 2)
    batch = GroupBatch.of([[0, 1], [1, 2], [2, 3]])
    y = np.array([1, 0, 1], dtype=np.uint8)
    exact = ExactPosterior.from_prior(prior).updated(batch, y, noise)
    rep = lbp_decode(batch, y, noise, prior)
    assert rep.converged
    np.testing.assert_allclose(rep.marginal, exact.marginal(), atol=1e-6)


def test_noiseless_singleton_clamps_without_nans():
    prior = Prior.uniform(2, 0.25)
    noise = NoiseModel.constant(1.0, 1.0, 1)
    rep = lbp_decode(GroupBatch.of([[0]]), [1], noise, prior)
    assert np.isfinite(rep.marginal).all()
    assert rep.marginal[0] == pytest.approx(1.0, abs=1e-9)
    rep = lbp_decode(GroupBatch.of([[0]]), [0], noise, prior)
    assert rep.marginal[0] == pytest.approx(0.0, abs=1e-9)


def test_all_negative_outcomes_lower_every_tested_marginal():
    prior = Prior.uniform(6, 0.3)
    noise = NoiseModel.constant(0.95, 0.85, 3)
    batch = GroupBatch.of([[0, 1, 2], [3, 4]])
    rep = lbp_decode(batch, np.zeros(2, dtype=np.uint8), noise, prior)
    assert rep.converged
    assert (rep.marginal[:5] < 0.3).all()
    assert rep.marginal[5] == pytest.approx(0.3, abs=1e-9)


def test_oscillation_detected_on_contradictory_loops():
    spec = OSCILLATING
    prior = Prior.uniform(spec["n"], spec["q"])
    noise = NoiseModel.constant(spec["sigma"], spec["s"], 2)
    batch = GroupBatch.of(spec["groups"])
    rep = lbp_decode(batch, np.array(spec["outcomes"], dtype=np.uint8), noise, prior, max_iter=1000)
    assert not rep.converged
    assert rep.iterations == 1000
    assert detect_oscillation(rep)


def test_oscillation_not_reported_for_converged_runs():
    prior, batch, y, noise = disjoint_instance(3)
    rep = lbp_decode(batch, y, noise, prior)
    assert rep.converged
    assert not detect_oscillation(rep)


def test_detect_oscillation_uses_final_delta():
    base = dict(marginal=np.array([0.5]), converged=False, iterations=1000)
    assert detect_oscillation(LbpReport(final_delta=0.7, **base))
    assert not detect_oscillation(LbpReport(final_delta=0.01, **base))


def test_hybrid_returns_lbp_marginal_when_it_converges():
    prior, batch, y, noise = disjoint_instance(5)
    rep = lbp_decode(batch, y, noise, prior)
    got = hybrid_decode(
        batch, y, noise, prior, SmcConfig(num_particles=200), stream(5, 1, DECODE)
    )
    np.testing.assert_array_equal(got, rep.marginal)


def test_hybrid_falls_back_to_smc_on_oscillation():
    spec = OSCILLATING
    prior = Prior.uniform(spec["n"], spec["q"])
    noise = NoiseModel.constant(spec["sigma"], spec["s"], 2)
    batch = GroupBatch.of(spec["groups"])
    y = np.array(spec["outcomes"], dtype=np.uint8)
    exact = ExactPosterior.from_prior(prior).updated(batch, y, noise)
    got = hybrid_decode(
        batch, y, noise, prior, SmcConfig(num_particles=20_000), stream(4, 1, DECODE)
    )
    assert np.max(np.abs(got - exact.marginal())) < 0.02


def test_hybrid_is_deterministic_given_stream():
    prior, batch, y, noise = disjoint_instance(9)
    a = hybrid_decode(batch, y, noise, prior, SmcConfig(num_particles=500), stream(9, 1, DECODE))
    b = hybrid_decode(batch, y, noise, prior, SmcConfig(num_particles=500), stream(9, 1, DECODE))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", range(5))
def test_lbp_close_on_random_loopy_instances_that_converge(seed):
    # loopy graphs carry no exactness guarantee; when the message passing
    # does converge it should still land near the exact marginal
    rng = np.random.default_rng(100 + seed)
    prior, batch, y, noise = random_instance(rng, 8, 4)
    exact = ExactPosterior.from_prior(prior).updated(batch, y, noise)
    rep = lbp_decode(batch, y, noise, prior)
    if rep.converged:
        assert np.max(np.abs(rep.marginal - exact.marginal())) < 0.2
