"""Where loopy belief propagation works, where it breaks, and the repair.

On disjoint pools the test graph is a forest and LBP is exact. Overlapping
pools with contradictory outcomes can make the synchronous schedule
oscillate forever; the hybrid decoder notices and reruns the update with a
fresh SMC pass instead.
"""

import numpy as np

from pooltest import (
    ExactPosterior,
    GroupBatch,
    NoiseModel,
    Prior,
    SmcConfig,
    detect_oscillation,
    hybrid_decode,
    lbp_decode,
)
from pooltest.streams import DECODE, stream

# forest case: disjoint pools, LBP is exact
prior = Prior.uniform(9, 0.1)
noise = NoiseModel.constant(0.97, 0.85, 9)
batch = GroupBatch.of([[0, 1, 2], [3, 4, 5], [6, 7, 8]])
y = np.array([1, 0, 1], dtype=np.uint8)
report = lbp_decode(batch, y, noise, prior)
exact = ExactPosterior.from_prior(prior).updated(batch, y, noise)
print("disjoint pools: converged in", report.iterations, "iterations,",
      f"max error vs exact {np.abs(report.marginal - exact.marginal()).max():.2e}\n")

# two triangles sharing an edge plus contradictory outcomes: LBP never settles
groups = [[0, 1], [1, 2], [0, 2], [2, 3], [1, 3]]
outcomes = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
prior4 = Prior.uniform(4, 0.3)
noise4 = NoiseModel.constant(0.99, 0.99, 2)
report = lbp_decode(GroupBatch.of(groups), outcomes, noise4, prior4, max_iter=1000)
print("overlapping contradictory instance:")
print("  converged:", report.converged,
      "after", report.iterations, "iterations,",
      f"marginal still moving by {report.final_delta:.3f} per round")
print("  oscillation detected:", detect_oscillation(report))

marginal = hybrid_decode(
    GroupBatch.of(groups), outcomes, noise4, prior4,
    SmcConfig(num_particles=20_000), stream(0, 1, DECODE),
)
truth = ExactPosterior.from_prior(prior4).updated(
    GroupBatch.of(groups), outcomes, noise4)
print("\nhybrid fallback vs exact marginals:")
for i, (a, b) in enumerate(zip(marginal, truth.marginal())):
    print(f"  individual {i}: {a:.4f}  {b:.4f}")
