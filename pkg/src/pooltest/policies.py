"""Test-allocation policies.

A policy is an ordered schedule of group selectors feeding a pending
queue.  Each testing cycle pops up to k groups off the queue, refilling
from the active selector; a selector that is permanently done (a
one-shot split, an exhausted fixed assay, a reached test-count
threshold) hands over to the next stage, possibly mid-cycle.  Selectors
are pure functions of the observed history, the current decoded
marginal or particle posterior, and their own stream of randomness, so
replaying a seed replays the policy exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Group, GroupBatch, NoiseModel, Prior
from .optimizer import GreedyConfig, greedy_generic, greedy_mimax
from .posterior import ParticlePosterior
from .utility import expected_auc_phi


@dataclass
class PolicyContext:
    """Everything a selector may consult when proposing groups."""

    t: int
    n: int
    n_max: int
    budget: int
    history: Sequence[tuple[GroupBatch, np.ndarray]]
    pending: Sequence[Group]
    prior: Prior
    noise: NoiseModel
    marginal: np.ndarray | None
    posterior: ParticlePosterior | None
    rng: np.random.Generator | None


def dorfman_split_size(q: float, n_max: int) -> int:
    """Classic two-stage pool size, capped by the assay's largest pool."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    return min(n_max, 1 + math.ceil(1.0 / math.sqrt(q)))


def dorfman_split(n: int, q: float, n_max: int) -> list[Group]:
    """Contiguous stage-1 partition of [0, n) into pools of the Dorfman size."""
    c = dorfman_split_size(q, n_max)
    return [Group.of(range(lo, min(lo + c, n))) for lo in range(0, n, c)]


def _tested_groups(history, pending) -> set[tuple[int, ...]]:
    seen = {g.members for batch, _ in history for g in batch}
    seen.update(g.members for g in pending)
    return seen


def split_positives_individual(history, pending) -> list[Group]:
    """One singleton per member of any positive pool, skipping anyone already retested."""
    flagged: set[int] = set()
    for batch, y in history:
        for g, yi in zip(batch, y):
            if yi:
                flagged.update(g.members)
    done = {g.members[0] for batch, _ in history for g in batch if g.size == 1}
    done.update(g.members[0] for g in pending if g.size == 1)
    return [Group.of([i]) for i in sorted(flagged - done)]


def binary_split_positives(history, pending) -> list[Group]:
    """Halve every positive pool of size > 1 whose halves are still untested.

    Positive halves recurse on later cycles once their results arrive;
    size-1 positives are final and negatives clear their members.
    """
    seen = _tested_groups(history, pending)
    out: list[Group] = []
    for batch, y in history:
        for g, yi in zip(batch, y):
            if not yi or g.size < 2:
                continue
            cut = (g.size + 1) // 2
            for half in (g.members[:cut], g.members[cut:]):
                if half not in seen:
                    seen.add(half)
                    out.append(Group(half))
    return out


def mt_group_size(q: float, noise: NoiseModel, n_max: int) -> int:
    """Random-pool size matched to the prior rate; needs a size-1 sensitivity above 1/2."""
    sigma1, s1 = noise.sigma(1), noise.s(1)
    rho1 = sigma1 + s1 - 1.0
    if s1 <= 0.5:
        raise ValueError("random pooling is undefined for sensitivity <= 1/2")
    size = math.floor(math.log((s1 - 0.5) / rho1) / math.log(1.0 - q))
    return max(1, min(n_max, size))


def mt_random_groups(
    n: int, q: float, noise: NoiseModel, n_max: int, count: int, rng: np.random.Generator
) -> list[Group]:
    """count uniform random pools of the matched size."""
    size = min(mt_group_size(q, noise, n_max), n)
    return [Group.of(np.sort(rng.choice(n, size=size, replace=False))) for _ in range(count)]


def informative_dorfman(marginal: np.ndarray, noise: NoiseModel, n_max: int) -> list[Group]:
    """Marginal-sorted partition minimizing expected tests per individual per pool.

    Individuals are sorted by increasing infection probability; the
    next pool takes the prefix whose size c minimizes

        (1/c) * (1 + [c>1] * c * (s_c + (1 - s_c - sigma_c) * prod(1 - p_u)))

    i.e. one pool test plus the expected per-member retests.
    """
    marginal = np.asarray(marginal, dtype=float)
    order = np.argsort(marginal, kind="stable")
    groups: list[Group] = []
    pos = 0
    while pos < order.size:
        remaining = order.size - pos
        best_c, best_cost = 1, math.inf
        surv = 1.0
        for c in range(1, min(n_max, remaining) + 1):
            surv *= 1.0 - marginal[order[pos + c - 1]]
            cost = 1.0
            if c > 1:
                s_c = noise.s(c)
                sigma_c = noise.sigma(c)
                cost += c * (s_c + (1.0 - s_c - sigma_c) * surv)
            cost /= c
            if cost < best_cost:
                best_c, best_cost = c, cost
        groups.append(Group.of(np.sort(order[pos : pos + best_c])))
        pos += best_c
    return groups


def load_assay(path: str | Path, n: int) -> list[Group]:
    """Fixed assay file: one pool per line, comma-separated 0-based indices, # comments."""
    groups: list[Group] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            members = [int(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: not a comma-separated index list") from exc
        if any(i < 0 or i >= n for i in members):
            raise ValueError(f"{path}:{lineno}: index outside [0, {n})")
        groups.append(Group.of(members))
    if not groups:
        raise ValueError(f"{path}: assay file defines no pools")
    return groups


class Selector:
    """One stage of a policy; propose returns (groups, permanently_done)."""

    needs_posterior = False

    def propose(self, ctx: PolicyContext) -> tuple[list[Group], bool]:
        raise NotImplementedError


class DorfmanSplit(Selector):
    def __init__(self):
        self.fired = False

    def propose(self, ctx):
        if self.fired:
            return [], True
        self.fired = True
        q = float(np.mean(ctx.prior.rates))
        return dorfman_split(ctx.n, q, ctx.n_max), True


class SplitPositivesIndividual(Selector):
    def propose(self, ctx):
        return split_positives_individual(ctx.history, ctx.pending), False


class BinarySplitPositives(Selector):
    def propose(self, ctx):
        return binary_split_positives(ctx.history, ctx.pending), False


class RandomGroups(Selector):
    def propose(self, ctx):
        q = float(np.mean(ctx.prior.rates))
        return mt_random_groups(ctx.n, q, ctx.noise, ctx.n_max, ctx.budget, ctx.rng), False


class InformativeDorfman(Selector):
    def propose(self, ctx):
        marginal = ctx.marginal if ctx.marginal is not None else ctx.prior.rates
        return informative_dorfman(marginal, ctx.noise, ctx.n_max), False


class FixedAssay(Selector):
    def __init__(self, groups: Sequence[Group]):
        self.groups = list(groups)
        self.cursor = 0

    def propose(self, ctx):
        take = self.groups[self.cursor : self.cursor + ctx.budget]
        self.cursor += len(take)
        return take, self.cursor >= len(self.groups)


class AllSingletons(Selector):
    def __init__(self):
        self.fired = False

    def propose(self, ctx):
        if self.fired:
            return [], True
        self.fired = True
        return [Group.of([i]) for i in range(ctx.n)], True


class BoedSelector(Selector):
    needs_posterior = True

    def __init__(self, kind: str, forward: int = 3, backward: int = 2):
        if kind not in ("mi", "auc"):
            raise ValueError("kind must be 'mi' or 'auc'")
        self.kind = kind
        self.forward = forward
        self.backward = backward

    def propose(self, ctx):
        if ctx.budget < 1:
            return [], False
        if ctx.posterior is None:
            raise ValueError("information-driven selection needs a particle posterior")
        cfg = GreedyConfig(
            k=ctx.budget, n_max=ctx.n_max, forward=self.forward, backward=self.backward
        )
        if self.kind == "mi":
            batch = greedy_mimax(ctx.posterior, ctx.noise, cfg)
        else:
            batch = greedy_generic(ctx.posterior, ctx.noise, cfg, expected_auc_phi())
        return list(batch.groups), False


@dataclass
class PolicyStage:
    selector: Selector
    until_tests: int | None = None


class Policy:
    """Selector schedule plus the pending-group queue shared across cycles."""

    def __init__(self, name: str, stages: Sequence[PolicyStage]):
        if not stages:
            raise ValueError("a policy needs at least one stage")
        self.name = name
        self.stages = list(stages)
        self.stage_idx = 0
        self.stage_done = [False] * len(stages)
        self.queue: list[Group] = []
        self.tests_proposed = 0

    @property
    def needs_posterior(self) -> bool:
        return any(stage.selector.needs_posterior for stage in self.stages)

    def _advance_past_finished(self, proposed_so_far: int):
        while self.stage_idx < len(self.stages):
            stage = self.stages[self.stage_idx]
            threshold_hit = (
                stage.until_tests is not None
                and self.tests_proposed + proposed_so_far >= stage.until_tests
            )
            if self.stage_done[self.stage_idx] or threshold_hit:
                self.stage_idx += 1
            else:
                return

    def step(self, ctx: PolicyContext, k: int) -> GroupBatch:
        """Pop up to k pending groups, refilling from the schedule as needed."""
        out: list[Group] = []
        consulted: set[int] = set()
        while len(out) < k:
            if self.queue:
                out.append(self.queue.pop(0))
                continue
            self._advance_past_finished(len(out))
            if self.stage_idx >= len(self.stages) or self.stage_idx in consulted:
                break
            consulted.add(self.stage_idx)
            ctx.budget = k - len(out)
            ctx.pending = tuple(out) + tuple(self.queue)
            groups, done = self.stages[self.stage_idx].selector.propose(ctx)
            if done:
                self.stage_done[self.stage_idx] = True
            for g in groups:
                if g.size > ctx.n_max:
                    raise ValueError(f"selector produced a pool of {g.size} > n_max {ctx.n_max}")
                if g.members[-1] >= ctx.n:
                    raise ValueError("selector produced an out-of-range individual")
                self.queue.append(g)
            if not groups and not done:
                break
        self.tests_proposed += len(out)
        return GroupBatch(tuple(out))


def policy_step(policy: Policy, ctx: PolicyContext, k: int) -> GroupBatch:
    return policy.step(ctx, k)


def build_policy(spec: dict, n: int, n_max: int, k: int) -> Policy:
    """Instantiate a policy from its JSON description."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if not name:
        raise ValueError("policy spec needs a 'name'")
    matrix = spec.pop("matrix", None)
    switch_after = spec.pop("switch_after", 22)
    forward = spec.pop("forward", 3)
    backward = spec.pop("backward", 2)
    if spec:
        raise ValueError(f"unknown policy options: {sorted(spec)}")

    def fixed():
        if matrix is None:
            raise ValueError(f"policy {name!r} needs a 'matrix' assay file")
        return FixedAssay(load_assay(matrix, n))

    if name == "individual":
        stages = [PolicyStage(AllSingletons())]
    elif name == "dorfman":
        stages = [PolicyStage(DorfmanSplit()), PolicyStage(SplitPositivesIndividual())]
    elif name == "binary-dorfman":
        stages = [PolicyStage(DorfmanSplit()), PolicyStage(BinarySplitPositives())]
    elif name == "random":
        stages = [PolicyStage(RandomGroups())]
    elif name == "random-id":
        stages = [PolicyStage(RandomGroups(), until_tests=k), PolicyStage(InformativeDorfman())]
    elif name == "informative-dorfman":
        stages = [PolicyStage(InformativeDorfman())]
    elif name == "origami-id":
        stages = [PolicyStage(fixed(), until_tests=switch_after), PolicyStage(InformativeDorfman())]
    elif name == "origami-random":
        stages = [PolicyStage(fixed(), until_tests=switch_after), PolicyStage(RandomGroups())]
    elif name == "g-mimax":
        stages = [PolicyStage(BoedSelector("mi", forward, backward))]
    elif name == "g-aucmax":
        stages = [PolicyStage(BoedSelector("auc", forward, backward))]
    else:
        raise ValueError(f"unknown policy {name!r}")
    return Policy(name, stages)
