import numpy as np
import pytest

from pooltest.core import Group, GroupBatch, NoiseModel, Prior
from pooltest.policies import (
    BoedSelector,
    Policy,
    PolicyContext,
    PolicyStage,
    RandomGroups,
    build_policy,
    binary_split_positives,
    dorfman_split,
    dorfman_split_size,
    informative_dorfman,
    load_assay,
    mt_group_size,
    mt_random_groups,
    policy_step,
    split_positives_individual,
)
from pooltest.posterior import prior_particles
from pooltest.streams import PARTICLES, SELECT, stream


def make_ctx(n=70, q=0.05, n_max=10, k=8, t=1, history=(), marginal=None,
             posterior=None, seed=0):
    prior = Prior.uniform(n, q)
    return PolicyContext(
        t=t,
        n=n,
        n_max=n_max,
        budget=k,
        history=list(history),
        pending=(),
        prior=prior,
        noise=NoiseModel.constant(0.97, 0.85, n_max),
        marginal=prior.rates.copy() if marginal is None else marginal,
        posterior=posterior,
        rng=stream(seed, t, SELECT),
    )


def observed(groups, outcomes):
    batch = GroupBatch.of(groups)
    return (batch, np.asarray(outcomes, dtype=np.uint8))


def test_dorfman_split_size_formula():
    assert dorfman_split_size(0.05, 10) == 6  # 1 + ceil(4.472)
    assert dorfman_split_size(0.02, 10) == 9  # 1 + ceil(7.071)
    assert dorfman_split_size(0.10, 10) == 5
    assert dorfman_split_size(0.02, 4) == 4  # capped by the assay
    with pytest.raises(ValueError):
        dorfman_split_size(0.0, 10)
    with pytest.raises(ValueError):
        dorfman_split_size(1.0, 10)


def test_dorfman_split_partition_shape():
    groups = dorfman_split(70, 0.05, 10)
    assert len(groups) == 12
    assert [g.size for g in groups] == [6] * 11 + [4]
    flat = [i for g in groups for i in g.members]
    assert flat == list(range(70))  # contiguous partition


def test_split_positives_dedup_and_skip_retested():
    history = [observed([[1, 2], [2, 3], [4, 5]], [1, 1, 0])]
    got = split_positives_individual(history, ())
    assert [g.members for g in got] == [(1,), (2,), (3,)]
    # anyone already singled out, in history or pending, is skipped
    history.append(observed([[2]], [1]))
    got = split_positives_individual(history, (Group.of([3]),))
    assert [g.members for g in got] == [(1,)]


def test_split_positives_empty_when_all_negative():
    history = [observed([[0, 1], [2, 3]], [0, 0])]
    assert split_positives_individual(history, ()) == []


def test_binary_split_halves_ceil_floor():
    history = [observed([[0, 1, 2, 3, 4]], [1])]
    got = binary_split_positives(history, ())
    assert [g.members for g in got] == [(0, 1, 2), (3, 4)]
    history = [observed([[0, 1, 2, 3]], [1])]
    got = binary_split_positives(history, ())
    assert [g.members for g in got] == [(0, 1), (2, 3)]


def test_binary_split_skips_tested_halves_and_negatives():
    history = [
        observed([[0, 1, 2, 3]], [1]),
        observed([[0, 1], [2, 3]], [1, 0]),
    ]
    # {0,1} positive: split to {0},{1}; {2,3} negative: cleared
    got = binary_split_positives(history, ())
    assert [g.members for g in got] == [(0,), (1,)]
    # size-1 positives are final, no children
    history.append(observed([[0], [1]], [1, 0]))
    assert binary_split_positives(history, ()) == []


def test_mt_group_size_formula_and_errors():
    noise = NoiseModel.constant(0.97, 0.85, 10)
    # floor(log(0.35/0.82) / log(0.95)) = floor(16.598) = 16, capped at 10
    assert mt_group_size(0.05, noise, 10) == 10
    assert mt_group_size(0.05, noise, 20) == 16
    noiseless = NoiseModel.constant(1.0, 1.0, 10)
    assert mt_group_size(0.5, noiseless, 10) == 1  # log(1/2)/log(1/2)
    coin = NoiseModel.constant(0.99, 0.5, 10)
    with pytest.raises(ValueError):
        mt_group_size(0.05, coin, 10)


def test_mt_random_groups_deterministic_and_sized():
    noise = NoiseModel.constant(0.97, 0.85, 10)
    a = mt_random_groups(70, 0.05, noise, 10, 4, stream(3, 1, SELECT))
    b = mt_random_groups(70, 0.05, noise, 10, 4, stream(3, 1, SELECT))
    assert [g.members for g in a] == [g.members for g in b]
    assert len(a) == 4
    assert all(g.size == 10 for g in a)


def test_informative_dorfman_uniform_point_three():
    noise = NoiseModel.constant(1.0, 1.0, 10)
    groups = informative_dorfman(np.full(9, 0.3), noise, 10)
    # c* = 3: costs 1.0, 1.01, 0.99033, 1.00992 for c = 1..4
    assert [g.size for g in groups] == [3, 3, 3]
    flat = sorted(i for g in groups for i in g.members)
    assert flat == list(range(9))


def test_informative_dorfman_certain_positives_go_individually():
    noise = NoiseModel.constant(0.97, 0.85, 10)
    groups = informative_dorfman(np.ones(4), noise, 10)
    assert [g.size for g in groups] == [1, 1, 1, 1]


def test_informative_dorfman_sorts_ascending_marginal():
    noise = NoiseModel.constant(1.0, 1.0, 3)
    marginal = np.array([0.9, 0.01, 0.02, 0.95])
    groups = informative_dorfman(marginal, noise, 3)
    # lowest-risk individuals pool first
    assert 1 in groups[0].members and 0 not in groups[0].members
    flat = sorted(i for g in groups for i in g.members)
    assert flat == [0, 1, 2, 3]


def test_informative_dorfman_single_individual():
    noise = NoiseModel.constant(0.97, 0.85, 10)
    groups = informative_dorfman(np.array([0.2]), noise, 10)
    assert [g.members for g in groups] == [(0,)]


def test_load_assay_parses_comments_and_validates(tmp_path):
    path = tmp_path / "assay.txt"
    path.write_text("# header\n0,1,2\n\n3,4 # trailing\n")
    groups = load_assay(path, 5)
    assert [g.members for g in groups] == [(0, 1, 2), (3, 4)]
    path.write_text("0,99\n")
    with pytest.raises(ValueError):
        load_assay(path, 5)
    path.write_text("zero,one\n")
    with pytest.raises(ValueError):
        load_assay(path, 5)
    path.write_text("# nothing\n")
    with pytest.raises(ValueError):
        load_assay(path, 5)


def test_dorfman_policy_stage_one_stacks_overflow():
    policy = build_policy({"name": "dorfman"}, n=70, n_max=10, k=8)
    ctx = make_ctx()
    batch = policy.step(ctx, 8)
    assert batch.k == 8
    assert all(g.size == 6 for g in batch)
    assert batch.groups[0].members == (0, 1, 2, 3, 4, 5)
    assert len(policy.queue) == 4  # 12 produced, 8 taken


def test_dorfman_policy_stage_two_pops_then_refills():
    policy = build_policy({"name": "dorfman"}, n=70, n_max=10, k=8)
    ctx = make_ctx()
    first = policy.step(ctx, 8)
    # pools 0 and 2 come back positive
    history = [observed(first.member_lists(), [1, 0, 1, 0, 0, 0, 0, 0])]
    ctx2 = make_ctx(t=2, history=history)
    second = policy.step(ctx2, 8)
    # 4 stacked pools drain first (the last is the size-4 remainder of 70),
    # then singleton retests fill the rest
    assert second.k == 8
    assert [g.size for g in second.groups[:4]] == [6, 6, 6, 4]
    assert second.groups[0].members == (48, 49, 50, 51, 52, 53)
    singles = [g.members[0] for g in second.groups[4:]]
    assert singles == [0, 1, 2, 3]  # members of positive pool 0, lowest first


def test_random_policy_always_fills_budget():
    policy = build_policy({"name": "random"}, n=70, n_max=10, k=8)
    for t in (1, 2, 3):
        batch = policy.step(make_ctx(t=t, seed=9), 8)
        assert batch.k == 8
        assert all(g.size == 10 for g in batch)


def test_individual_policy_exhausts_after_every_singleton():
    policy = build_policy({"name": "individual"}, n=5, n_max=3, k=3)
    got = []
    for t in (1, 2):
        got += policy.step(make_ctx(n=5, n_max=3, t=t), 3).member_lists()
    assert got == [[0], [1], [2], [3], [4]]
    assert policy.step(make_ctx(n=5, n_max=3, t=3), 3).k == 0  # exhausted


def test_random_id_switches_after_first_wave():
    policy = build_policy({"name": "random-id"}, n=12, n_max=4, k=4)
    first = policy.step(make_ctx(n=12, n_max=4, k=4, seed=2), 4)
    assert first.k == 4
    marginal = np.linspace(0.01, 0.4, 12)
    second = policy.step(
        make_ctx(n=12, n_max=4, k=4, t=2, seed=2, marginal=marginal), 4
    )
    # stage 2 is the marginal-sorted partitioner: pools must be sorted prefixes
    flat = [i for g in second.groups for i in g.members]
    assert flat[0] == 0  # lowest marginal first
    assert second.k >= 1


def test_fixed_assay_policy_consumes_columns_then_switches(tmp_path):
    path = tmp_path / "m.txt"
    lines = [",".join(str(i) for i in range(lo, lo + 3)) for lo in range(0, 30, 3)]
    path.write_text("\n".join(lines))
    policy = build_policy(
        {"name": "origami-id", "matrix": str(path), "switch_after": 10},
        n=30, n_max=3, k=4,
    )
    seen = []
    for t in (1, 2, 3):
        batch = policy.step(make_ctx(n=30, n_max=3, k=4, t=t), 4)
        seen.append(batch.member_lists())
    # 10 fixed pools then the informative partition takes over mid-cycle 3
    assert seen[0] == [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]]
    assert seen[1] == [[12, 13, 14], [15, 16, 17], [18, 19, 20], [21, 22, 23]]
    assert seen[2][:2] == [[24, 25, 26], [27, 28, 29]]
    assert len(seen[2]) == 4


def test_fixed_assay_requires_matrix_and_valid_sizes(tmp_path):
    with pytest.raises(ValueError):
        build_policy({"name": "origami-id"}, n=10, n_max=3, k=2)
    path = tmp_path / "wide.txt"
    path.write_text("0,1,2,3\n")
    policy = build_policy(
        {"name": "origami-random", "matrix": str(path)}, n=10, n_max=3, k=2
    )
    with pytest.raises(ValueError):
        policy.step(make_ctx(n=10, n_max=3, k=2), 2)  # size 4 > n_max 3


def test_boed_policy_uses_posterior_and_respects_budget():
    prior = Prior.uniform(12, 0.1)
    cloud = prior_particles(prior, 500, stream(7, 0, PARTICLES))
    policy = build_policy({"name": "g-mimax"}, n=12, n_max=4, k=3)
    assert policy.needs_posterior
    batch = policy.step(make_ctx(n=12, n_max=4, k=3, posterior=cloud, seed=7), 3)
    assert 1 <= batch.k <= 3
    assert all(g.size <= 4 for g in batch)
    with pytest.raises(ValueError):
        policy2 = build_policy({"name": "g-mimax"}, n=12, n_max=4, k=3)
        policy2.step(make_ctx(n=12, n_max=4, k=3, posterior=None), 3)


def test_boed_selector_zero_budget_is_empty():
    sel = BoedSelector("mi")
    ctx = make_ctx(k=0)
    ctx.budget = 0
    groups, done = sel.propose(ctx)
    assert groups == []
    assert not done


def test_registry_rejects_unknown_names_and_options():
    with pytest.raises(ValueError):
        build_policy({"name": "does-not-exist"}, n=10, n_max=4, k=2)
    with pytest.raises(ValueError):
        build_policy({"name": "random", "bogus": 1}, n=10, n_max=4, k=2)
    with pytest.raises(ValueError):
        build_policy({}, n=10, n_max=4, k=2)


def test_registry_builds_every_documented_policy(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("0,1\n2,3\n")
    names = [
        {"name": "individual"},
        {"name": "dorfman"},
        {"name": "binary-dorfman"},
        {"name": "random"},
        {"name": "random-id"},
        {"name": "informative-dorfman"},
        {"name": "origami-id", "matrix": str(path)},
        {"name": "origami-random", "matrix": str(path)},
        {"name": "g-mimax"},
        {"name": "g-aucmax"},
    ]
    for spec in names:
        policy = build_policy(dict(spec), n=6, n_max=2, k=2)
        assert isinstance(policy, Policy)
    assert build_policy({"name": "g-aucmax"}, 6, 2, 2).needs_posterior
    assert not build_policy({"name": "dorfman"}, 6, 2, 2).needs_posterior


def test_policy_step_helper_delegates():
    policy = build_policy({"name": "individual"}, n=3, n_max=1, k=2)
    batch = policy_step(policy, make_ctx(n=3, n_max=1, k=2), 2)
    assert batch.member_lists() == [[0], [1]]


def test_selector_output_validated_against_population():
    class Rogue(RandomGroups):
        def propose(self, ctx):
            return [Group.of([ctx.n + 5])], False

    policy = Policy("rogue", [PolicyStage(Rogue())])
    with pytest.raises(ValueError):
        policy.step(make_ctx(n=10, n_max=4), 2)
