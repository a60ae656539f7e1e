"""Bandit scheduler tests: conjugate posterior bookkeeping, credit
assignment, distribution algebra and the refresh cadence."""

import math
import random
from collections import Counter

import pytest

from bandit_sim import run_synthetic_trial
from banditfuzz.mutation import ALL_OPERATORS, Dictionary, MutationOperator as Op
from banditfuzz.scheduler import (
    ArmPosterior,
    OperatorDistribution,
    OperatorScheduler,
    active_operators,
    empirical_distribution,
    load_counts,
    load_distribution,
    merge_counts,
    resample_distribution,
    save_counts,
    save_distribution,
    update_counts,
)


def test_posterior_examples():
    arm = ArmPosterior(1.0, 1000.0, n_success=3, n_failure=97)
    assert arm.posterior() == (4.0, 1097.0)
    assert ArmPosterior(1.0, 1000.0).posterior() == (1.0, 1000.0)
    assert ArmPosterior(2.0, 5.0, n_success=0, n_failure=1).posterior() == (2.0, 6.0)


def test_prior_must_be_positive():
    with pytest.raises(ValueError):
        ArmPosterior(0.0, 1000.0)
    with pytest.raises(ValueError):
        ArmPosterior(1.0, -1.0)


def test_update_counts_example():
    arms = {op: ArmPosterior() for op in ALL_OPERATORS}
    record = [(Op.BIT_FLIP, 0), (Op.DELETE, 3), (Op.DELETE, 7), (Op.CLONE, 2)]
    update_counts(arms, record, success=True)
    assert arms[Op.BIT_FLIP].n_success == 1
    assert arms[Op.DELETE].n_success == 2
    assert arms[Op.CLONE].n_success == 1
    assert sum(a.n_success for a in arms.values()) == 4
    assert sum(a.n_failure for a in arms.values()) == 0
    update_counts(arms, record, success=False)
    assert arms[Op.DELETE].n_failure == 2


def test_posterior_matches_independent_tally():
    # conjugacy bookkeeping vs a hand tally over random feedback
    rng = random.Random(17)
    arms = {op: ArmPosterior(1.0, 1000.0) for op in ALL_OPERATORS}
    wins, losses = Counter(), Counter()
    for _ in range(500):
        record = [
            (rng.choice(ALL_OPERATORS), rng.randrange(64))
            for _ in range(rng.choice((2, 4, 8)))
        ]
        success = rng.random() < 0.1
        update_counts(arms, record, success)
        for op, _ in record:
            (wins if success else losses)[op] += 1
    for op in ALL_OPERATORS:
        assert arms[op].posterior() == (1.0 + wins[op], 1000.0 + losses[op])


def test_empirical_distribution_examples():
    ops = ALL_OPERATORS[:3]
    d = empirical_distribution(dict(zip(ops, (2, 1, 1))), ops)
    assert d.probabilities == [0.5, 0.25, 0.25]
    d = empirical_distribution(dict(zip(ops, (5, 0, 0))), ops)
    assert d.probabilities == [1.0, 0.0, 0.0]
    d = empirical_distribution(dict(zip(ops, (5, 0, 0))), ops, smoothing=True)
    assert d.probabilities == [6 / 8, 1 / 8, 1 / 8]
    d = empirical_distribution(dict.fromkeys(ALL_OPERATORS, 1), ALL_OPERATORS)
    assert all(abs(p - 1 / 16) < 1e-12 for p in d.probabilities)


def test_empirical_distribution_rejects_degenerate_counts():
    with pytest.raises(ValueError):
        empirical_distribution(dict.fromkeys(ALL_OPERATORS, 0), ALL_OPERATORS)
    with pytest.raises(ValueError):
        empirical_distribution({Op.BIT_FLIP: -1, Op.DELETE: 2}, (Op.BIT_FLIP, Op.DELETE))


def test_distribution_validation():
    ops = ALL_OPERATORS[:2]
    with pytest.raises(ValueError):
        OperatorDistribution(ops, [0.5, 0.6])
    with pytest.raises(ValueError):
        OperatorDistribution(ops, [1.5, -0.5])
    with pytest.raises(ValueError):
        OperatorDistribution((Op.BIT_FLIP, Op.BIT_FLIP), [0.5, 0.5])
    with pytest.raises(ValueError):
        OperatorDistribution((), [])


def test_uniform_distribution():
    d = OperatorDistribution.uniform(ALL_OPERATORS)
    assert len(d.operators) == 16
    assert all(p == 1 / 16 for p in d.probabilities)
    assert abs(sum(d.probabilities) - 1.0) <= 1e-9


def test_sampling_matches_probabilities():
    rng = random.Random(8)
    ops = ALL_OPERATORS[:4]
    d = OperatorDistribution(ops, [0.5, 0.25, 0.125, 0.125])
    n = 80_000
    counts = Counter(d.sample(rng) for _ in range(n))
    for op, p in zip(ops, d.probabilities):
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(counts[op] - n * p) < 5 * sigma, op


def test_zero_probability_arm_is_never_drawn():
    rng = random.Random(9)
    d = OperatorDistribution(ALL_OPERATORS[:3], [0.5, 0.0, 0.5])
    assert all(d.sample(rng) is not ALL_OPERATORS[1] for _ in range(5000))


def test_restricted_renormalizes():
    d = OperatorDistribution.uniform(ALL_OPERATORS)
    sub = d.restricted(active_operators(Dictionary()))
    assert len(sub.operators) == 14
    assert all(abs(p - 1 / 14) < 1e-12 for p in sub.probabilities)
    with pytest.raises(ValueError):
        probs = [0.0] * 16
        probs[ALL_OPERATORS.index(Op.EXTRA_INSERT)] = 1.0
        OperatorDistribution(ALL_OPERATORS, probs).restricted(
            active_operators(Dictionary())
        )


def test_active_operators_masking():
    assert active_operators(Dictionary([b"tok"])) == ALL_OPERATORS
    masked = active_operators(Dictionary())
    assert len(masked) == 14
    assert Op.EXTRA_INSERT not in masked and Op.EXTRA_OVERWRITE not in masked
    assert active_operators(None) == masked


def test_resample_is_a_valid_distribution():
    rng = random.Random(10)
    arms = {op: ArmPosterior() for op in ALL_OPERATORS}
    d = resample_distribution(arms, rng, ALL_OPERATORS)
    assert abs(sum(d.probabilities) - 1.0) <= 1e-9
    assert all(0 < p < 1 for p in d.probabilities)


def test_resample_favors_the_evidence():
    rng = random.Random(11)
    arms = {op: ArmPosterior() for op in ALL_OPERATORS}
    arms[Op.CLONE].n_success = 10_000
    mass = []
    for _ in range(300):
        d = resample_distribution(arms, rng, ALL_OPERATORS)
        mass.append(d.probability_of(Op.CLONE))
    assert sum(mass) / len(mass) > 0.9


def test_resample_is_fair_across_identical_arms():
    rng = random.Random(12)
    arms = {op: ArmPosterior(1.0, 1000.0, 100, 900) for op in ALL_OPERATORS}
    totals = dict.fromkeys(ALL_OPERATORS, 0.0)
    n = 2000
    for _ in range(n):
        d = resample_distribution(arms, rng, ALL_OPERATORS)
        for op, p in d.mapping().items():
            totals[op] += p
    for op in ALL_OPERATORS:
        assert abs(totals[op] / n - 1 / 16) < 0.01


def test_scheduler_uniform_mode_is_constant():
    sched = OperatorScheduler("uniform", ALL_OPERATORS)
    d = sched.current_distribution()
    assert all(p == 1 / 16 for p in d.probabilities)
    assert not sched.maybe_refresh(1e9, random.Random(1))
    assert sched.current_distribution() is d


def test_scheduler_empirical_mode_needs_distribution():
    with pytest.raises(ValueError):
        OperatorScheduler("empirical", ALL_OPERATORS)
    with pytest.raises(ValueError):
        OperatorScheduler("sideways", ALL_OPERATORS)


def test_scheduler_empirical_mode_masks_and_renormalizes():
    probs = [1 / 16] * 16
    loaded = OperatorDistribution(ALL_OPERATORS, probs)
    masked = active_operators(Dictionary())
    sched = OperatorScheduler("empirical", masked, empirical=loaded)
    d = sched.current_distribution()
    assert len(d.operators) == 14
    assert all(abs(p - 1 / 14) < 1e-12 for p in d.probabilities)


def test_thompson_starts_uniform_and_refreshes_on_exec_cadence():
    rng = random.Random(13)
    sched = OperatorScheduler(
        "thompson", ALL_OPERATORS, refresh_execs=10, refresh_secs=float("inf")
    )
    before = sched.current_distribution()
    assert all(p == 1 / 16 for p in before.probabilities)
    for i in range(9):
        assert not sched.maybe_refresh(0.0, rng), i
    assert sched.maybe_refresh(0.0, rng)
    assert sched.current_distribution() is not before
    assert sched.refreshes == 1


def test_thompson_refreshes_on_time_cadence():
    rng = random.Random(14)
    sched = OperatorScheduler(
        "thompson", ALL_OPERATORS, refresh_execs=10**9, refresh_secs=600.0
    )
    assert not sched.maybe_refresh(0.0, rng)
    assert not sched.maybe_refresh(599.9, rng)
    assert sched.maybe_refresh(600.0, rng)
    # cadence re-arms from the refresh time
    assert not sched.maybe_refresh(700.0, rng)
    assert sched.maybe_refresh(1200.0, rng)


def test_scheduler_counts_and_increments():
    sched = OperatorScheduler("uniform", ALL_OPERATORS)
    sched.update_counts([(Op.DELETE, 0), (Op.DELETE, 1)], success=True)
    sched.update_counts([(Op.CLONE, 0)], success=False)
    counts = sched.success_counts()
    assert counts[Op.DELETE] == 2 and counts[Op.CLONE] == 0
    assert set(counts) == set(ALL_OPERATORS)
    assert sched.total_increments() == 3


def test_success_counts_cover_masked_arms():
    sched = OperatorScheduler("uniform", active_operators(Dictionary()))
    counts = sched.success_counts()
    assert set(counts) == set(ALL_OPERATORS)
    assert counts[Op.EXTRA_INSERT] == 0


def test_synthetic_arms_concentrate():
    # one genuinely better arm: mass should move to it
    probs = {op: 0.001 for op in ALL_OPERATORS}
    probs[Op.EXTRA_INSERT] = 0.05
    hits = 0
    for seed in range(10):
        d = run_synthetic_trial(seed, rounds=5000, true_probs=probs)
        if d.probability_of(Op.EXTRA_INSERT) > max(
            d.probability_of(op) for op in ALL_OPERATORS if op is not Op.EXTRA_INSERT
        ):
            hits += 1
    assert hits >= 9


def test_distribution_file_round_trip(tmp_path):
    rng = random.Random(15)
    arms = {op: ArmPosterior(1.0, 1000.0, rng.randrange(50), rng.randrange(500)) for op in ALL_OPERATORS}
    d = resample_distribution(arms, rng, ALL_OPERATORS)
    path = tmp_path / "dist.txt"
    save_distribution(path, d)
    loaded = load_distribution(path)
    assert loaded.operators == d.operators
    assert loaded.probabilities == d.probabilities  # repr round-trips floats


def test_load_distribution_validates(tmp_path):
    path = tmp_path / "dist.txt"
    path.write_text("bit_flip 1.0\n")
    with pytest.raises(ValueError, match="missing"):
        load_distribution(path)
    lines = [f"{op.value} 0.0625\n" for op in ALL_OPERATORS]
    path.write_text("".join(lines) + "bit_flip 0.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_distribution(path)
    path.write_text("".join(lines).replace("0.0625", "0.07", 1))
    with pytest.raises(ValueError, match="sum"):
        load_distribution(path)
    path.write_text("".join(lines).replace("bit_flip", "bit_flop"))
    with pytest.raises(ValueError, match="unknown operator"):
        load_distribution(path)


def test_counts_round_trip_and_merge(tmp_path):
    a = dict.fromkeys(ALL_OPERATORS, 0)
    a[Op.BIT_FLIP] = 3
    b = dict.fromkeys(ALL_OPERATORS, 1)
    pa, pb = tmp_path / "a.txt", tmp_path / "b.txt"
    save_counts(pa, a, header="run a")
    save_counts(pb, b)
    merged = merge_counts([load_counts(pa), load_counts(pb)])
    assert merged[Op.BIT_FLIP] == 4
    assert merged[Op.DELETE] == 1
    d = empirical_distribution(merged, ALL_OPERATORS)
    assert abs(sum(d.probabilities) - 1.0) <= 1e-9


def test_load_counts_rejects_negative(tmp_path):
    path = tmp_path / "c.txt"
    lines = [f"{op.value} 1\n" for op in ALL_OPERATORS]
    path.write_text("".join(lines).replace("bit_flip 1", "bit_flip -1"))
    with pytest.raises(ValueError, match="negative"):
        load_counts(path)
