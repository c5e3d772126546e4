import itertools
import math

import numpy as np
import pytest

from tempbell.errors import InsufficientStatistics
from tempbell.geometry import Setting
from tempbell.lhv import (
    ALL_REALITIES,
    JointReality,
    RealityDistribution,
    counting_identity_ratio,
    lhv_pair_prob,
    lhv_prob_table,
    lhv_run,
    sample_lhv_runs,
    sample_reality,
    simulate_lhv,
)
from tempbell.records import REALITY_KEYS, CountTable

A, B, C = Setting.A, Setting.B, Setting.C


def brute_pair_prob(weights, s1, o1, s2, o2):
    """Enumerate (alpha, beta, gamma) in {+1,-1}^3 directly."""
    total = 0.0
    for k, triple in enumerate(itertools.product((1, -1), repeat=3)):
        if triple[s1] == o1 and triple[s2] == o2:
            total += weights[k]
    return total


def test_reality_indexing_matches_keys():
    for k, r in enumerate(ALL_REALITIES):
        assert r.index == k
        assert r.key == REALITY_KEYS[k]
        assert JointReality.from_key(r.key) == r
    assert JointReality.from_key("+-+") == JointReality(1, -1, 1)


def test_distribution_validation():
    with pytest.raises(ValueError):
        RealityDistribution([0.5] * 8)
    with pytest.raises(ValueError):
        RealityDistribution([-0.1, 1.1] + [0] * 6)
    with pytest.raises(ValueError):
        RealityDistribution([1.0] * 7)
    d = RealityDistribution.normalized(np.arange(8) + 1.0)
    assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert RealityDistribution.from_dict(d.to_dict()).weights.tolist() == d.weights.tolist()


def test_sample_reality_point_mass_and_zero_weight(rng):
    point = RealityDistribution.point_mass("+-+")
    assert all(sample_reality(point, rng) == JointReality(1, -1, 1) for _ in range(200))
    w = np.full(8, 1 / 7)
    w[7] = 0.0
    no_last = RealityDistribution.normalized(w)
    runs = sample_lhv_runs(no_last, 200_000, seed=5)
    assert runs.hidden_tally()[7] == 0


def test_uniform_reality_frequencies():
    runs = sample_lhv_runs(RealityDistribution.uniform(), 1_000_000, seed=1)
    freq = runs.hidden_tally() / 1_000_000
    sigma = math.sqrt(0.125 * 0.875 / 1_000_000)
    assert np.all(np.abs(freq - 0.125) < 5 * sigma)


@pytest.mark.parametrize(
    "reality, pair, outcomes",
    [
        ((1, -1, 1), (A, B), (1, -1)),
        ((1, -1, 1), (A, A), (1, 1)),
        ((-1, 1, -1), (C, B), (-1, 1)),
    ],
)
def test_lhv_run_reads_outcomes_off_the_reality(reality, pair, outcomes):
    rec = lhv_run(JointReality(*reality), pair)
    assert (rec.first_outcome, rec.second_outcome) == outcomes
    assert rec.hidden_reality == reality
    assert (rec.first_setting, rec.second_setting) == pair


def test_pair_prob_examples():
    point = RealityDistribution.point_mass("+-+")
    assert lhv_pair_prob(point, (A, B), (1, -1)) == 1.0
    uni = RealityDistribution.uniform()
    assert lhv_pair_prob(uni, (A, B), (1, -1)) == brute_pair_prob(uni.weights, 0, 1, 1, -1) == 0.25
    assert lhv_pair_prob(uni, (A, A), (1, -1)) == 0.0


def test_pair_prob_matches_enumeration(rng):
    for _ in range(50):
        d = RealityDistribution.random(rng)
        for s1, s2 in itertools.product(range(3), repeat=2):
            for o1, o2 in itertools.product((1, -1), repeat=2):
                assert lhv_pair_prob(d, (s1, s2), (o1, o2)) == pytest.approx(
                    brute_pair_prob(d.weights, s1, o1, s2, o2), abs=1e-15)


def test_marginalization_over_unmeasured_setting(rng):
    for _ in range(100):
        d = RealityDistribution.random(rng)
        # N(a+b-) = N(a+b-c+) + N(a+b-c-)
        assert lhv_pair_prob(d, (A, B), (1, -1)) == d["+-+"] + d["+--"]


def test_simulate_lhv_empty_and_point_mass():
    assert simulate_lhv(RealityDistribution.uniform(), 0).total_runs == 0
    t = simulate_lhv(RealityDistribution.point_mass("+++"), 5000, seed=2)
    assert t.total_runs == 5000
    assert t.counts[:, 1, :, :].sum() == 0 and t.counts[:, :, :, 1].sum() == 0


def test_pair_choice_uniform_over_nine():
    n = 900_000
    t = simulate_lhv(RealityDistribution.uniform(), n, seed=3)
    totals = t.pair_totals()
    sigma = math.sqrt(n * (1 / 9) * (8 / 9))
    assert np.all(np.abs(totals - n / 9) < 5 * sigma)


def test_perfect_correlation_in_every_sampled_run(rng):
    runs = sample_lhv_runs(RealityDistribution.random(rng), 200_000, seed=4)
    assert runs.same_setting_disagreements() == 0


def test_simulation_matches_exact_probabilities(rng):
    d = RealityDistribution.random(rng)
    t = simulate_lhv(d, 500_000, seed=8)
    est = t.probabilities()
    exact = lhv_prob_table(d)
    for s1, s2 in itertools.product(range(3), repeat=2):
        n = est.runs(s1, s2)
        for o1, o2 in itertools.product((1, -1), repeat=2):
            p = exact.p(s1, o1, s2, o2)
            sigma = math.sqrt(p * (1 - p) / n)
            assert abs(est.p(s1, o1, s2, o2) - p) <= 5 * sigma + 1e-15


def test_workers_change_partition_but_stay_deterministic():
    d = RealityDistribution.uniform()
    r1 = sample_lhv_runs(d, 10_001, seed=9, workers=3)
    r2 = sample_lhv_runs(d, 10_001, seed=9, workers=3)
    assert len(r1) == 10_001
    for f in ("first", "second", "o1", "o2", "hidden"):
        assert np.array_equal(getattr(r1, f), getattr(r2, f))
    # chunk 0 of a multi-worker plan is the prefix of the same substream
    single = sample_lhv_runs(d, 3334, seed=9, workers=1)
    assert np.array_equal(single.hidden, r1.hidden[:3334])


@pytest.mark.parametrize("pair", [(A, B), (A, C), (B, C)])
def test_counting_identity_ratio_near_nine(pair):
    runs = sample_lhv_runs(RealityDistribution.uniform(), 900_000, seed=10)
    ratio = counting_identity_ratio(runs.counts(), runs.hidden_tally(), pair, (1, -1))
    # observed cell ~ n/36 = 25000 runs: relative sd ~ 0.0063
    assert ratio == pytest.approx(9.0, abs=5 * 9 * math.sqrt(1 / 25_000))


def test_counting_identity_point_mass_on_a_plus_b_minus():
    d = RealityDistribution.from_dict({"+-+": 0.5, "+--": 0.5})
    runs = sample_lhv_runs(d, 900_000, seed=11)
    ratio = counting_identity_ratio(runs.counts(), runs.hidden_tally())
    # every run carries a+b-; observed [a+,b-] is Binomial(n, 1/9)
    assert ratio == pytest.approx(9.0, abs=5 * 9 * math.sqrt(8 / 100_000))


def test_counting_identity_insufficient_statistics():
    with pytest.raises(InsufficientStatistics):
        counting_identity_ratio(CountTable(), np.zeros(8))
