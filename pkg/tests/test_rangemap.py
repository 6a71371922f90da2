import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from rangeguard.bitnum import BF16, FP8_E4M3, FP16, INT8, BitWord, decode_array, encode_array
from rangeguard.rangemap import (
    MapKind,
    RangeEntry,
    RangeMap,
    build_ideal_map,
    build_lloydmax_map,
    build_simple_map,
    exponent_pmf,
    exponent_representatives,
    exponent_scale,
    gaussian_l1_quantizer,
    gaussian_mae,
    interval_costs,
    lloyd_max_l1,
    map_mae,
    map_value,
    optimal_partition,
    partition_cost,
    range_width,
    representative,
)


def brute_partition(weights, scale, k):
    n = len(weights)
    best = math.inf
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0, *cuts, n)
        total = 0.0
        for lo, hi in zip(bounds, bounds[1:]):
            total += min(
                sum(weights[e] * abs(scale[e] - scale[r]) for e in range(lo, hi))
                for r in range(lo, hi)
            )
        best = min(best, total)
    return best


# ----------------------------------------------------------------------
# PMF


def test_pmf_sums_to_one_and_peaks_near_sigma():
    pmf = exponent_pmf(4.0)
    assert math.isclose(pmf.probs.sum(), 1.0, rel_tol=1e-12)
    assert int(np.argmax(pmf.probs)) == 128


@pytest.mark.parametrize("e", [120, 126, 127, 128, 129, 130, 131])
def test_pmf_against_scipy(e):
    sigma = 4.0
    lo, hi = 2.0 ** (e - 127), 2.0 ** (e - 126)
    want = 2 * (norm.cdf(hi / sigma) - norm.cdf(lo / sigma))
    assert math.isclose(exponent_pmf(sigma).probs[e], want, rel_tol=1e-9)


def test_pmf_boundary_bins():
    pmf = exponent_pmf(4.0).probs
    assert math.isclose(pmf[0], math.erf(2.0**-126 / 4 / math.sqrt(2)), rel_tol=1e-9)
    assert pmf[255] == 0.0 and math.isclose(exponent_pmf(2.0**127).probs[255], 2 * norm.sf(2.0), rel_tol=1e-9)
    with pytest.raises(ValueError):
        exponent_pmf(0.0)
    with pytest.raises(ValueError):
        exponent_pmf(1.0, INT8)


# ----------------------------------------------------------------------
# DP


@given(st.integers(2, 16), st.integers(1, 4), st.data())
def test_dp_matches_exhaustive_enumeration(n, k, data):
    k = min(k, n)
    weights = data.draw(st.lists(st.integers(0, 1000), min_size=n, max_size=n))
    weights = np.array(weights, dtype=np.float64)
    scale = np.exp2(np.arange(n, dtype=np.float64) - n // 2)
    intervals, reps, cost = optimal_partition(weights, scale, k)
    assert cost == brute_partition(weights, scale, k)
    assert cost == partition_cost(weights, scale, intervals, reps)
    assert intervals[0][0] == 0 and intervals[-1][1] == n - 1
    assert all(b[0] == a[1] + 1 for a, b in zip(intervals, intervals[1:]))


def test_dp_ties_prefer_lowest_boundary():
    # uniform weights on a flat scale: every split costs 0
    intervals, reps, cost = optimal_partition(np.ones(6), np.ones(6), 3)
    assert cost == 0.0
    assert intervals == [(0, 0), (1, 1), (2, 5)]
    assert reps == [0, 1, 2]


def test_interval_representative_is_weighted_median():
    w = np.array([1.0, 5.0, 1.0, 1.0])
    cost, rep = interval_costs(w, np.array([1.0, 2.0, 4.0, 8.0]))
    assert rep[0, 3] == 1
    assert cost[0, 0] == 0.0


def test_dp_rejects_bad_counts():
    with pytest.raises(ValueError):
        optimal_partition(np.ones(3), np.ones(3), 4)
    with pytest.raises(ValueError):
        optimal_partition(np.ones(3), np.ones(3), 0)


# ----------------------------------------------------------------------
# simple exponent maps


def test_four_entry_table_for_sigma_four():
    rmap = build_simple_map(4.0, 4)
    assert [(e.lo, e.hi) for e in rmap.entries] == [(0, 127), (128, 128), (129, 129), (130, 255)]
    assert [representative(rmap, r) for r in range(4)] == [0.5, 2.0, 4.0, 8.0]
    assert rmap.rid_bits == 2
    assert [range_width(rmap, r) for r in range(4)] == [2.0, 2.0, 4.0, math.inf]
    assert rmap.value_interval(3) == (8.0, math.inf)


def test_simple_map_lookup_and_substitution_keep_sign():
    rmap = build_simple_map(4.0, 4)
    neg_three = 0xC040  # -3.0
    rid = map_value(rmap, BitWord(neg_three, BF16))
    assert rid == 1
    rep = rmap.substitute(np.array([neg_three]), np.array([2]))
    assert decode_array(rep, BF16)[0] == -4.0


def test_simple_map_16_ranges():
    rmap = build_simple_map(4.0, 16)
    assert (rmap.entries[0].lo, rmap.entries[0].hi) == (0, 116)
    assert [(e.lo, e.hi) for e in rmap.entries[1:-1]] == [(e, e) for e in range(117, 131)]
    assert (rmap.entries[-1].lo, rmap.entries[-1].hi) == (131, 255)
    assert rmap.rid_bits == 4


@pytest.mark.parametrize("k", [1, 257])
def test_simple_map_rejects_bad_range_counts(k):
    with pytest.raises(ValueError):
        build_simple_map(4.0, k)


def test_exponent_representatives_inside_intervals():
    for fmt in (BF16, FP16, FP8_E4M3):
        rmap = build_simple_map(1.0, 4, fmt)
        for e, r in zip(rmap.entries, exponent_representatives(rmap)):
            assert e.lo <= r <= e.hi


# ----------------------------------------------------------------------
# value maps


def test_gaussian_l1_quantizer_four_levels():
    t, r = gaussian_l1_quantizer(4)
    np.testing.assert_allclose(t, [-0.8217, 0.0, 0.8217], atol=1e-4)
    np.testing.assert_allclose(r, [-1.2657, -0.3778, 0.3778, 1.2657], atol=1e-4)
    # each representative is the median of its cell and each threshold the midpoint
    edges = np.concatenate(([-np.inf], t, [np.inf]))
    for a, b, rep in zip(edges[:-1], edges[1:], r):
        assert math.isclose(norm.cdf(rep), (norm.cdf(a) + norm.cdf(b)) / 2, abs_tol=1e-9)
    np.testing.assert_allclose(t, (r[:-1] + r[1:]) / 2, atol=1e-9)


def test_gaussian_mae_matches_numeric_integral(rng):
    t, r = gaussian_l1_quantizer(4)
    x = rng.standard_normal(400_000)
    q = r[np.searchsorted(t, x)]
    assert math.isclose(gaussian_mae(t, r), np.mean(np.abs(x - q)), rel_tol=1e-2)


def test_ideal_map_scales_with_sigma():
    rmap = build_ideal_map(2.0, 4)
    reps = [representative(rmap, i) for i in range(4)]
    np.testing.assert_allclose(reps, [-2.5314, -0.7556, 0.7556, 2.5314], atol=2e-2)
    assert map_value(rmap, BitWord(int(encode_array(np.array([0.1]), BF16)[0]), BF16)) == 2
    assert range_width(rmap, 1) == pytest.approx(2 * 0.8217, abs=1e-3)
    assert range_width(rmap, 0) == math.inf


def test_lloyd_max_recovers_gaussian_quantizer(rng):
    x = rng.standard_normal(200_000)
    res = lloyd_max_l1(x, 4)
    np.testing.assert_allclose(res.thresholds, [-0.8217, 0, 0.8217], atol=2e-2)
    assert all(b <= a + 1e-12 for a, b in zip(res.costs, res.costs[1:]))


def test_lloyd_max_degenerate_samples_warn():
    with pytest.warns(RuntimeWarning):
        res = lloyd_max_l1(np.array([1.0, 1.0, 2.0]), 4)
    assert len(res.representatives) <= 2
    with pytest.warns(RuntimeWarning):
        rmap = build_lloydmax_map(np.full(10, 3.0), 4)
    assert len(rmap) == 1
    assert representative(rmap, 0) == 3.0


# ----------------------------------------------------------------------
# serialisation and validation


@pytest.mark.parametrize("builder", [
    lambda: build_simple_map(4.0, 4),
    lambda: build_simple_map(1.0, 8, FP16),
    lambda: build_ideal_map(1.0, 4),
])
def test_json_roundtrip(builder, tmp_path):
    rmap = builder()
    path = tmp_path / "m.json"
    rmap.save(path)
    back = RangeMap.load(path)
    assert back.entries == rmap.entries
    assert back.kind is rmap.kind and back.format is rmap.format and back.rid_bits == rmap.rid_bits


def test_validation_rejects_gaps_and_bad_reps():
    good = build_simple_map(4.0, 4)
    entries = list(good.entries)
    gap = entries[:1] + [RangeEntry(129, 129, entries[2].rep_bits, 1)] + [
        RangeEntry(130, 255, entries[3].rep_bits, 2)]
    with pytest.raises(ValueError):
        RangeMap(BF16, MapKind.SIMPLE_EXPONENT, gap)
    wrong_rep = entries[:3] + [RangeEntry(130, 255, entries[0].rep_bits, 3)]
    with pytest.raises(ValueError):
        RangeMap(BF16, MapKind.SIMPLE_EXPONENT, wrong_rep)
    with pytest.raises(ValueError):
        RangeMap(BF16, MapKind.SIMPLE_EXPONENT, entries, rid_bits=1)
    with pytest.raises(ValueError):
        RangeMap.from_json({**good.to_json(), "version": 99})


@pytest.mark.parametrize("rmap", [build_simple_map(4.0, 16), build_ideal_map(4.0, 4)])
def test_substituted_representative_keeps_rid_for_every_word(rmap):
    raw = np.arange(1 << 16)
    rid = rmap.rids(raw)
    assert np.array_equal(rmap.rids(rmap.substitute(raw, rid)), rid)
