from __future__ import annotations

import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvaudit import (
    Dataset,
    DatasetStateError,
    StudyRecord,
    derive_dataset,
    derive_stats,
    effects_from_dataset,
    loo_influence,
    normal_sf,
    parse_dataset,
    pool_dl,
    rank_pvalues,
    two_sided_critical_value,
)

mp.mp.dps = 40


def _rec(rr: float, lo: float, hi: float, author: str = "A", year: int = 2000) -> StudyRecord:
    return StudyRecord(author=author, year=year, ref_id=1, rr=rr, cl_low=lo, cl_high=hi)


# ---------------------------------------------------------------- normal_sf

def _sf_oracle(z: float) -> mp.mpf:
    return mp.erfc(mp.mpf(z) / mp.sqrt(2)) / 2


def test_normal_sf_against_high_precision_erfc():
    for z in np.linspace(-8.0, 8.0, 161):
        got = normal_sf(float(z))
        want = _sf_oracle(float(z))
        assert abs(got - want) <= 1e-12 * abs(want), f"z={z}"


def test_normal_sf_oracle_agrees_with_numerical_integration():
    # the erfc oracle itself is cross-checked by integrating the density
    for z in (-3.0, -0.5, 0.0, 1.0, 2.5, 6.0):
        quad = mp.quad(mp.npdf, [z, mp.inf])
        assert abs(quad - _sf_oracle(z)) < mp.mpf("1e-25")


def test_normal_sf_known_points():
    assert normal_sf(0.0) == 0.5
    assert normal_sf(1.959964) == pytest.approx(0.025, abs=1e-9)
    assert normal_sf(1.96) == pytest.approx(0.024997895148220434, rel=1e-12)


def test_normal_sf_positive_in_deep_tail():
    assert 0.0 < normal_sf(8.0) < 1e-15
    assert normal_sf(38.0) > 0.0


def test_normal_sf_rejects_non_finite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError):
            normal_sf(bad)


@settings(max_examples=80, deadline=None)
@given(st.floats(min_value=-8.0, max_value=8.0, allow_nan=False))
def test_normal_sf_symmetry_and_range(z):
    sf = normal_sf(z)
    assert 0.0 < sf < 1.0
    assert sf + normal_sf(-z) == pytest.approx(1.0, abs=1e-14)


def test_normal_sf_monotone_decreasing():
    grid = np.linspace(-8.0, 8.0, 801)
    values = [normal_sf(float(z)) for z in grid]
    assert all(a > b for a, b in zip(values, values[1:]))


# ------------------------------------------------- critical values / derive

def test_critical_value_convention_and_exact():
    assert two_sided_critical_value(0.95) == 1.96
    assert two_sided_critical_value(0.95, exact=True) == pytest.approx(
        1.9599639845400545, rel=1e-12
    )
    assert two_sided_critical_value(0.90) == pytest.approx(1.6448536269514727, rel=1e-12)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            two_sided_critical_value(bad)


def test_derive_stats_linear_hand_computed():
    d = derive_stats(_rec(1.5, 1.0, 2.0))
    assert d.se == pytest.approx(1.0 / 3.92, rel=1e-15)
    assert d.z == pytest.approx(0.5 * 3.92, rel=1e-15)
    assert d.z == pytest.approx(1.96, rel=1e-15)
    assert d.p == pytest.approx(0.04999579029644087, rel=1e-12)
    assert d.rank is None
    assert d.p_floored is False


def test_derive_stats_log_scale():
    # geometric-symmetric interval: log effect is half the log width
    d = derive_stats(_rec(2.0, 1.0, 4.0), scale="log")
    assert d.se == pytest.approx(math.log(4.0) / 3.92, rel=1e-15)
    assert d.z == pytest.approx(1.96, rel=1e-12)
    assert d.p == pytest.approx(0.04999579029644087, rel=1e-12)


def test_derive_stats_null_rr_gives_p_one():
    d = derive_stats(_rec(1.0, 0.5, 1.5))
    assert d.z == 0.0
    assert d.p == 1.0


def test_derive_stats_custom_critical_value():
    exact = two_sided_critical_value(0.95, exact=True)
    d = derive_stats(_rec(1.5, 1.0, 2.0), critical_value=exact)
    assert d.se == pytest.approx(1.0 / (2 * exact), rel=1e-15)


def test_derive_stats_rejects_bad_inputs():
    with pytest.raises(ValueError):
        derive_stats(_rec(1.0, 1.0, 1.0))  # zero-width interval
    with pytest.raises(ValueError):
        derive_stats(_rec(1.5, 1.0, 2.0), scale="sqrt")
    with pytest.raises(ValueError):
        derive_stats(_rec(1.5, 1.0, 2.0), critical_value=0.0)


def test_derive_stats_floors_underflowing_p():
    # |z| around 60: two-sided p underflows and must be clamped, not zeroed
    d = derive_stats(_rec(61.0, 60.0, 62.0))
    assert d.p == 5e-324
    assert d.p > 0.0
    assert d.p_floored is True


def test_derive_dataset_preserves_order():
    ds = parse_dataset(
        "author,year,comment,ref,rr,cl_low,cl_high\n"
        "A,2000,,1,1.2,1.0,1.4\n"
        "B,2001,,2,0.8,0.7,0.9\n"
    )
    out = derive_dataset(ds)
    assert ds.derived is None  # input untouched
    assert out.records == ds.records
    assert out.derived[0].z > 0 > out.derived[1].z


# ------------------------------------------------------------------ ranking

def _toy_ds(ps_like: list[tuple[float, float, float]]) -> Dataset:
    rows = "".join(
        f"S{i},2000,,{i},{rr},{lo},{hi}\n" for i, (rr, lo, hi) in enumerate(ps_like)
    )
    return derive_dataset(
        parse_dataset("author,year,comment,ref,rr,cl_low,cl_high\n" + rows)
    )


def test_rank_pvalues_orders_by_p():
    ds = _toy_ds([(1.0, 0.5, 1.5), (1.4, 1.0, 1.8), (1.1, 0.9, 1.3)])
    ranked = rank_pvalues(ds)
    ranks = [d.rank for d in ranked.derived]
    # row 1 has the largest |z| hence smallest p
    assert ranks[1] == 1
    assert sorted(ranks) == [1, 2, 3]


def test_rank_pvalues_breaks_ties_by_row_index():
    ds = _toy_ds([(1.2, 1.0, 1.4), (1.2, 1.0, 1.4), (1.0, 0.8, 1.2)])
    ranked = rank_pvalues(ds)
    first, second, third = ranked.derived
    assert first.p == second.p
    assert first.rank == 1
    assert second.rank == 2
    assert third.rank == 3


def test_rank_pvalues_idempotent():
    ds = _toy_ds([(1.0, 0.5, 1.5), (1.4, 1.0, 1.8), (1.1, 0.9, 1.3)])
    once = rank_pvalues(ds)
    twice = rank_pvalues(once)
    assert [d.rank for d in once.derived] == [d.rank for d in twice.derived]


def test_rank_pvalues_requires_derived():
    ds = parse_dataset("author,year,comment,ref,rr,cl_low,cl_high\nA,2000,,1,1.0,0.5,1.5\n")
    with pytest.raises(DatasetStateError):
        rank_pvalues(ds)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=0.01, max_value=0.99), min_size=1, max_size=12))
def test_rank_permutation_property(zs):
    # shared interval width, shifted estimates: p ordering follows the shifts
    rows = [(1.0 + z, 1.0, 2.0) for z in zs]
    ranked = rank_pvalues(_toy_ds(rows))
    ranks = sorted(d.rank for d in ranked.derived)
    assert ranks == list(range(1, len(zs) + 1))
    by_rank = sorted(ranked.derived, key=lambda d: d.rank)
    assert all(a.p <= b.p for a, b in zip(by_rank, by_rank[1:]))


# ------------------------------------------------------------------ pooling

def _pool_fraction_oracle(effects):
    """DerSimonian-Laird with exact rational arithmetic."""
    ys = [Fraction(y) for y, _ in effects]
    ws = [1 / (Fraction(s) * Fraction(s)) for _, s in effects]
    k = len(ys)
    sw = sum(ws)
    fixed = sum(w * y for w, y in zip(ws, ys)) / sw
    q = sum(w * (y - fixed) ** 2 for w, y in zip(ws, ys))
    denom = sw - sum(w * w for w in ws) / sw
    tau2 = max(Fraction(0), (q - (k - 1)) / denom)
    wr = [1 / (Fraction(s) * Fraction(s) + tau2) for _, s in effects]
    swr = sum(wr)
    rmean = sum(w * y for w, y in zip(wr, ys)) / swr
    return {
        "fixed_mean": fixed,
        "q": q,
        "tau2": tau2,
        "random_mean": rmean,
        "random_se": 1 / math.sqrt(float(swr)),
        "i2": max(Fraction(0), (q - (k - 1)) / q) if q > 0 else Fraction(0),
    }


def test_pool_dl_two_study_textbook_case():
    result = pool_dl([(0.0, 0.1), (1.0, 0.1)])
    assert result.k == 2
    assert result.fixed_mean == pytest.approx(0.5, abs=1e-15)
    assert result.q == pytest.approx(50.0, rel=1e-12)
    assert result.tau2 == pytest.approx(0.49, rel=1e-12)
    assert result.random_mean == pytest.approx(0.5, abs=1e-15)
    assert result.random_se == pytest.approx(0.5, rel=1e-12)
    assert result.i2 == pytest.approx(0.98, rel=1e-12)


def test_pool_dl_homogeneous_collapses_to_fixed():
    result = pool_dl([(0.3, 0.2)] * 3)
    assert result.q == 0.0
    assert result.tau2 == 0.0
    assert result.i2 == 0.0
    assert result.fixed_mean == pytest.approx(0.3, rel=1e-15)
    assert result.random_mean == result.fixed_mean
    assert result.weights_fixed == result.weights_random


def test_pool_dl_weights_sum_to_one():
    result = pool_dl([(0.1, 0.05), (-0.2, 0.3), (0.4, 0.12), (0.0, 0.9)])
    assert math.fsum(result.weights_fixed) == pytest.approx(1.0, abs=1e-12)
    assert math.fsum(result.weights_random) == pytest.approx(1.0, abs=1e-12)
    # random-effects weights are more even than fixed-effects ones
    assert max(result.weights_random) <= max(result.weights_fixed) + 1e-15


def test_pool_dl_matches_fraction_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        k = int(rng.integers(2, 11))
        effects = [
            (round(float(rng.normal(0, 1)), 6), round(float(rng.uniform(0.02, 1.5)), 6))
            for _ in range(k)
        ]
        got = pool_dl(effects)
        want = _pool_fraction_oracle(effects)
        for name in ("fixed_mean", "q", "tau2", "random_mean", "i2"):
            target = float(want[name])
            assert getattr(got, name) == pytest.approx(target, rel=1e-10, abs=1e-12), name
        assert got.random_se == pytest.approx(want["random_se"], rel=1e-10)


def test_pool_dl_rejects_bad_input():
    with pytest.raises(ValueError):
        pool_dl([(0.0, 0.1)])
    with pytest.raises(ValueError):
        pool_dl([(0.0, 0.1), (1.0, 0.0)])
    with pytest.raises(ValueError):
        pool_dl([(0.0, 0.1), (math.nan, 0.1)])


def test_effects_from_dataset_scales():
    ds = derive_dataset(
        parse_dataset("author,year,comment,ref,rr,cl_low,cl_high\nA,2000,,1,1.2,1.0,1.4\n")
    )
    (effect, se), = effects_from_dataset(ds, "linear")
    assert effect == pytest.approx(0.2, rel=1e-12)
    assert se == pytest.approx(0.4 / 3.92, rel=1e-12)
    ds_log = derive_dataset(
        parse_dataset("author,year,comment,ref,rr,cl_low,cl_high\nA,2000,,1,1.2,1.0,1.4\n"),
        scale="log",
    )
    (effect_log, se_log), = effects_from_dataset(ds_log, "log")
    assert effect_log == pytest.approx(math.log(1.2), rel=1e-12)
    assert se_log == pytest.approx(math.log(1.4) / 3.92, rel=1e-12)


# ---------------------------------------------------------------- influence

def test_loo_influence_needs_three():
    with pytest.raises(ValueError):
        loo_influence([(0.0, 0.1), (1.0, 0.1)])


def test_loo_influence_symmetric_studies_equal():
    values = loo_influence([(0.2, 0.1), (0.2, 0.1), (0.2, 0.1)])
    assert values == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_loo_influence_outlier_dominates():
    effects = [(0.0, 0.1)] * 6 + [(2.0, 0.1)]
    values = loo_influence(effects)
    assert int(np.argmax(values)) == 6
    assert values[6] > 3 * max(values[:6])


def test_loo_influence_matches_direct_recomputation():
    effects = [(0.12, 0.06), (-0.05, 0.11), (0.33, 0.09), (0.02, 0.2), (0.18, 0.07)]
    full = pool_dl(effects)
    values = loo_influence(effects)
    for i in range(len(effects)):
        rest = effects[:i] + effects[i + 1 :]
        expected = abs(full.random_mean - pool_dl(rest).random_mean) / full.random_se
        assert values[i] == pytest.approx(expected, rel=1e-12)
