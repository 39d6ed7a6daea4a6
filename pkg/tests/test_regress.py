import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from laborscape import regress as rg
from laborscape.errors import NonPositiveUnderLog, TooFewPoints, ZeroVariance
from laborscape.structure import CityGrouping


def test_ols_hand_fixture():
    r = rg.ols([1, 2, 3, 4], [1, 3, 2, 5])
    assert r.beta == pytest.approx(1.1, abs=1e-12)
    assert r.intercept == pytest.approx(0.0, abs=1e-12)
    # r^2 = 6.05 / 8.75
    assert r.r_squared == pytest.approx(6.05 / 8.75, abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5, 12.0])
def test_t_tail_closed_forms(t):
    assert rg.t_two_sided(t, 1) == pytest.approx(1 - 2 / math.pi * math.atan(t), abs=1e-12)
    assert rg.t_two_sided(t, 2) == pytest.approx(1 - t / math.sqrt(2 + t * t), abs=1e-12)


def test_t_tail_large_df_tends_to_normal():
    assert rg.t_two_sided(1.959963984540054, 10_000) == pytest.approx(0.05, abs=2e-4)


def test_planted_slope_exact():
    x = np.linspace(-3, 7, 25)
    r = rg.ols(x, 4.2 - 0.37 * x)
    assert r.beta == pytest.approx(-0.37, abs=1e-12)
    assert r.intercept == pytest.approx(4.2, abs=1e-12)
    assert r.p_value == 0.0 and r.r_squared == pytest.approx(1.0)


def test_ols_guards():
    with pytest.raises(TooFewPoints):
        rg.ols([1, 2], [1, 2])
    with pytest.raises(ZeroVariance):
        rg.ols([1, 1, 1], [1, 2, 3])
    flat = rg.ols([1, 2, 3], [4, 4, 4])
    assert (flat.beta, flat.p_value, flat.r_squared) == (0.0, 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(
    hst.lists(hst.floats(-100, 100), min_size=4, max_size=30, unique=True),
    hst.floats(0.1, 50),
    hst.floats(-50, 50),
    hst.integers(0, 2**32 - 1),
)
def test_affine_invariance(xs, a, b, seed):
    x = np.array(xs)
    if x.std() < 1e-3:
        return
    y = np.random.default_rng(seed).normal(size=x.size) + 0.1 * x
    r1 = rg.ols(x, y)
    r2 = rg.ols(a * x + b, y)
    assert r2.beta == pytest.approx(r1.beta / a, rel=1e-6, abs=1e-9)
    assert r2.p_value == pytest.approx(r1.p_value, abs=1e-6)


def test_permutation_agrees_with_t():
    rng = np.random.default_rng(42)
    x = rng.normal(size=30)
    y = 0.35 * x + rng.normal(size=30)
    r = rg.ols(x, y)
    perm = rg.permutation_pvalue(x, y, n_draws=200_000, seed=1)
    assert 0.01 < r.p_value < 0.5
    assert perm == pytest.approx(r.p_value, abs=0.01)


def test_scaling_exponent_and_absent_cities():
    sizes = np.array([1e4, 3e4, 1e5, 4e5, 2e6])
    counts = sizes**1.2
    counts[1] = 0  # absent city is skipped, not logged
    r = rg.scaling_exponent(sizes, counts)
    assert r.beta == pytest.approx(1.2, abs=1e-9)
    assert r.n == 4
    with pytest.raises(NonPositiveUnderLog):
        rg.scaling_exponent(np.array([0.0, 1, 2, 3]), np.array([1.0, 1, 2, 3]))


def simpson_data():
    rng = np.random.default_rng(3)
    x = np.tile(np.linspace(1, 20, 20), 2)
    slope = np.r_[np.full(20, 0.05), np.full(20, -0.05)]
    y = 1.0 + slope * (x - 10.5) + rng.normal(0, 0.02, 40)
    cities = [f"c{i:02d}" for i in range(40)]
    data = {"y": dict(zip(cities, y)), "x": dict(zip(cities, x))}
    grouping = CityGrouping("g", {c: ("up" if i < 20 else "down") for i, c in enumerate(cities)})
    return data, grouping


def test_simpson_paradox_detected():
    data, grouping = simpson_data()
    rep = rg.simpson_check(rg.RegressionSpec("y", "x", grouping=grouping), data)
    assert rep.verdict == rg.PARADOX
    assert rep.pooled.p_value > 0.05
    assert all(g.p_value < 0.05 for g in rep.groups)
    assert [g.group for g in rep.groups] == ["down", "up"]


def test_simpson_no_paradox_when_groups_agree():
    data, grouping = simpson_data()
    data["y"] = {c: 0.1 * x + (0.01 if i % 2 else -0.01) for i, (c, x) in enumerate(data["x"].items())}
    rep = rg.simpson_check(rg.RegressionSpec("y", "x", grouping=grouping), data)
    assert rep.verdict == rg.NO_PARADOX
    assert any("agree in sign" in r for r in rep.reasons)


def test_fit_reports_failed_group_without_aborting():
    cities = ["a", "b", "c", "d", "e"]
    data = {"y": dict(zip(cities, [1, 2, 3, 5, 4])), "x": dict(zip(cities, [1, 2, 3, 4, 5]))}
    grouping = CityGrouping("g", {"a": "one", "b": "one", "c": "two", "d": "two", "e": "two"})
    one, two, pooled = rg.fit(rg.RegressionSpec("y", "x", grouping=grouping), data)
    assert not one.ok and math.isnan(one.beta) and "TooFewPoints" in one.note
    assert two.ok and pooled.ok and pooled.n == 5


def test_log_spec_rejects_non_positive():
    data = {"y": {"a": 1, "b": 2, "c": -3}, "x": {"a": 1, "b": 2, "c": 3}}
    with pytest.raises(NonPositiveUnderLog) as exc:
        rg.fit(rg.RegressionSpec("y", "x", log_y=True), data)
    assert "'c'" in str(exc.value)
