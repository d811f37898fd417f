from functools import partial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orgmed.errors import ConfigError, EstimationError
from orgmed.inference import (
    BootstrapConfig,
    EffectEstimate,
    bootstrap,
    default_workers,
    percentile_interval,
    quantile,
    replicate_indices,
)
from orgmed.interventions import InterventionSpec
from orgmed.mediation import PointEstimates, organic_indirect_rel0

from conftest import make_dataset

values = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60)
levels = st.floats(0.01, 0.99)


def constant(ds):
    return PointEstimates(indirect=0.1, baseline_mean=0.5, counterfactual_mean=0.6, risk_ratio=1.2)


def mean_outcome(ds):
    return PointEstimates(indirect=float(ds.outcome.mean()), baseline_mean=0.5, counterfactual_mean=0.5)


def flaky(ds):
    # fails whenever record "0" is drawn three or more times
    if np.count_nonzero(ds.ids == "0") >= 3:
        raise EstimationError("synthetic failure")
    return mean_outcome(ds)


def separated(ds):
    pe = mean_outcome(ds)
    return PointEstimates(pe.indirect, 0.5, 0.5, separation=ds.outcome[0] == 1.0)


def test_percentile_interval_hand_value():
    lo, hi = percentile_interval(range(1, 101), 0.90)
    assert lo == pytest.approx(5.95, abs=1e-12)
    assert hi == pytest.approx(95.05, abs=1e-12)


def test_percentile_interval_degenerate():
    assert percentile_interval([3.5], 0.95) == (3.5, 3.5)
    assert percentile_interval([2.0] * 7, 0.95) == (2.0, 2.0)
    with pytest.raises(ValueError):
        percentile_interval([], 0.95)
    with pytest.raises(ValueError):
        percentile_interval([1.0, float("nan")], 0.95)


@given(values, st.floats(0.0, 1.0))
def test_quantile_matches_numpy_linear(v, p):
    s = np.sort(v)
    assert quantile(s, p) == pytest.approx(float(np.quantile(s, p, method="linear")), rel=1e-12, abs=1e-9)


@given(values, levels)
def test_interval_ordered(v, level):
    lo, hi = percentile_interval(v, level)
    assert min(v) <= lo <= hi <= max(v)


@given(values, levels, st.floats(0, 1e6))
def test_adding_a_new_maximum_never_lowers_bounds(v, level, bump):
    lo, hi = percentile_interval(v, level)
    lo2, hi2 = percentile_interval(v + [max(v) + bump], level)
    assert lo2 >= lo and hi2 >= hi


@given(values)
def test_wider_level_gives_wider_interval(v):
    lo95, hi95 = percentile_interval(v, 0.95)
    lo99, hi99 = percentile_interval(v, 0.99)
    assert hi99 - lo99 >= hi95 - lo95


def test_replicate_indices_are_pure():
    a = replicate_indices(7, 3, 50)
    assert np.array_equal(a, replicate_indices(7, 3, 50))
    assert not np.array_equal(a, replicate_indices(7, 4, 50))
    assert a.min() >= 0 and a.max() < 50


def test_constant_estimator_gives_point_interval():
    res = bootstrap(make_dataset(30), constant, BootstrapConfig(replicates=50, seed=1))
    assert res.ci_indirect == (0.1, 0.1)
    assert res.ci_risk_ratio == (1.2, 1.2)
    assert res.replicate_failures == 0


def test_worker_count_does_not_change_results():
    ds = make_dataset(200, seed=3)
    est = partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.odds_multiply(3))
    one = bootstrap(ds, est, BootstrapConfig(replicates=60, seed=99, workers=1))
    two = bootstrap(ds, est, BootstrapConfig(replicates=60, seed=99, workers=2))
    assert one.ci_indirect == two.ci_indirect
    assert one.ci_risk_ratio == two.ci_risk_ratio
    assert np.array_equal(one.indirect_replicates, two.indirect_replicates)


def test_unpicklable_estimator_falls_back_to_threads():
    ds = make_dataset(50, seed=4)
    est = lambda d: mean_outcome(d)  # noqa: E731
    a = bootstrap(ds, est, BootstrapConfig(replicates=40, seed=5, workers=3))
    b = bootstrap(ds, mean_outcome, BootstrapConfig(replicates=40, seed=5, workers=1))
    assert a.ci_indirect == b.ci_indirect


def test_failures_are_dropped_and_counted():
    ds = make_dataset(20, seed=5)
    res = bootstrap(ds, flaky, BootstrapConfig(replicates=300, seed=6), point=mean_outcome(ds))
    expected = sum(np.count_nonzero(replicate_indices(6, i, 20) == 0) >= 3 for i in range(300))
    assert 0 < res.replicate_failures == expected
    assert res.replicate_failures + len(res.indirect_replicates) == 300


def test_separation_is_counted_not_dropped():
    ds = make_dataset(20, seed=8)
    res = bootstrap(ds, separated, BootstrapConfig(replicates=100, seed=2))
    expected = sum(ds.outcome[replicate_indices(2, i, 20)[0]] == 1.0 for i in range(100))
    assert res.separation_count == expected
    assert res.replicate_failures == 0


def test_all_replicates_failing():
    def boom(ds):
        raise EstimationError("no")

    with pytest.raises(EstimationError, match="all 5"):
        bootstrap(make_dataset(10), boom, BootstrapConfig(replicates=5), point=constant(None))


def test_config_validation():
    for kw in ({"replicates": 0}, {"level": 1.0}, {"level": 0.0}, {"seed": -1}, {"workers": 0}):
        with pytest.raises(ConfigError):
            BootstrapConfig(**kw)


def test_interval_order_is_enforced():
    with pytest.raises(EstimationError):
        EffectEstimate(constant(None), (1.0, 0.0), None, 0, 0, 1, 1, 0.95)


def test_default_workers(monkeypatch):
    monkeypatch.setenv("ORGMED_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("ORGMED_WORKERS", "x")
    with pytest.raises(ConfigError):
        default_workers()
