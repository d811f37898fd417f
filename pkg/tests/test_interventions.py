import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orgmed.data import LIMIT_CENSORED, MediatorValue
from orgmed.errors import ConfigError
from orgmed.glm import LOGIT, DesignSpec, FittedModel, fit
from orgmed.interventions import (
    ExtrapolationWarning,
    InterventionSpec,
    MediatorLaw,
    counterfactual_mediator_law,
    factual_mediator_law,
    odds_transform,
    shift_mediator,
    shift_values,
)

from conftest import make_dataset


def test_odds_transform_examples():
    assert odds_transform(0.5, 3) == pytest.approx(0.75, abs=1e-15)
    assert odds_transform(0.4, 1) == 0.4
    assert odds_transform(0.3, math.inf) == 1.0
    assert odds_transform(0.0, 5) == 0.0
    assert odds_transform(1.0, 5) == 1.0


def test_odds_transform_doubling_grid():
    p = np.linspace(0.0, 1.0, 1000)
    np.testing.assert_allclose(odds_transform(p, 2), 2 * p / (1 + p), atol=1e-12, rtol=0)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_odds_transform_rejects_bad_factor(bad):
    with pytest.raises(ConfigError):
        odds_transform(0.5, bad)


def test_odds_transform_rejects_bad_probability():
    with pytest.raises(ConfigError):
        odds_transform(1.5, 2)


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.floats(1e-3, 1e3))
def test_odds_round_trip(p, F):
    assert odds_transform(odds_transform(p, F), 1 / F) == pytest.approx(p, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(1e-3, 1 - 1e-3), st.floats(1e-2, 1e2))
def test_odds_ratio_is_F(p, F):
    q = odds_transform(p, F)
    assert (q / (1 - q)) / (p / (1 - p)) == pytest.approx(F, rel=1e-8)


@settings(max_examples=100)
@given(st.floats(0.0, 1.0), st.floats(0.01, 100), st.floats(0.01, 100))
def test_odds_transform_monotone_in_F(p, F, G):
    lo, hi = sorted((F, G))
    assert odds_transform(p, lo) <= odds_transform(p, hi) + 1e-15


def test_shift_examples():
    assert shift_mediator(MediatorValue.observed(3.0), 1.0, 1.0) == MediatorValue.observed(2.0)
    assert shift_mediator(MediatorValue.observed(1.5), 1.0, 1.0) == MediatorValue.below()
    assert shift_mediator(MediatorValue.below(), 1.0, 1.0) == MediatorValue.below()
    assert shift_mediator(MediatorValue.observed(2.0), 1.0, 1.0) == MediatorValue.observed(1.0)


def test_shift_rejects_binary_and_negative():
    with pytest.raises(ConfigError):
        shift_mediator(MediatorValue.binary(1), 1.0, 1.0)
    with pytest.raises(ConfigError):
        InterventionSpec.shift(-0.5)


@settings(max_examples=100)
@given(st.lists(st.one_of(st.none(), st.floats(1.0, 7.0)), min_size=1, max_size=20), st.floats(0, 3), st.floats(0, 3))
def test_shifts_compose(values, d1, d2):
    v = np.array([np.nan if x is None else x for x in values])
    b = np.isnan(v)
    v1, b1 = shift_values(*shift_values(v, b, d1, 1.0), d2, 1.0)
    v2, b2 = shift_values(v, b, d1 + d2, 1.0)
    np.testing.assert_array_equal(b1, b2)
    np.testing.assert_allclose(v1[~b1], v2[~b2], atol=1e-12)


def test_infinite_shift_is_set_all_below():
    assert InterventionSpec.shift(math.inf).kind == "set_all_below"


def test_odds_law_two_point_weights():
    ds = make_dataset(100, seed=3)
    med = FittedModel(LOGIT, DesignSpec.of("1"), np.zeros(1), True, 1, 0.0, False, 100, None)
    law = counterfactual_mediator_law(ds, InterventionSpec.odds_multiply(3), med)
    n0 = ds.arm_counts()[0]
    assert law.n_points == 2 * n0
    np.testing.assert_allclose(law.weights[:2], [0.75, 0.25], atol=1e-15)
    np.testing.assert_allclose(law.weight_totals(), np.ones(n0))


def test_set_all_below_law():
    ds = make_dataset(100, seed=4, mediator_kind=LIMIT_CENSORED)
    law = counterfactual_mediator_law(ds, InterventionSpec.set_all_below())
    assert law.below.all() and (law.weights == 1).all()
    assert law.n_points == ds.arm_counts()[0]


def test_shift_zero_leaves_observed_law():
    ds = make_dataset(100, seed=4, mediator_kind=LIMIT_CENSORED)
    law = counterfactual_mediator_law(ds, InterventionSpec.shift(0))
    base = ds.arm_subset(0)
    np.testing.assert_array_equal(law.below, base.below)
    np.testing.assert_array_equal(law.mediator, base.mediator)


def test_arm_contrast_law_is_other_arm():
    ds = make_dataset(100, seed=5)
    law = counterfactual_mediator_law(ds, InterventionSpec.arm_contrast())
    np.testing.assert_array_equal(law.mediator, ds.arm_subset(1).mediator)


def test_factual_odds_law_uses_fitted_model():
    ds = make_dataset(300, seed=6)
    med = fit(ds, "mediator_binary", DesignSpec.of("1", "c1"), LOGIT, arm_filter=0)
    a = factual_mediator_law(ds, InterventionSpec.odds_multiply(1), med)
    b = counterfactual_mediator_law(ds, InterventionSpec.odds_multiply(1), med)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-15)


def test_odds_needs_mediator_model_and_binary_mediator():
    ds = make_dataset(50, seed=1)
    with pytest.raises(ConfigError):
        counterfactual_mediator_law(ds, InterventionSpec.odds_multiply(2))
    cens = make_dataset(50, seed=1, mediator_kind=LIMIT_CENSORED)
    with pytest.raises(ConfigError):
        counterfactual_mediator_law(cens, InterventionSpec.odds_multiply(2))
    with pytest.raises(ConfigError):
        counterfactual_mediator_law(ds, InterventionSpec.shift(1))


def test_empirical_sample_pairs():
    pairs = [(MediatorValue.observed(2.0), {"c1": 1.0, "c2": 0.0}), (MediatorValue.below(), {"c1": 0.0, "c2": 1.0})]
    spec = InterventionSpec.empirical_sample(pairs)
    items = spec.pairs.items()
    assert items[1] == (MediatorValue.below(), {"c1": 0.0, "c2": 1.0}, 1.0)
    with pytest.raises(ConfigError):
        InterventionSpec.empirical_sample([])
    with pytest.raises(ConfigError):
        MediatorLaw.from_pairs([(MediatorValue.below(), {"a": 1.0}), (MediatorValue.binary(1), {"a": 1.0})])


def test_extrapolation_warning():
    ds = make_dataset(200, seed=9, mediator_kind=LIMIT_CENSORED)
    far = [(MediatorValue.observed(50.0), {"c1": 0.0, "c2": 0.0})]
    with pytest.warns(ExtrapolationWarning):
        counterfactual_mediator_law(ds, InterventionSpec.empirical_sample(far))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        counterfactual_mediator_law(ds, InterventionSpec.shift(0))
