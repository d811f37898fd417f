import math
import warnings
from functools import partial

import numpy as np
import pytest
from scipy.stats import ks_2samp

from orgmed import simulate as sim
from orgmed.data import BINARY, LIMIT_CENSORED
from orgmed.errors import ConfigError
from orgmed.inference import BootstrapConfig, bootstrap
from orgmed.interventions import InterventionSpec, odds_transform
from orgmed.mediation import organic_indirect_rel0


def test_generate_trial_is_deterministic():
    model = sim.censored_model()
    a = sim.generate_trial(model, 500, 3)
    b = sim.generate_trial(model, 500, 3)
    c = sim.generate_trial(model, 500, 4)
    assert a.canonical_bytes() == b.canonical_bytes()
    assert a.canonical_bytes() != c.canonical_bytes()


def test_generated_kinds_and_limits():
    ds = sim.generate_trial(sim.censored_model(), 2000, 1)
    assert ds.mediator_kind == LIMIT_CENSORED and ds.outcome_kind == BINARY
    assert ds.assay_limit == 1.7
    assert (ds.mediator[~ds.below] >= 1.7).all()
    assert 0 < ds.below.sum() < ds.n
    hiv = sim.generate_trial(sim.hiv_like_model(), 300, 1)
    assert hiv.arm_counts() == (300, 0)
    conf = sim.generate_trial(sim.confounded_model(), 300, 1)
    assert conf.extra_names == ("z",)


def test_linear_oracle_is_product_of_coefficients():
    for interaction in (0.0, 0.5, 1.0):
        res = sim.oracle_organic_effect(sim.linear_model(interaction), InterventionSpec.arm_contrast(), 0, 400_000, 2)
        # common random numbers make each draw's contrast exactly 0.7 * 0.8
        assert res.truth == pytest.approx(0.56, abs=1e-12)


def test_oracle_null_interventions_are_exactly_zero():
    assert sim.oracle_organic_effect(sim.binary_model(), InterventionSpec.odds_multiply(1), 0, 50_000, 1).truth == 0.0
    assert sim.oracle_organic_effect(sim.censored_model(), InterventionSpec.shift(0), 0, 50_000, 1).truth == 0.0
    assert sim.oracle_organic_effect(sim.null_model(), InterventionSpec.arm_contrast(), 0, 50_000, 1).truth == 0.0


def test_oracle_independent_of_workers():
    spec = InterventionSpec.odds_multiply(3)
    a = sim.oracle_organic_effect(sim.binary_model(), spec, 0, 200_000, 9, workers=1)
    b = sim.oracle_organic_effect(sim.binary_model(), spec, 0, 200_000, 9, workers=2)
    assert a == b


def test_oracle_rejects_mismatched_spec():
    with pytest.raises(ConfigError):
        sim.oracle_organic_effect(sim.binary_model(), InterventionSpec.shift(1), 0, 10, 0)
    with pytest.raises(ConfigError):
        sim.oracle_organic_effect(sim.linear_model(), InterventionSpec.set_all_below(), 0, 10, 0)


def test_interaction_linear_sem_estimate_matches_oracle():
    model = sim.linear_model(interaction=1.0)
    ds = sim.generate_trial(model, 20_000, 5)
    est = partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.arm_contrast())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = bootstrap(ds, est, BootstrapConfig(replicates=40, seed=6))
    oracle = sim.oracle_organic_effect(model, InterventionSpec.arm_contrast(), 0, 200_000, 7)
    assert abs(res.point.indirect - oracle.truth) <= 3 * math.hypot(res.standard_error, oracle.mc_standard_error)


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_arm_contrast_is_organic_within_covariate_strata(c):
    model = sim.binary_model()
    env, m, _ = sim.counterfactual_mediators(model, InterventionSpec.arm_contrast(), 0, 100_000, 1)
    env1, m1, _ = sim.arm_mediators(model, 1, 100_000, 2)
    sel, sel1 = env["c"] == c, env1["c"] == c
    assert ks_2samp(m[sel], m1[sel1]).pvalue > 0.001


def test_odds_intervention_hits_transformed_probability():
    model = sim.binary_model()
    env, m, _ = sim.counterfactual_mediators(model, InterventionSpec.odds_multiply(3), 0, 200_000, 3)
    p0 = sim.mediator_probability(model, env, np.zeros(len(m)))
    expected = odds_transform(p0, 3)
    for c in (0.0, 1.0):
        sel = env["c"] == c
        se = math.sqrt(expected[sel][0] * (1 - expected[sel][0]) / sel.sum())
        assert abs(m[sel].mean() - expected[sel][0]) <= 4 * se


def test_shift_moves_latent_mediator_by_delta():
    model = sim.censored_model()
    env, m, below = sim.counterfactual_mediators(model, InterventionSpec.shift(1.0), 0, 50_000, 4)
    env0, m0, below0 = sim.arm_mediators(model, 0, 50_000, 4)
    np.testing.assert_allclose(m, m0 - 1.0)
    assert (below >= below0).all()
    assert (m[below] < 1.7).all() and (m[~below] >= 1.7).all()


def test_model_round_trip_and_validation():
    model = sim.confounded_model()
    assert sim.load_model(model.model_dump()) == model
    with pytest.raises(ConfigError):
        sim.load_model({"c_law": {}, "mediator_eq": {"kind": "linear", "coefs": {"q": 1}}, "outcome_eq": {"kind": "linear"}})
    with pytest.raises(ConfigError):
        sim.load_model(
            {"c_law": {}, "mediator_eq": {"kind": "logistic"}, "outcome_eq": {"kind": "logistic"}, "assay_limit": 1.0}
        )


def test_replace_updates_nested_fields():
    m = sim.binary_model().replace(outcome_eq={"mediator": 0.0})
    assert m.outcome_eq.mediator == 0.0
    assert m.outcome_eq.intercept == sim.binary_model().outcome_eq.intercept


def test_scenario_registry():
    for name in sim.SCENARIOS:
        assert isinstance(sim.scenario_model(name), sim.GenerativeModel)
    with pytest.raises(ConfigError, match="unknown scenario"):
        sim.scenario_model("nope")


def test_small_scenarios_are_diagnostic_only():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = sim.uniqueness_scenario(1, n=400, replicates=10, oracle_draws=20_000)
    assert rep.passed is None
    assert rep.lines()[0].startswith(rep.name)
