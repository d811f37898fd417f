"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the
"acceptance criteria" section of the terminal summary.
"""

import math
import re
import shutil
import time
import warnings
from dataclasses import replace
from functools import partial
from importlib import resources

import numpy as np
import pytest

from orgmed import simulate as sim
from orgmed.cli import main
from orgmed.data import LIMIT_CENSORED, binarize_mediator
from orgmed.glm import LOGIT, LOGLIK_ROUNDING, DesignSpec, fit, logit_loglik, logit_score
from orgmed.inference import BootstrapConfig, bootstrap
from orgmed.interventions import InterventionSpec, odds_transform
from orgmed.mediation import (
    binary_product,
    binary_sum_form,
    fit_linear_product,
    organic_indirect_rel0,
    organic_indirect_rel1,
)
from orgmed.validation import coverage_run, treated_sample_split

from conftest import make_dataset, record_criterion

pytestmark = pytest.mark.slow

SEED = 20140101
N = 100_000
DRAWS = 1_000_000
B = 100


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*args, **kw)


def estimate_with_se(ds, est, seed, replicates=B):
    res = quiet(bootstrap, ds, est, BootstrapConfig(replicates=replicates, seed=seed))
    return res.point.indirect, res.standard_error


def test_criterion_01_linear_product():
    t0 = time.perf_counter()
    model = sim.linear_model(interaction=0.5)
    truth = model.outcome_eq.mediator * model.mediator_eq.treatment
    ds = sim.generate_trial(model, N, SEED)
    plug = partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.arm_contrast())
    v1, se1 = estimate_with_se(ds, plug, SEED + 1, 50)
    v2, se2 = estimate_with_se(ds, fit_linear_product, SEED + 1, 50)
    secs = time.perf_counter() - t0
    ok = abs(v1 - truth) <= 3 * se1 and abs(v2 - truth) <= 3 * se2 and secs < 30
    record_criterion(1, "linear product", ok, f"plug-in {v1:.4f} (se {se1:.4f}), product {v2:.4f} (se {se2:.4f}) vs {truth:.2f}; {secs:.1f}s")
    assert ok


def test_criterion_02_binary_product_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(50):
        ds = make_dataset(500, seed=SEED + k)
        for arm in (0, 1):
            worst = max(worst, abs(binary_product(ds, None, None, arm) - binary_sum_form(ds, None, None, arm)))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and secs < 10
    record_criterion(2, "binary product identity", ok, f"max gap {worst:.2e} over 50 datasets; {secs:.1f}s")
    assert ok


def test_criterion_03_odds_transform():
    p = np.linspace(0.0, 1.0, 1000)
    gap2 = np.max(np.abs(odds_transform(p, 2) - 2 * p / (1 + p)))
    gap1 = np.max(np.abs(odds_transform(p, 1) - p))
    trip = max(np.max(np.abs(odds_transform(odds_transform(p, F), 1 / F) - p)) for F in (0.1, 2, 3, 10, 250))
    ok = gap2 <= 1e-12 and gap1 <= 1e-12 and trip <= 1e-12
    record_criterion(3, "odds transform", ok, f"F=2 {gap2:.1e}, F=1 {gap1:.1e}, round trip {trip:.1e}")
    assert ok


def test_criterion_04_oracle_agreement():
    t0 = time.perf_counter()
    cases = [
        ("binary + odds_multiply(3)", sim.binary_model(), InterventionSpec.odds_multiply(3), None),
        ("censored + shift(1)", sim.censored_model(), InterventionSpec.shift(1.0), None),
        ("censored + set_all_below", sim.censored_model(), InterventionSpec.set_all_below(), None),
        ("censored + treated sample", sim.censored_model(), InterventionSpec.arm_contrast(), treated_sample_split),
        ("binary + arm_contrast", sim.binary_model(), InterventionSpec.arm_contrast(), None),
    ]
    details, ok = [], True
    for k, (label, model, spec, est) in enumerate(cases):
        ds = sim.generate_trial(model, N, SEED + 10 + k)
        oracle = sim.oracle_organic_effect(model, spec, 0, DRAWS, SEED + 20 + k)
        est = est or partial(organic_indirect_rel0, outcome_design=None, spec=spec)
        v, se = estimate_with_se(ds, est, SEED + 30 + k)
        z = abs(v - oracle.truth) / math.hypot(se, oracle.mc_standard_error)
        ok &= z <= 3
        details.append(f"{label} z={z:.2f}")
    secs = time.perf_counter() - t0
    ok &= secs < 120
    record_criterion(4, "oracle agreement", ok, "; ".join(details) + f"; {secs:.1f}s")
    assert ok


def test_criterion_05_null_effects():
    cens = sim.generate_trial(sim.censored_model(), 5000, SEED)
    binary = sim.generate_trial(sim.binary_model(), 5000, SEED)
    shift0 = quiet(organic_indirect_rel0, cens, None, InterventionSpec.shift(0)).indirect
    odds1 = organic_indirect_rel0(binary, None, InterventionSpec.odds_multiply(1)).indirect
    null = sim.generate_trial(sim.null_model(), N, SEED + 1)
    v, se = estimate_with_se(null, partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.arm_contrast()), SEED + 2)
    ok = shift0 == 0.0 and odds1 == 0.0 and abs(v) <= 3 * se
    record_criterion(5, "null effects", ok, f"shift(0) {shift0!r}, odds(1) {odds1!r}, no-mediator {v:.4f} (se {se:.4f})")
    assert ok


def test_criterion_06_decomposition():
    worst = 0.0
    runs = 0
    for k in range(10):
        for kind, specs in (
            ("binary", [InterventionSpec.odds_multiply(F) for F in (1, 3, math.inf)] + [InterventionSpec.arm_contrast()]),
            (LIMIT_CENSORED, [InterventionSpec.shift(d) for d in (0, 1)] + [InterventionSpec.set_all_below(), InterventionSpec.arm_contrast()]),
        ):
            ds = make_dataset(400, seed=SEED + k, mediator_kind=kind)
            for spec in specs:
                for est in (organic_indirect_rel0, organic_indirect_rel1):
                    pe = quiet(est, ds, None, spec)
                    worst = max(worst, abs(pe.indirect + pe.direct - pe.total), abs(pe.total - (ds.arm_mean(1) - ds.arm_mean(0))))
                    runs += 1
    ok = worst <= 1e-12
    record_criterion(6, "decomposition", ok, f"max gap {worst:.1e} over {runs} analyses")
    assert ok


def test_criterion_07_coverage():
    t0 = time.perf_counter()
    covered, truth = quiet(coverage_run, SEED, 200, 400, n=500, oracle_draws=DRAWS)
    secs = time.perf_counter() - t0
    ok = 180 <= covered <= 198 and secs < 600
    record_criterion(7, "bootstrap coverage", ok, f"{covered}/200 intervals cover {truth:.4f}; {secs:.0f}s")
    assert ok


def test_criterion_08_determinism():
    ds = sim.generate_trial(sim.binary_model(), 2000, SEED)
    est = partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.odds_multiply(3))
    one = bootstrap(ds, est, BootstrapConfig(replicates=200, seed=SEED, workers=1))
    eight = bootstrap(ds, est, BootstrapConfig(replicates=200, seed=SEED, workers=8))
    ok = one.ci_indirect == eight.ci_indirect and one.ci_risk_ratio == eight.ci_risk_ratio
    record_criterion(8, "bootstrap determinism", ok, f"workers 1 {one.ci_indirect}, workers 8 {eight.ci_indirect}")
    assert ok


def test_criterion_09_uniqueness():
    valid = quiet(sim.uniqueness_scenario, SEED, n=N, replicates=B, oracle_draws=DRAWS)
    violated = quiet(sim.uniqueness_scenario, SEED, n=N, violate=True, replicates=B, oracle_draws=DRAWS)
    ok = valid.passed is True and violated.passed is False
    record_criterion(9, "uniqueness", ok, f"valid passed={valid.passed}, violated passed={violated.passed}")
    assert ok


def test_criterion_10_observational():
    rep = quiet(sim.confounded_scenario, SEED, n=N, replicates=B, oracle_draws=DRAWS)
    adj, _ = rep.estimates["adjusted for Z"]
    unadj, _ = rep.estimates["unadjusted"]
    ok = rep.passed is True
    record_criterion(10, "observational adjustment", ok, f"oracle {rep.oracle.truth:.4f}, adjusted {adj:.4f}, unadjusted {unadj:.4f}")
    assert ok


def test_criterion_11_saturation_and_monotonicity():
    ok, details = True, []
    for k in range(5):
        bd = binarize_mediator(sim.generate_trial(sim.censored_model(), 3000, SEED + k))
        inf = organic_indirect_rel0(bd, None, InterventionSpec.odds_multiply(math.inf)).indirect
        below = organic_indirect_rel0(bd, None, InterventionSpec.set_all_below()).indirect
        fits = [organic_indirect_rel0(bd, None, InterventionSpec.odds_multiply(F)) for F in (1, 2, 3, 10, math.inf)]
        slope = fits[0].models["outcome"].coef["m"]
        diffs = np.diff([f.indirect for f in fits])
        mono = bool((diffs >= 0).all()) if slope > 0 else True
        ok &= inf == below and mono
        details.append(f"slope {slope:+.2f} exact={inf == below} monotone={mono}")
    ok &= any(s.startswith("slope +") for s in details)
    record_criterion(11, "saturation and monotonicity", ok, "; ".join(details))
    assert ok


def test_criterion_12_format(tmp_path, capsys):
    res = resources.files("orgmed") / "resources"
    for name in ("synthetic_trial.csv", "shift_analysis.yaml"):
        shutil.copy(res / name, tmp_path / name)
    code = main(["analyze", "--config", str(tmp_path / "shift_analysis.yaml"), "--replicates", "200", "--workers", "1"])
    lines = capsys.readouterr().out.splitlines()
    header = "| Mediator | Shift (log10 scale) | Week | Indirect effect | 95% CI | RR | 95% CI | n | Replicate failures | Separation count | Seed |"
    pct = r"-?\d+\.\d%"
    rr = r"\d+\.\d\d"
    row = re.compile(rf"^\| HIV-RNA \| (?:\d+(?:\.\d+)? log10|∞) \| 4 \| {pct} \| \({pct},{pct}\) \| {rr} \| \({rr},{rr}\) \| 124 \| \d+ \| \d+ \| 20140101 \|$")
    body = lines[2:]
    ok = code == 0 and lines[0] == header and len(body) == 3 and all(row.match(b) for b in body)
    record_criterion(12, "format fidelity", ok, body[0] if body else "no rows")
    assert ok


def test_criterion_13_glm():
    y = np.r_[np.ones(63), np.zeros(61)]
    ds = replace(make_dataset(124, seed=SEED), outcome=y)
    b0 = fit(ds, "outcome", DesignSpec.of("1"), LOGIT).coef["intercept"]
    gap = abs(b0 - math.log(y.mean() / (1 - y.mean())))

    rng = np.random.default_rng(SEED)
    worst_score = 0.0
    for _ in range(20):
        X = np.column_stack([np.ones(80), rng.normal(size=(80, 3))])
        yy = rng.binomial(1, 0.4, 80).astype(float)
        b = rng.normal(scale=0.5, size=4)
        g = logit_score(X, yy, b)
        h = 1e-6
        fd = np.array([(logit_loglik(X, yy, b + h * e) - logit_loglik(X, yy, b - h * e)) / (2 * h) for e in np.eye(4)])
        worst_score = max(worst_score, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1e-3))))

    monotone = 0
    for k in range(50):
        d = make_dataset(150, seed=SEED + 100 + k)
        path = fit(d, "outcome", DesignSpec.of("1", "m", "c1", "c2", "arm"), LOGIT).loglik_path
        monotone += all(b >= a - LOGLIK_ROUNDING * max(1.0, abs(a)) for a, b in zip(path, path[1:]))
    ok = gap <= 1e-10 and worst_score <= 1e-5 and monotone == 50
    record_criterion(13, "GLM correctness", ok, f"intercept gap {gap:.1e}, score rel err {worst_score:.1e}, monotone {monotone}/50")
    assert ok
