"""Self-check suites run by ``orgmed validate``.

Each suite returns :class:`~orgmed.simulate.Check` items comparing an
estimate with an independent computation (closed form, second algebraic
route, or the simulation oracle) at a stated tolerance.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from . import simulate as sim
from .data import binarize_mediator
from .glm import LOGIT, DesignSpec, fit, logit_loglik, logit_score
from .inference import BootstrapConfig, bootstrap
from .interventions import InterventionSpec, odds_transform
from .mediation import (
    binary_product,
    binary_sum_form,
    fit_linear_product,
    indirect_from_treated_sample,
    organic_indirect_rel0,
)
from .simulate import Check, within

TIERS = {
    "quick": {"n": 20_000, "oracle_draws": 200_000, "replicates": 40, "coverage_outer": 0, "coverage_replicates": 0},
    "full": {
        "n": 100_000,
        "oracle_draws": 1_000_000,
        "replicates": 100,
        "coverage_outer": 200,
        "coverage_replicates": 400,
    },
}


def close(name: str, a: float, b: float, tol: float) -> Check:
    gap = abs(a - b)
    return Check(name, gap, tol, bool(gap <= tol), "below")


def flag(name: str, ok: bool) -> Check:
    return Check(name, 0.0 if ok else 1.0, 0.5, bool(ok), "below")


@dataclass
class SuiteResult:
    name: str
    checks: list[Check]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def glm_suite(seed: int, tier: dict) -> list[Check]:
    from .data import BINARY, Dataset

    rng = np.random.default_rng(seed)
    y = np.r_[np.ones(63), np.zeros(61)]
    ds = Dataset(
        ids=np.arange(124),
        arm=np.zeros(124, dtype=int),
        mediator=np.zeros(124),
        below=np.zeros(124, dtype=bool),
        outcome=y,
        common_causes=np.zeros((124, 0)),
        cause_names=(),
        outcome_kind=BINARY,
        mediator_kind=BINARY,
    )
    model = fit(ds, "outcome", DesignSpec.of("1"), LOGIT)
    checks = [close("intercept-only logit equals log(63/61)", model.coefficients[0], math.log(63 / 61), 1e-10)]

    worst_grad, monotone = 0.0, True
    for _ in range(20):
        n = 300
        X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
        beta = rng.normal(size=3) * 0.7
        yy = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
        d = Dataset(
            ids=np.arange(n),
            arm=np.zeros(n, dtype=int),
            mediator=np.zeros(n),
            below=np.zeros(n, dtype=bool),
            outcome=yy,
            common_causes=X[:, 1:],
            cause_names=("x1", "x2"),
            outcome_kind=BINARY,
            mediator_kind=BINARY,
        )
        fm = fit(d, "outcome", DesignSpec.of("1", "x1", "x2"), LOGIT)
        path = np.asarray(fm.loglik_path)
        monotone &= bool(np.all(np.diff(path) >= -1e-12 * np.abs(path[1:]).max()))
        b = fm.coefficients + rng.normal(size=3) * 0.1
        score = logit_score(X, yy, b)
        h = 1e-6
        fd = np.array(
            [(logit_loglik(X, yy, b + h * e) - logit_loglik(X, yy, b - h * e)) / (2 * h) for e in np.eye(3)]
        )
        worst_grad = max(worst_grad, float(np.max(np.abs(fd - score) / np.maximum(np.abs(score), 1.0))))
    checks.append(Check("score matches finite differences (relative)", worst_grad, 1e-5, worst_grad <= 1e-5))
    checks.append(flag("IRLS log-likelihood non-decreasing", monotone))
    return checks


def algebra_suite(seed: int, tier: dict) -> list[Check]:
    p = np.linspace(0.0, 1.0, 1000)
    checks = [
        close("odds_transform(p, 2) = 2p/(1+p)", float(np.max(np.abs(odds_transform(p, 2.0) - 2 * p / (1 + p)))), 0, 1e-12),
        close("odds_transform(p, 1) = p", float(np.max(np.abs(odds_transform(p, 1.0) - p))), 0, 1e-12),
        close(
            "odds round trip F then 1/F",
            float(np.max(np.abs(odds_transform(odds_transform(p, 3.7), 1 / 3.7) - p))),
            0,
            1e-12,
        ),
    ]
    worst = 0.0
    for k in range(10):
        ds = sim.generate_trial(sim.binary_model(), 500, seed + k)
        worst = max(worst, abs(binary_product(ds, None, None, 0) - binary_sum_form(ds, None, None, 0)))
    checks.append(close("binary product equals two-term sum form", worst, 0, 1e-10))

    ds = sim.generate_trial(sim.censored_model(), 5000, seed)
    bd = binarize_mediator(ds)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        null_shift = organic_indirect_rel0(ds, None, InterventionSpec.shift(0)).indirect
        null_odds = organic_indirect_rel0(bd, None, InterventionSpec.odds_multiply(1)).indirect
        f_inf = organic_indirect_rel0(bd, None, InterventionSpec.odds_multiply(math.inf)).indirect
        below = organic_indirect_rel0(bd, None, InterventionSpec.set_all_below()).indirect
        effects = [organic_indirect_rel0(bd, None, InterventionSpec.odds_multiply(F)).indirect for F in (1, 2, 3, 10, math.inf)]
        pe = organic_indirect_rel0(ds, None, InterventionSpec.shift(1.0))
    checks += [
        Check("shift(0) indirect is exactly 0", abs(null_shift), 0.0, null_shift == 0.0),
        close("odds_multiply(1) indirect", null_odds, 0.0, 1e-12),
        Check("F = inf equals set_all_below after binarization", abs(f_inf - below), 0.0, f_inf == below),
        flag("indirect non-decreasing in F over {1, 2, 3, 10, inf}", all(np.diff(effects) >= 0)),
        close("indirect + direct = total", pe.indirect + pe.direct, pe.total, 1e-12),
    ]
    return checks


def _se(ds, est, replicates, seed):
    res = bootstrap(ds, est, BootstrapConfig(replicates=replicates, seed=seed))
    return res.point.indirect, res.standard_error


def treated_sample_split(ds, starts=None):
    """Arm-0 records as outcome data and arm-1 (m, c) pairs as the treated sample,
    so a bootstrap of the whole trial resamples both."""
    return indirect_from_treated_sample(ds, None, ds.arm_subset(1), starts=starts)


def oracle_suite(seed: int, tier: dict) -> list[Check]:
    n, draws, B = tier["n"], tier["oracle_draws"], tier["replicates"]
    checks = []
    lin = sim.linear_model()
    ds = sim.generate_trial(lin, n, seed)
    truth = 0.7 * 0.8
    est = partial(organic_indirect_rel0, outcome_design=None, spec=InterventionSpec.arm_contrast())
    v, se = _se(ds, est, B, seed + 1)
    checks.append(within("linear SEM: plug-in vs mediator x treatment coefficients", v, truth, se))
    v, se = _se(ds, fit_linear_product, B, seed + 1)
    checks.append(within("linear SEM: linear product vs mediator x treatment coefficients", v, truth, se))

    cases = [
        ("binary mediator, odds_multiply(3)", sim.binary_model(), InterventionSpec.odds_multiply(3), "rel0"),
        ("censored mediator, shift(1)", sim.censored_model(), InterventionSpec.shift(1.0), "rel0"),
        ("censored mediator, set_all_below", sim.censored_model(), InterventionSpec.set_all_below(), "rel0"),
        ("censored mediator, treated sample", sim.censored_model(), InterventionSpec.arm_contrast(), "treated"),
        ("binary mediator, arm_contrast", sim.binary_model(), InterventionSpec.arm_contrast(), "rel0"),
        ("no mediator effect, arm_contrast", sim.null_model(), InterventionSpec.arm_contrast(), "rel0"),
    ]
    for k, (label, model, spec, route) in enumerate(cases):
        ds = sim.generate_trial(model, n, seed + 10 + k)
        oracle = sim.oracle_organic_effect(model, spec, 0, draws, seed + 20 + k)
        if route == "treated":
            est = treated_sample_split
        else:
            est = partial(organic_indirect_rel0, outcome_design=None, spec=spec)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v, se = _se(ds, est, B, seed + 30 + k)
        checks.append(within(f"{label}: plug-in vs oracle", v, oracle.truth, math.hypot(se, oracle.mc_standard_error)))
    return checks


def uniqueness_suite(seed: int, tier: dict, misspecify: bool = False) -> list[Check]:
    kw = {"n": tier["n"], "replicates": tier["replicates"], "oracle_draws": tier["oracle_draws"]}
    valid = sim.uniqueness_scenario(seed, **kw)
    checks = [Check(f"uniqueness: {c.name}", c.observed, c.tolerance, c.passed, c.rule) for c in valid.checks]
    violated = sim.uniqueness_scenario(seed, violate=True, **kw)
    if misspecify:
        checks += [
            Check(f"uniqueness (violated): {c.name}", c.observed, c.tolerance, c.passed, c.rule) for c in violated.checks
        ]
    else:
        c = violated.checks[1]
        checks.append(
            Check("violated uniqueness is detected (C1 only departs from oracle)", c.observed, c.tolerance, not c.passed, "above")
        )
    return checks


def confounding_suite(seed: int, tier: dict, misspecify: bool = False) -> list[Check]:
    kw = {"n": tier["n"], "replicates": tier["replicates"], "oracle_draws": tier["oracle_draws"]}
    rep = sim.confounded_scenario(seed, **kw)
    checks = [Check(f"confounded: {c.name}", c.observed, c.tolerance, c.passed, c.rule) for c in rep.checks]
    if misspecify:
        # treat the Z-omitting analysis as if it were valid
        (u, su) = rep.estimates["unadjusted"]
        se = math.hypot(su, rep.oracle.mc_standard_error)
        checks.append(within("confounded: unadjusted vs oracle (misspecified on purpose)", u, rep.oracle.truth, se))
    return checks


def coverage_run(
    seed: int, outer: int, replicates: int, n: int = 500, oracle_draws: int = 1_000_000, workers: int = 1
) -> tuple[int, float]:
    """Count of percentile intervals covering the oracle truth over ``outer`` simulated trials."""
    model = sim.hiv_like_model()
    spec = InterventionSpec.odds_multiply(3)
    truth = sim.oracle_organic_effect(model, spec, 0, oracle_draws, seed).truth
    est = partial(organic_indirect_rel0, outcome_design=None, spec=spec)
    covered = 0
    for r in range(outer):
        ds = sim.generate_trial(model, n, seed + 1000 + r)
        res = bootstrap(ds, est, BootstrapConfig(replicates=replicates, seed=seed + r, workers=workers))
        covered += res.ci_indirect[0] <= truth <= res.ci_indirect[1]
    return covered, truth


def coverage_suite(seed: int, tier: dict) -> list[Check]:
    outer = tier["coverage_outer"]
    if not outer:
        return []
    covered, _ = coverage_run(seed, outer, tier["coverage_replicates"])
    lo, hi = round(0.90 * outer), round(0.99 * outer)
    return [Check(f"95% percentile CI coverage count in [{lo}, {hi}] of {outer}", covered, hi, lo <= covered <= hi, "band")]


SUITES: dict[str, Callable] = {
    "glm": glm_suite,
    "algebra": algebra_suite,
    "oracle": oracle_suite,
    "uniqueness": uniqueness_suite,
    "confounding": confounding_suite,
    "coverage": coverage_suite,
}


def run(seed: int, tier: str = "quick", misspecify: bool = False, log=None) -> list[SuiteResult]:
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}")
    sizes = TIERS[tier]
    results = []
    for name, suite in SUITES.items():
        t0 = time.perf_counter()
        if name in ("uniqueness", "confounding"):
            checks = suite(seed, sizes, misspecify)
        else:
            checks = suite(seed, sizes)
        results.append(SuiteResult(name, checks, time.perf_counter() - t0))
        if log:
            log(f"{name}: {'pass' if results[-1].passed else 'FAIL'} ({results[-1].seconds:.1f}s)")
    return results


def render(results: list[SuiteResult], seed: int, tier: str) -> str:
    lines = [f"validation tier={tier} seed={seed}"]
    for r in results:
        if not r.checks:
            lines.append(f"[SKIP] {r.name} (not run in this tier)")
            continue
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.name} ({r.seconds:.1f}s)")
        for c in r.checks:
            lines.append("    " + _describe(c))
    ok = all(r.passed for r in results)
    lines.append("all checks passed" if ok else "some checks FAILED")
    return "\n".join(lines) + "\n"


def _describe(c: Check) -> str:
    verdict = "pass" if c.passed else "FAIL"
    if c.rule == "band":
        return f"{c.name}: observed {c.observed:g} -> {verdict}"
    op = "<=" if c.rule == "below" else ">"
    return f"{c.name}: observed {c.observed:.4g}, tolerance {op} {c.tolerance:.4g} -> {verdict}"
