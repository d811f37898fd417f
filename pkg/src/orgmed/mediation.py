"""Plug-in estimators of organic indirect and direct effects.

All estimators evaluate the base-arm outcome regression over a counterfactual
mediator law and contrast it with the same regression evaluated over the
factual law, estimated the same way. For a null intervention the two laws are
identical, so the indirect effect is exactly zero; with an intercept-bearing
outcome model the factual plug-in equals the observed base-arm mean up to the
fit tolerance, which is the mean reported as ``baseline_mean``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import BINARY, LIMIT_CENSORED, Dataset
from .errors import ConfigError, DataError
from .glm import BELOW, IDENTITY, INTERCEPT, LOGIT, MEDIATOR, DesignSpec, FittedModel, covariate, fit
from .interventions import (
    ARM_CONTRAST,
    EMPIRICAL_SAMPLE,
    ODDS_MULTIPLY,
    SET_ALL_BELOW,
    InterventionSpec,
    MediatorLaw,
    counterfactual_mediator_law,
    factual_mediator_law,
    odds_transform,
)

RISK_DIFFERENCE = "risk_difference"
MEAN_DIFFERENCE = "mean_difference"


@dataclass(frozen=True)
class PointEstimates:
    """Point estimates on the risk- or mean-difference scale.

    For ``base_arm = 0``: ``indirect = counterfactual_mean - baseline_mean``
    with ``baseline_mean`` the arm-0 mean. For ``base_arm = 1`` the signs follow
    the arm-1 convention, ``indirect = baseline_mean - counterfactual_mean``,
    so that ``indirect + direct = total`` in both cases.
    """

    indirect: float
    baseline_mean: float
    counterfactual_mean: float
    direct: float | None = None
    total: float | None = None
    risk_ratio: float | None = None
    base_arm: int = 0
    scale: str = RISK_DIFFERENCE
    separation: bool = False
    models: Mapping[str, FittedModel] = field(default_factory=dict, compare=False, repr=False)

    def starts(self) -> dict[str, np.ndarray]:
        """Coefficients usable as IRLS starting values for refits."""
        return {k: m.coefficients for k, m in self.models.items()}


def outcome_link(ds: Dataset) -> str:
    return LOGIT if ds.outcome_kind == BINARY else IDENTITY


def default_outcome_design(ds: Dataset, include_extra: bool = True) -> DesignSpec:
    """``intercept + m + C`` for binary mediators, with the ``below`` term added
    when a censored mediator has an assay limit."""
    terms = [INTERCEPT]
    if ds.mediator_kind == LIMIT_CENSORED and ds.assay_limit is not None:
        terms.append(BELOW)
    terms.append(MEDIATOR)
    names = ds.covariate_names if include_extra else ds.cause_names
    terms += [covariate(c) for c in names]
    return DesignSpec(tuple(terms))


def default_mediator_design(ds: Dataset, include_extra: bool = True) -> DesignSpec:
    names = ds.covariate_names if include_extra else ds.cause_names
    return DesignSpec((INTERCEPT, *[covariate(c) for c in names]))


def to_risk_ratio(counterfactual_mean: float, baseline_mean: float) -> float:
    if baseline_mean == 0:
        raise ValueError("risk ratio undefined for a zero baseline mean")
    return counterfactual_mean / baseline_mean


def _safe_ratio(num: float, den: float) -> float | None:
    return None if den <= 0 else num / den


def plugin_counterfactual_mean(outcome_model: FittedModel, law: MediatorLaw, arm: int = 0) -> float:
    """Average over covariate rows of the weighted outcome predictions."""
    if law.n_points == 0:
        raise DataError("empty mediator law")
    missing = outcome_model.design.covariates_used() - set(law.covariates)
    if missing:
        raise ConfigError(f"covariate mismatch: law lacks {', '.join(sorted(missing))}")
    pred = outcome_model.predict(law.columns(arm))
    return float(np.mean(law.group_totals(pred)))


def _fit_models(ds, base_arm, outcome_design, spec, mediator_design, starts):
    starts = starts or {}
    models = {
        "outcome": fit(ds, "outcome", outcome_design, outcome_link(ds), arm_filter=base_arm, start=starts.get("outcome"))
    }
    if spec.needs_mediator_model(ds.mediator_kind):
        models["mediator"] = fit(
            ds,
            "mediator_binary",
            mediator_design or default_mediator_design(ds),
            LOGIT,
            arm_filter=base_arm,
            start=starts.get("mediator"),
        )
    return models


def _binary_arm_contrast(ds, outcome_design, mediator_design, base_arm, starts):
    """Binary mediator moved to the other arm's law: both mediator laws come
    from per-arm logistic fits and are standardized over every covariate row."""
    starts = starts or {}
    mediator_design = mediator_design or default_mediator_design(ds)
    models = {
        "outcome": fit(
            ds, "outcome", outcome_design, outcome_link(ds), arm_filter=base_arm, start=starts.get("outcome")
        ),
        "mediator0": fit(ds, "mediator_binary", mediator_design, LOGIT, arm_filter=0, start=starts.get("mediator0")),
        "mediator1": fit(ds, "mediator_binary", mediator_design, LOGIT, arm_filter=1, start=starts.get("mediator1")),
    }
    n = ds.n
    cols = {**ds.covariates(), "below": np.zeros(n, dtype=bool)}
    p = {a: models[f"mediator{a}"].predict({**cols, "arm": np.full(n, float(a))}) for a in (0, 1)}
    base = {**cols, "arm": np.full(n, float(base_arm))}
    e1 = models["outcome"].predict({**base, "m": np.ones(n)})
    e0 = models["outcome"].predict({**base, "m": np.zeros(n)})
    target, factual = p[1 - base_arm], p[base_arm]
    contrast = float(np.mean(e1 * target + e0 * (1.0 - target))) - float(np.mean(e1 * factual + e0 * (1.0 - factual)))
    return models, contrast


def _organic_indirect(ds, outcome_design, spec, mediator_design, base_arm, starts) -> PointEstimates:
    spec.check(ds)
    n0, n1 = ds.arm_counts()
    if (n0, n1)[base_arm] == 0:
        raise DataError(f"no records in arm {base_arm}")
    if spec.kind == ARM_CONTRAST and min(n0, n1) == 0:
        raise DataError("arm_contrast needs records in both arms")
    outcome_design = outcome_design or default_outcome_design(ds)
    if spec.kind == ARM_CONTRAST and ds.mediator_kind == BINARY:
        models, contrast = _binary_arm_contrast(ds, outcome_design, mediator_design, base_arm, starts)
    else:
        models = _fit_models(ds, base_arm, outcome_design, spec, mediator_design, starts)
        med_model = models.get("mediator")
        law = counterfactual_mediator_law(ds, spec, med_model, base_arm)
        reference = factual_mediator_law(ds, spec, med_model, base_arm)
        contrast = plugin_counterfactual_mean(models["outcome"], law, base_arm) - plugin_counterfactual_mean(
            models["outcome"], reference, base_arm
        )

    baseline = ds.arm_mean(base_arm)
    cf = baseline + contrast
    binary = ds.outcome_kind == BINARY
    if base_arm == 0:
        indirect = cf - baseline
        rr = _safe_ratio(cf, baseline) if binary else None
    else:
        indirect = baseline - cf
        rr = _safe_ratio(baseline, cf) if binary else None
    direct = total = None
    if n0 and n1 and spec.kind != EMPIRICAL_SAMPLE:
        m0, m1 = ds.arm_mean(0), ds.arm_mean(1)
        total = m1 - m0
        direct = m1 - cf if base_arm == 0 else cf - m0
    return PointEstimates(
        indirect=indirect,
        baseline_mean=baseline,
        counterfactual_mean=cf,
        direct=direct,
        total=total,
        risk_ratio=rr,
        base_arm=base_arm,
        scale=RISK_DIFFERENCE if binary else MEAN_DIFFERENCE,
        separation=any(m.separation_flag for m in models.values()),
        models=models,
    )


def organic_indirect_rel0(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    spec: InterventionSpec,
    mediator_design: DesignSpec | None = None,
    starts: Mapping[str, np.ndarray] | None = None,
) -> PointEstimates:
    """Organic indirect effect relative to no treatment.

    Needs outcomes only in arm 0. ``odds_multiply`` (binary mediator) fits a
    logistic mediator model on arm 0 with ``mediator_design`` (default
    ``intercept + C``). Total and direct effects are filled in when arm-1
    outcomes exist.
    """
    return _organic_indirect(ds, outcome_design, spec, mediator_design, 0, starts)


def organic_indirect_rel1(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    spec: InterventionSpec,
    mediator_design: DesignSpec | None = None,
    starts: Mapping[str, np.ndarray] | None = None,
) -> PointEstimates:
    """Organic indirect effect relative to treatment (arms swapped).

    The intervention acts on arm-1 mediators; with ``arm_contrast`` it moves
    them to the arm-0 law. ``indirect = E(Y1) - E(Y1 under the intervention)``.
    """
    return _organic_indirect(ds, outcome_design, spec, mediator_design, 1, starts)


def indirect_from_treated_sample(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    pairs,
    starts: Mapping[str, np.ndarray] | None = None,
) -> PointEstimates:
    """Indirect effect from untreated outcome data plus on-treatment (m, c) measurements.

    Only arm-0 records of ``ds`` are used. ``pairs`` is anything accepted by
    :meth:`InterventionSpec.empirical_sample`.
    """
    untreated = ds.arm_subset(0)
    spec = InterventionSpec.empirical_sample(pairs)
    return _organic_indirect(untreated, outcome_design, spec, None, 0, starts)


def _binary_ingredients(ds, outcome_design, mediator_design, arm, starts=None):
    if ds.mediator_kind != BINARY:
        raise ConfigError("binary product method needs a binary mediator")
    n0, n1 = ds.arm_counts()
    if not (n0 and n1):
        raise DataError("binary product method needs both arms for the mediator contrast")
    starts = starts or {}
    outcome_design = outcome_design or default_outcome_design(ds)
    mediator_design = mediator_design or default_mediator_design(ds)
    if not outcome_design.uses("m"):
        raise ConfigError("outcome design must contain the mediator")
    out = fit(ds, "outcome", outcome_design, outcome_link(ds), arm_filter=arm, start=starts.get("outcome"))
    med1 = fit(ds, "mediator_binary", mediator_design, LOGIT, arm_filter=1, start=starts.get("mediator1"))
    med0 = fit(ds, "mediator_binary", mediator_design, LOGIT, arm_filter=0, start=starts.get("mediator0"))
    cols = ds.covariates()
    n = ds.n
    cols["arm"] = np.full(n, float(arm))
    cols["below"] = np.zeros(n, dtype=bool)
    e1 = out.predict({**cols, "m": np.ones(n)})
    e0 = out.predict({**cols, "m": np.zeros(n)})
    cols["arm"] = np.ones(n)
    p1 = med1.predict(cols)
    cols["arm"] = np.zeros(n)
    p0 = med0.predict(cols)
    return e1, e0, p1, p0


def binary_product(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    mediator_design: DesignSpec | None,
    arm: int = 0,
) -> float:
    """Product method for a binary mediator.

    Average over all observed covariate rows of
    ``(E[Y|M=1,c,arm] - E[Y|M=0,c,arm]) * (P(M=1|c,A=1) - P(M=1|c,A=0))``,
    with the mediator probabilities from logistic fits in each arm.
    """
    e1, e0, p1, p0 = _binary_ingredients(ds, outcome_design, mediator_design, arm)
    return float(np.mean((e1 - e0) * (p1 - p0)))


def binary_sum_form(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    mediator_design: DesignSpec | None,
    arm: int = 0,
) -> float:
    """The same quantity summed over both mediator levels, without factoring.

    ``sum_m E[Y|m,c,arm] * (P(M=m|c,A=1) - P(M=m|c,A=0))`` averaged over rows;
    kept as an independent cross-check of :func:`binary_product`.
    """
    e1, e0, p1, p0 = _binary_ingredients(ds, outcome_design, mediator_design, arm)
    term1 = e1 * (p1 - p0)
    term0 = e0 * ((1.0 - p1) - (1.0 - p0))
    return float(np.mean(term1 + term0))


def binary_product_estimates(
    ds: Dataset,
    outcome_design: DesignSpec | None = None,
    mediator_design: DesignSpec | None = None,
    arm: int = 0,
    starts: Mapping[str, np.ndarray] | None = None,
) -> PointEstimates:
    """:func:`binary_product` packaged with baseline and risk ratio."""
    e1, e0, p1, p0 = _binary_ingredients(ds, outcome_design, mediator_design, arm, starts)
    effect = float(np.mean((e1 - e0) * (p1 - p0)))
    baseline = ds.arm_mean(arm)
    binary = ds.outcome_kind == BINARY
    if arm == 0:
        cf = baseline + effect
        rr = _safe_ratio(cf, baseline) if binary else None
        direct = ds.arm_mean(1) - cf
    else:
        cf = baseline - effect
        rr = _safe_ratio(baseline, cf) if binary else None
        direct = cf - ds.arm_mean(0)
    return PointEstimates(
        indirect=effect,
        baseline_mean=baseline,
        counterfactual_mean=cf,
        direct=direct,
        total=ds.arm_mean(1) - ds.arm_mean(0),
        risk_ratio=rr,
        base_arm=arm,
        scale=RISK_DIFFERENCE if binary else MEAN_DIFFERENCE,
    )


def linear_product(mediator_model: FittedModel, outcome_model: FittedModel) -> float:
    """Treatment coefficient of the mediator model times mediator coefficient
    of the outcome model (any treatment-mediator interaction is ignored)."""
    if mediator_model.link != IDENTITY or outcome_model.link != IDENTITY:
        raise ConfigError("linear product method needs identity-link models")
    alpha = mediator_model.coef
    beta = outcome_model.coef
    if "arm" not in alpha:
        raise ConfigError("mediator model lacks the treatment term 'arm'")
    if "m" not in beta:
        raise ConfigError("outcome model lacks the mediator term 'm'")
    return beta["m"] * alpha["arm"]


def fit_linear_product(ds: Dataset, starts=None) -> PointEstimates:
    """Fit ``M ~ 1 + A + C`` and ``Y ~ 1 + A + M + A:M + C`` and apply :func:`linear_product`."""
    causes = [covariate(c) for c in ds.cause_names]
    med = fit(ds, "mediator", DesignSpec((INTERCEPT, covariate("arm"), *causes)), IDENTITY)
    out = fit(
        ds,
        "outcome",
        DesignSpec((INTERCEPT, covariate("arm"), MEDIATOR, "arm:m", *causes)),
        IDENTITY,
    )
    effect = linear_product(med, out)
    baseline = ds.arm_mean(0)
    m1 = ds.arm_mean(1)
    return PointEstimates(
        indirect=effect,
        baseline_mean=baseline,
        counterfactual_mean=baseline + effect,
        direct=m1 - (baseline + effect),
        total=m1 - baseline,
        base_arm=0,
        scale=MEAN_DIFFERENCE,
        models={"mediator": med, "outcome": out},
    )


OBSERVATIONAL_KINDS = (ODDS_MULTIPLY, SET_ALL_BELOW, ARM_CONTRAST)


def observational_indirect(
    ds: Dataset,
    outcome_design: DesignSpec | None,
    spec: InterventionSpec,
    mediator_design: DesignSpec | None = None,
    starts: Mapping[str, np.ndarray] | None = None,
) -> PointEstimates:
    """Organic indirect effect relative to no treatment from observational data.

    Everything conditions on the common causes and the extra confounders Z
    (when present): the arm-0 outcome model, and logistic mediator models
    ``P(M=1 | C, Z)`` fitted per arm. Both the counterfactual mean and the
    baseline are standardized over the (C, Z) rows of the whole sample, so the
    baseline is not the raw arm-0 mean. Binary mediators only.
    """
    if ds.mediator_kind != BINARY:
        raise ConfigError("observational analyses support binary mediators only")
    if spec.kind not in OBSERVATIONAL_KINDS:
        raise ConfigError(f"observational analyses do not support {spec.kind}")
    spec.check(ds)
    n0, n1 = ds.arm_counts()
    if not n0:
        raise DataError("no records in arm 0")
    if spec.kind == ARM_CONTRAST and not n1:
        raise DataError("arm_contrast needs records in both arms")
    starts = starts or {}
    outcome_design = outcome_design or default_outcome_design(ds)
    mediator_design = mediator_design or default_mediator_design(ds)
    link = outcome_link(ds)
    models = {
        "outcome": fit(ds, "outcome", outcome_design, link, arm_filter=0, start=starts.get("outcome")),
        "mediator0": fit(ds, "mediator_binary", mediator_design, LOGIT, arm_filter=0, start=starts.get("mediator0")),
    }
    if n1:
        models["outcome1"] = fit(ds, "outcome", outcome_design, link, arm_filter=1, start=starts.get("outcome1"))
        models["mediator1"] = fit(
            ds, "mediator_binary", mediator_design, LOGIT, arm_filter=1, start=starts.get("mediator1")
        )

    n = ds.n
    cols = ds.covariates()
    cols["below"] = np.zeros(n, dtype=bool)

    def at(model, arm, m=None):
        c = {**cols, "arm": np.full(n, float(arm))}
        if m is not None:
            c["m"] = np.full(n, float(m))
        return model.predict(c)

    p0 = at(models["mediator0"], 0)
    if spec.kind == ARM_CONTRAST:
        p1 = at(models["mediator1"], 1)
    elif spec.kind == ODDS_MULTIPLY:
        p1 = odds_transform(p0, spec.factor)
    else:
        p1 = np.ones(n)
    e1, e0 = at(models["outcome"], 0, 1), at(models["outcome"], 0, 0)
    baseline = float(np.mean(e1 * p0 + e0 * (1.0 - p0)))
    cf = float(np.mean(e1 * p1 + e0 * (1.0 - p1)))
    indirect = cf - baseline
    binary = ds.outcome_kind == BINARY
    direct = total = None
    if n1 and spec.kind == ARM_CONTRAST:
        q1 = at(models["mediator1"], 1)
        y1 = float(np.mean(at(models["outcome1"], 1, 1) * q1 + at(models["outcome1"], 1, 0) * (1.0 - q1)))
        total = y1 - baseline
        direct = y1 - cf
    return PointEstimates(
        indirect=indirect,
        baseline_mean=baseline,
        counterfactual_mean=cf,
        direct=direct,
        total=total,
        risk_ratio=_safe_ratio(cf, baseline) if binary else None,
        base_arm=0,
        scale=RISK_DIFFERENCE if binary else MEAN_DIFFERENCE,
        separation=any(m.separation_flag for m in models.values()),
        models=models,
    )
