"""Interventions on the mediator and the counterfactual mediator laws they induce.

A law is represented by weighted points ``(mediator, covariates)`` grouped by
covariate row: the points of one group have weights summing to 1, and the
Mediation-Formula average is taken over groups.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import BINARY, LIMIT_CENSORED, Dataset, MediatorValue
from .errors import ConfigError, DataError
from .glm import FittedModel

ODDS_MULTIPLY = "odds_multiply"
SHIFT = "shift"
SET_ALL_BELOW = "set_all_below"
EMPIRICAL_SAMPLE = "empirical_sample"
ARM_CONTRAST = "arm_contrast"
KINDS = (ODDS_MULTIPLY, SHIFT, SET_ALL_BELOW, EMPIRICAL_SAMPLE, ARM_CONTRAST)

INF = math.inf


class ExtrapolationWarning(UserWarning):
    """Counterfactual mediator values fall outside the observed base-arm range."""


def _check_factor(F: float) -> float:
    F = float(F)
    if math.isnan(F) or F <= 0:
        raise ConfigError(f"odds factor must be > 0 or infinite, got {F}")
    return F


def odds_transform(p0, F: float):
    """Probability after multiplying the odds of ``p0`` by ``F``.

    ``F = inf`` is the saturating intervention: every mediator ends up at 1.
    Accepts scalars or arrays.
    """
    F = _check_factor(F)
    p = np.asarray(p0, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ConfigError("probabilities must lie in [0, 1]")
    if F == INF:
        out = np.ones_like(p)
    else:
        # rounding can push p = 1 a hair above 1
        out = np.minimum(F * p / (1.0 + (F - 1.0) * p), 1.0)
    return float(out) if np.ndim(p0) == 0 else out


def shift_mediator(m: MediatorValue, delta: float, assay_limit: float | None) -> MediatorValue:
    """Lower an observed mediator by ``delta`` log10 units, censoring at the limit."""
    if m.kind != LIMIT_CENSORED:
        raise ConfigError("shift needs a limit-censored mediator")
    value, below = shift_values(
        np.array([np.nan if m.below_limit else m.log10_value]), np.array([bool(m.below_limit)]), delta, assay_limit
    )
    return MediatorValue.below() if below[0] else MediatorValue.observed(float(value[0]))


def shift_values(values: np.ndarray, below: np.ndarray, delta: float, assay_limit: float | None):
    """Vectorized :func:`shift_mediator`; returns ``(values, below)``."""
    delta = float(delta)
    if math.isnan(delta) or delta < 0:
        raise ConfigError(f"shift must be >= 0, got {delta}")
    below = np.asarray(below, dtype=bool)
    if delta == INF:
        if assay_limit is None:
            raise ConfigError("an infinite shift needs an assay limit")
        return np.full(len(below), np.nan), np.ones(len(below), dtype=bool)
    shifted = np.where(below, np.nan, np.asarray(values, dtype=float) - delta)
    if assay_limit is None:
        return shifted, below.copy()
    new_below = below | (shifted < assay_limit)
    return np.where(new_below, np.nan, shifted), new_below


@dataclass(frozen=True, eq=False)
class InterventionSpec:
    """What the intervention does to the mediator distribution.

    Use the constructors :meth:`odds_multiply`, :meth:`shift`,
    :meth:`set_all_below`, :meth:`empirical_sample`, :meth:`arm_contrast`.
    """

    kind: str
    factor: float | None = None
    delta: float | None = None
    pairs: MediatorLaw | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown intervention kind {self.kind!r}")
        if self.kind == ODDS_MULTIPLY:
            object.__setattr__(self, "factor", _check_factor(self.factor))
        if self.kind == SHIFT:
            d = float(self.delta)
            if math.isnan(d) or d < 0:
                raise ConfigError(f"shift must be >= 0, got {d}")
            object.__setattr__(self, "delta", d)
        if self.kind == EMPIRICAL_SAMPLE and (self.pairs is None or self.pairs.n_points == 0):
            raise ConfigError("empirical_sample needs a nonempty set of (mediator, covariates) pairs")

    @classmethod
    def odds_multiply(cls, factor: float) -> InterventionSpec:
        return cls(ODDS_MULTIPLY, factor=factor)

    @classmethod
    def shift(cls, delta: float) -> InterventionSpec:
        if float(delta) == INF:
            return cls(SET_ALL_BELOW)
        return cls(SHIFT, delta=delta)

    @classmethod
    def set_all_below(cls) -> InterventionSpec:
        return cls(SET_ALL_BELOW)

    @classmethod
    def arm_contrast(cls) -> InterventionSpec:
        return cls(ARM_CONTRAST)

    @classmethod
    def empirical_sample(cls, pairs) -> InterventionSpec:
        """``pairs``: a :class:`MediatorLaw`, a :class:`Dataset`, or a sequence of
        ``(MediatorValue, {covariate: value})`` tuples."""
        if isinstance(pairs, Dataset):
            law = MediatorLaw.from_dataset(pairs)
        elif isinstance(pairs, MediatorLaw):
            law = pairs
        else:
            law = MediatorLaw.from_pairs(pairs)
        return cls(EMPIRICAL_SAMPLE, pairs=law)

    @property
    def level(self) -> float | None:
        if self.kind == ODDS_MULTIPLY:
            return self.factor
        if self.kind == SHIFT:
            return self.delta
        if self.kind == SET_ALL_BELOW:
            return INF
        return None

    @property
    def is_null(self) -> bool:
        return (self.kind == ODDS_MULTIPLY and self.factor == 1.0) or (self.kind == SHIFT and self.delta == 0.0)

    def needs_mediator_model(self, mediator_kind: str) -> bool:
        """Binary mediators: odds-based kinds read the fitted mediator model."""
        return mediator_kind == BINARY and self.kind in (ODDS_MULTIPLY, SET_ALL_BELOW)

    def check(self, ds: Dataset) -> None:
        kind = ds.mediator_kind
        if self.kind == ODDS_MULTIPLY and kind != BINARY:
            raise ConfigError("odds_multiply needs a binary mediator (binarize first)")
        if self.kind == SHIFT and kind != LIMIT_CENSORED:
            raise ConfigError("shift needs a limit-censored mediator")
        if self.kind == SET_ALL_BELOW and kind == LIMIT_CENSORED and ds.assay_limit is None:
            raise ConfigError("set_all_below needs an assay limit")
        if self.kind == EMPIRICAL_SAMPLE:
            if self.pairs.mediator_kind != kind:
                raise ConfigError("empirical pairs have a different mediator kind than the dataset")
            if set(self.pairs.covariates) != set(ds.covariate_names):
                raise ConfigError(
                    f"covariate name mismatch: pairs have {sorted(self.pairs.covariates)}, "
                    f"dataset has {sorted(ds.covariate_names)}"
                )

    def __str__(self):
        if self.kind == ODDS_MULTIPLY:
            return f"odds_multiply({self.factor:g})"
        if self.kind == SHIFT:
            return f"shift({self.delta:g})"
        return self.kind


@dataclass(frozen=True, eq=False)
class MediatorLaw:
    """Weighted mediator values attached to covariate rows."""

    mediator: np.ndarray
    below: np.ndarray
    covariates: Mapping[str, np.ndarray]
    weights: np.ndarray
    group: np.ndarray
    n_groups: int
    mediator_kind: str

    def __post_init__(self):
        k = len(self.mediator)
        for col in (self.below, self.weights, self.group, *self.covariates.values()):
            if len(col) != k:
                raise DataError("law columns have different lengths")

    @property
    def n_points(self) -> int:
        return len(self.mediator)

    def columns(self, arm: int) -> dict[str, np.ndarray]:
        cols = dict(self.covariates)
        cols["m"] = self.mediator
        cols["below"] = self.below
        cols["arm"] = np.full(self.n_points, float(arm))
        return cols

    def group_totals(self, values: np.ndarray) -> np.ndarray:
        """Per-group ``sum(weight * value)``."""
        return np.bincount(self.group, weights=self.weights * values, minlength=self.n_groups)

    def weight_totals(self) -> np.ndarray:
        return np.bincount(self.group, weights=self.weights, minlength=self.n_groups)

    def items(self) -> list[tuple[MediatorValue, dict[str, float], float]]:
        out = []
        names = list(self.covariates)
        for i in range(self.n_points):
            if self.mediator_kind == BINARY:
                mv = MediatorValue.binary(int(self.mediator[i]))
            elif self.below[i]:
                mv = MediatorValue.below()
            else:
                mv = MediatorValue.observed(float(self.mediator[i]))
            out.append((mv, {k: float(self.covariates[k][i]) for k in names}, float(self.weights[i])))
        return out

    def binarized(self) -> MediatorLaw:
        """Map each point to the below-limit indicator (1 = below)."""
        if self.mediator_kind != LIMIT_CENSORED:
            raise ConfigError("law is already binary")
        return MediatorLaw(
            mediator=self.below.astype(float),
            below=np.zeros(self.n_points, dtype=bool),
            covariates=self.covariates,
            weights=self.weights,
            group=self.group,
            n_groups=self.n_groups,
            mediator_kind=BINARY,
        )

    @classmethod
    def from_dataset(cls, ds: Dataset) -> MediatorLaw:
        """Observed ``(m, c)`` pairs of ``ds``, one group each."""
        n = ds.n
        return cls(
            mediator=ds.mediator,
            below=ds.below,
            covariates=ds.covariates(),
            weights=np.ones(n),
            group=np.arange(n),
            n_groups=n,
            mediator_kind=ds.mediator_kind,
        )

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[MediatorValue, Mapping[str, float]]]) -> MediatorLaw:
        pairs = list(pairs)
        if not pairs:
            raise ConfigError("empirical_sample needs a nonempty set of pairs")
        names = tuple(pairs[0][1])
        kind = pairs[0][0].kind
        m, b, cov = [], [], {k: [] for k in names}
        for mv, c in pairs:
            if tuple(c) != names and set(c) != set(names):
                raise ConfigError("covariate names differ between pairs")
            if mv.kind != kind:
                raise ConfigError("mixed mediator kinds in pairs")
            if kind == BINARY:
                m.append(float(mv.binary_value))
                b.append(False)
            else:
                m.append(np.nan if mv.below_limit else mv.log10_value)
                b.append(bool(mv.below_limit))
            for k in names:
                cov[k].append(float(c[k]))
        n = len(pairs)
        return cls(
            mediator=np.asarray(m, dtype=float),
            below=np.asarray(b, dtype=bool),
            covariates={k: np.asarray(v) for k, v in cov.items()},
            weights=np.ones(n),
            group=np.arange(n),
            n_groups=n,
            mediator_kind=kind,
        )


def _two_point_law(base: Dataset, p1: np.ndarray) -> MediatorLaw:
    n = base.n
    mediator = np.tile([1.0, 0.0], n)
    weights = np.empty(2 * n)
    weights[0::2] = p1
    weights[1::2] = 1.0 - p1
    return MediatorLaw(
        mediator=mediator,
        below=np.zeros(2 * n, dtype=bool),
        covariates={k: np.repeat(v, 2) for k, v in base.covariates().items()},
        weights=weights,
        group=np.repeat(np.arange(n), 2),
        n_groups=n,
        mediator_kind=BINARY,
    )


def _base_probabilities(base: Dataset, mediator_model: FittedModel | None) -> np.ndarray:
    if mediator_model is None:
        raise ConfigError("odds-based interventions need a fitted mediator model")
    if mediator_model.link != "logit":
        raise ConfigError("mediator model for a binary mediator must use the logit link")
    cols = base.covariates()
    cols["arm"] = base.arm.astype(float)
    missing = mediator_model.design.covariates_used() - set(cols)
    if missing or mediator_model.design.uses("m") or mediator_model.design.uses("below"):
        raise ConfigError("mediator model design must use covariates only")
    return mediator_model.predict(cols)


def counterfactual_mediator_law(
    ds: Dataset,
    spec: InterventionSpec,
    mediator_model: FittedModel | None = None,
    base_arm: int = 0,
) -> MediatorLaw:
    """Mediator law under the intervention, attached to base-arm covariate rows.

    ``odds_multiply`` (and ``set_all_below`` on a binary mediator, its F = inf
    limit) gives a two-point law per base-arm row; ``shift`` and
    ``set_all_below`` transform each observed base-arm mediator;
    ``empirical_sample`` returns the given pairs; ``arm_contrast`` returns the
    other arm's observed pairs.
    """
    spec.check(ds)
    base = ds.arm_subset(base_arm)
    if spec.kind == ODDS_MULTIPLY:
        p0 = _base_probabilities(base, mediator_model)
        return _two_point_law(base, odds_transform(p0, spec.factor))
    if spec.kind == SET_ALL_BELOW and ds.mediator_kind == BINARY:
        return _two_point_law(base, np.ones(base.n))
    if spec.kind in (SHIFT, SET_ALL_BELOW):
        delta = INF if spec.kind == SET_ALL_BELOW else spec.delta
        values, below = shift_values(base.mediator, base.below, delta, ds.assay_limit)
        law = MediatorLaw(
            mediator=values,
            below=below,
            covariates=base.covariates(),
            weights=np.ones(base.n),
            group=np.arange(base.n),
            n_groups=base.n,
            mediator_kind=LIMIT_CENSORED,
        )
    elif spec.kind == EMPIRICAL_SAMPLE:
        law = spec.pairs
    else:
        other = ds.arm_subset(1 - base_arm)
        law = MediatorLaw.from_dataset(other)
    _warn_if_extrapolating(base, law)
    return law


def factual_mediator_law(
    ds: Dataset,
    spec: InterventionSpec,
    mediator_model: FittedModel | None = None,
    base_arm: int = 0,
) -> MediatorLaw:
    """The base-arm mediator law estimated the same way as the counterfactual one.

    For odds-based kinds on a binary mediator this is the fitted mediator
    model's two-point law (the F = 1 member); otherwise it is the observed
    base-arm pairs.
    """
    base = ds.arm_subset(base_arm)
    if spec.needs_mediator_model(ds.mediator_kind):
        return _two_point_law(base, _base_probabilities(base, mediator_model))
    return MediatorLaw.from_dataset(base)


def _warn_if_extrapolating(base: Dataset, law: MediatorLaw) -> None:
    if base.mediator_kind != LIMIT_CENSORED:
        return
    observed = base.mediator[~base.below]
    values = law.mediator[~law.below & (law.weights > 0)]
    if values.size == 0:
        return
    if observed.size == 0:
        warnings.warn("no observed base-arm mediator values; predictions extrapolate", ExtrapolationWarning, 3)
        return
    lo, hi = observed.min(), observed.max()
    outside = int(np.sum((values < lo) | (values > hi)))
    if outside:
        warnings.warn(
            f"{outside} counterfactual mediator value(s) outside the observed base-arm range [{lo:g}, {hi:g}]",
            ExtrapolationWarning,
            stacklevel=3,
        )
