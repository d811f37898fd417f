"""Analysis and scenario configuration (YAML files, dotted-key overrides)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .data import BINARY, LIMIT_CENSORED, CsvSchema
from .errors import ConfigError
from .interventions import InterventionSpec

ESTIMATORS = ("rel0", "rel1", "binary_product", "linear_product", "observational", "treated_sample")
LEVELED = ("odds_multiply", "shift")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Strict):
    path: str
    arm: str = "arm"
    id: str | None = None
    assay_limit: float | None = None
    below_token: str = "BLQ"


class OutcomeSection(_Strict):
    column: str
    kind: Literal["binary", "continuous"] | None = None


class MediatorSection(_Strict):
    column: str
    kind: Literal["binary", "limit_censored"] = LIMIT_CENSORED
    label: str | None = None


class InterventionSection(_Strict):
    kind: Literal["odds_multiply", "shift", "set_all_below", "empirical_sample", "arm_contrast"] = "arm_contrast"
    levels: tuple[float, ...] = ()
    pairs: str | None = None

    @field_validator("levels", mode="before")
    @classmethod
    def _parse_levels(cls, v):
        if v is None:
            return ()
        if not isinstance(v, (list, tuple)):
            v = [v]
        return tuple(_parse_level(x) for x in v)

    @model_validator(mode="after")
    def _check(self):
        if self.kind in LEVELED and not self.levels:
            raise ValueError(f"{self.kind} needs at least one level")
        if self.kind not in LEVELED and self.levels:
            raise ValueError(f"{self.kind} takes no levels")
        if self.kind == "empirical_sample" and not self.pairs:
            raise ValueError("empirical_sample needs 'pairs' (a CSV of treated measurements)")
        for x in self.levels:
            if math.isnan(x) or (self.kind == "odds_multiply" and x <= 0) or (self.kind == "shift" and x < 0):
                raise ValueError(f"invalid level {x} for {self.kind}")
        return self

    def specs(self, pairs=None) -> list[InterventionSpec]:
        if self.kind == "odds_multiply":
            return [InterventionSpec.odds_multiply(x) for x in self.levels]
        if self.kind == "shift":
            return [InterventionSpec.shift(x) for x in self.levels]
        if self.kind == "set_all_below":
            return [InterventionSpec.set_all_below()]
        if self.kind == "empirical_sample":
            return [InterventionSpec.empirical_sample(pairs)]
        return [InterventionSpec.arm_contrast()]


class BootstrapSection(_Strict):
    replicates: int = Field(5000, ge=1)
    level: float = Field(0.95, gt=0.0, lt=1.0)
    seed: int = Field(20140101, ge=0, lt=2**64)
    workers: int | None = Field(None, ge=1)


class OutputSection(_Strict):
    path: str | None = None
    format: Literal["csv", "markdown"] = "markdown"


class ReportSection(_Strict):
    """Optional extra column identifying the analysis, e.g. ``Week`` = 4."""

    group_column: str | None = None
    group_value: str | None = None

    @field_validator("group_value", mode="before")
    @classmethod
    def _stringify(cls, v):
        return None if v is None else str(v)


class AnalysisConfig(_Strict):
    data: DataSection
    outcome: OutcomeSection
    mediator: MediatorSection
    common_causes: tuple[str, ...] = ()
    extra_confounders: tuple[str, ...] = ()
    estimator: Literal["rel0", "rel1", "binary_product", "linear_product", "observational", "treated_sample"] = "rel0"
    outcome_design: tuple[str, ...] | None = None
    mediator_design: tuple[str, ...] | None = None
    intervention: InterventionSection = InterventionSection()
    bootstrap: BootstrapSection = BootstrapSection()
    output: OutputSection = OutputSection()
    report: ReportSection = ReportSection()
    base_dir: str | None = Field(None, exclude=True)

    @model_validator(mode="after")
    def _compatible(self):
        est, kind = self.estimator, self.intervention.kind
        if est == "treated_sample" and kind != "empirical_sample":
            raise ValueError("estimator treated_sample needs intervention kind empirical_sample")
        if est in ("binary_product", "linear_product") and kind != "arm_contrast":
            raise ValueError(f"estimator {est} contrasts the arms; use intervention kind arm_contrast")
        if est == "observational" and kind not in ("odds_multiply", "set_all_below", "arm_contrast"):
            raise ValueError("observational analyses support odds_multiply, set_all_below, arm_contrast")
        if kind == "shift" and self.mediator.kind != LIMIT_CENSORED:
            raise ValueError("shift needs a limit_censored mediator")
        if est == "observational" and not self.extra_confounders:
            raise ValueError("observational analyses need extra_confounders")
        if est == "linear_product" and self.outcome.kind == BINARY:
            raise ValueError("linear_product needs a continuous outcome")
        return self

    def schema(self) -> CsvSchema:
        return CsvSchema(
            outcome=self.outcome.column,
            mediator=self.mediator.column,
            arm=self.data.arm,
            id=self.data.id,
            common_causes=self.common_causes,
            extra_confounders=self.extra_confounders,
            outcome_kind=self.outcome.kind,
            mediator_kind=self.mediator.kind,
            below_token=self.data.below_token,
        )

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.base_dir:
            p = Path(self.base_dir) / p
        return p

    @property
    def mediator_label(self) -> str:
        return self.mediator.label or self.mediator.column

    @property
    def needs_binary_mediator(self) -> bool:
        """Odds-based analyses of a censored mediator run on its below-limit indicator."""
        return self.mediator.kind == LIMIT_CENSORED and (
            self.intervention.kind == "odds_multiply"
            or self.estimator in ("binary_product", "observational")
        )


def _parse_level(x) -> float:
    if isinstance(x, str):
        t = x.strip().lower()
        if t in ("inf", "infinity", ".inf", "+inf", "∞"):
            return math.inf
        try:
            return float(t)
        except ValueError:
            raise ValueError(f"cannot parse level {x!r}") from None
    return float(x)


def _format_level(x: float):
    if math.isinf(x):
        return "inf"
    return int(x) if float(x).is_integer() else x


def to_dict(cfg: AnalysisConfig) -> dict[str, Any]:
    d = cfg.model_dump(mode="python", exclude={"base_dir"})
    d["intervention"]["levels"] = [_format_level(x) for x in cfg.intervention.levels]
    for key in ("common_causes", "extra_confounders", "outcome_design", "mediator_design"):
        if d[key] is not None:
            d[key] = list(d[key])
    return d


def dumps(cfg: AnalysisConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def parse(data: dict[str, Any], base_dir: str | None = None) -> AnalysisConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return AnalysisConfig.model_validate({**data, "base_dir": base_dir})
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None


def loads(text: str, base_dir: str | None = None) -> AnalysisConfig:
    return parse(_safe_yaml(text), base_dir)


def load(path: str | Path, overrides: dict[str, Any] | None = None) -> AnalysisConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    data = _safe_yaml(text)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    for key, value in (overrides or {}).items():
        set_dotted(data, key, value)
    return parse(data, str(path.parent.resolve()))


def _safe_yaml(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None


def set_dotted(data: dict, key: str, value) -> None:
    """Set ``a.b.c`` in nested dicts, creating levels as needed."""
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {key}: {p} is not a mapping")
    node[parts[-1]] = value


def _describe(exc: ValidationError) -> str:
    msgs = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "config"
        msgs.append(f"{loc}: {err['msg']}")
    return "invalid config: " + "; ".join(msgs)

