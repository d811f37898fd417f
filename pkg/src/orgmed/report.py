"""Result tables: markdown with display rounding, CSV at full precision."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .inference import EffectEstimate
from .interventions import ARM_CONTRAST, EMPIRICAL_SAMPLE, ODDS_MULTIPLY, SET_ALL_BELOW, SHIFT, InterventionSpec
from .mediation import RISK_DIFFERENCE

INFINITY = "∞"


@dataclass(frozen=True)
class ReportRow:
    mediator: str
    spec: InterventionSpec
    estimate: EffectEstimate
    n: int


def level_header(kind: str, binarized: bool) -> str:
    if kind == SHIFT:
        return "Shift (log10 scale)"
    if kind in (ODDS_MULTIPLY, SET_ALL_BELOW):
        return "OR of below assay limit" if binarized else "OR of mediator"
    return "Intervention"


def level_label(spec: InterventionSpec) -> str:
    if spec.kind == SHIFT:
        return f"{spec.delta:g} log10"
    if spec.kind == ODDS_MULTIPLY:
        return INFINITY if math.isinf(spec.factor) else f"{spec.factor:g}"
    if spec.kind == SET_ALL_BELOW:
        return INFINITY
    if spec.kind == ARM_CONTRAST:
        return "arm contrast"
    if spec.kind == EMPIRICAL_SAMPLE:
        return "treated sample"
    return spec.kind


def _fixed(x: float, digits: int) -> str:
    text = f"{x:.{digits}f}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def percent(x: float) -> str:
    return _fixed(100.0 * x, 1) + "%"


def ratio(x: float) -> str:
    return _fixed(x, 2)


def effect_text(x: float, scale: str) -> str:
    return percent(x) if scale == RISK_DIFFERENCE else _fixed(x, 3)


def interval_text(ci: tuple[float, float], fmt) -> str:
    return f"({fmt(ci[0])},{fmt(ci[1])})"


def markdown_table(
    rows: list[ReportRow],
    level_column: str,
    group: tuple[str, str] | None = None,
) -> str:
    header = ["Mediator", level_column]
    if group:
        header.append(group[0])
    header += ["Indirect effect", "95% CI", "RR", "95% CI", "n", "Replicate failures", "Separation count", "Seed"]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for r in rows:
        e = r.estimate
        scale = e.point.scale
        cells = [r.mediator, level_label(r.spec)]
        if group:
            cells.append(group[1])
        cells += [
            effect_text(e.point.indirect, scale),
            interval_text(e.ci_indirect, lambda v: effect_text(v, scale)),
            ratio(e.point.risk_ratio) if e.point.risk_ratio is not None else "NA",
            interval_text(e.ci_risk_ratio, ratio) if e.ci_risk_ratio is not None else "NA",
            str(r.n),
            str(e.replicate_failures),
            str(e.separation_count),
            str(e.seed),
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


CSV_COLUMNS = [
    "mediator",
    "intervention",
    "level",
    "indirect",
    "ci_low",
    "ci_high",
    "risk_ratio",
    "rr_ci_low",
    "rr_ci_high",
    "baseline_mean",
    "counterfactual_mean",
    "direct",
    "total",
    "scale",
    "n",
    "replicates",
    "replicate_failures",
    "separation_count",
    "level_confidence",
    "seed",
]


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def csv_table(rows: list[ReportRow], group: tuple[str, str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS + ([group[0]] if group else [])
    w.writerow(cols)
    for r in rows:
        e, p = r.estimate, r.estimate.point
        rr_ci = e.ci_risk_ratio or (None, None)
        row = [
            r.mediator,
            r.spec.kind,
            "" if r.spec.level is None else repr(float(r.spec.level)),
            _num(p.indirect),
            _num(e.ci_indirect[0]),
            _num(e.ci_indirect[1]),
            _num(p.risk_ratio),
            _num(rr_ci[0]),
            _num(rr_ci[1]),
            _num(p.baseline_mean),
            _num(p.counterfactual_mean),
            _num(p.direct),
            _num(p.total),
            p.scale,
            r.n,
            e.replicates,
            e.replicate_failures,
            e.separation_count,
            repr(e.level),
            e.seed,
        ]
        if group:
            row.append(group[1])
        w.writerow(row)
    return buf.getvalue()
