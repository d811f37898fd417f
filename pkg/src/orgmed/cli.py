"""Command-line front end: ``orgmed analyze | simulate | validate``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 estimation
error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
import warnings
from functools import partial
from pathlib import Path

import yaml

from . import config as cfgmod
from . import report, simulate, validation
from .data import binarize_mediator, default_schema, load_csv, load_pairs
from .errors import ConfigError, OrgmedError
from .glm import DesignSpec
from .inference import BootstrapConfig, EffectEstimate, bootstrap, default_workers
from .mediation import (
    binary_product_estimates,
    fit_linear_product,
    observational_indirect,
    organic_indirect_rel0,
    organic_indirect_rel1,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION, EXIT_VALIDATION = 0, 1, 2, 3, 4


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=".orgmed-", dir=directory)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _design(terms) -> DesignSpec | None:
    return None if terms is None else DesignSpec.of(*terms)


def _estimator(cfg: cfgmod.AnalysisConfig, spec):
    od, md = _design(cfg.outcome_design), _design(cfg.mediator_design)
    est = cfg.estimator
    if est == "rel0":
        return partial(organic_indirect_rel0, outcome_design=od, spec=spec, mediator_design=md)
    if est == "rel1":
        return partial(organic_indirect_rel1, outcome_design=od, spec=spec, mediator_design=md)
    if est == "binary_product":
        return partial(binary_product_estimates, outcome_design=od, mediator_design=md, arm=0)
    if est == "linear_product":
        return fit_linear_product
    if est == "observational":
        return partial(observational_indirect, outcome_design=od, spec=spec, mediator_design=md)
    # treated_sample: the pairs are part of the spec
    return partial(organic_indirect_rel0, outcome_design=od, spec=spec)


def analyze(cfg: cfgmod.AnalysisConfig) -> tuple[str, list[report.ReportRow]]:
    """Run every configured intervention level; returns the rendered table."""
    schema = cfg.schema()
    ds = load_csv(cfg.resolve(cfg.data.path), schema, cfg.data.assay_limit)
    binarized = cfg.needs_binary_mediator
    if binarized:
        ds = binarize_mediator(ds)
    pairs = None
    if cfg.intervention.kind == "empirical_sample":
        pairs = load_pairs(cfg.resolve(cfg.intervention.pairs), schema, cfg.data.assay_limit)
    if cfg.estimator == "treated_sample":
        ds = ds.arm_subset(0)
    b = cfg.bootstrap
    boot = BootstrapConfig(
        replicates=b.replicates, level=b.level, seed=b.seed, workers=b.workers or default_workers()
    )
    rows = []
    for spec in cfg.intervention.specs(pairs):
        est = _estimator(cfg, spec)
        result: EffectEstimate = bootstrap(ds, est, boot)
        rows.append(report.ReportRow(cfg.mediator_label, spec, result, ds.n))
    group = None
    if cfg.report.group_column:
        group = (cfg.report.group_column, cfg.report.group_value or "")
    if cfg.output.format == "csv":
        text = report.csv_table(rows, group)
    else:
        header = report.level_header(cfg.intervention.kind, binarized)
        text = report.markdown_table(rows, header, group)
    return text, rows


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["bootstrap.seed"] = args.seed
    if args.replicates is not None:
        out["bootstrap.replicates"] = args.replicates
    if args.level is not None:
        out["bootstrap.level"] = args.level
    if args.workers is not None:
        out["bootstrap.workers"] = args.workers
    if args.format is not None:
        out["output.format"] = args.format
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = yaml.safe_load(value)
        except yaml.YAMLError:
            out[key] = value
    return out


def cmd_analyze(args) -> int:
    cfg = cfgmod.load(args.config, _overrides(args))
    text, _ = analyze(cfg)
    if args.out:
        write_atomic(args.out, text)
    elif cfg.output.path:
        write_atomic(cfg.resolve(cfg.output.path), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _scenario_model(args) -> simulate.GenerativeModel:
    if args.scenario and args.config:
        raise ConfigError("give either --scenario or --config, not both")
    if args.config:
        try:
            data = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {args.config}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None
        if isinstance(data, dict) and "model" in data:
            data = data["model"]
        if isinstance(data, dict) and set(data) == {"scenario"}:
            return simulate.scenario_model(data["scenario"])
        return simulate.load_model(data)
    return simulate.scenario_model(args.scenario or "linear")


def cmd_simulate(args) -> int:
    model = _scenario_model(args)
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    ds = simulate.generate_trial(model, args.n, args.seed if args.seed is not None else 0)
    text = ds.to_csv(schema=default_schema(ds))
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else 20140101
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = validation.run(seed, args.tier, misspecify=args.misspecify, log=log)
    text = validation.render(results, seed, args.tier)
    if args.out:
        write_atomic(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orgmed", description="Organic direct and indirect effect estimation")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="estimate effects with bootstrap CIs from a config file")
    a.add_argument("--config", required=True, help="YAML analysis config")
    a.add_argument("--seed", type=int)
    a.add_argument("--replicates", type=int)
    a.add_argument("--level", type=float)
    a.add_argument("--workers", type=int, help="bootstrap worker processes (default: $ORGMED_WORKERS or CPU count)")
    a.add_argument("--out", help="report path (default: config output.path, else stdout)")
    a.add_argument("--format", choices=("csv", "markdown"))
    a.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key, e.g. intervention.levels=[2,3]")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="write a simulated trial as CSV")
    s.add_argument("--scenario", choices=sorted(simulate.SCENARIOS), help="built-in scenario (default: linear)")
    s.add_argument("--config", help="YAML generative model")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="run the self-check suites")
    v.add_argument("--tier", choices=tuple(validation.TIERS), default="quick")
    v.add_argument("--seed", type=int)
    v.add_argument("--out")
    v.add_argument("--misspecify", action="store_true", help="also assert a deliberately invalid analysis")
    v.add_argument("--verbose", action="store_true")
    v.set_defaults(func=cmd_validate)
    return p


def _format_warning(message, category, filename, lineno, line=None):
    return f"warning: {message}\n"


def main(argv=None) -> int:
    warnings.formatwarning = _format_warning
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except OrgmedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
