"""Nonparametric bootstrap with percentile intervals.

Replicate ``i`` draws its resample from ``SeedSequence(seed, spawn_key=(i,))``,
so every replicate is a pure function of ``(seed, i)`` and results do not
depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import inspect
import math
import os
import pickle
import warnings
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError, EstimationError
from .interventions import ExtrapolationWarning
from .mediation import PointEstimates, to_risk_ratio

__all__ = [
    "BootstrapConfig",
    "EffectEstimate",
    "bootstrap",
    "percentile_interval",
    "quantile",
    "replicate_indices",
    "to_risk_ratio",
    "default_workers",
]

Estimator = Callable[[Dataset], PointEstimates]


def default_workers() -> int:
    env = os.environ.get("ORGMED_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"ORGMED_WORKERS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 5000
    level: float = 0.95
    seed: int = 20140101
    workers: int = 1

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0.0 < float(self.level) < 1.0:
            raise ConfigError("level must lie strictly between 0 and 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class EffectEstimate:
    point: PointEstimates
    ci_indirect: tuple[float, float]
    ci_risk_ratio: tuple[float, float] | None
    replicate_failures: int
    separation_count: int
    seed: int
    replicates: int
    level: float
    indirect_replicates: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.ci_indirect[0] > self.ci_indirect[1]:
            raise EstimationError("interval bounds out of order")
        if self.ci_risk_ratio is not None and self.ci_risk_ratio[0] > self.ci_risk_ratio[1]:
            raise EstimationError("interval bounds out of order")

    @property
    def standard_error(self) -> float:
        """Standard deviation of the successful replicate estimates."""
        v = self.indirect_replicates
        return float(np.std(v, ddof=1)) if v is not None and len(v) > 1 else float("nan")


def quantile(sorted_values: np.ndarray, prob: float) -> float:
    """Empirical quantile with linear interpolation between order statistics.

    Position ``h = (n - 1) * prob`` on the 0-based sorted sample.
    """
    n = len(sorted_values)
    h = (n - 1) * prob
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    frac = h - lo
    a, b = float(sorted_values[lo]), float(sorted_values[hi])
    if frac == 0.0 or a == b:
        return a
    return a + frac * (b - a)


def percentile_interval(values: Sequence[float], level: float) -> tuple[float, float]:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("percentile_interval needs at least one value")
    if np.isnan(v).any():
        raise ValueError("percentile_interval got NaN values")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    tail = (1.0 - level) / 2.0
    return quantile(v, tail), quantile(v, 1.0 - tail)


def replicate_indices(seed: int, i: int, n: int) -> np.ndarray:
    """Resample indices for replicate ``i``."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(i),)))
    return rng.integers(0, n, size=n)


_FAILURES = (EstimationError, DataError, np.linalg.LinAlgError, FloatingPointError)


def _run_chunk(ds: Dataset, estimator: Estimator, seed: int, chunk: Sequence[int]):
    out = []
    with warnings.catch_warnings():
        # the full-sample fit already reported any extrapolation
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for i in chunk:
            try:
                pe = estimator(ds.take(replicate_indices(seed, i, ds.n)))
            except _FAILURES:
                out.append((i, None))
                continue
            out.append((i, (pe.indirect, pe.risk_ratio, pe.separation)))
    return out


def _with_starts(estimator: Estimator, point: PointEstimates) -> Estimator:
    """Pass full-sample coefficients as IRLS starting values when the estimator accepts them."""
    if not point.models:
        return estimator
    try:
        params = inspect.signature(estimator).parameters
    except (TypeError, ValueError):
        return estimator
    if "starts" not in params:
        return estimator
    if isinstance(estimator, partial) and "starts" in estimator.keywords:
        return estimator
    return partial(estimator, starts=point.starts())


def _picklable(obj) -> bool:
    try:
        pickle.dumps(obj)
    except Exception:
        return False
    return True


def bootstrap(
    ds: Dataset,
    estimator: Estimator,
    cfg: BootstrapConfig,
    point: PointEstimates | None = None,
) -> EffectEstimate:
    """Percentile bootstrap of ``estimator`` over participant records.

    Replicates whose fit fails are dropped and counted; replicates with a
    separation flag are kept and counted. ``point`` may be passed to avoid
    refitting the full sample.
    """
    if point is None:
        point = estimator(ds)
    est = _with_starts(estimator, point)
    B = int(cfg.replicates)
    workers = min(int(cfg.workers), B)
    if workers == 1:
        results = _run_chunk(ds, est, cfg.seed, range(B))
    else:
        size = max(1, math.ceil(B / (4 * workers)))
        chunks = [range(s, min(s + size, B)) for s in range(0, B, size)]
        pool_cls = ProcessPoolExecutor if _picklable((ds, est)) else ThreadPoolExecutor
        with pool_cls(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [ds] * len(chunks), [est] * len(chunks), [cfg.seed] * len(chunks), chunks)
            results = [r for part in parts for r in part]
    results.sort(key=lambda r: r[0])

    ok = [r for _, r in results if r is not None]
    failures = B - len(ok)
    if not ok:
        raise EstimationError(f"all {B} bootstrap replicates failed")
    indirect = np.array([r[0] for r in ok])
    rr = np.array([r[1] for r in ok if r[1] is not None], dtype=float)
    ci_rr = percentile_interval(rr, cfg.level) if point.risk_ratio is not None and rr.size else None
    return EffectEstimate(
        point=point,
        ci_indirect=percentile_interval(indirect, cfg.level),
        ci_risk_ratio=ci_rr,
        replicate_failures=failures,
        separation_count=sum(1 for r in ok if r[2]),
        seed=int(cfg.seed),
        replicates=B,
        level=float(cfg.level),
        indirect_replicates=indirect,
    )
