"""Linear and logistic regression fitted from scratch.

Designs are lists of named terms evaluated against a column mapping (see
:meth:`orgmed.data.Dataset.columns`). The reserved column names are ``m``
(mediator), ``below`` (below-assay-limit flag) and ``arm``; every other name is
a covariate.

The piecewise assay-limit model (outcome depends on the mediator value only
above the limit, and on a separate intercept below it) is expressed with the
single design ``intercept + below + m + covariates``: ``m`` contributes 0 for
below-limit rows, so ``intercept + below`` is the below-limit intercept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit

from .data import BINARY, LIMIT_CENSORED, Dataset, MediatorValue
from .errors import ConfigError, ConvergenceError, FitError, InsufficientDataError, RankDeficientError

IDENTITY = "identity"
LOGIT = "logit"
LINKS = (IDENTITY, LOGIT)

MAX_ITER = 100
SCORE_TOL = 1e-8  # times n
STEP_TOL = 1e-10
PIVOT_TOL = 1e-10
SEPARATION_EPS = 1e-8
DIVERGENCE_NORM = 1e6
LOGLIK_ROUNDING = 8 * np.finfo(float).eps

RESERVED = ("m", "below", "arm")


@dataclass(frozen=True)
class Term:
    kind: str
    a: str | None = None
    b: str | None = None

    KINDS = ("intercept", "covariate", "mediator_main", "below_limit_indicator", "interaction")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown term kind {self.kind!r}")
        if self.kind == "covariate" and (not self.a or self.a in ("m", "below")):
            raise ConfigError(f"bad covariate term {self.a!r}")
        if self.kind == "interaction" and (not self.a or not self.b or self.a == self.b):
            raise ConfigError("interaction needs two distinct operands")

    @property
    def name(self) -> str:
        if self.kind == "intercept":
            return "intercept"
        if self.kind == "mediator_main":
            return "m"
        if self.kind == "below_limit_indicator":
            return "below"
        if self.kind == "covariate":
            return self.a
        return f"{self.a}:{self.b}"

    def __str__(self):
        return self.name


INTERCEPT = Term("intercept")
MEDIATOR = Term("mediator_main")
BELOW = Term("below_limit_indicator")


def covariate(name: str) -> Term:
    return Term("covariate", name)


def interaction(a: str, b: str) -> Term:
    return Term("interaction", a, b)


def parse_term(text: str) -> Term:
    text = text.strip()
    if text in ("1", "intercept"):
        return INTERCEPT
    if text == "m":
        return MEDIATOR
    if text == "below":
        return BELOW
    if ":" in text:
        a, _, b = text.partition(":")
        return interaction(a.strip(), b.strip())
    return covariate(text)


@dataclass(frozen=True)
class DesignSpec:
    terms: tuple[Term, ...]

    def __post_init__(self):
        terms = tuple(parse_term(t) if isinstance(t, str) else t for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise ConfigError("empty design")
        names = self.names
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate design terms: {names}")

    @classmethod
    def of(cls, *terms: Term | str) -> DesignSpec:
        return cls(tuple(terms))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.terms)

    def __len__(self):
        return len(self.terms)

    def __str__(self):
        return " + ".join(self.names)

    def has(self, term: Term) -> bool:
        return term in self.terms

    def uses(self, name: str) -> bool:
        """Whether any term reads column ``name``."""
        for t in self.terms:
            if t.kind == "mediator_main" and name == "m":
                return True
            if t.kind == "below_limit_indicator" and name == "below":
                return True
            if name in (t.a, t.b):
                return True
        return False

    def covariates_used(self) -> set[str]:
        out = set()
        for t in self.terms:
            for x in (t.a, t.b):
                if x is not None and x not in RESERVED:
                    out.add(x)
        return out

    def reorder(self, order: Sequence[int]) -> DesignSpec:
        return DesignSpec(tuple(self.terms[i] for i in order))

    def matrix(self, columns: Mapping[str, np.ndarray], mediator_kind: str | None = None) -> np.ndarray:
        """Evaluate the design on ``columns``; returns an ``n x p`` array."""
        n = _column_length(columns)
        below = columns.get("below")
        mediator_cache = {}

        def mediator_main():
            if "m" not in mediator_cache:
                if "m" not in columns:
                    raise ConfigError("design uses the mediator but no mediator column is available")
                m = np.asarray(columns["m"], dtype=float)
                if below is not None and np.any(below):
                    if not self.has(BELOW):
                        raise ConfigError(
                            "mediator kind mismatch with design: below-limit values need the 'below' term"
                        )
                    m = np.where(below, 0.0, m)
                mediator_cache["m"] = m
            return mediator_cache["m"]

        def operand(name):
            if name == "m":
                return mediator_main()
            if name == "below":
                return below_column()
            if name not in columns:
                raise ConfigError(f"missing covariate {name!r}")
            return np.asarray(columns[name], dtype=float)

        def below_column():
            if mediator_kind == BINARY:
                raise ConfigError("below_limit_indicator is only valid for limit-censored mediators")
            if below is None:
                return np.zeros(n)
            return np.asarray(below, dtype=float)

        X = np.empty((n, len(self.terms)))
        for j, t in enumerate(self.terms):
            if t.kind == "intercept":
                X[:, j] = 1.0
            elif t.kind == "mediator_main":
                X[:, j] = mediator_main()
            elif t.kind == "below_limit_indicator":
                X[:, j] = below_column()
            elif t.kind == "covariate":
                X[:, j] = operand(t.a)
            else:
                X[:, j] = operand(t.a) * operand(t.b)
        return X


def _column_length(columns: Mapping[str, np.ndarray]) -> int:
    for v in columns.values():
        return len(v)
    raise ConfigError("no columns")


@dataclass(frozen=True, eq=False)
class FittedModel:
    link: str
    design: DesignSpec
    coefficients: np.ndarray
    converged: bool
    iterations: int
    max_abs_score: float
    separation_flag: bool
    n: int
    mediator_kind: str | None = None
    loglik_path: tuple[float, ...] = field(default=(), repr=False)
    coef_norm_path: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float, copy=True)
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        if len(c) != len(self.design):
            raise FitError("coefficient count does not match design")

    @property
    def coef(self) -> dict[str, float]:
        return dict(zip(self.design.names, map(float, self.coefficients)))

    def linear_predictor(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.design.matrix(columns, self.mediator_kind) @ self.coefficients

    def predict(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        eta = self.linear_predictor(columns)
        return expit(eta) if self.link == LOGIT else eta

    def piecewise_coefficients(self) -> dict[str, float]:
        """Coefficients of the assay-limit model in its two-branch form.

        ``above_intercept + m_slope*m + covariates`` above the limit and
        ``below_intercept + covariates`` below it.
        """
        coef = self.coef
        if not self.design.has(BELOW) or not self.design.has(INTERCEPT) or not self.design.has(MEDIATOR):
            raise ConfigError("not a piecewise assay-limit design")
        out = {
            "above_intercept": coef["intercept"],
            "m_slope": coef["m"],
            "below_intercept": coef["intercept"] + coef["below"],
        }
        out.update({k: v for k, v in coef.items() if k not in ("intercept", "m", "below")})
        return out


def logit_loglik(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logit_score(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return X.T @ (y - expit(X @ beta))


def _response(ds: Dataset, response: str) -> np.ndarray:
    if response == "outcome":
        return ds.outcome
    if response in ("mediator", "mediator_binary"):
        if response == "mediator_binary" and ds.mediator_kind != BINARY:
            raise ConfigError("mediator_binary response needs a binary mediator")
        if ds.mediator_kind == LIMIT_CENSORED and ds.below.any():
            raise ConfigError("cannot regress a censored mediator with below-limit values")
        return ds.mediator
    raise ConfigError(f"unknown response {response!r}")


def fit(
    ds: Dataset,
    response: str,
    design: DesignSpec,
    link: str,
    arm_filter: int | None = None,
    start: np.ndarray | None = None,
    max_iter: int = MAX_ITER,
) -> FittedModel:
    """Maximum-likelihood (logit) or least-squares (identity) fit.

    Parameters
    ----------
    ds : Dataset
    response : {"outcome", "mediator", "mediator_binary"}
    design : DesignSpec
    link : {"identity", "logit"}
    arm_filter : 0, 1 or None
        Restrict the fit to one arm.
    start : array, optional
        Initial coefficients for IRLS (bootstrap refits start from the
        full-sample estimate).

    Raises
    ------
    RankDeficientError
        The design has (numerically) dependent columns.
    ConvergenceError
        IRLS used ``max_iter`` iterations; ``.model`` is the last iterate.
    """
    if link not in LINKS:
        raise ConfigError(f"unknown link {link!r}")
    if arm_filter is not None:
        ds = ds.arm_subset(arm_filter)
    y = _response(ds, response)
    X = design.matrix(ds.columns(), ds.mediator_kind)
    n, p = X.shape
    if n < p + 1:
        raise InsufficientDataError(f"{n} records for {p} terms")
    if link == LOGIT:
        if not np.isin(y, (0.0, 1.0)).all():
            raise FitError("logit link needs a 0/1 response")
        return _fit_logit(X, y, design, ds.mediator_kind, start, max_iter)
    return _fit_identity(X, y, design, ds.mediator_kind)


def _pivoted_r(A: np.ndarray):
    R, piv = scipy.linalg.qr(A, mode="r", pivoting=True, check_finite=False)
    R = R[: A.shape[1]]
    d = np.abs(np.diag(R))
    rank_ok = d.size > 0 and d[-1] > PIVOT_TOL * d[0]
    return R, piv, rank_ok


def _solve_normal(R: np.ndarray, piv: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve ``A'A s = g`` given the pivoted QR ``A P = Q R``."""
    u = scipy.linalg.solve_triangular(R, g[piv], trans="T", check_finite=False)
    v = scipy.linalg.solve_triangular(R, u, check_finite=False)
    s = np.empty_like(v)
    s[piv] = v
    return s


def _fit_identity(X, y, design, mediator_kind) -> FittedModel:
    n = X.shape[0]
    R, piv, rank_ok = _pivoted_r(X)
    if not rank_ok:
        raise RankDeficientError(f"design {design} is rank deficient")
    beta = _solve_normal(R, piv, X.T @ y)
    resid = y - X @ beta
    score = X.T @ resid
    rss = float(resid @ resid)
    return FittedModel(
        link=IDENTITY,
        design=design,
        coefficients=beta,
        converged=True,
        iterations=1,
        max_abs_score=float(np.max(np.abs(score))),
        separation_flag=False,
        n=n,
        mediator_kind=mediator_kind,
        loglik_path=(-0.5 * rss,),
        coef_norm_path=(float(np.linalg.norm(beta)),),
    )


def _fit_logit(X, y, design, mediator_kind, start, max_iter) -> FittedModel:
    n, p = X.shape
    score_tol = SCORE_TOL * n
    beta = np.zeros(p) if start is None else np.array(start, dtype=float)
    eta = X @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    lls, norms = [ll], [float(np.linalg.norm(beta))]
    mu = expit(eta)
    score = X.T @ (y - mu)
    converged = separated = False
    it = 0

    def extreme(mu):
        return bool(np.any((mu < SEPARATION_EPS) | (mu > 1.0 - SEPARATION_EPS)))

    while it < max_iter:
        it += 1
        w = mu * (1.0 - mu)
        R, piv, rank_ok = _pivoted_r(np.sqrt(w)[:, None] * X)
        if not rank_ok:
            if extreme(mu):
                separated = True
                converged = bool(np.max(np.abs(score)) <= score_tol)
                break
            raise RankDeficientError(f"design {design} is rank deficient")
        step = _solve_normal(R, piv, score)

        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            eta_c = X @ cand
            ll_c = float(np.sum(y * eta_c - np.logaddexp(0.0, eta_c)))
            # near the optimum the gain is below rounding; accept the Newton step
            if ll_c >= ll - LOGLIK_ROUNDING * max(1.0, abs(ll)):
                break
            t *= 0.5
        else:
            cand, eta_c, ll_c = beta, eta, ll

        delta = np.max(np.abs(cand - beta))
        beta, eta, ll = cand, eta_c, ll_c
        mu = expit(eta)
        score = X.T @ (y - mu)
        lls.append(ll)
        norms.append(float(np.linalg.norm(beta)))
        max_score = np.max(np.abs(score))

        if max_score <= score_tol and delta <= STEP_TOL:
            converged = True
            break
        if max_score <= score_tol and extreme(mu):
            # separation: probabilities settle while coefficients run off
            converged = separated = True
            break
        if delta == 0.0:
            break

    if not separated and (extreme(mu) and norms[-1] > norms[0] + 1.0 or norms[-1] > DIVERGENCE_NORM):
        separated = True
    model = FittedModel(
        link=LOGIT,
        design=design,
        coefficients=beta,
        converged=converged,
        iterations=it,
        max_abs_score=float(np.max(np.abs(score))),
        separation_flag=separated,
        n=n,
        mediator_kind=mediator_kind,
        loglik_path=tuple(lls),
        coef_norm_path=tuple(norms),
    )
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {it} iterations", model)
    return model


def predict_mean(
    model: FittedModel,
    mediator: MediatorValue | None,
    common_causes: Mapping[str, float],
    arm: int = 0,
) -> float:
    """Fitted mean at one mediator value and covariate vector."""
    cols: dict[str, np.ndarray] = {k: np.array([float(v)]) for k, v in common_causes.items()}
    cols["arm"] = np.array([float(arm)])
    if mediator is not None:
        if model.mediator_kind is not None and mediator.kind != model.mediator_kind:
            raise ConfigError(f"mediator kind {mediator.kind} does not match model ({model.mediator_kind})")
        if mediator.kind == BINARY:
            cols["m"] = np.array([float(mediator.binary_value)])
            cols["below"] = np.array([False])
        else:
            cols["below"] = np.array([bool(mediator.below_limit)])
            cols["m"] = np.array([np.nan if mediator.below_limit else mediator.log10_value])
    elif model.design.uses("m"):
        raise ConfigError("model needs a mediator value")
    missing = model.design.covariates_used() - set(cols)
    if missing:
        raise ConfigError(f"missing covariate(s): {', '.join(sorted(missing))}")
    return float(model.predict(cols)[0])
