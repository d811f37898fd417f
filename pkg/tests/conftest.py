import numpy as np
import pytest

from orgmed.data import BINARY, LIMIT_CENSORED, Dataset


def make_dataset(n=200, seed=0, mediator_kind=BINARY, outcome_kind=BINARY, limit=1.0, both_arms=True, extra=False):
    """Small random trial with one binary and one normal covariate."""
    rng = np.random.default_rng(seed)
    c1 = rng.binomial(1, 0.5, n).astype(float)
    c2 = rng.normal(size=n)
    arm = rng.binomial(1, 0.5, n) if both_arms else np.zeros(n, dtype=int)
    if mediator_kind == BINARY:
        m = rng.binomial(1, 1 / (1 + np.exp(-(-0.3 + 0.8 * arm + 0.5 * c1)))).astype(float)
        below = np.zeros(n, dtype=bool)
        signal = m
        limit = None
    else:
        latent = 2.0 - 0.8 * arm + 0.4 * c2 + rng.normal(scale=0.8, size=n)
        below = latent < limit
        m = np.where(below, np.nan, latent)
        signal = np.where(below, 0.0, latent)
    eta = -0.5 + 0.6 * signal + 0.3 * c1 - 0.2 * c2 + 0.2 * arm
    if outcome_kind == BINARY:
        y = rng.binomial(1, 1 / (1 + np.exp(-eta))).astype(float)
    else:
        y = eta + rng.normal(size=n)
    kw = {}
    if extra:
        kw = {"extra": rng.normal(size=(n, 1)), "extra_names": ("z",)}
    return Dataset(
        ids=[str(i) for i in range(n)],
        arm=arm,
        mediator=m,
        below=below,
        outcome=y,
        common_causes=np.column_stack([c1, c2]),
        cause_names=("c1", "c2"),
        outcome_kind=outcome_kind,
        mediator_kind=mediator_kind,
        assay_limit=limit,
        **kw,
    )


@pytest.fixture
def binary_ds():
    return make_dataset(400, seed=1)


@pytest.fixture
def censored_ds():
    return make_dataset(400, seed=2, mediator_kind=LIMIT_CENSORED)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}"
    ACCEPTANCE_LINES.append(line + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
