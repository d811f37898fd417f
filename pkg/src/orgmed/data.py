"""Trial datasets: mediator values, records, CSV ingestion and binarization.

A :class:`Dataset` is stored column-wise (numpy arrays, read-only) because every
estimator works on whole columns; :attr:`Dataset.records` materializes the
row view on demand.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

BINARY = "binary"
LIMIT_CENSORED = "limit_censored"
CONTINUOUS = "continuous"

MEDIATOR_KINDS = (BINARY, LIMIT_CENSORED)
OUTCOME_KINDS = (BINARY, CONTINUOUS)

MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL", "."})


@dataclass(frozen=True)
class MediatorValue:
    """A single mediator observation.

    Binary mediators carry ``binary_value``; limit-censored mediators carry
    ``below_limit`` and, when observed, ``log10_value``.
    """

    kind: str
    binary_value: int | None = None
    below_limit: bool | None = None
    log10_value: float | None = None

    def __post_init__(self):
        if self.kind == BINARY:
            if self.binary_value not in (0, 1) or self.below_limit is not None or self.log10_value is not None:
                raise DataError(f"invalid binary mediator value: {self!r}")
        elif self.kind == LIMIT_CENSORED:
            if self.binary_value is not None or self.below_limit is None:
                raise DataError(f"invalid censored mediator value: {self!r}")
            if self.below_limit:
                if self.log10_value is not None:
                    raise DataError("below-limit mediator cannot carry a value")
            elif self.log10_value is None or not math.isfinite(self.log10_value):
                raise DataError("observed mediator needs a finite log10 value")
        else:
            raise DataError(f"unknown mediator kind {self.kind!r}")

    @classmethod
    def binary(cls, value: int) -> MediatorValue:
        return cls(BINARY, binary_value=int(value))

    @classmethod
    def observed(cls, log10_value: float) -> MediatorValue:
        return cls(LIMIT_CENSORED, below_limit=False, log10_value=float(log10_value))

    @classmethod
    def below(cls) -> MediatorValue:
        return cls(LIMIT_CENSORED, below_limit=True)


@dataclass(frozen=True)
class ObservationRecord:
    id: str
    arm: int
    mediator: MediatorValue
    outcome: float
    common_causes: Mapping[str, float]
    extra_confounders: Mapping[str, float] | None = None


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    ``arm=None`` means every row is untreated (arm 0); ``id=None`` numbers
    rows from 1. ``outcome_kind=None`` infers binary when every outcome is 0/1.
    """

    outcome: str
    mediator: str
    arm: str | None = "arm"
    id: str | None = None
    common_causes: tuple[str, ...] = ()
    extra_confounders: tuple[str, ...] = ()
    outcome_kind: str | None = None
    mediator_kind: str = LIMIT_CENSORED
    below_token: str = "BLQ"

    def __post_init__(self):
        object.__setattr__(self, "common_causes", tuple(self.common_causes))
        object.__setattr__(self, "extra_confounders", tuple(self.extra_confounders))
        if self.mediator_kind not in MEDIATOR_KINDS:
            raise DataError(f"unknown mediator kind {self.mediator_kind!r}")
        if self.outcome_kind is not None and self.outcome_kind not in OUTCOME_KINDS:
            raise DataError(f"unknown outcome kind {self.outcome_kind!r}")
        names = [self.outcome, self.mediator, *self.common_causes, *self.extra_confounders]
        names += [c for c in (self.arm, self.id) if c is not None]
        if len(set(names)) != len(names):
            raise DataError("schema maps the same column twice")

    @property
    def required_columns(self) -> list[str]:
        cols = [self.id, self.arm, self.mediator, self.outcome, *self.common_causes, *self.extra_confounders]
        return [c for c in cols if c is not None]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-wise trial dataset.

    ``mediator`` holds 0/1 for binary mediators and log10 values for
    limit-censored ones (NaN where ``below`` is true). ``assay_limit=None`` on
    a censored dataset means the mediator is fully observed.
    """

    ids: np.ndarray
    arm: np.ndarray
    mediator: np.ndarray
    below: np.ndarray
    outcome: np.ndarray
    common_causes: np.ndarray
    cause_names: tuple[str, ...]
    outcome_kind: str
    mediator_kind: str
    assay_limit: float | None = None
    extra: np.ndarray | None = None
    extra_names: tuple[str, ...] = ()
    schema: CsvSchema | None = None
    n_dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        n = len(self.outcome)
        if n < 1:
            raise DataError("no records")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("ids", _readonly(np.asarray(self.ids, dtype=object)))
        set_("arm", _readonly(np.asarray(self.arm, dtype=np.int8)))
        set_("mediator", _readonly(np.asarray(self.mediator, dtype=float)))
        set_("below", _readonly(np.asarray(self.below, dtype=bool)))
        set_("outcome", _readonly(np.asarray(self.outcome, dtype=float)))
        cc = np.asarray(self.common_causes, dtype=float).reshape(n, -1)
        set_("common_causes", _readonly(cc))
        set_("cause_names", tuple(self.cause_names))
        set_("extra_names", tuple(self.extra_names))
        if self.extra is not None:
            set_("extra", _readonly(np.asarray(self.extra, dtype=float).reshape(n, -1)))

        for name, col in (("ids", self.ids), ("arm", self.arm), ("mediator", self.mediator), ("below", self.below)):
            if len(col) != n:
                raise DataError(f"column {name} has {len(col)} entries, expected {n}")
        if cc.shape[1] != len(self.cause_names):
            raise DataError("common-cause matrix does not match its names")
        if self.extra is not None and self.extra.shape[1] != len(self.extra_names):
            raise DataError("extra-confounder matrix does not match its names")
        if self.extra is None and self.extra_names:
            raise DataError("extra-confounder names given without values")
        if len(set(self.cause_names) | set(self.extra_names)) != len(self.cause_names) + len(self.extra_names):
            raise DataError("covariate names must be unique")
        if not np.isin(self.arm, (0, 1)).all():
            raise DataError("arm must be 0 or 1")
        if self.outcome_kind not in OUTCOME_KINDS:
            raise DataError(f"unknown outcome kind {self.outcome_kind!r}")
        if not np.isfinite(self.outcome).all():
            raise DataError("outcome values must be finite")
        if self.outcome_kind == BINARY and not np.isin(self.outcome, (0.0, 1.0)).all():
            raise DataError("mixed outcome types: binary outcome with values other than 0/1")
        if not np.isfinite(self.common_causes).all() or (self.extra is not None and not np.isfinite(self.extra).all()):
            raise DataError("covariates must be finite")

        if self.mediator_kind == BINARY:
            if self.below.any() or not np.isin(self.mediator, (0.0, 1.0)).all():
                raise DataError("binary mediator must be 0/1")
        elif self.mediator_kind == LIMIT_CENSORED:
            obs = self.mediator[~self.below]
            if not np.isfinite(obs).all() or not np.isnan(self.mediator[self.below]).all():
                raise DataError("censored mediator: values must be finite exactly where not below limit")
            if self.assay_limit is None:
                if self.below.any():
                    raise DataError("below-limit values need an assay limit")
            elif (obs < self.assay_limit).any():
                raise DataError("censored value below declared assay_limit")
        else:
            raise DataError(f"unknown mediator kind {self.mediator_kind!r}")

    # -- basic views ---------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.outcome)

    def __len__(self) -> int:
        return self.n

    @property
    def has_extra(self) -> bool:
        return self.extra is not None

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self.cause_names + self.extra_names

    def covariates(self) -> dict[str, np.ndarray]:
        out = {name: self.common_causes[:, j] for j, name in enumerate(self.cause_names)}
        for j, name in enumerate(self.extra_names):
            out[name] = self.extra[:, j]
        return out

    def columns(self) -> dict[str, np.ndarray]:
        """Name -> column mapping used to evaluate model designs."""
        cols = self.covariates()
        cols["m"] = self.mediator
        cols["below"] = self.below
        cols["arm"] = self.arm.astype(float)
        return cols

    def arm_counts(self) -> tuple[int, int]:
        n1 = int(self.arm.sum())
        return self.n - n1, n1

    def arm_mean(self, arm: int) -> float:
        sel = self.arm == arm
        if not sel.any():
            raise DataError(f"no records in arm {arm}")
        return float(self.outcome[sel].mean())

    # -- derived datasets ----------------------------------------------------

    def take(self, index) -> Dataset:
        """Rows at ``index`` (integer array or boolean mask), in that order."""
        index = np.asarray(index)
        return replace(
            self,
            ids=self.ids[index],
            arm=self.arm[index],
            mediator=self.mediator[index],
            below=self.below[index],
            outcome=self.outcome[index],
            common_causes=self.common_causes[index],
            extra=None if self.extra is None else self.extra[index],
            n_dropped=0,
        )

    def arm_subset(self, arm: int) -> Dataset:
        sel = self.arm == arm
        if not sel.any():
            raise DataError(f"no records in arm {arm}")
        return self.take(sel)

    def without_extra(self) -> Dataset:
        return replace(self, extra=None, extra_names=())

    @property
    def records(self) -> list[ObservationRecord]:
        recs = []
        for i in range(self.n):
            recs.append(
                ObservationRecord(
                    id=self.ids[i],
                    arm=int(self.arm[i]),
                    mediator=self.mediator_value(i),
                    outcome=float(self.outcome[i]),
                    common_causes={k: float(v) for k, v in zip(self.cause_names, self.common_causes[i])},
                    extra_confounders=None
                    if self.extra is None
                    else {k: float(v) for k, v in zip(self.extra_names, self.extra[i])},
                )
            )
        return recs

    def mediator_value(self, i: int) -> MediatorValue:
        if self.mediator_kind == BINARY:
            return MediatorValue.binary(int(self.mediator[i]))
        if self.below[i]:
            return MediatorValue.below()
        return MediatorValue.observed(float(self.mediator[i]))

    @classmethod
    def from_records(
        cls,
        records: Sequence[ObservationRecord],
        outcome_kind: str,
        mediator_kind: str,
        assay_limit: float | None = None,
        schema: CsvSchema | None = None,
    ) -> Dataset:
        if not records:
            raise DataError("no records")
        cause_names = tuple(records[0].common_causes)
        extra_names = tuple(records[0].extra_confounders or ())
        has_extra = records[0].extra_confounders is not None
        med, below = [], []
        for r in records:
            if tuple(r.common_causes) != cause_names:
                raise DataError("common-cause names differ between records")
            if (r.extra_confounders is not None) != has_extra or tuple(r.extra_confounders or ()) != extra_names:
                raise DataError("extra-confounder names differ between records")
            if r.mediator.kind != mediator_kind:
                raise DataError("record mediator kind does not match dataset")
            m, b = _mediator_arrays(r.mediator)
            med.append(m)
            below.append(b)
        return cls(
            ids=[r.id for r in records],
            arm=[r.arm for r in records],
            mediator=med,
            below=below,
            outcome=[r.outcome for r in records],
            common_causes=[[r.common_causes[k] for k in cause_names] for r in records],
            cause_names=cause_names,
            extra=[[r.extra_confounders[k] for k in extra_names] for r in records] if has_extra else None,
            extra_names=extra_names,
            outcome_kind=outcome_kind,
            mediator_kind=mediator_kind,
            assay_limit=assay_limit,
            schema=schema,
        )

    # -- canonical form ------------------------------------------------------

    def to_csv(self, path=None, schema: CsvSchema | None = None) -> str:
        """Write the canonical CSV form; returns the text.

        Floats are written with ``repr`` so a reload reproduces every value.
        """
        schema = schema or self.schema or default_schema(self)
        header = [schema.id or "id", schema.arm or "arm", schema.mediator, schema.outcome]
        header += list(self.cause_names) + list(self.extra_names)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for i in range(self.n):
            if self.mediator_kind == BINARY:
                m = str(int(self.mediator[i]))
            elif self.below[i]:
                m = schema.below_token
            else:
                m = repr(float(self.mediator[i]))
            y = str(int(self.outcome[i])) if self.outcome_kind == BINARY else repr(float(self.outcome[i]))
            row = [str(self.ids[i]), str(int(self.arm[i])), m, y]
            row += [repr(float(v)) for v in self.common_causes[i]]
            if self.extra is not None:
                row += [repr(float(v)) for v in self.extra[i]]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def canonical_bytes(self) -> bytes:
        return self.to_csv().encode("utf-8")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.outcome_kind == other.outcome_kind
            and self.mediator_kind == other.mediator_kind
            and self.assay_limit == other.assay_limit
            and self.canonical_bytes() == other.canonical_bytes()
        )

    __hash__ = None


def _mediator_arrays(v: MediatorValue) -> tuple[float, bool]:
    if v.kind == BINARY:
        return float(v.binary_value), False
    if v.below_limit:
        return math.nan, True
    return float(v.log10_value), False


def default_schema(ds: Dataset) -> CsvSchema:
    return CsvSchema(
        outcome="y",
        mediator="m",
        arm="arm",
        id="id",
        common_causes=ds.cause_names,
        extra_confounders=ds.extra_names,
        outcome_kind=ds.outcome_kind,
        mediator_kind=ds.mediator_kind,
    )


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line}: column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"line {line}: column {column!r}: non-finite value {text!r}")
    return value


def load_csv(path: str | os.PathLike, schema: CsvSchema, assay_limit: float | None = None) -> Dataset:
    """Read a trial CSV into a :class:`Dataset`.

    Rows with any missing mapped field are dropped (listwise deletion); the
    count is stored in ``Dataset.n_dropped``. Censored mediator values must be
    numbers on the log10 scale or ``schema.below_token``; numbers below
    ``assay_limit`` are rejected.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError("no records")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    pos = {name: j for j, name in enumerate(header)}
    missing = [c for c in schema.required_columns if c not in pos]
    if missing:
        raise DataError(f"unmapped required column(s): {', '.join(missing)}")

    kind = schema.mediator_kind
    token = schema.below_token
    ids, arms, meds, belows, ys, ccs, zs = [], [], [], [], [], [], []
    dropped = 0
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cell = {c: row[pos[c]].strip() for c in schema.required_columns}
        if any(v in MISSING_TOKENS for v in cell.values()):
            dropped += 1
            continue
        ids.append(cell[schema.id] if schema.id else str(line - 1))
        if schema.arm:
            a = _parse_float(cell[schema.arm], schema.arm, line)
            if a not in (0.0, 1.0):
                raise DataError(f"line {line}: arm must be 0 or 1, got {cell[schema.arm]!r}")
            arms.append(int(a))
        else:
            arms.append(0)

        raw_m = cell[schema.mediator]
        if kind == BINARY:
            m = _parse_float(raw_m, schema.mediator, line)
            if m not in (0.0, 1.0):
                raise DataError(f"line {line}: binary mediator must be 0/1, got {raw_m!r}")
            meds.append(m)
            belows.append(False)
        elif raw_m == token:
            if assay_limit is None:
                raise DataError(f"line {line}: below-limit token but no assay_limit declared")
            meds.append(math.nan)
            belows.append(True)
        else:
            m = _parse_float(raw_m, schema.mediator, line)
            if assay_limit is not None and m < assay_limit:
                raise DataError(f"line {line}: censored value {m} below declared assay_limit {assay_limit}")
            meds.append(m)
            belows.append(False)

        ys.append(_parse_float(cell[schema.outcome], schema.outcome, line))
        ccs.append([_parse_float(cell[c], c, line) for c in schema.common_causes])
        zs.append([_parse_float(cell[c], c, line) for c in schema.extra_confounders])

    if not ys:
        raise DataError("no records")
    y = np.asarray(ys)
    is_binary = np.isin(y, (0.0, 1.0)).all()
    outcome_kind = schema.outcome_kind or (BINARY if is_binary else CONTINUOUS)
    if outcome_kind == BINARY and not is_binary:
        raise DataError("mixed outcome types: binary outcome column has values other than 0/1")
    return Dataset(
        ids=ids,
        arm=arms,
        mediator=meds,
        below=belows,
        outcome=y,
        common_causes=np.asarray(ccs, dtype=float).reshape(len(ys), len(schema.common_causes)),
        cause_names=schema.common_causes,
        extra=np.asarray(zs, dtype=float).reshape(len(ys), -1) if schema.extra_confounders else None,
        extra_names=schema.extra_confounders,
        outcome_kind=outcome_kind,
        mediator_kind=kind,
        assay_limit=assay_limit if kind == LIMIT_CENSORED else None,
        schema=replace(schema, outcome_kind=outcome_kind),
        n_dropped=dropped,
    )


def binarize_mediator(ds: Dataset) -> Dataset:
    """Replace a censored mediator by the below-limit indicator (1 = below)."""
    if ds.mediator_kind != LIMIT_CENSORED:
        raise DataError("binarize_mediator needs a limit-censored mediator")
    schema = ds.schema
    if schema is not None:
        schema = replace(schema, mediator_kind=BINARY)
    return replace(
        ds,
        mediator=ds.below.astype(float),
        below=np.zeros(ds.n, dtype=bool),
        mediator_kind=BINARY,
        assay_limit=None,
        schema=schema,
    )


def concat(datasets: Iterable[Dataset]) -> Dataset:
    """Stack datasets with identical layout (used by simulators and tests)."""
    parts = list(datasets)
    first = parts[0]
    return replace(
        first,
        ids=np.concatenate([d.ids for d in parts]),
        arm=np.concatenate([d.arm for d in parts]),
        mediator=np.concatenate([d.mediator for d in parts]),
        below=np.concatenate([d.below for d in parts]),
        outcome=np.concatenate([d.outcome for d in parts]),
        common_causes=np.concatenate([d.common_causes for d in parts]),
        extra=None if first.extra is None else np.concatenate([d.extra for d in parts]),
        n_dropped=0,
    )


def load_pairs(
    path: str | os.PathLike, schema: CsvSchema, assay_limit: float | None = None
) -> list[tuple[MediatorValue, dict[str, float]]]:
    """Read ``(mediator, covariates)`` measurements taken on treatment.

    Uses the mediator, common-cause and extra-confounder columns of ``schema``;
    an outcome column is not needed. Incomplete rows are skipped.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError("no records")
    header = [h.strip() for h in rows[0]]
    pos = {name: j for j, name in enumerate(header)}
    covs = [*schema.common_causes, *schema.extra_confounders]
    missing = [c for c in (schema.mediator, *covs) if c not in pos]
    if missing:
        raise DataError(f"unmapped required column(s): {', '.join(missing)}")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = {c: row[pos[c]].strip() for c in (schema.mediator, *covs)}
        if any(v in MISSING_TOKENS for v in cells.values()):
            continue
        raw = cells[schema.mediator]
        if schema.mediator_kind == BINARY:
            m = _parse_float(raw, schema.mediator, line)
            if m not in (0.0, 1.0):
                raise DataError(f"line {line}: binary mediator must be 0/1, got {raw!r}")
            mv = MediatorValue.binary(int(m))
        elif raw == schema.below_token:
            if assay_limit is None:
                raise DataError(f"line {line}: below-limit token but no assay_limit declared")
            mv = MediatorValue.below()
        else:
            m = _parse_float(raw, schema.mediator, line)
            if assay_limit is not None and m < assay_limit:
                raise DataError(f"line {line}: censored value {m} below declared assay_limit {assay_limit}")
            mv = MediatorValue.observed(m)
        out.append((mv, {c: _parse_float(cells[c], c, line) for c in covs}))
    if not out:
        raise DataError("no records")
    return out
