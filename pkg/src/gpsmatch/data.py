"""Cohort container and the CSV interchange format.

Every file the package reads or writes uses the layout ``id,treatment,x1..xP[,y]``
with a mandatory header row. Treatment labels are arbitrary strings on disk and
are remapped to the contiguous codes ``1..Z`` in memory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class CohortError(ValueError):
    """Raised when a cohort violates its structural invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Cohort:
    """Covariates, treatment codes and optional outcomes for ``n`` units.

    ``treatments`` holds codes in ``1..Z``; ``labels[w - 1]`` is the original
    label of code ``w``.
    """

    ids: tuple[str, ...]
    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim != 2:
            raise CohortError("covariates must be a 2-D array")
        W = np.asarray(self.treatments)
        if W.ndim != 1 or W.shape[0] != X.shape[0]:
            raise CohortError("treatments must be a vector with one entry per row")
        if not np.issubdtype(W.dtype, np.integer):
            if not np.all(np.equal(np.mod(W, 1), 0)):
                raise CohortError("treatment codes must be integers")
        W = W.astype(np.int64)
        n = X.shape[0]
        if len(self.ids) != n:
            raise CohortError("ids must have one entry per row")
        if len(set(self.ids)) != n:
            raise CohortError("duplicate unit id")
        if not np.all(np.isfinite(X)):
            raise CohortError("covariate matrix contains missing or non-finite values")
        Z = int(W.max()) if n else 0
        if n == 0 or W.min() < 1:
            raise CohortError("treatment codes must lie in 1..Z")
        counts = np.bincount(W, minlength=Z + 1)[1:]
        for w, c in enumerate(counts, start=1):
            if c < 2:
                raise CohortError(f"treatment group {w} has {c} unit(s); at least 2 required")
        Y = None
        if self.outcomes is not None:
            Y = np.asarray(self.outcomes, dtype=float)
            if Y.shape != (n,):
                raise CohortError("outcomes must be a vector with one entry per row")
            Y = _frozen(Y)
        labels = tuple(self.labels) or tuple(str(w) for w in range(1, Z + 1))
        if len(labels) != Z:
            raise CohortError("labels must name every treatment code")
        names = tuple(self.covariate_names) or tuple(f"x{p}" for p in range(1, X.shape[1] + 1))
        if len(names) != X.shape[1]:
            raise CohortError("covariate_names must name every column")
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "covariates", _frozen(X))
        object.__setattr__(self, "treatments", _frozen(W))
        object.__setattr__(self, "outcomes", Y)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def P(self) -> int:
        return self.covariates.shape[1]

    @property
    def Z(self) -> int:
        return len(self.labels)

    @property
    def group_sizes(self) -> np.ndarray:
        """``n_w`` for ``w = 1..Z`` (index 0 is group 1)."""
        return np.bincount(self.treatments, minlength=self.Z + 1)[1:]

    def indicator(self) -> np.ndarray:
        """The ``n x Z`` 0/1 matrix ``T[i, w-1] = [W_i == w]``."""
        T = np.zeros((self.n, self.Z), dtype=np.int64)
        T[np.arange(self.n), self.treatments - 1] = 1
        return T

    def group(self, w: int) -> np.ndarray:
        """Row indices of units receiving treatment ``w``."""
        return np.flatnonzero(self.treatments == w)

    def subset(self, mask_or_index: np.ndarray) -> "Cohort":
        """Rows selected by a boolean mask or index array, labels kept."""
        idx = np.asarray(mask_or_index)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return Cohort(
            ids=tuple(self.ids[i] for i in idx),
            covariates=self.covariates[idx],
            treatments=self.treatments[idx],
            outcomes=None if self.outcomes is None else self.outcomes[idx],
            labels=self.labels,
            covariate_names=self.covariate_names,
        )

    def code_of(self, label: str) -> int:
        """Treatment code for an original label."""
        try:
            return self.labels.index(str(label)) + 1
        except ValueError:
            raise CohortError(f"unknown treatment label {label!r}") from None


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_cohort`.

    ``covariates=None`` takes every column not claimed by id, treatment or
    outcome, in file order. A mapped id/outcome column that is absent from the
    file is treated as not supplied.
    """

    treatment: str = "treatment"
    id: str | None = "id"
    outcome: str | None = "y"
    covariates: Sequence[str] | None = None


def _label_sort_key(labels: set[str]) -> list[str]:
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def load_cohort(path: str | Path, schema: CsvSchema = CsvSchema()) -> Cohort:
    """Read and validate a cohort CSV."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"cohort file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CohortError("empty file: header row is mandatory") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    col = {name: j for j, name in enumerate(header)}
    if schema.treatment not in col:
        raise CohortError(f"treatment column {schema.treatment!r} not in header")
    id_col = schema.id if schema.id in col else None
    y_col = schema.outcome if schema.outcome in col else None
    if schema.covariates is None:
        claimed = {schema.treatment, id_col, y_col}
        cov_cols = [h for h in header if h not in claimed]
    else:
        cov_cols = list(schema.covariates)
        missing = [c for c in cov_cols if c not in col]
        if missing:
            raise CohortError(f"covariate column(s) not in header: {', '.join(missing)}")
    if not cov_cols:
        raise CohortError("at least one covariate column is required")

    n, P = len(rows), len(cov_cols)
    X = np.empty((n, P))
    Y = np.empty(n) if y_col is not None else None
    raw_w: list[str] = []
    ids: list[str] = []
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise CohortError(f"row {r} has {len(row)} fields, header has {len(header)}")
        for p, name in enumerate(cov_cols):
            cell = row[col[name]].strip()
            if cell == "" or cell.lower() in {"na", "nan"}:
                raise CohortError(f"missing covariate value at row {r}")
            try:
                X[r - 1, p] = float(cell)
            except ValueError:
                raise CohortError(f"non-numeric covariate value {cell!r} at row {r}, column {name}") from None
        w = row[col[schema.treatment]].strip()
        if w == "":
            raise CohortError(f"missing treatment at row {r}")
        raw_w.append(w)
        ids.append(row[col[id_col]].strip() if id_col is not None else str(r))
        if Y is not None:
            cell = row[col[y_col]].strip()
            if cell == "" or cell.lower() in {"na", "nan"}:
                raise CohortError(f"missing outcome value at row {r}")
            try:
                Y[r - 1] = float(cell)
            except ValueError:
                raise CohortError(f"non-numeric outcome value {cell!r} at row {r}") from None
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        dup = next(i for i in ids if i in seen or seen.add(i))
        raise CohortError(f"duplicate unit id {dup!r}")

    labels = _label_sort_key(set(raw_w))
    code = {lab: w for w, lab in enumerate(labels, start=1)}
    W = np.array([code[w] for w in raw_w], dtype=np.int64)
    return Cohort(
        ids=tuple(ids),
        covariates=X,
        treatments=W,
        outcomes=Y,
        labels=tuple(labels),
        covariate_names=tuple(cov_cols),
    )


def write_cohort(c: Cohort, path: str | Path) -> None:
    """Write ``c`` in the interchange layout; floats use ``repr`` so reloads are exact."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["id", "treatment", *c.covariate_names]
        if c.outcomes is not None:
            header.append("y")
        w.writerow(header)
        for i in range(c.n):
            row = [c.ids[i], c.labels[c.treatments[i] - 1], *map(repr, c.covariates[i].tolist())]
            if c.outcomes is not None:
                row.append(repr(float(c.outcomes[i])))
            w.writerow(row)


@dataclass(frozen=True)
class GroupSummary:
    label: str
    n: int
    means: np.ndarray
    sds: np.ndarray = field(repr=False)


def summarize_cohort(c: Cohort) -> list[GroupSummary]:
    """Per-group size, covariate means and sample sds (denominator ``n_w - 1``)."""
    out = []
    for w in range(1, c.Z + 1):
        Xw = c.covariates[c.group(w)]
        out.append(GroupSummary(c.labels[w - 1], Xw.shape[0], Xw.mean(axis=0), Xw.std(axis=0, ddof=1)))
    return out


def write_summary(c: Cohort, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["group", "n"]
        for name in c.covariate_names:
            header += [f"{name}_mean", f"{name}_sd"]
        w.writerow(header)
        for g in summarize_cohort(c):
            row: list[object] = [g.label, g.n]
            for m, s in zip(g.means, g.sds):
                row += [f"{m:.4f}", f"{s:.4f}"]
            w.writerow(row)

