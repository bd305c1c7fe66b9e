"""Cohort data model: schemas, CSV ingestion, standardization, covariance,
weekly-activity classification and quality-of-life banding.

A cohort is a rectangular participants x variables table of float64 values
with NaN marking missing cells. Binary columns hold only {0, 1, NaN}.
All operations are pure: they return new values and never mutate inputs.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

VARIABLE_KINDS = ("continuous", "binary", "categorical")
VARIABLE_ROLES = ("treatment", "outcome", "mediator", "covariate", "auxiliary")

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class DataError(ValueError):
    """Contract violation in cohort construction or ingestion."""


class ZeroVarianceError(DataError):
    """A continuous column cannot be standardized (fewer than 2 distinct values)."""


class Timepoint(enum.Enum):
    GEST_WEEK_15 = "GestWeek15"
    GEST_WEEK_34 = "GestWeek34"
    POSTPARTUM_12 = "Postpartum12"


class ActivityLevel(enum.Enum):
    ACTIVE = "Active"
    LOW_ACTIVE = "LowActive"


class QoLBand(enum.IntEnum):
    """Quality-of-life bands, ordered worst to best."""

    BAD = 0
    SOMEWHAT_BAD = 1
    MODERATE = 2
    GOOD = 3
    VERY_GOOD = 4
    NEAR_PERFECT = 5

    @property
    def label(self) -> str:
        return _BAND_LABELS[self]


_BAND_LABELS = {
    QoLBand.NEAR_PERFECT: "Near perfect",
    QoLBand.VERY_GOOD: "Very good",
    QoLBand.GOOD: "Good",
    QoLBand.MODERATE: "Moderate",
    QoLBand.SOMEWHAT_BAD: "Somewhat bad",
    QoLBand.BAD: "Bad",
}

# (lower bound, band); bands are lower-inclusive, scanned from the top.
_BAND_EDGES = (
    (95.0, QoLBand.NEAR_PERFECT),
    (85.0, QoLBand.VERY_GOOD),
    (70.0, QoLBand.GOOD),
    (57.5, QoLBand.MODERATE),
    (40.0, QoLBand.SOMEWHAT_BAD),
    (0.0, QoLBand.BAD),
)


@dataclass(frozen=True)
class VariableSchema:
    """Declares one cohort variable: its name, measurement kind and causal role."""

    name: str
    kind: str = "continuous"
    role: str = "covariate"
    units: str = ""
    levels: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not _IDENTIFIER.match(self.name):
            raise DataError(f"invalid variable name {self.name!r}")
        if self.kind not in VARIABLE_KINDS:
            raise DataError(f"unknown kind {self.kind!r} for variable {self.name!r}")
        if self.role not in VARIABLE_ROLES:
            raise DataError(f"unknown role {self.role!r} for variable {self.name!r}")
        if self.kind == "categorical" and not self.levels:
            raise DataError(f"categorical variable {self.name!r} needs levels")
        if self.kind != "categorical" and self.levels is not None:
            raise DataError(f"levels given for non-categorical {self.name!r}")


@dataclass(frozen=True)
class Cohort:
    """One timepoint's participants x variables table.

    ``values`` is float64 with shape (rows, len(schema)); NaN marks missing.
    """

    schema: tuple[VariableSchema, ...]
    values: np.ndarray
    timepoint: Timepoint = Timepoint.GEST_WEEK_15

    def __post_init__(self) -> None:
        object.__setattr__(self, "schema", tuple(self.schema))
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("cohort values must be a 2-d array")
        if values.shape[0] < 1:
            raise DataError("cohort needs at least one row")
        if values.shape[1] != len(self.schema):
            raise DataError(
                f"rectangularity violated: {values.shape[1]} columns vs "
                f"{len(self.schema)} schema entries"
            )
        names = [v.name for v in self.schema]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names in schema")
        for j, var in enumerate(self.schema):
            col = values[:, j]
            finite = col[~np.isnan(col)]
            if var.kind == "binary" and not np.all(np.isin(finite, (0.0, 1.0))):
                raise DataError(f"binary column {var.name!r} has values outside {{0, 1}}")
            if var.kind == "categorical" and not np.all(np.isin(finite, var.levels)):
                raise DataError(f"categorical column {var.name!r} has out-of-level values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.schema)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown column {name!r}") from None

    def variable(self, name: str) -> VariableSchema:
        return self.schema[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        idx = [self.index(n) for n in names]
        return self.values[:, idx] if idx else np.empty((self.n_rows, 0))

    def missing_counts(self) -> dict[str, int]:
        """Per-column count of missing cells (the ingestion parse report)."""
        return {
            v.name: int(np.isnan(self.values[:, j]).sum())
            for j, v in enumerate(self.schema)
        }

    def role_names(self, role: str) -> tuple[str, ...]:
        return tuple(v.name for v in self.schema if v.role == role)

    def treatment_name(self) -> str:
        return _single_role(self, "treatment", binary_required=True)

    def outcome_name(self) -> str:
        return _single_role(self, "outcome")

    def take_rows(self, indices: np.ndarray) -> "Cohort":
        return Cohort(self.schema, self.values[np.asarray(indices)], self.timepoint)

    def with_column(self, var: VariableSchema, column: np.ndarray) -> "Cohort":
        col = np.asarray(column, dtype=np.float64).reshape(-1, 1)
        if col.shape[0] != self.n_rows:
            raise DataError("new column length does not match row count")
        return Cohort(self.schema + (var,), np.hstack([self.values, col]), self.timepoint)

    def replace_column(self, name: str, column: np.ndarray) -> "Cohort":
        j = self.index(name)
        values = self.values.copy()
        values[:, j] = np.asarray(column, dtype=np.float64)
        return Cohort(self.schema, values, self.timepoint)

    def with_roles(self, roles: Mapping[str, str]) -> "Cohort":
        """Return a cohort with the given name -> role overrides applied."""
        for name in roles:
            self.index(name)
        schema = tuple(
            replace(v, role=roles.get(v.name, v.role)) for v in self.schema
        )
        return Cohort(schema, self.values, self.timepoint)


def _single_role(cohort: Cohort, role: str, binary_required: bool = False) -> str:
    matches = [v for v in cohort.schema if v.role == role]
    if len(matches) != 1:
        raise DataError(
            f"expected exactly one {role} variable, found "
            f"{[v.name for v in matches]}"
        )
    var = matches[0]
    if binary_required and var.kind != "binary":
        raise DataError(f"{role} variable {var.name!r} must be binary")
    return var.name


@dataclass(frozen=True)
class DailyActivityRecord:
    participant_id: str
    date: dt.date
    medium_intensity_minutes: float
    steps: float
    average_met: float

    def __post_init__(self) -> None:
        for attr in ("medium_intensity_minutes", "steps", "average_met"):
            if getattr(self, attr) < 0:
                raise DataError(f"{attr} must be non-negative")


# ---------------------------------------------------------------------------
# Ingestion


def load_schema(path: str | Path) -> tuple[VariableSchema, ...]:
    """Read a JSON array of {name, kind, role, units[, levels]} entries."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise DataError("schema file must contain a JSON array")
    out = []
    for entry in raw:
        levels = entry.get("levels")
        out.append(
            VariableSchema(
                name=entry["name"],
                kind=entry.get("kind", "continuous"),
                role=entry.get("role", "covariate"),
                units=entry.get("units", ""),
                levels=tuple(levels) if levels is not None else None,
            )
        )
    return tuple(out)


def save_schema(schema: Sequence[VariableSchema], path: str | Path) -> None:
    entries = []
    for v in schema:
        entry: dict = {"name": v.name, "kind": v.kind, "role": v.role, "units": v.units}
        if v.levels is not None:
            entry["levels"] = list(v.levels)
        entries.append(entry)
    Path(path).write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")


def load_cohort(
    path: str | Path,
    schema: Sequence[VariableSchema],
    timepoint: Timepoint = Timepoint.GEST_WEEK_15,
) -> Cohort:
    """Parse a cohort CSV (UTF-8, header row, empty cell = missing).

    Columns are reordered to schema order. The header must contain exactly
    the schema names, in any order. Missing-cell counts are available from
    ``Cohort.missing_counts()``.
    """
    schema = tuple(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        wanted = [v.name for v in schema]
        if set(header) != set(wanted) or len(set(header)) != len(header):
            raise DataError(
                f"{path}: header mismatch; expected columns {sorted(wanted)}, "
                f"got {sorted(header)}"
            )
        order = [header.index(name) for name in wanted]
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(raw)}")
            row = np.empty(len(schema))
            for j, src in enumerate(order):
                cell = raw[src].strip()
                if cell == "":
                    row[j] = np.nan
                    continue
                try:
                    row[j] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric cell {cell!r} in column "
                        f"{schema[j].name!r}"
                    ) from None
                if schema[j].kind == "binary" and row[j] not in (0.0, 1.0):
                    raise DataError(
                        f"{path}:{lineno}: binary column {schema[j].name!r} has value {cell}"
                    )
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Cohort(schema, np.vstack(rows), timepoint)


def save_cohort(cohort: Cohort, path: str | Path) -> None:
    """Write a cohort CSV; missing cells become empty strings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cohort.names)
        for row in cohort.values:
            writer.writerow(["" if math.isnan(x) else repr(float(x)) for x in row])


def load_daily_activity(path: str | Path) -> list[DailyActivityRecord]:
    """Parse a daily-activity CSV with columns
    participant_id,date,medium_intensity_minutes,steps,average_met."""
    expected = ["participant_id", "date", "medium_intensity_minutes", "steps", "average_met"]
    records: list[DailyActivityRecord] = []
    seen: set[tuple[str, dt.date]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != expected:
            raise DataError(f"{path}: expected header {expected}, got {header}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            pid = raw[0].strip()
            try:
                date = dt.date.fromisoformat(raw[1].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad date {raw[1]!r}") from None
            key = (pid, date)
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate record for {pid} on {date}")
            seen.add(key)
            try:
                minutes, steps, met = (float(raw[k].strip()) for k in (2, 3, 4))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric activity cell") from None
            records.append(DailyActivityRecord(pid, date, minutes, steps, met))
    return records


# ---------------------------------------------------------------------------
# Transformations


def drop_incomplete(cohort: Cohort, columns: Iterable[str]) -> tuple[Cohort, int]:
    """Listwise deletion over ``columns``; returns (filtered cohort, rows dropped)."""
    columns = list(columns)
    idx = [cohort.index(c) for c in columns]
    if not idx:
        return cohort, 0
    keep = ~np.isnan(cohort.values[:, idx]).any(axis=1)
    dropped = int((~keep).sum())
    if dropped == 0:
        return cohort, 0
    if not keep.any():
        raise DataError("listwise deletion removed every row")
    return cohort.take_rows(np.flatnonzero(keep)), dropped


def standardize(cohort: Cohort) -> tuple[Cohort, dict[str, tuple[float, float]]]:
    """Transform each continuous column to (x - mean) / sd with sample sd (n-1).

    Binary and categorical columns are untouched. Returns the new cohort and
    per-column (mean, sd) parameters for inverse mapping. Raises
    ``ZeroVarianceError`` for a continuous column without two distinct values.
    """
    values = cohort.values.copy()
    params: dict[str, tuple[float, float]] = {}
    for j, var in enumerate(cohort.schema):
        if var.kind != "continuous":
            continue
        col = values[:, j]
        present = ~np.isnan(col)
        observed = col[present]
        if observed.size < 2 or np.unique(observed).size < 2:
            raise ZeroVarianceError(f"column {var.name!r} has no variance to standardize")
        mean = float(observed.mean())
        sd = float(observed.std(ddof=1))
        values[present, j] = (observed - mean) / sd
        params[var.name] = (mean, sd)
    return Cohort(cohort.schema, values, cohort.timepoint), params


def covariance_matrix(cohort: Cohort) -> np.ndarray:
    """Sample covariance (divisor n-1) over all columns; requires no missing cells."""
    if np.isnan(cohort.values).any():
        raise DataError("covariance requires a cohort without missing cells")
    if cohort.n_rows < 2:
        raise DataError("covariance needs at least 2 rows")
    cov = np.cov(cohort.values, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return (cov + cov.T) / 2.0


# ---------------------------------------------------------------------------
# Physical-activity classification


def _week_of(date: dt.date) -> tuple[int, int]:
    iso = date.isocalendar()
    return (iso[0], iso[1])


def _week_after(week: tuple[int, int]) -> tuple[int, int]:
    monday = dt.date.fromisocalendar(week[0], week[1], 1)
    return _week_of(monday + dt.timedelta(days=7))


def weekly_activity(
    records: Sequence[DailyActivityRecord], participant: str
) -> list[tuple[tuple[int, int], float]]:
    """Sum medium-intensity minutes per ISO week for one participant.

    Weeks with no records inside the participant's observed span are reported
    as 0. Keys are (ISO year, ISO week) pairs.
    """
    mine = [r for r in records if r.participant_id == participant]
    if not mine:
        raise DataError(f"no activity records for participant {participant!r}")
    totals: dict[tuple[int, int], float] = {}
    for rec in mine:
        week = _week_of(rec.date)
        totals[week] = totals.get(week, 0.0) + rec.medium_intensity_minutes
    first, last = min(totals), max(totals)
    out = []
    week = first
    while True:
        out.append((week, totals.get(week, 0.0)))
        if week == last:
            break
        week = _week_after(week)
    return out


def classify_activity(
    weekly: Sequence[tuple[tuple[int, int], float]], threshold: float = 150.0
) -> ActivityLevel:
    """Active iff mean weekly medium-intensity minutes >= threshold (boundary in)."""
    if not weekly:
        raise DataError("cannot classify an empty weekly series")
    mean = sum(minutes for _, minutes in weekly) / len(weekly)
    return ActivityLevel.ACTIVE if mean >= threshold else ActivityLevel.LOW_ACTIVE


def qol_band(score: float) -> QoLBand:
    """Map a 0-100 quality-of-life score to its band (lower-inclusive edges)."""
    if math.isnan(score) or not 0.0 <= score <= 100.0:
        raise DataError(f"score {score} outside [0, 100]")
    for lower, band in _BAND_EDGES:
        if score >= lower:
            return band
    raise AssertionError("unreachable: bands partition [0, 100]")
