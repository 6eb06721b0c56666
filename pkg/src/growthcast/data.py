"""Loading panels of cumulative counts and covariates; standardization; splits.

File formats (UTF-8 CSV, header row):

* ``long``: ``unit_id,date,cumulative_count`` with ISO dates.
* ``jhu_wide``: ``Province/State,Country/Region,Lat,Long,<m/d/yy>...``;
  province rows are summed per country.
* covariates: ``unit_id,<name1>,...,<namep>``; an empty cell is missing.
"""
import csv
import datetime as dt
import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .model import CovariateTable, ModelData, Trajectory

log = logging.getLogger(__name__)

JHU_FIXED = ("Province/State", "Country/Region", "Lat", "Long")
LONG_HEADER = ("unit_id", "date", "cumulative_count")
MISSING = ""


class DataFormatError(ValueError):
    """A file could not be parsed; the message names row and column."""


@dataclass(frozen=True)
class SplitSpec:
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"test-day count must be positive, got {self.d}")


@dataclass(frozen=True)
class PanelDataset:
    """Trajectories of equal length on a common start date, plus covariates."""

    trajectories: tuple
    covariates: CovariateTable = None

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if not trajs:
            raise ContractError("a panel needs at least one trajectory")
        if len({tr.T for tr in trajs}) != 1:
            raise ContractError("all trajectories must have the same length")
        if len({tr.start_date for tr in trajs}) != 1:
            raise ContractError("all trajectories must share a start date")
        ids = [tr.unit_id for tr in trajs]
        if len(set(ids)) != len(ids):
            raise ContractError("duplicate unit ids in trajectories")
        object.__setattr__(self, "trajectories", trajs)
        if self.covariates is not None:
            if set(self.covariates.unit_ids) != set(ids):
                missing = sorted(set(ids) ^ set(self.covariates.unit_ids))
                raise ContractError(f"covariate units do not match trajectories: {missing}")
            table = self.covariates.reorder(ids)
            if table.standardized is None:
                table = standardize(table)
            object.__setattr__(self, "covariates", table)

    @property
    def unit_ids(self):
        return tuple(tr.unit_id for tr in self.trajectories)

    @property
    def N(self):
        return len(self.trajectories)

    @property
    def T(self):
        return self.trajectories[0].T

    @property
    def start_date(self):
        return self.trajectories[0].start_date

    def trajectory(self, unit):
        return self.trajectories[self.unit_ids.index(unit)]

    def model_data(self):
        y = np.stack([tr.counts for tr in self.trajectories])
        t = np.arange(1, self.T + 1, dtype=float)
        if self.covariates is None:
            return ModelData(y, t, None, self.unit_ids, ())
        return ModelData(y, t, self.covariates.standardized, self.unit_ids, self.covariates.names)

    def without_covariates(self):
        return PanelDataset(self.trajectories, None)

    def train(self, split):
        """Panel truncated to its first T - d days."""
        return PanelDataset(tuple(train_test_split(tr, split)[0] for tr in self.trajectories),
                            self.covariates)


def _parse_date(text, row, col):
    text = text.strip()
    for fmt in ("%Y-%m-%d", "%m/%d/%y", "%m/%d/%Y"):
        try:
            return dt.datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    raise DataFormatError(f"row {row}, column {col}: unparseable date {text!r}")


def _parse_count(text, row, col):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"row {row}, column {col}: not a number: {text!r}") from None
    if not np.isfinite(v):
        raise DataFormatError(f"row {row}, column {col}: non-finite count")
    if v < 0:
        raise DataFormatError(f"row {row}, column {col}: negative count {v}")
    return v


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    return rows


def _running_max(counts):
    return np.maximum.accumulate(counts)


def load_trajectories(path, format="long", running_max=False):
    """Read trajectories from ``path``; returns a list of Trajectory.

    ``running_max`` replaces each series by its running maximum to remove
    downward corrections in reported cumulative counts.
    """
    rows = _read_rows(path)
    if format == "long":
        trajs = _load_long(rows)
    elif format == "jhu_wide":
        trajs = _load_jhu(rows)
    else:
        raise ValueError(f"unknown trajectory format {format!r}")
    if running_max:
        trajs = [Trajectory(tr.unit_id, tr.start_date, _running_max(tr.counts)) for tr in trajs]
    return trajs


def _load_long(rows):
    header = tuple(h.strip() for h in rows[0])
    if header[:3] != LONG_HEADER:
        raise DataFormatError(f"row 1: expected header {','.join(LONG_HEADER)}, got {','.join(header)}")
    series = OrderedDict()
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"row {r}: expected {len(header)} fields, got {len(row)}")
        unit = row[0].strip()
        date = _parse_date(row[1], r, 2)
        count = _parse_count(row[2], r, 3)
        series.setdefault(unit, {})
        if date in series[unit]:
            raise DataFormatError(f"row {r}: duplicate date {date} for unit {unit!r}")
        series[unit][date] = count
    out = []
    for unit, by_date in series.items():
        dates = sorted(by_date)
        span = (dates[-1] - dates[0]).days + 1
        if span != len(dates):
            raise DataFormatError(f"unit {unit!r}: dates are not consecutive days")
        out.append(Trajectory(unit, dates[0], np.array([by_date[d] for d in dates])))
    return out


def _load_jhu(rows):
    header = [h.strip() for h in rows[0]]
    if tuple(header[:4]) != JHU_FIXED:
        raise DataFormatError(f"row 1: expected leading columns {','.join(JHU_FIXED)}")
    dates = [_parse_date(h, 1, c) for c, h in enumerate(header[4:], start=5)]
    if any((b - a).days != 1 for a, b in zip(dates, dates[1:])):
        raise DataFormatError("row 1: date columns are not consecutive days")
    totals = OrderedDict()
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"row {r}: expected {len(header)} fields, got {len(row)}")
        country = row[1].strip()
        counts = np.array([_parse_count(v, r, c) for c, v in enumerate(row[4:], start=5)])
        totals[country] = totals[country] + counts if country in totals else counts
    return [Trajectory(u, dates[0], c) for u, c in totals.items()]


def write_long(trajectories, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_HEADER)
        for tr in trajectories:
            for k, v in enumerate(tr.counts):
                w.writerow([tr.unit_id, (tr.start_date + dt.timedelta(days=k)).isoformat(), repr(float(v))])


def load_covariates(path):
    """Raw covariate table; missing cells are NaN."""
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "unit_id":
        raise DataFormatError("row 1: covariate header must start with unit_id and name at least one covariate")
    names = tuple(header[1:])
    ids, values = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"row {r}: expected {len(header)} fields, got {len(row)}")
        unit = row[0].strip()
        if unit in ids:
            raise DataFormatError(f"row {r}: duplicate unit_id {unit!r}")
        vals = []
        for c, cell in enumerate(row[1:], start=2):
            cell = cell.strip()
            if cell == MISSING:
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataFormatError(f"row {r}, column {c}: non-numeric covariate {cell!r}") from None
        ids.append(unit)
        values.append(vals)
    return CovariateTable(tuple(ids), names, np.array(values, dtype=float).reshape(len(ids), len(names)))


def standardize(table):
    """Median-impute missing cells, then center and scale columns to unit norm.

    The returned table records ``center``/``scale`` (so that
    ``standardized * scale + center`` recovers the imputed raw values) and an
    ``imputed`` report of (unit_id, covariate, value) triples.
    """
    raw = np.array(table.raw, dtype=float)
    filled = raw.copy()
    report = []
    for j, name in enumerate(table.names):
        miss = np.isnan(raw[:, j])
        if miss.all():
            raise DomainError(f"covariate {name!r} has no observed values")
        if miss.any():
            med = float(np.median(raw[~miss, j]))
            filled[miss, j] = med
            report += [(table.unit_ids[i], name, med) for i in np.flatnonzero(miss)]
    center = filled.mean(axis=0)
    centered = filled - center
    scale = np.linalg.norm(centered, axis=0)
    for j, name in enumerate(table.names):
        if not scale[j] > 1e-12 * max(1.0, np.abs(filled[:, j]).max()):
            raise DomainError(f"covariate {name!r} is constant after imputation")
    for u, name, v in report:
        log.info("imputed %s for unit %s with column median %g", name, u, v)
    return CovariateTable(table.unit_ids, table.names, raw, centered / scale, center, scale,
                          tuple(report))


def train_test_split(y, s):
    """Split a trajectory into its first T - d days and its last d days."""
    d = s.d if isinstance(s, SplitSpec) else SplitSpec(int(s)).d
    if d >= y.T:
        raise DomainError(f"test days d={d} must be smaller than T={y.T}")
    train = Trajectory(y.unit_id, y.start_date, y.counts[:y.T - d])
    test = Trajectory(y.unit_id, y.start_date + dt.timedelta(days=y.T - d), y.counts[y.T - d:])
    return train, test


def load_panel(trajectories, format="long", covariates=None, running_max=False):
    trajs = load_trajectories(trajectories, format, running_max)
    table = load_covariates(covariates) if covariates else None
    return PanelDataset(tuple(trajs), table)
