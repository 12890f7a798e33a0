"""Station metadata, daily gauge series and gauge quality control.

A :class:`DailySeries` stores one value and one flag per calendar day.
Missing days hold ``NaN`` with flag 0; flagged days keep their original
value for audit and carry a non-zero :class:`QcReason` code. Every
downstream computation reads :attr:`DailySeries.data`, where both missing
and flagged days are ``NaN``.
"""

import calendar
import csv
import datetime as dt
import enum
import io
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InputError, ParseError, ValidationError

logger = logging.getLogger(__name__)

STATION_COLUMNS = (
    "country",
    "name",
    "latitude",
    "longitude",
    "elevation",
    "start_year",
    "end_year",
    "complete_pct",
)
SERIES_COLUMNS = ("date", "rain_mm")
DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "NaN", "-99", "-99.9"})
MIN_ELEVATION = -430.0


class QcReason(enum.IntEnum):
    CONSECUTIVE_IDENTICAL = 1
    EXTREME_VALUE = 2
    SUSPICIOUS_DRY_MONTH = 3
    NEGATIVE_VALUE = 4
    DUPLICATE_DATE = 5

    @property
    def label(self):
        return "".join(part.capitalize() for part in self.name.split("_"))


@dataclass(frozen=True)
class Observed:
    value: float


@dataclass(frozen=True)
class Missing:
    pass


@dataclass(frozen=True)
class Flagged:
    reason: QcReason
    original_value: float


@dataclass(frozen=True)
class StationMeta:
    station_id: str
    name: str
    country: str
    latitude: float
    longitude: float
    elevation: float
    period_start: int
    period_end: int
    completeness: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")
        if self.elevation < MIN_ELEVATION:
            raise ValidationError(f"elevation {self.elevation} below {MIN_ELEVATION} m")
        if self.period_start > self.period_end:
            raise ValidationError(
                f"period start {self.period_start} after end {self.period_end}"
            )
        if not 0.0 <= self.completeness <= 1.0:
            raise ValidationError(f"completeness {self.completeness} outside [0, 1]")


@dataclass(frozen=True)
class RowIssue:
    line: int
    message: str


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Contiguous daily rainfall record for one station (or one pixel).

    Parameters
    ----------
    station_id : str
    start_date : datetime.date
        Date of the first entry.
    values : array_like
        Raw daily depths in mm, ``NaN`` where missing.
    flags : array_like, optional
        ``QcReason`` codes, 0 where unflagged.
    issues : tuple of RowIssue
        Non-fatal problems met while parsing.

    Negative raw values are flagged ``NEGATIVE_VALUE`` on construction so
    that observed values are never negative.
    """

    station_id: str
    start_date: dt.date
    values: np.ndarray
    flags: Optional[np.ndarray] = None
    issues: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if self.flags is None:
            flags = np.zeros(values.shape, dtype=np.int8)
        else:
            flags = np.array(self.flags, dtype=np.int8)
            if flags.shape != values.shape:
                raise ValueError("flags and values differ in length")
        with np.errstate(invalid="ignore"):
            negative = (values < 0) & (flags == 0)
        flags[negative] = QcReason.NEGATIVE_VALUE
        values.flags.writeable = False
        flags.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "issues", tuple(self.issues))

    def __len__(self):
        return self.values.shape[0]

    @property
    def end_date(self):
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self):
        """Entry dates as ``datetime64[D]``."""
        return np.datetime64(self.start_date, "D") + np.arange(len(self))

    @property
    def observed(self):
        """Boolean mask of days holding an unflagged value."""
        return ~np.isnan(self.values) & (self.flags == 0)

    @property
    def data(self):
        """Values with missing and flagged days set to ``NaN``."""
        return np.where(self.observed, self.values, np.nan)

    def entry(self, i):
        if self.flags[i]:
            return Flagged(QcReason(int(self.flags[i])), float(self.values[i]))
        if np.isnan(self.values[i]):
            return Missing()
        return Observed(float(self.values[i]))

    @property
    def entries(self):
        return [self.entry(i) for i in range(len(self))]

    def index_of(self, day):
        return (day - self.start_date).days

    def with_flags(self, flags):
        return replace(self, flags=flags)

    def completeness(self, start=None, end=None):
        """Fraction of days in ``[start, end]`` with an observed value.

        Days of the window outside the series count as missing.
        """
        start = self.start_date if start is None else start
        end = self.end_date if end is None else end
        n_window = (end - start).days + 1
        if n_window <= 0:
            return 0.0
        lo = max(self.index_of(start), 0)
        hi = min(self.index_of(end) + 1, len(self))
        n_obs = int(self.observed[lo:hi].sum()) if hi > lo else 0
        return n_obs / n_window

    def flag_counts(self):
        return {reason: int((self.flags == reason).sum()) for reason in QcReason}


def _split_rows(raw):
    reader = csv.reader(io.StringIO(raw))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        yield lineno, [cell.strip() for cell in row]


def _check_header(header, expected, lineno):
    missing = [c for c in expected if c not in header]
    if missing:
        raise ParseError(f"header lacks column(s) {', '.join(missing)}", line=lineno)


def parse_station_table(raw):
    """Parse a station table.

    The header must contain ``country,name,latitude,longitude,elevation,
    start_year,end_year,complete_pct``. The station name doubles as the
    station id.

    Returns
    -------
    list of StationMeta
    """
    rows = _split_rows(raw)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("station table is empty") from None
    _check_header(header, STATION_COLUMNS, lineno)
    col = {name: header.index(name) for name in STATION_COLUMNS}

    converters = {
        "latitude": float,
        "longitude": float,
        "elevation": float,
        "start_year": int,
        "end_year": int,
        "complete_pct": float,
    }
    stations = []
    seen = set()
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line=lineno
            )
        parsed = {}
        for name in STATION_COLUMNS:
            text = row[col[name]]
            conv = converters.get(name, str)
            try:
                parsed[name] = conv(text)
            except ValueError:
                raise ParseError(f"cannot parse {text!r}", lineno, name) from None
            if conv is str and not text:
                raise ParseError("empty value", lineno, name)
        try:
            meta = StationMeta(
                station_id=parsed["name"],
                name=parsed["name"],
                country=parsed["country"],
                latitude=parsed["latitude"],
                longitude=parsed["longitude"],
                elevation=parsed["elevation"],
                period_start=parsed["start_year"],
                period_end=parsed["end_year"],
                completeness=parsed["complete_pct"] / 100.0,
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        if meta.station_id in seen:
            raise ValidationError(f"line {lineno}: duplicate station {meta.station_id!r}")
        seen.add(meta.station_id)
        stations.append(meta)
    return stations


def parse_daily_series(raw, station_id, missing_tokens=DEFAULT_MISSING_TOKENS):
    """Parse a ``date,rain_mm`` CSV into a contiguous :class:`DailySeries`.

    Absent dates become missing days. Both occurrences of a repeated date
    are flagged ``DUPLICATE_DATE``. Rows with an unparseable date or value
    are skipped, and negative values are kept but flagged; both cases are
    recorded in ``series.issues``.
    """
    rows = _split_rows(raw)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("series file is empty") from None
    _check_header(header, SERIES_COLUMNS, lineno)
    i_date, i_val = header.index("date"), header.index("rain_mm")

    issues = []
    records = []
    for lineno, row in rows:
        if len(row) <= max(i_date, i_val):
            issues.append(RowIssue(lineno, "too few fields"))
            continue
        try:
            day = dt.date.fromisoformat(row[i_date])
        except ValueError:
            issues.append(RowIssue(lineno, f"bad date {row[i_date]!r}"))
            continue
        token = row[i_val]
        if token in missing_tokens:
            value = np.nan
        else:
            try:
                value = float(token)
            except ValueError:
                issues.append(RowIssue(lineno, f"bad value {token!r}"))
                continue
            if np.isnan(value):
                pass
            elif value < 0:
                issues.append(RowIssue(lineno, f"negative value {value}"))
        records.append((day, value))

    if not records:
        return DailySeries(station_id, dt.date(1970, 1, 1), np.empty(0), issues=issues)

    start = min(r[0] for r in records)
    end = max(r[0] for r in records)
    n = (end - start).days + 1
    values = np.full(n, np.nan)
    flags = np.zeros(n, dtype=np.int8)
    filled = np.zeros(n, dtype=bool)
    for day, value in records:
        i = (day - start).days
        if filled[i]:
            flags[i] = QcReason.DUPLICATE_DATE
            if np.isnan(values[i]):
                values[i] = value
            continue
        values[i] = value
        filled[i] = True
    return DailySeries(station_id, start, values, flags, issues=issues)


def read_daily_series(path, station_id, missing_tokens=DEFAULT_MISSING_TOKENS):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read series {path}: {exc}") from exc
    return parse_daily_series(raw, station_id, missing_tokens)


def read_station_table(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read station table {path}: {exc}") from exc
    return parse_station_table(raw)


def _flag(series, mask, reason):
    mask = mask & series.observed
    if not mask.any():
        return series
    flags = series.flags.copy()
    flags[mask] = reason
    return series.with_flags(flags)


def qc_extremes(series, max_daily=400.0):
    """Flag values above ``max_daily`` (exclusive) and negative values."""
    if max_daily <= 0:
        raise ValueError("max_daily must be positive")
    with np.errstate(invalid="ignore"):
        series = _flag(series, series.values < 0, QcReason.NEGATIVE_VALUE)
        return _flag(series, series.values > max_daily, QcReason.EXTREME_VALUE)


def qc_consecutive_identical(series, min_run=5, min_value=1.0):
    """Flag runs of at least ``min_run`` identical values ``>= min_value``.

    A run is a stretch of consecutive observed days with equal values; a
    missing or flagged day ends it. Dry spells never qualify because zero is
    below any positive ``min_value``.
    """
    if min_run < 2:
        raise ValueError("min_run must be at least 2")
    data = series.data
    n = data.shape[0]
    if n == 0:
        return series
    same_as_prev = np.zeros(n, dtype=bool)
    same_as_prev[1:] = data[1:] == data[:-1]
    starts = np.flatnonzero(~same_as_prev)
    ends = np.append(starts[1:], n)
    mask = np.zeros(n, dtype=bool)
    for s, e in zip(starts, ends):
        if e - s >= min_run and data[s] >= max(min_value, np.finfo(float).tiny):
            mask[s:e] = True
    return _flag(series, mask, QcReason.CONSECUTIVE_IDENTICAL)


def _month_keys(series):
    months = series.dates.astype("datetime64[M]").astype(np.int64)
    return months, months % 12 + 1


def qc_dry_month(
    series,
    wet_months,
    min_station_years=5,
    floor=50.0,
    min_coverage=0.8,
):
    """Flag wet-season months that recorded no rain at a wet station.

    A month is flagged when it falls in ``wet_months``, at least
    ``min_coverage`` of its days are observed, every observed value is 0,
    and the station's mean total for that calendar month, taken over the
    other years with adequate coverage, exceeds ``floor``. At least
    ``min_station_years`` such other years are required.

    The climatology counts days already flagged ``SUSPICIOUS_DRY_MONTH`` at
    their original values so that re-running the check gives the same result.
    """
    wet_months = set(wet_months)
    if not wet_months:
        raise ValueError("wet_months must not be empty")
    keys, month_of = _month_keys(series)
    if keys.size == 0:
        return series

    clim_ok = series.observed | (series.flags == QcReason.SUSPICIOUS_DRY_MONTH)
    clim_values = np.where(clim_ok, series.values, np.nan)
    obs = series.observed
    data = series.data

    uniq, first = np.unique(keys, return_index=True)
    bounds = list(first) + [keys.size]
    blocks = []
    for b, key in enumerate(uniq):
        lo, hi = bounds[b], bounds[b + 1]
        y, m = divmod(int(key), 12)
        month_len = calendar.monthrange(1970 + y, m + 1)[1]
        n_clim = int(clim_ok[lo:hi].sum())
        total = np.nan
        if n_clim >= min_coverage * month_len:
            total = float(np.nansum(clim_values[lo:hi])) / n_clim * month_len
        blocks.append((key, m + 1, lo, hi, month_len, total))

    mask = np.zeros(keys.size, dtype=bool)
    for key, month, lo, hi, month_len, _ in blocks:
        if month not in wet_months:
            continue
        n_obs = int(obs[lo:hi].sum())
        if n_obs == 0 or n_obs < min_coverage * month_len:
            continue
        if np.nansum(data[lo:hi]) != 0.0:
            continue
        others = [
            t for k, mo, _, _, _, t in blocks
            if mo == month and k != key and not np.isnan(t)
        ]
        if len(others) < min_station_years:
            continue
        if float(np.mean(others)) > floor:
            mask[lo:hi] = True
    return _flag(series, mask, QcReason.SUSPICIOUS_DRY_MONTH)


@dataclass(frozen=True)
class QcConfig:
    min_run: int = 5
    min_value: float = 1.0
    max_daily: float = 400.0
    wet_months: frozenset = frozenset(range(1, 13))
    dry_month_floor: float = 50.0
    min_station_years: int = 5
    min_month_coverage: float = 0.8
    eligibility: float = 0.70
    analysis_start: Optional[dt.date] = None
    analysis_end: Optional[dt.date] = None

    def __post_init__(self):
        if self.min_run < 2:
            raise ValueError("min_run must be at least 2")
        if self.max_daily <= 0:
            raise ValueError("max_daily must be positive")
        if not self.wet_months or not set(self.wet_months) <= set(range(1, 13)):
            raise ValueError("wet_months must be a non-empty subset of 1..12")
        if not 0.0 <= self.eligibility <= 1.0:
            raise ValueError("eligibility must lie in [0, 1]")
        object.__setattr__(self, "wet_months", frozenset(self.wet_months))


@dataclass(frozen=True)
class QcReport:
    station_id: str
    counts: dict
    completeness_before: float
    completeness_after: float
    eligible: bool
    n_days: int

    def to_dict(self):
        return {
            "station_id": self.station_id,
            "counts": {QcReason(r).label: int(c) for r, c in sorted(self.counts.items())},
            "completeness_before": round(self.completeness_before, 6),
            "completeness_after": round(self.completeness_after, 6),
            "eligible": self.eligible,
            "n_days": self.n_days,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def is_eligible(fraction, threshold):
    # inclusive, with slack for fractions like 0.7 that are inexact in binary
    return fraction >= threshold - 1e-12


def run_qc(series, config=QcConfig()):
    """Apply every QC rule in a fixed order and report the outcome.

    Order: negative/extreme values, repeated identical values, dry months.
    A day keeps the reason of the first rule that flags it.

    Returns
    -------
    (DailySeries, QcReport)
    """
    before = series.completeness(config.analysis_start, config.analysis_end)
    out = qc_extremes(series, config.max_daily)
    out = qc_consecutive_identical(out, config.min_run, config.min_value)
    out = qc_dry_month(
        out,
        config.wet_months,
        config.min_station_years,
        config.dry_month_floor,
        config.min_month_coverage,
    )
    after = out.completeness(config.analysis_start, config.analysis_end)
    report = QcReport(
        station_id=series.station_id,
        counts=out.flag_counts(),
        completeness_before=before,
        completeness_after=after,
        eligible=is_eligible(after, config.eligibility),
        n_days=len(out),
    )
    logger.debug("qc %s: %s", series.station_id, report.to_dict())
    return out, report
