"""Gauge/product alignment, accounting years and annual summaries."""

import datetime as dt
from dataclasses import dataclass
from typing import Optional

import numpy as np

DEFAULT_RAIN_DAY_MM = 0.85
MIN_VALID_DAYS = 355
SUMMARY_KINDS = ("total", "rain_days", "mean_per_rain_day")


@dataclass(frozen=True)
class YearConvention:
    """Accounting year starting on the first day of ``start_month``.

    ``start_month=1`` is the calendar year; ``start_month=8`` runs August
    to July so a southern-hemisphere wet season sits inside one year.
    """

    start_month: int = 1

    def __post_init__(self):
        if not 1 <= self.start_month <= 12:
            raise ValueError(f"start_month {self.start_month} outside 1..12")


CALENDAR_YEAR = YearConvention(1)
AUGUST_YEAR = YearConvention(8)


def assign_year(d, convention=CALENDAR_YEAR):
    """Label of the accounting year containing ``d`` (its starting year)."""
    return d.year if d.month >= convention.start_month else d.year - 1


def year_labels(dates, convention=CALENDAR_YEAR):
    """Vectorised :func:`assign_year` over ``datetime64[D]`` dates."""
    months = dates.astype("datetime64[M]").astype(np.int64)
    years = months // 12 + 1970
    month = months % 12 + 1
    return np.where(month >= convention.start_month, years, years - 1)


@dataclass(frozen=True, eq=False)
class PairedDailySeries:
    station_id: str
    product_id: str
    dates: np.ndarray
    gauge: np.ndarray
    product: np.ndarray

    def __len__(self):
        return self.dates.shape[0]

    @property
    def days(self):
        return [
            (d.astype(dt.date), float(g), float(p))
            for d, g, p in zip(self.dates, self.gauge, self.product)
        ]


def align(gauge, product, product_id=None):
    """Restrict two daily series to the days observed in both.

    Flagged days count as missing. Non-overlapping inputs give an empty
    result.
    """
    start = max(gauge.start_date, product.start_date)
    end = min(gauge.end_date, product.end_date)
    empty = np.empty(0)
    if end < start:
        return PairedDailySeries(
            gauge.station_id, product_id or product.station_id,
            np.empty(0, dtype="datetime64[D]"), empty, empty,
        )
    gs, ps = gauge.index_of(start), product.index_of(start)
    n = (end - start).days + 1
    g = gauge.data[gs:gs + n]
    p = product.data[ps:ps + n]
    keep = ~np.isnan(g) & ~np.isnan(p)
    dates = np.datetime64(start, "D") + np.flatnonzero(keep)
    return PairedDailySeries(
        gauge.station_id, product_id or product.station_id, dates, g[keep], p[keep]
    )


@dataclass(frozen=True)
class AnnualSummary:
    year_label: int
    total_rain: float
    rain_days: int
    mean_rain_per_rain_day: Optional[float]
    n_valid_days: int
    valid: bool

    def value(self, kind):
        if kind == "total":
            return self.total_rain
        if kind == "rain_days":
            return float(self.rain_days)
        if kind == "mean_per_rain_day":
            return self.mean_rain_per_rain_day
        raise KeyError(kind)


def annual_summaries(
    series,
    threshold=DEFAULT_RAIN_DAY_MM,
    convention=CALENDAR_YEAR,
    min_days=MIN_VALID_DAYS,
):
    """Total rain, rain-day count and mean rain per rain day for each year.

    A year is valid when it has at least ``min_days`` observed days. Rain
    days are days with at least ``threshold`` mm.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    if len(series) == 0:
        return []
    labels = year_labels(series.dates, convention)
    data = series.data
    obs = ~np.isnan(data)
    out = []
    for year in np.unique(labels):
        sel = labels == year
        vals = data[sel & obs]
        wet = vals[vals >= threshold]
        n_wet = int(wet.size)
        out.append(
            AnnualSummary(
                year_label=int(year),
                total_rain=float(vals.sum()),
                rain_days=n_wet,
                mean_rain_per_rain_day=float(wet.sum()) / n_wet if n_wet else None,
                n_valid_days=int(vals.size),
                valid=int(vals.size) >= min_days,
            )
        )
    return out


@dataclass(frozen=True, eq=False)
class AnnualPairs:
    kind: str
    years: np.ndarray
    gauge: np.ndarray
    product: np.ndarray

    @property
    def insufficient(self):
        return self.years.size < 2

    def __len__(self):
        return self.years.size


def paired_annual(gauge_summaries, product_summaries, screen_product=True):
    """Join gauge and product summaries on year, one vector pair per kind.

    A year enters only if valid for the gauge and, unless
    ``screen_product`` is off, for the product too. For the mean per rain
    day, years where either side has no rain day are dropped.

    Returns
    -------
    dict mapping summary kind to AnnualPairs
    """
    prod = {s.year_label: s for s in product_summaries}
    joint = [
        (g, prod[g.year_label])
        for g in sorted(gauge_summaries, key=lambda s: s.year_label)
        if g.valid and g.year_label in prod and (prod[g.year_label].valid or not screen_product)
    ]
    out = {}
    for kind in SUMMARY_KINDS:
        rows = [
            (g.year_label, g.value(kind), p.value(kind))
            for g, p in joint
            if g.value(kind) is not None and p.value(kind) is not None
        ]
        arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
        out[kind] = AnnualPairs(kind, arr[:, 0].astype(int), arr[:, 1], arr[:, 2])
    return out


ANNUAL_CSV_HEADER = "station,product,year,total_mm,rain_days,mean_per_rain_day,valid"


def annual_rows(station_id, product_id, summaries, fmt):
    for s in summaries:
        mean = "" if s.mean_rain_per_rain_day is None else fmt(s.mean_rain_per_rain_day)
        yield ",".join(
            [
                station_id,
                product_id,
                str(s.year_label),
                fmt(s.total_rain),
                str(s.rain_days),
                mean,
                "true" if s.valid else "false",
            ]
        )
