import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raincheck.gauge_ingest import DailySeries, QcReason
from raincheck.pairing import (
    AUGUST_YEAR,
    CALENDAR_YEAR,
    AnnualSummary,
    YearConvention,
    align,
    annual_summaries,
    assign_year,
    paired_annual,
    year_labels,
)


def ds(start, values, flags=None, sid="G"):
    return DailySeries(sid, start, np.array(values, dtype=float), flags)


class TestAlign:
    def test_intersection(self):
        g = ds(dt.date(2000, 1, 1), [1.0, 2.0, 3.0])
        p = ds(dt.date(2000, 1, 1), [1.5, np.nan, 0.0], sid="P")
        pairs = align(g, p)
        assert len(pairs) == 2
        assert pairs.days == [(dt.date(2000, 1, 1), 1.0, 1.5), (dt.date(2000, 1, 3), 3.0, 0.0)]

    def test_disjoint(self):
        g = ds(dt.date(2000, 1, 1), [1.0, 2.0])
        p = ds(dt.date(2001, 1, 1), [1.0, 2.0])
        assert len(align(g, p)) == 0

    def test_flagged_day_excluded(self):
        g = ds(dt.date(2000, 1, 1), [1.0, 2.0], flags=[0, QcReason.EXTREME_VALUE])
        p = ds(dt.date(2000, 1, 1), [1.0, 2.0])
        assert len(align(g, p)) == 1

    def test_offset_starts(self):
        g = ds(dt.date(2000, 1, 1), np.arange(10.0))
        p = ds(dt.date(2000, 1, 5), np.arange(10.0) + 100)
        pairs = align(g, p)
        assert pairs.gauge.tolist() == [4.0, 5, 6, 7, 8, 9]
        assert pairs.product.tolist() == [100.0, 101, 102, 103, 104, 105]


class TestAssignYear:
    def test_water_year_start(self):
        assert assign_year(dt.date(1983, 8, 1), AUGUST_YEAR) == 1983

    def test_water_year_end(self):
        assert assign_year(dt.date(1984, 7, 31), AUGUST_YEAR) == 1983

    def test_calendar(self):
        assert assign_year(dt.date(1984, 7, 31), CALENDAR_YEAR) == 1984

    def test_bad_month(self):
        with pytest.raises(ValueError):
            YearConvention(13)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.dates(dt.date(1950, 1, 1), dt.date(2050, 1, 1)),
       st.integers(400, 3000))
def test_years_partition_into_contiguous_blocks(start_month, start, n):
    conv = YearConvention(start_month)
    dates = np.datetime64(start) + np.arange(n)
    labels = year_labels(dates, conv)
    assert np.all(np.diff(labels) >= 0)
    assert [assign_year(d, conv) for d in dates[:40].astype(dt.date)] == labels[:40].tolist()
    _, counts = np.unique(labels, return_counts=True)
    assert set(counts[1:-1]) <= {365, 366}


class TestAnnualSummaries:
    def test_all_dry_year(self):
        (s,) = annual_summaries(ds(dt.date(2001, 1, 1), np.zeros(365)))
        assert s == AnnualSummary(2001, 0.0, 0, None, 365, True)

    def test_350_days_invalid(self):
        values = np.r_[np.ones(350), np.full(15, np.nan)]
        (s,) = annual_summaries(ds(dt.date(2001, 1, 1), values))
        assert s.n_valid_days == 350 and not s.valid

    def test_355_days_valid(self):
        values = np.r_[np.ones(355), np.full(10, np.nan)]
        assert annual_summaries(ds(dt.date(2001, 1, 1), values))[0].valid

    def test_hand_computed_year(self):
        values = np.r_[np.full(100, 10.0), np.full(265, 0.5)]
        (s,) = annual_summaries(ds(dt.date(2001, 1, 1), values), threshold=0.85)
        assert s.total_rain == pytest.approx(1132.5)
        assert s.rain_days == 100
        assert s.mean_rain_per_rain_day == pytest.approx(10.0)

    def test_water_year_split(self):
        # 2000-08-01 .. 2002-07-31 is two water years
        start = dt.date(2000, 8, 1)
        n = (dt.date(2002, 8, 1) - start).days
        out = annual_summaries(ds(start, np.ones(n)), convention=AUGUST_YEAR)
        assert [s.year_label for s in out] == [2000, 2001]
        assert [s.n_valid_days for s in out] == [365, 365]

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.one_of(st.floats(0, 80), st.just(float("nan"))),
                    min_size=300, max_size=1500))
    def test_totals_over_valid_years(self, values):
        series = ds(dt.date(1999, 3, 1), values)
        sums = annual_summaries(series, min_days=200)
        labels = year_labels(series.dates)
        valid_years = {s.year_label for s in sums if s.valid}
        expected = np.nansum(np.where(np.isin(labels, list(valid_years)), series.data, np.nan))
        assert sum(s.total_rain for s in sums if s.valid) == pytest.approx(expected, abs=1e-6)


def summ(year, total, valid=True, rain_days=10, mean=5.0):
    return AnnualSummary(year, total, rain_days, mean, 365 if valid else 100, valid)


class TestPairedAnnual:
    def test_join(self):
        joined = paired_annual([summ(1990, 1.0), summ(1991, 2.0)],
                               [summ(1991, 3.0), summ(1992, 4.0)])
        tot = joined["total"]
        assert tot.years.tolist() == [1991]
        assert tot.gauge.tolist() == [2.0] and tot.product.tolist() == [3.0]
        assert tot.insufficient

    def test_no_overlap(self):
        joined = paired_annual([summ(1990, 1.0)], [summ(1995, 1.0)])
        assert all(len(v) == 0 and v.insufficient for v in joined.values())

    def test_ten_years(self):
        g = [summ(y, float(y)) for y in range(1990, 2000)]
        p = [summ(y, float(y) + 1) for y in range(1990, 2000)]
        joined = paired_annual(g, p)
        assert all(len(v) == 10 and not v.insufficient for v in joined.values())

    def test_invalid_product_year_screened(self):
        g = [summ(1990, 1.0), summ(1991, 1.0)]
        p = [summ(1990, 1.0, valid=False), summ(1991, 1.0)]
        assert paired_annual(g, p)["total"].years.tolist() == [1991]
        assert paired_annual(g, p, screen_product=False)["total"].years.tolist() == [1990, 1991]

    def test_mean_drops_rainless_years(self):
        g = [summ(1990, 1.0, mean=None, rain_days=0), summ(1991, 1.0)]
        p = [summ(1990, 1.0), summ(1991, 1.0)]
        joined = paired_annual(g, p)
        assert joined["mean_per_rain_day"].years.tolist() == [1991]
        assert joined["rain_days"].years.tolist() == [1990, 1991]
