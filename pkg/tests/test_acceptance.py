"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that is printed in the pytest
terminal summary, then asserts.
"""

import datetime as dt
import json
import math
import time

import numpy as np

from raincheck.cli import main
from raincheck.gauge_ingest import (
    DailySeries,
    QcConfig,
    QcReason,
    parse_daily_series,
    run_qc,
)
from raincheck.metrics import (
    category_outcome_decomposition,
    category_pod,
    classify,
    continuous_scores,
    mean_error,
    pbias,
    pearson_r,
    pod,
    rain_day_contingency,
    rsd,
)
from raincheck.pairing import annual_summaries
from raincheck.seasonal_model import BinaryOccurrenceSeries, fit_occurrence, threshold_sweep
from raincheck.spatial_consistency import blockiness_score
from raincheck.synthetic import add_drizzle, gauge_series, smooth_field, tile_field

from .conftest import ACCEPTANCE_LINES
from .oracles import (
    category_of,
    category_pod_loop,
    contingency_loop,
    me_exact,
    pbias_exact,
    r_exact,
    rsd_exact,
)
from .scenario import build_country
from .test_seasonal_model import generated_occurrence, grid_search


def record(number, title, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {title}  {detail}".rstrip())
    assert ok, f"criterion {number} failed: {detail}"


def rel_close(a, b, rel=1e-12):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def test_criterion_1_metric_oracle_equivalence():
    rng = np.random.default_rng(1)
    cases = []
    for _ in range(1000):
        n = int(rng.integers(2, 101))
        obs = rng.gamma(2.0, 300.0, n)
        sim = rng.gamma(2.0, 300.0, n)
        cases.append((sim, obs))
    t0 = time.perf_counter()
    got = [(mean_error(s, o), pbias(s, o), pearson_r(s, o), rsd(s, o)) for s, o in cases]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    bad = 0
    for (s, o), values in zip(cases, got):
        ref = (me_exact(s, o), pbias_exact(s, o), r_exact(s, o), rsd_exact(s, o))
        for a, b in zip(values, ref):
            err = abs(a - b) / max(abs(a), abs(b))
            worst = max(worst, err)
            bad += not rel_close(a, b)
    record(1, "metric oracle equivalence", bad == 0 and elapsed < 5.0,
           f"worst rel err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_scaling_identities():
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(50):
        obs = rng.gamma(3.0, 300.0, int(rng.integers(2, 60)))
        s = continuous_scores(1.2 * obs, obs)
        ok &= abs(s.pbias - 20.0) <= 1e-12 and abs(s.rsd - 1.2) <= 1e-12
        ok &= abs(s.r - 1.0) <= 1e-12
    record(2, "scaling identities", ok, "S = 1.2 O over 50 vectors")


def test_criterion_3_intensity_boundaries():
    edges_ok = [classify(np.array([x]))[0] for x in (0.85, 5.0, 20.0, 40.0)] == [1, 2, 3, 4]
    xs = np.arange(6001) / 100.0
    codes = classify(xs)
    mismatches = sum(int(c) != category_of(float(x)) for x, c in zip(xs, codes))
    record(3, "intensity boundaries", edges_ok and mismatches == 0,
           f"{mismatches} mismatches over {xs.size} values")


def test_criterion_4_glm_recovery():
    occ = generated_occurrence(seed=42, years=40)
    t0 = time.perf_counter()
    model = fit_occurrence(occ, k=1)
    elapsed = time.perf_counter() - t0
    coef = model.coefficients
    recovered = np.all(np.abs(coef - np.array([-1.0, 0.8, 0.4])) <= 0.1)

    rng = np.random.default_rng(0)
    idx = np.sort(rng.choice(len(occ), 200, replace=False))
    t = occ.day_index[idx].astype(float)
    y = occ.outcome[idx]
    sub = fit_occurrence(BinaryOccurrenceSeries(occ.day_index[idx], y, 0.85), k=1)
    _, coarse = grid_search(t, y, (0.0, 0.0, 0.0), 3.0, 0.1)
    grid_dev, _ = grid_search(t, y, coarse, 0.2, 0.01)
    X = np.column_stack([np.ones_like(t), np.cos(2 * np.pi * t / 365),
                         np.sin(2 * np.pi * t / 365)])
    resolution = 0.005**2 * 0.25 * np.abs(X).T.dot(np.abs(X)).sum()
    gap = grid_dev - sub.deviance
    ok = (model.converged and recovered and sub.converged and -1e-9 <= gap <= resolution
          and elapsed < 1.0)
    record(4, "GLM recovery", ok,
           f"coef {np.round(coef, 3).tolist()}, grid gap {gap:.2e} <= {resolution:.2e}, "
           f"{elapsed * 1000:.1f} ms")


def test_criterion_5_intercept_only_exactness():
    worst = 0.0
    for seed, years in ((5, 5), (6, 40), (7, 1)):
        occ = generated_occurrence(seed=seed, years=years)
        prop = occ.outcome.mean()
        model = fit_occurrence(occ, k=0)
        worst = max(worst, abs(model.beta0 - math.log(prop / (1 - prop))))
    record(5, "intercept-only exactness", worst <= 1e-10, f"max |diff| {worst:.1e}")


def test_criterion_6_contingency_and_pod():
    rng = np.random.default_rng(6)
    ok = True
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 2000))
        g = np.where(rng.random(n) < 0.6, rng.random(n) * 0.8, rng.gamma(0.7, 15.0, n))
        p = np.where(rng.random(n) < 0.6, rng.random(n) * 0.8, rng.gamma(0.7, 15.0, n))
        table = rain_day_contingency((g, p))
        cells = (table.hits, table.misses, table.false_alarms, table.correct_negatives)
        ok &= cells == contingency_loop(g.tolist(), p.tolist(), 0.85) and sum(cells) == n
        events = table.hits + table.misses
        ok &= pod(table) == (table.hits / events if events else None)
        loop = category_pod_loop(g.tolist(), p.tolist())
        ok &= {int(k): v for k, v in category_pod((g, p)).items()} == loop
        for row in category_outcome_decomposition((g, p)).values():
            worst = max(worst, abs(row.true_hit + row.true_miss + row.lower + row.higher - 1))
    ok &= worst <= 1e-12
    record(6, "contingency and POD", ok, f"100 trials, max row-sum error {worst:.1e}")


def test_criterion_7_threshold_sweep():
    gauge = gauge_series(np.random.default_rng(7), years=40, station_id="G")
    drizzled = DailySeries("G", gauge.start_date, add_drizzle(gauge.values,
                                                              np.random.default_rng(8)))
    res = threshold_sweep(drizzled, gauge)
    best = res.best_threshold
    record(7, "threshold sweep", best is not None and best > 0.85, f"best Tr = {best}")


def test_criterion_8_spatial_screen_separation():
    smooth = blockiness_score(smooth_field(40, 40))
    tiles = blockiness_score(tile_field(40, 40, tile=4))
    ratio = tiles.blockiness / smooth.blockiness if smooth.blockiness else math.inf
    ok = smooth.verdict == "consistent" and tiles.verdict == "inconsistent" and ratio >= 10
    record(8, "spatial screen separation", ok,
           f"smooth {smooth.blockiness:.4f}, tiles {tiles.blockiness:.4f}, ratio {ratio:.0f}")


def _qc_fixture():
    rng = np.random.default_rng(9)
    start = dt.date(2000, 1, 1)
    n = (dt.date(2010, 1, 1) - start).days
    dates = np.datetime64(start) + np.arange(n)
    values = np.where(rng.random(n) < 0.5, np.round(rng.uniform(1, 20, n), 2), 0.0)
    jan_2007 = (dates >= np.datetime64("2007-01-01")) & (dates < np.datetime64("2007-02-01"))
    values[jan_2007] = 0.0
    values[100:106] = 12.3
    values[500] = 450.0
    values[900] = -3.0
    lines = ["date,rain_mm"] + [f"{d},{v!r}" for d, v in zip(dates, values.tolist())]
    lines.insert(1 + 1500, f"{dates[1500]},7.5")  # duplicate date
    return parse_daily_series("\n".join(lines) + "\n", "Q"), dates


def _blocks(mask):
    edges = np.diff(np.r_[0, mask.astype(np.int8), 0])
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def test_criterion_9_qc_rules():
    series, dates = _qc_fixture()
    out, report = run_qc(series, QcConfig())
    expected = {
        QcReason.CONSECUTIVE_IDENTICAL: [(100, 106)],
        QcReason.EXTREME_VALUE: [(500, 501)],
        QcReason.NEGATIVE_VALUE: [(900, 901)],
        QcReason.DUPLICATE_DATE: [(1500, 1501)],
    }
    jan = np.flatnonzero(dates == np.datetime64("2007-01-01"))[0]
    expected[QcReason.SUSPICIOUS_DRY_MONTH] = [(jan, jan + 31)]
    each_once = all(_blocks(out.flags == r) == b for r, b in expected.items())

    again, report2 = run_qc(out, QcConfig())
    idempotent = np.array_equal(again.flags, out.flags) and report2.counts == report.counts

    seventy = np.where(np.arange(1000) < 300, np.nan, np.arange(1000) % 5 * 1.1)
    at_70 = run_qc(DailySeries("S", dt.date(2000, 1, 1), seventy))[1].eligible
    below = np.where(np.arange(1000) < 301, np.nan, np.arange(1000) % 5 * 1.1)
    below_70 = run_qc(DailySeries("S", dt.date(2000, 1, 1), below))[1].eligible

    year = lambda k: DailySeries("S", dt.date(2001, 1, 1),
                                 np.r_[np.ones(k), np.full(365 - k, np.nan)])
    at_355 = annual_summaries(year(355))[0].valid
    below_355 = annual_summaries(year(354))[0].valid

    ok = each_once and idempotent and at_70 and not below_70 and at_355 and not below_355
    record(9, "QC rules", ok,
           f"each reason once: {each_once}, idempotent: {idempotent}, "
           f"70% inclusive: {at_70 and not below_70}, 355 inclusive: {at_355 and not below_355}")


def _mean_over_stations(report, product, getter):
    values = [getter(p) for p in report["pairs"]
              if p["product"] == product and p["status"] == "scored"]
    return sum(values) / len(values), len(values)


def test_criterion_10_end_to_end(tmp_path):
    cfg = build_country(tmp_path / "country", years=40)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    t0 = time.perf_counter()
    code_a = main(["validate", "--config", str(cfg), "--out", str(out_a), "--jobs", "1"])
    elapsed = time.perf_counter() - t0
    code_b = main(["validate", "--config", str(cfg), "--out", str(out_b), "--jobs", "1"])

    names = sorted(p.name for p in out_a.iterdir())
    identical = names == sorted(p.name for p in out_b.iterdir()) and all(
        (out_a / n).read_bytes() == (out_b / n).read_bytes() for n in names)

    report = json.loads((out_a / "report.json").read_text())
    bias = lambda p: p["annual"]["rain_days"]["PBIAS"]
    dry_pod = lambda p: p["category_pod"]["Dry"]
    bias_id, n_id = _mean_over_stations(report, "IDENT", bias)
    bias_dz, n_dz = _mean_over_stations(report, "DRIZZLE", bias)
    pod_id, _ = _mean_over_stations(report, "IDENT", dry_pod)
    pod_dz, _ = _mean_over_stations(report, "DRIZZLE", dry_pod)
    ranked = bias_dz > bias_id and pod_dz < pod_id and n_id == n_dz == 3

    ok = code_a == code_b == 0 and identical and ranked and elapsed < 60.0
    record(10, "end-to-end synthetic country", ok,
           f"rain-day PBIAS {bias_id:.3g} vs {bias_dz:.3g}, dry POD {pod_id:.3g} vs "
           f"{pod_dz:.3g}, {elapsed:.1f}s, byte-identical: {identical}")
