"""End-to-end validation run and its output files."""

import datetime as dt
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError, InvariantError
from .gauge_ingest import QcReason, read_daily_series, read_station_table, run_qc
from .grid_store import (
    Excluded,
    ProductMeta,
    extract_point_series,
    read_grid,
)
from .metrics import (
    RAIN_CATEGORIES,
    SCORES_CSV_HEADER,
    IntensityCategory,
    category_outcome_decomposition,
    category_pod,
    continuous_scores,
    observed_category_distribution,
    pod,
    rain_day_contingency,
    score_rows,
)
from .pairing import (
    ANNUAL_CSV_HEADER,
    SUMMARY_KINDS,
    align,
    annual_rows,
    annual_summaries,
    paired_annual,
)
from .seasonal_model import model_header, occurrence_curve, threshold_sweep
from .spatial_consistency import (
    blockiness_score,
    climatology_field,
    field_csv,
    field_svg,
)

logger = logging.getLogger(__name__)

ALL_STAGES = frozenset({"spatial", "annual", "seasonal", "intensity"})
VERDICT_RANK = {"consistent": 0, "suspicious": 1, "inconsistent": 2}


def fmt(value):
    """Fixed 6-significant-digit formatting used in every output file."""
    return format(float(value), ".6g")


def _num(value):
    return None if value is None else float(fmt(value))


@dataclass
class StationResult:
    meta: object
    qc_report: object
    series: object
    category_distribution: Optional[dict]
    issues: tuple = ()


@dataclass
class ProductResult:
    source: object
    product: object
    fields: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    verdict: Optional[str] = None

    @property
    def product_id(self):
        return self.source.product_id


@dataclass
class PairResult:
    station_id: str
    product_id: str
    status: str
    cell: Optional[tuple] = None
    n_paired_days: int = 0
    gauge_summaries: list = field(default_factory=list)
    product_summaries: list = field(default_factory=list)
    annual_scores: dict = field(default_factory=dict)
    contingency: object = None
    pod: Optional[float] = None
    category_pod: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    sweep: object = None


@dataclass
class ValidationReport:
    stations: list
    products: list
    pairs: list
    stages: frozenset = ALL_STAGES
    rain_day_threshold: float = 0.85
    harmonics: int = 3


def _period(meta):
    return dt.date(meta.period_start, 1, 1), dt.date(meta.period_end, 12, 31)


def _load_stations(config):
    metas = {m.station_id: m for m in read_station_table(config.station_table)}
    unknown = sorted(set(config.station_series) - set(metas))
    if unknown:
        raise InputError(f"series given for stations missing from the table: {unknown}")
    out = []
    for sid in sorted(config.station_series):
        meta = metas[sid]
        raw = read_daily_series(config.station_series[sid], sid, config.missing_tokens)
        qc = config.qc_for(meta.country)
        if config.use_station_period:
            start, end = _period(meta)
            qc = replace(qc, analysis_start=start, analysis_end=end)
        series, report = run_qc(raw, qc)
        dist = observed_category_distribution(series)
        out.append(StationResult(meta, report, series, dist, raw.issues))
    return out


def _screen_product(result, config):
    for kind in config.spatial_kinds:
        fld = climatology_field(
            result.product, kind, config.rain_day_threshold,
            config.spatial_year_convention, config.min_valid_days,
        )
        result.fields[kind] = fld
        result.scores[kind] = blockiness_score(
            fld, config.consistent_below, config.suspicious_below
        )
    verdicts = [s.verdict for s in result.scores.values() if s.verdict is not None]
    result.verdict = max(verdicts, key=VERDICT_RANK.get) if verdicts else None


def _load_products(config, stages):
    out = []
    for src in config.products:
        meta = ProductMeta(src.product_id, src.inputs_class)
        product = read_grid(src.descriptor, src.payload, meta)
        res = ProductResult(src, product)
        if "spatial" in stages and config.spatial_enabled:
            _screen_product(res, config)
        out.append(res)
    return out


def _evaluate_pair(station, prod, config, stages):
    sid, pid = station.meta.station_id, prod.product_id
    result = PairResult(sid, pid, "scored")
    if not station.qc_report.eligible:
        result.status = "excluded: gauge ineligible"
        return result
    if prod.verdict == "inconsistent" and config.exclude_inconsistent:
        result.status = "excluded: spatial inconsistency"
        return result
    extraction = extract_point_series(prod.product, station.meta, config.max_missing_fraction)
    if isinstance(extraction, Excluded):
        result.status = f"excluded: {extraction.reason}"
        return result
    result.cell = (extraction.row, extraction.col, extraction.distance_km)
    gauge, pseries = station.series, extraction.series
    conv = config.country(station.meta.country).year_convention
    pairs = align(gauge, pseries, pid)
    result.n_paired_days = len(pairs)
    offsets = (pairs.dates - np.datetime64(gauge.start_date, "D")).astype(np.int64)
    if not np.array_equal(gauge.data[offsets], pairs.gauge):
        raise InvariantError(f"{sid}/{pid}: paired gauge values differ from the source")

    if "annual" in stages:
        thr = config.rain_day_threshold
        result.gauge_summaries = annual_summaries(gauge, thr, conv, config.min_valid_days)
        result.product_summaries = annual_summaries(pseries, thr, conv, config.min_valid_days)
        joined = paired_annual(
            result.gauge_summaries, result.product_summaries, config.screen_product_years
        )
        for kind in SUMMARY_KINDS:
            ap = joined[kind]
            result.annual_scores[kind] = continuous_scores(ap.product, ap.gauge)

    if "intensity" in stages:
        table = rain_day_contingency(pairs, config.rain_day_threshold)
        if table.total != len(pairs):
            raise InvariantError(f"{sid}/{pid}: contingency cells do not partition the days")
        result.contingency = table
        result.pod = pod(table)
        result.category_pod = category_pod(pairs)
        result.outcome = category_outcome_decomposition(pairs)

    if "seasonal" in stages:
        result.sweep = threshold_sweep(
            pseries, gauge, config.sweep_thresholds, config.harmonics, conv,
            config.rain_day_threshold,
        )
    return result


def _safe_evaluate(station, prod, config, stages):
    try:
        return _evaluate_pair(station, prod, config, stages)
    except InvariantError:
        raise
    except Exception as exc:  # isolate one bad pair from the batch
        logger.exception("pair %s/%s failed", station.meta.station_id, prod.product_id)
        return PairResult(station.meta.station_id, prod.product_id, f"failed: {exc}")


def run_pipeline(config, jobs=1, stages=ALL_STAGES):
    """Run QC, spatial screening, extraction, pairing and scoring.

    ``stages`` selects which of ``spatial``, ``annual``, ``seasonal`` and
    ``intensity`` run; QC always runs. With no pair stage selected no
    station-product work is done. Pairs are evaluated on up to ``jobs``
    threads and collected in (station, product) order.
    """
    stages = frozenset(stages)
    unknown = stages - ALL_STAGES
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}")
    stations = _load_stations(config)
    products = _load_products(config, stages) if stages else []
    pair_stages = stages - {"spatial"}
    items = [(s, p) for s in stations for p in products] if pair_stages else []
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(lambda sp: _safe_evaluate(*sp, config, pair_stages), items))
    else:
        pairs = [_safe_evaluate(s, p, config, pair_stages) for s, p in items]
    if pair_stages and len(pairs) != len(stations) * len(products):
        raise InvariantError("report is missing station-product pairs")
    return ValidationReport(
        stations, products, pairs, stages, config.rain_day_threshold, config.harmonics
    )


def _slug(name):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _pair_file(station_id, product_id, artifact, ext):
    return f"{_slug(station_id)}__{_slug(product_id)}__{artifact}.{ext}"


def _lines(header, rows):
    return "\n".join([header, *rows]) + "\n"


def _qc_bundle(st):
    d = st.qc_report.to_dict()
    d["parse_issues"] = [{"line": i.line, "message": i.message} for i in st.issues]
    if st.category_distribution is not None:
        d["observed_category_percent"] = {
            c.label: _num(v) for c, v in st.category_distribution.items()
        }
    return d


def _scores_bundle(scores):
    return {
        "n": scores.n,
        **{name: _num(v) for name, v in scores.items()},
        "reasons": dict(sorted(scores.reasons.items())),
    }


def _model_bundle(model):
    if model is None:
        return None
    return {
        "beta0": _num(model.beta0),
        "A": [_num(a) for a in model.a],
        "B": [_num(b) for b in model.b],
        "converged": model.converged,
        "deviance": _num(model.deviance),
        "n_obs": model.n_obs,
        "reason": model.reason,
    }


def _pair_bundle(pr):
    out = {"station": pr.station_id, "product": pr.product_id, "status": pr.status}
    if pr.cell is not None:
        out["cell"] = {"row": pr.cell[0], "col": pr.cell[1], "distance_km": _num(pr.cell[2])}
        out["n_paired_days"] = pr.n_paired_days
    if pr.annual_scores:
        out["annual"] = {k: _scores_bundle(v) for k, v in pr.annual_scores.items()}
    if pr.contingency is not None:
        t = pr.contingency
        out["contingency"] = {
            "hits": t.hits,
            "misses": t.misses,
            "false_alarms": t.false_alarms,
            "correct_negatives": t.correct_negatives,
            "proportions": {k: _num(v) for k, v in t.proportions().items()},
            "pod": _num(pr.pod),
        }
        out["category_pod"] = {c.label: _num(v) for c, v in pr.category_pod.items()}
        out["category_outcome"] = {
            c.label: {
                "n": row.n,
                "true_hit": _num(row.true_hit),
                "true_miss": _num(row.true_miss),
                "lower": _num(row.lower),
                "higher": _num(row.higher),
            }
            for c, row in pr.outcome.items()
        }
    if pr.sweep is not None:
        sw = pr.sweep
        out["seasonal"] = {
            "gauge_threshold": sw.gauge_threshold,
            "gauge_model": _model_bundle(sw.gauge_model),
            "gauge_error": sw.error,
            "best_threshold": sw.best_threshold,
            "rows": [
                {
                    "Tr": r.threshold,
                    "model": _model_bundle(r.model),
                    "curve_distance": _num(r.curve_distance),
                    "error": r.error,
                }
                for r in sw.rows
            ],
        }
    return out


def report_json(report):
    bundle = {
        "rain_day_threshold": report.rain_day_threshold,
        "stages": sorted(report.stages),
        "stations": [_qc_bundle(s) for s in report.stations],
        "products": [
            {
                "product": p.product_id,
                "inputs_class": p.source.inputs_class,
                "verdict": p.verdict,
                "note": "blockiness is a quantitative proxy for visual pixelation",
                "blockiness": {
                    k: {
                        "score": _num(s.blockiness),
                        "verdict": s.verdict,
                        "n_cells": s.n_cells,
                        "reason": s.reason,
                    }
                    for k, s in p.scores.items()
                },
            }
            for p in report.products
        ],
        "pairs": [_pair_bundle(pr) for pr in report.pairs],
    }
    return json.dumps(bundle, indent=2, sort_keys=True) + "\n"


def _model_row(station_id, product_id, tr, model, k, dist):
    cells = [station_id, product_id, fmt(tr), str(k)]
    if model is None:
        cells += [""] * (2 * k + 1) + ["false", "", ""]
    else:
        cells.append(fmt(model.beta0))
        for a, b in zip(model.a, model.b):
            cells += [fmt(a), fmt(b)]
        cells += ["true" if model.converged else "false", fmt(model.deviance)]
        cells.append("" if dist is None else fmt(dist))
    return ",".join(cells)


def _curve_csv(pr, threshold):
    sw = pr.sweep
    g = occurrence_curve(sw.gauge_model) if sw.error is None else None
    row = next((r for r in sw.rows if r.threshold == threshold), None)
    p = None
    if row is not None and row.error is None:
        p = occurrence_curve(row.model)
    lines = ["t,p_gauge,p_product"]
    for t in range(1, 366):
        gv = "" if g is None else fmt(g[t - 1])
        pv = "" if p is None else fmt(p[t - 1])
        lines.append(f"{t},{gv},{pv}")
    return "\n".join(lines) + "\n"


def _categories_csv(pr):
    lines = ["category,n_obs,pod,true_hit,true_miss,lower,higher"]
    for cat in IntensityCategory:
        row = pr.outcome.get(cat)
        if row is None:
            lines.append(f"{cat.label},0,,,,,")
            continue
        lines.append(",".join([
            cat.label, str(row.n), fmt(pr.category_pod[cat]),
            fmt(row.true_hit), fmt(row.true_miss), fmt(row.lower), fmt(row.higher),
        ]))
    return "\n".join(lines) + "\n"


def _contingency_csv(pr):
    t = pr.contingency
    props = t.proportions()
    lines = ["cell,count,proportion"]
    for name in ("hits", "misses", "false_alarms", "correct_negatives"):
        p = props[name]
        lines.append(f"{name},{getattr(t, name)},{'' if p is None else fmt(p)}")
    lines.append(f"pod,,{'' if pr.pod is None else fmt(pr.pod)}")
    return "\n".join(lines) + "\n"


def build_outputs(report):
    """Map of file name to file text for a report."""
    files = {}
    files["qc_report.json"] = json.dumps(
        [_qc_bundle(s) for s in report.stations], indent=2, sort_keys=True
    ) + "\n"
    files["category_distribution.csv"] = _lines(
        "station,category,percent",
        [
            f"{s.meta.station_id},{c.label},{fmt(v)}"
            for s in report.stations
            if s.category_distribution is not None
            for c, v in s.category_distribution.items()
        ],
    )
    if not report.stages:
        return files

    files["report.json"] = report_json(report)
    files["status.csv"] = _lines(
        "station,product,status",
        [f"{p.station_id},{p.product_id},{p.status}" for p in report.pairs],
    )
    if "spatial" in report.stages:
        files["spatial.csv"] = _lines(
            "product,kind,blockiness,verdict,n_cells,reason",
            [
                ",".join([
                    p.product_id, kind,
                    "" if s.blockiness is None else fmt(s.blockiness),
                    s.verdict or "", str(s.n_cells), s.reason or "",
                ])
                for p in report.products
                for kind, s in p.scores.items()
            ],
        )
        for p in report.products:
            for kind, fld in p.fields.items():
                stem = f"{_slug(p.product_id)}__{kind}"
                files[f"{stem}__field.csv"] = field_csv(fld, fmt)
                files[f"{stem}__heatmap.svg"] = field_svg(fld, title=f"{p.product_id} {kind}")

    scored = [p for p in report.pairs if p.status == "scored"]
    if "annual" in report.stages:
        rows = []
        for pr in scored:
            for kind in SUMMARY_KINDS:
                rows.extend(score_rows(pr.station_id, pr.product_id, kind,
                                       pr.annual_scores[kind], fmt))
        files["scores.csv"] = _lines(SCORES_CSV_HEADER, rows)
        rows = []
        for pr in scored:
            rows.extend(annual_rows(pr.station_id, "gauge", pr.gauge_summaries, fmt))
            rows.extend(annual_rows(pr.station_id, pr.product_id, pr.product_summaries, fmt))
        files["annual_summaries.csv"] = _lines(ANNUAL_CSV_HEADER, rows)

    if "intensity" in report.stages:
        rows = []
        for pr in scored:
            for cat in RAIN_CATEGORIES + (IntensityCategory.DRY,):
                if cat in pr.category_pod:
                    rows.append(f"{pr.station_id},{pr.product_id},{cat.label},"
                                f"{fmt(pr.category_pod[cat])}")
            files[_pair_file(pr.station_id, pr.product_id, "categories", "csv")] = (
                _categories_csv(pr)
            )
            files[_pair_file(pr.station_id, pr.product_id, "contingency", "csv")] = (
                _contingency_csv(pr)
            )
        files["category_pod.csv"] = _lines("station,product,category,pod", rows)

    if "seasonal" in report.stages:
        k = report.harmonics
        rows = []
        for pr in scored:
            sw = pr.sweep
            rows.append(_model_row(pr.station_id, "gauge", sw.gauge_threshold,
                                   sw.gauge_model, k, None))
            for r in sw.rows:
                rows.append(_model_row(pr.station_id, pr.product_id, r.threshold,
                                       r.model, k, r.curve_distance))
            files[_pair_file(pr.station_id, pr.product_id, "curves", "csv")] = (
                _curve_csv(pr, report.rain_day_threshold)
            )
        files["seasonal_models.csv"] = _lines(model_header(k), rows)
        files["threshold_choice.csv"] = _lines(
            "station,product,best_Tr",
            [
                f"{pr.station_id},{pr.product_id},"
                f"{'' if pr.sweep.best_threshold is None else fmt(pr.sweep.best_threshold)}"
                for pr in scored
            ],
        )
    return files


def emit_outputs(report, out_dir):
    """Write every output file; returns the sorted list of paths written."""
    out_dir = Path(out_dir)
    files = build_outputs(report)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(files):
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(files[name])
            written.append(path)
    except OSError as exc:
        raise InputError(f"cannot write outputs to {out_dir}: {exc}") from exc
    return written


def flag_summary(report):
    """Per-station flag counts keyed by reason label, for terminal output."""
    return {
        s.meta.station_id: {QcReason(r).label: c for r, c in s.qc_report.counts.items() if c}
        for s in report.stations
    }
