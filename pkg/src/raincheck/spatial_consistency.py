"""Long-term climatology maps and a pixelation ("blockiness") score.

The score is a reproducible stand-in for looking at a climatology map and
spotting square tiles with sharp edges. For every interior cell it takes
the absolute difference between the cell and the mean of its available
4-neighbours (a discrete Laplacian), takes the median over cells, and
divides by the interquartile range of the whole field. Smooth fields
score near 0; fields made of flat tiles with contrasting edges score high.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pairing import CALENDAR_YEAR, DEFAULT_RAIN_DAY_MM, MIN_VALID_DAYS, year_labels

KINDS = ("mean_annual_total", "mean_annual_rain_days", "mean_rain_per_rain_day")
CONSISTENT_BELOW = 0.05
SUSPICIOUS_BELOW = 0.15
MIN_INTERIOR_CELLS = 25

# heatmap colour ramp endpoints, low to high
RAMP_LOW = "#f7fbff"
RAMP_HIGH = "#08306b"
MISSING_COLOUR = "#bdbdbd"


@dataclass(frozen=True, eq=False)
class ClimatologyField:
    descriptor: object
    kind: str
    values: np.ndarray
    threshold: float = DEFAULT_RAIN_DAY_MM

    @property
    def missing(self):
        return np.isnan(self.values)


def climatology_field(
    product,
    kind,
    threshold=DEFAULT_RAIN_DAY_MM,
    convention=CALENDAR_YEAR,
    min_days=MIN_VALID_DAYS,
):
    """Per-cell long-term mean of an annual summary.

    Each cell-year needs ``min_days`` valid days to count. Cells with no
    valid year, and for ``mean_rain_per_rain_day`` cells that never
    recorded a rain day in a valid year, are missing (NaN).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown climatology kind {kind!r}")
    desc = product.descriptor
    dates = np.datetime64(desc.time_start, "D") + np.arange(desc.ntime)
    labels = year_labels(dates, convention)
    acc = np.zeros((desc.nlat, desc.nlon))
    n_years = np.zeros((desc.nlat, desc.nlon))
    for year in np.unique(labels):
        sel = labels == year
        vals = product.values[sel].astype(np.float64)
        ok = ~product.missing[sel]
        n_valid = ok.sum(axis=0)
        valid_year = n_valid >= min_days
        vals = np.where(ok, vals, 0.0)
        wet = ok & (vals >= threshold)
        if kind == "mean_annual_total":
            stat = vals.sum(axis=0)
            use = valid_year
        elif kind == "mean_annual_rain_days":
            stat = wet.sum(axis=0).astype(np.float64)
            use = valid_year
        else:
            n_wet = wet.sum(axis=0)
            use = valid_year & (n_wet > 0)
            stat = np.where(use, np.where(wet, vals, 0.0).sum(axis=0) / np.maximum(n_wet, 1), 0.0)
        acc += np.where(use, stat, 0.0)
        n_years += use
    with np.errstate(invalid="ignore", divide="ignore"):
        field = np.where(n_years > 0, acc / n_years, np.nan)
    return ClimatologyField(desc, kind, field, threshold)


@dataclass(frozen=True)
class ConsistencyScore:
    blockiness: Optional[float]
    verdict: Optional[str]
    n_cells: int
    reason: Optional[str] = None


def _neighbour_contrast(values):
    """|f - mean of available 4-neighbours| for interior cells, NaN elsewhere."""
    f = values
    nlat, nlon = f.shape
    out = np.full(f.shape, np.nan)
    if nlat < 3 or nlon < 3:
        return out
    centre = f[1:-1, 1:-1]
    neigh = np.stack([f[:-2, 1:-1], f[2:, 1:-1], f[1:-1, :-2], f[1:-1, 2:]])
    count = np.sum(~np.isnan(neigh), axis=0)
    total = np.nansum(neigh, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / count, np.nan)
    out[1:-1, 1:-1] = np.abs(centre - mean)
    return out


def verdict_for(score, consistent_below=CONSISTENT_BELOW, suspicious_below=SUSPICIOUS_BELOW):
    if score < consistent_below:
        return "consistent"
    if score < suspicious_below:
        return "suspicious"
    return "inconsistent"


def blockiness_score(
    field,
    consistent_below=CONSISTENT_BELOW,
    suspicious_below=SUSPICIOUS_BELOW,
    min_cells=MIN_INTERIOR_CELLS,
):
    """Score a climatology field for tile artefacts.

    ``field`` is a :class:`ClimatologyField` or a 2-D array (NaN = missing).
    Fewer than ``min_cells`` scorable interior cells gives an absent score.
    """
    values = np.asarray(getattr(field, "values", field), dtype=np.float64)
    contrast = _neighbour_contrast(values)
    scorable = contrast[~np.isnan(contrast)]
    if scorable.size < min_cells:
        return ConsistencyScore(
            None, None, int(scorable.size),
            f"only {scorable.size} interior cells with data (need {min_cells})",
        )
    q1, q3 = np.percentile(values[~np.isnan(values)], [25, 75])
    iqr = q3 - q1
    score = 0.0 if iqr <= 0 else float(np.median(scorable) / iqr)
    return ConsistencyScore(
        score, verdict_for(score, consistent_below, suspicious_below), int(scorable.size)
    )


def field_csv(field, fmt):
    lats, lons = field.descriptor.lats, field.descriptor.lons
    lines = ["lat,lon,value"]
    for i, lat in enumerate(lats):
        for j, lon in enumerate(lons):
            v = field.values[i, j]
            lines.append(f"{fmt(lat)},{fmt(lon)},{'' if np.isnan(v) else fmt(v)}")
    return "\n".join(lines) + "\n"


def _hex(colour):
    return np.array([int(colour[i:i + 2], 16) for i in (1, 3, 5)], dtype=np.float64)


def field_svg(field, cell_px=12, title=None):
    """Heatmap with north at the top and a linear ramp from RAMP_LOW to RAMP_HIGH."""
    values = field.values
    nlat, nlon = values.shape
    ok = ~np.isnan(values)
    lo = float(values[ok].min()) if ok.any() else 0.0
    hi = float(values[ok].max()) if ok.any() else 0.0
    c0, c1 = _hex(RAMP_LOW), _hex(RAMP_HIGH)
    width, height = nlon * cell_px, nlat * cell_px
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{title or field.kind} [{lo:.6g}, {hi:.6g}]</title>",
    ]
    for i in range(nlat):
        y = (nlat - 1 - i) * cell_px
        for j in range(nlon):
            if ok[i, j]:
                frac = 0.0 if hi == lo else (values[i, j] - lo) / (hi - lo)
                rgb = np.rint(c0 + frac * (c1 - c0)).astype(int)
                colour = "#{:02x}{:02x}{:02x}".format(*rgb)
            else:
                colour = MISSING_COLOUR
            parts.append(
                f'<rect x="{j * cell_px}" y="{y}" width="{cell_px}" height="{cell_px}" '
                f'fill="{colour}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
