"""Gridded products on disk and nearest-pixel extraction.

On disk a product is a JSON descriptor plus a flat ``.f32`` payload of
little-endian float32 values in row-major ``(time, lat, lon)`` order.
Cells equal to ``missing_sentinel`` or NaN are missing.
"""

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import GridFormatError, InputError, ParseError, ValidationError
from .gauge_ingest import DailySeries

EARTH_RADIUS_KM = 6371.0
INPUT_CLASSES = ("satellite", "satellite+gauge", "reanalysis")
DESCRIPTOR_FIELDS = (
    "lat0",
    "lon0",
    "dlat",
    "dlon",
    "nlat",
    "nlon",
    "time_start",
    "ntime",
    "missing_sentinel",
)
# distances closer than this are ties
_TIE_KM = 1e-9


@dataclass(frozen=True)
class ProductMeta:
    product_id: str
    inputs_class: str = "satellite"
    spatial_resolution: Optional[float] = None
    period_start: Optional[dt.date] = None
    period_end: Optional[dt.date] = None
    temporal_resolution: str = "daily"

    def __post_init__(self):
        if self.inputs_class not in INPUT_CLASSES:
            raise ValidationError(
                f"inputs_class {self.inputs_class!r} not in {INPUT_CLASSES}"
            )
        if self.spatial_resolution is not None and not self.spatial_resolution > 0:
            raise ValidationError("spatial_resolution must be positive")
        if self.temporal_resolution != "daily":
            raise ValidationError("only daily products are supported")


@dataclass(frozen=True)
class GridDescriptor:
    lat0: float
    lon0: float
    dlat: float
    dlon: float
    nlat: int
    nlon: int
    time_start: dt.date
    ntime: int
    missing_sentinel: float = -9999.0

    def __post_init__(self):
        if not (self.dlat > 0 and self.dlon > 0):
            raise ValidationError("grid spacing dlat and dlon must be positive")
        if self.nlat < 1 or self.nlon < 1:
            raise ValidationError("nlat and nlon must be at least 1")
        if self.ntime < 0:
            raise ValidationError("ntime must be non-negative")
        lat_end = self.lat0 + (self.nlat - 1) * self.dlat
        lon_end = self.lon0 + (self.nlon - 1) * self.dlon
        if not (-90 <= self.lat0 <= 90 and -90 <= lat_end <= 90):
            raise ValidationError("grid latitudes leave [-90, 90]")
        if not (-180 <= self.lon0 <= 180 and -180 <= lon_end <= 180):
            raise ValidationError("grid longitudes leave [-180, 180]")

    @property
    def lats(self):
        return self.lat0 + self.dlat * np.arange(self.nlat)

    @property
    def lons(self):
        return self.lon0 + self.dlon * np.arange(self.nlon)

    @property
    def shape(self):
        return (self.ntime, self.nlat, self.nlon)

    @property
    def time_end(self):
        return self.time_start + dt.timedelta(days=self.ntime - 1)

    def to_dict(self):
        return {
            "lat0": self.lat0,
            "lon0": self.lon0,
            "dlat": self.dlat,
            "dlon": self.dlon,
            "nlat": self.nlat,
            "nlon": self.nlon,
            "time_start": self.time_start.isoformat(),
            "ntime": self.ntime,
            "missing_sentinel": self.missing_sentinel,
        }


def parse_descriptor(raw):
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"descriptor is not JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise GridFormatError("descriptor must be a JSON object")
    keys = set(obj)
    if keys != set(DESCRIPTOR_FIELDS):
        missing = sorted(set(DESCRIPTOR_FIELDS) - keys)
        extra = sorted(keys - set(DESCRIPTOR_FIELDS))
        raise GridFormatError(f"descriptor fields: missing {missing}, unexpected {extra}")
    try:
        for name in ("nlat", "nlon", "ntime"):
            if isinstance(obj[name], bool) or not isinstance(obj[name], int):
                raise GridFormatError(f"{name} must be an integer")
        return GridDescriptor(
            lat0=float(obj["lat0"]),
            lon0=float(obj["lon0"]),
            dlat=float(obj["dlat"]),
            dlon=float(obj["dlon"]),
            nlat=obj["nlat"],
            nlon=obj["nlon"],
            time_start=dt.date.fromisoformat(obj["time_start"]),
            ntime=obj["ntime"],
            missing_sentinel=float(obj["missing_sentinel"]),
        )
    except (TypeError, ValueError) as exc:
        raise GridFormatError(f"bad descriptor value: {exc}") from None


def format_descriptor(descriptor):
    return json.dumps(descriptor.to_dict(), indent=2) + "\n"


@dataclass(frozen=True, eq=False)
class GriddedProduct:
    meta: ProductMeta
    descriptor: GridDescriptor
    values: np.ndarray
    missing: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype="<f4")
        if values.shape != self.descriptor.shape:
            raise GridFormatError(
                f"values shape {values.shape} != descriptor {self.descriptor.shape}"
            )
        missing = np.isnan(values) | (values == np.float32(self.descriptor.missing_sentinel))
        if np.any(values[~missing] < 0):
            raise ValidationError("product holds negative non-missing values")
        values.flags.writeable = False
        missing.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @property
    def product_id(self):
        return self.meta.product_id

    def cell_series(self, row, col, station_id=None):
        raw = self.values[:, row, col].astype(np.float64)
        raw[self.missing[:, row, col]] = np.nan
        return DailySeries(
            station_id if station_id is not None else f"{self.product_id}[{row},{col}]",
            self.descriptor.time_start,
            raw,
        )


def load_grid(descriptor_raw, payload, meta=None):
    """Build a product from descriptor text and payload bytes.

    Parameters
    ----------
    descriptor_raw : str
        JSON descriptor with exactly the :class:`GridDescriptor` fields.
    payload : bytes
        ``ntime * nlat * nlon`` little-endian float32 values.
    meta : ProductMeta, optional
        Defaults to an anonymous satellite product.
    """
    descriptor = parse_descriptor(descriptor_raw)
    expected = 4 * descriptor.ntime * descriptor.nlat * descriptor.nlon
    if len(payload) != expected:
        raise GridFormatError(
            f"payload holds {len(payload)} bytes, expected {expected} "
            f"({descriptor.ntime}x{descriptor.nlat}x{descriptor.nlon} float32)"
        )
    values = np.frombuffer(bytes(payload), dtype="<f4").reshape(descriptor.shape)
    if meta is None:
        meta = ProductMeta("product")
    if meta.spatial_resolution is None or meta.period_start is None:
        meta = ProductMeta(
            product_id=meta.product_id,
            inputs_class=meta.inputs_class,
            spatial_resolution=meta.spatial_resolution or descriptor.dlat,
            period_start=meta.period_start or descriptor.time_start,
            period_end=meta.period_end or descriptor.time_end,
        )
    return GriddedProduct(meta, descriptor, values)


def write_grid(product):
    """Inverse of :func:`load_grid`: return ``(descriptor_text, payload)``."""
    return (
        format_descriptor(product.descriptor),
        np.ascontiguousarray(product.values, dtype="<f4").tobytes(),
    )


def read_grid(descriptor_path, payload_path, meta=None):
    try:
        with open(descriptor_path, encoding="utf-8") as fh:
            raw = fh.read()
        with open(payload_path, "rb") as fh:
            payload = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read grid: {exc}") from exc
    return load_grid(raw, payload, meta)


def save_grid(product, descriptor_path, payload_path):
    text, payload = write_grid(product)
    with open(descriptor_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    with open(payload_path, "wb") as fh:
        fh.write(payload)


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; broadcasts over arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _first_min(d):
    best = d.min()
    return int(np.flatnonzero(d <= best + _TIE_KM)[0])


def nearest_cell(descriptor, lat, lon):
    """Grid cell whose center is closest (great circle) to a point.

    For any fixed row the closest column is the one with the smallest
    absolute longitude difference, so only that column needs to be scanned
    over rows. Ties go to the smaller row, then the smaller column.

    Returns
    -------
    (row, col, distance_km)
    """
    if not (-90 <= lat <= 90 and -180 <= lon <= 180):
        raise ValueError(f"point ({lat}, {lon}) outside [-90,90]x[-180,180]")
    dlon_abs = np.abs((descriptor.lons - lon + 180.0) % 360.0 - 180.0)
    best_dlon = dlon_abs.min()
    col = int(np.flatnonzero(dlon_abs <= best_dlon + 1e-12)[0])
    d = haversine_km(lat, lon, descriptor.lats, descriptor.lons[col])
    row = _first_min(d)
    # poles make every column of a row equidistant
    d_row = haversine_km(lat, lon, descriptor.lats[row], descriptor.lons)
    col = _first_min(d_row)
    return row, col, float(d_row[col])


@dataclass(frozen=True)
class SeriesExtraction:
    series: DailySeries
    row: int
    col: int
    distance_km: float


@dataclass(frozen=True)
class Excluded:
    reason: str


ExtractionResult = Union[SeriesExtraction, Excluded]


def extract_point_series(product, station, max_missing_fraction=1.0):
    """Point-to-pixel extraction of a station's nearest-cell series.

    The station is excluded when its nearest cell has no data at all, or when
    the cell's missing fraction exceeds ``max_missing_fraction``.
    """
    row, col, dist = nearest_cell(product.descriptor, station.latitude, station.longitude)
    missing = product.missing[:, row, col]
    n = missing.shape[0]
    n_missing = int(missing.sum())
    if n == 0 or n_missing == n:
        return Excluded("nearest pixel has no data")
    fraction = n_missing / n
    if fraction > max_missing_fraction:
        return Excluded(
            f"nearest pixel missing {fraction:.1%} of days "
            f"(limit {max_missing_fraction:.1%})"
        )
    series = product.cell_series(row, col, station_id=station.station_id)
    return SeriesExtraction(series, row, col, dist)


def grid_from_long_csv(raw, missing_sentinel=-9999.0):
    """Build a descriptor and value cube from long-format ``date,lat,lon,value``.

    Latitudes and longitudes must each form a uniformly spaced axis; dates
    must be daily. Combinations absent from the file become missing.
    """
    reader = csv.reader(io.StringIO(raw))
    try:
        header = [c.strip() for c in next(reader)]
    except StopIteration:
        raise ParseError("grid CSV is empty") from None
    need = ("date", "lat", "lon", "value")
    if any(c not in header for c in need):
        raise ParseError(f"header must contain {','.join(need)}", line=1)
    idx = [header.index(c) for c in need]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            day = dt.date.fromisoformat(row[idx[0]].strip())
        except (ValueError, IndexError):
            raise ParseError("bad date", lineno, "date") from None
        vals = []
        for name, i in zip(need[1:], idx[1:]):
            try:
                text = row[i].strip()
                vals.append(float(text) if text not in ("", "NA", "NaN") else math.nan)
            except (ValueError, IndexError):
                raise ParseError("bad number", lineno, name) from None
        rows.append((day, *vals))
    if not rows:
        raise ParseError("grid CSV has no data rows")

    def axis(values, name):
        uniq = np.unique(values)
        if uniq.size == 1:
            return uniq, 1.0
        steps = np.diff(uniq)
        step = float(np.median(steps))
        if not np.allclose(steps, step, rtol=1e-6, atol=1e-9):
            raise GridFormatError(f"{name} axis is not uniformly spaced")
        return uniq, step

    lats, dlat = axis(np.array([r[1] for r in rows]), "lat")
    lons, dlon = axis(np.array([r[2] for r in rows]), "lon")
    start = min(r[0] for r in rows)
    ntime = (max(r[0] for r in rows) - start).days + 1
    cube = np.full((ntime, lats.size, lons.size), missing_sentinel, dtype="<f4")
    for day, la, lo, v in rows:
        i = int(round((la - lats[0]) / dlat))
        j = int(round((lo - lons[0]) / dlon))
        cube[(day - start).days, i, j] = missing_sentinel if math.isnan(v) else v
    descriptor = GridDescriptor(
        lat0=float(lats[0]),
        lon0=float(lons[0]),
        dlat=dlat,
        dlon=dlon,
        nlat=int(lats.size),
        nlon=int(lons.size),
        time_start=start,
        ntime=ntime,
        missing_sentinel=float(missing_sentinel),
    )
    return descriptor, cube
