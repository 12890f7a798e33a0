"""Run configuration read from a TOML file.

Relative paths are resolved against the directory holding the config file.
Example::

    output_dir = "out"

    [analysis]
    rain_day_threshold = 0.85
    sweep_thresholds = [0.85, 2, 3, 4, 5]
    harmonics = 3

    [qc]
    max_daily = 400.0

    [countries.Zambia]
    year_start_month = 8
    wet_months = [10, 11, 12, 1, 2, 3, 4]

    [stations]
    table = "stations.csv"

    [stations.series]
    Chipata = "series/Chipata.csv"

    [[products]]
    id = "CHIRPS"
    descriptor = "grids/chirps.json"
    payload = "grids/chirps.f32"
    inputs_class = "satellite+gauge"
"""

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .gauge_ingest import DEFAULT_MISSING_TOKENS, QcConfig
from .grid_store import INPUT_CLASSES
from .pairing import MIN_VALID_DAYS, YearConvention
from .seasonal_model import DEFAULT_HARMONICS, DEFAULT_SWEEP
from .spatial_consistency import CONSISTENT_BELOW, KINDS, SUSPICIOUS_BELOW


@dataclass(frozen=True)
class ProductSource:
    product_id: str
    descriptor: Path
    payload: Path
    inputs_class: str = "satellite"


@dataclass(frozen=True)
class CountrySettings:
    year_convention: YearConvention = YearConvention(1)
    wet_months: Optional[frozenset] = None


@dataclass(frozen=True)
class RunConfig:
    station_table: Path
    station_series: dict
    products: tuple
    output_dir: Path
    countries: dict = field(default_factory=dict)
    rain_day_threshold: float = 0.85
    sweep_thresholds: tuple = DEFAULT_SWEEP
    harmonics: int = DEFAULT_HARMONICS
    qc: QcConfig = QcConfig()
    use_station_period: bool = True
    missing_tokens: frozenset = DEFAULT_MISSING_TOKENS
    max_missing_fraction: float = 1.0
    min_valid_days: int = MIN_VALID_DAYS
    screen_product_years: bool = True
    spatial_enabled: bool = True
    exclude_inconsistent: bool = True
    spatial_kinds: tuple = KINDS
    consistent_below: float = CONSISTENT_BELOW
    suspicious_below: float = SUSPICIOUS_BELOW
    spatial_year_convention: YearConvention = YearConvention(1)

    def country(self, name):
        return self.countries.get(name, CountrySettings())

    def qc_for(self, country):
        wet = self.country(country).wet_months
        if wet is None:
            return self.qc
        return replace(self.qc, wet_months=wet)


_QC_KEYS = {
    "min_run": int,
    "min_value": float,
    "max_daily": float,
    "dry_month_floor": float,
    "min_station_years": int,
    "min_month_coverage": float,
    "eligibility": float,
}


def _take(table, key, kind, default, where):
    if key not in table:
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{where}.{key} must be {kind.__name__}, got {value!r}")
    return value


def _path(base, raw, where, must_exist=True):
    if not isinstance(raw, str) or not raw:
        raise ConfigError(f"{where} must be a non-empty path string")
    p = Path(raw)
    if not p.is_absolute():
        p = base / p
    if must_exist and not p.exists():
        raise ConfigError(f"{where}: {p} does not exist")
    return p


def _thresholds(values, where):
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where} must be a non-empty list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"{where} values must be positive numbers")
        out.append(float(v))
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{where} must be strictly increasing")
    return tuple(out)


def _months(values, where):
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{where} must be a non-empty list of months")
    if any(isinstance(m, bool) or not isinstance(m, int) or not 1 <= m <= 12 for m in values):
        raise ConfigError(f"{where} months must be integers in 1..12")
    return frozenset(values)


def parse_config(data, base_dir):
    """Validate a parsed TOML mapping into a :class:`RunConfig`."""
    base = Path(base_dir)
    known = {"output_dir", "analysis", "qc", "spatial", "countries", "stations", "products"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    stations = data.get("stations")
    if not isinstance(stations, dict) or "table" not in stations:
        raise ConfigError("[stations] table is required")
    table = _path(base, stations["table"], "stations.table")
    series_raw = stations.get("series", {})
    if not isinstance(series_raw, dict) or not series_raw:
        raise ConfigError("[stations.series] must map station names to series files")
    series = {
        str(name): _path(base, p, f"stations.series.{name}")
        for name, p in sorted(series_raw.items())
    }

    products = []
    seen = set()
    for i, item in enumerate(data.get("products", [])):
        where = f"products[{i}]"
        if not isinstance(item, dict) or "id" not in item:
            raise ConfigError(f"{where} needs an id")
        pid = str(item["id"])
        if pid in seen:
            raise ConfigError(f"duplicate product id {pid!r}")
        seen.add(pid)
        cls = item.get("inputs_class", "satellite")
        if cls not in INPUT_CLASSES:
            raise ConfigError(f"{where}.inputs_class must be one of {INPUT_CLASSES}")
        products.append(
            ProductSource(
                pid,
                _path(base, item.get("descriptor"), f"{where}.descriptor"),
                _path(base, item.get("payload"), f"{where}.payload"),
                cls,
            )
        )

    analysis = data.get("analysis", {})
    rain_thr = _take(analysis, "rain_day_threshold", float, 0.85, "analysis")
    if not rain_thr > 0:
        raise ConfigError("analysis.rain_day_threshold must be positive")
    sweep = _thresholds(analysis.get("sweep_thresholds", list(DEFAULT_SWEEP)),
                        "analysis.sweep_thresholds")
    harmonics = _take(analysis, "harmonics", int, DEFAULT_HARMONICS, "analysis")
    if harmonics < 0:
        raise ConfigError("analysis.harmonics must be non-negative")
    max_missing = _take(analysis, "max_missing_fraction", float, 1.0, "analysis")
    if not 0 <= max_missing <= 1:
        raise ConfigError("analysis.max_missing_fraction must lie in [0, 1]")
    min_days = _take(analysis, "min_valid_days", int, MIN_VALID_DAYS, "analysis")
    screen = _take(analysis, "screen_product_years", bool, True, "analysis")
    tokens = analysis.get("missing_tokens", sorted(DEFAULT_MISSING_TOKENS))
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ConfigError("analysis.missing_tokens must be a list of strings")

    qc_raw = data.get("qc", {})
    qc_kwargs = {k: _take(qc_raw, k, t, None, "qc") for k, t in _QC_KEYS.items()}
    qc_kwargs = {k: v for k, v in qc_kwargs.items() if v is not None}
    if "wet_months" in qc_raw:
        qc_kwargs["wet_months"] = _months(qc_raw["wet_months"], "qc.wet_months")
    use_period = _take(qc_raw, "use_station_period", bool, True, "qc")
    try:
        qc = QcConfig(**qc_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[qc]: {exc}") from None

    countries = {}
    for name, sect in sorted(data.get("countries", {}).items()):
        where = f"countries.{name}"
        if not isinstance(sect, dict):
            raise ConfigError(f"{where} must be a table")
        start = _take(sect, "year_start_month", int, 1, where)
        if not 1 <= start <= 12:
            raise ConfigError(f"{where}.year_start_month must be in 1..12")
        wet = _months(sect["wet_months"], f"{where}.wet_months") if "wet_months" in sect else None
        countries[name] = CountrySettings(YearConvention(start), wet)

    spatial = data.get("spatial", {})
    kinds = spatial.get("kinds", list(KINDS))
    if not isinstance(kinds, list) or not kinds or any(k not in KINDS for k in kinds):
        raise ConfigError(f"spatial.kinds must be a non-empty subset of {KINDS}")
    cons = _take(spatial, "consistent_below", float, CONSISTENT_BELOW, "spatial")
    susp = _take(spatial, "suspicious_below", float, SUSPICIOUS_BELOW, "spatial")
    if not 0 < cons <= susp:
        raise ConfigError("spatial thresholds must satisfy 0 < consistent_below <= suspicious_below")

    map_start = _take(spatial, "year_start_month", int, 1, "spatial")
    if not 1 <= map_start <= 12:
        raise ConfigError("spatial.year_start_month must be in 1..12")

    out_dir = _path(base, data.get("output_dir", "out"), "output_dir", must_exist=False)
    return RunConfig(
        station_table=table,
        station_series=series,
        products=tuple(products),
        output_dir=out_dir,
        countries=countries,
        rain_day_threshold=rain_thr,
        sweep_thresholds=sweep,
        harmonics=harmonics,
        qc=qc,
        use_station_period=use_period,
        missing_tokens=frozenset(tokens),
        max_missing_fraction=max_missing,
        min_valid_days=min_days,
        screen_product_years=screen,
        spatial_enabled=_take(spatial, "enabled", bool, True, "spatial"),
        exclude_inconsistent=_take(spatial, "exclude_inconsistent", bool, True, "spatial"),
        spatial_kinds=tuple(kinds),
        consistent_below=cons,
        suspicious_below=susp,
        spatial_year_convention=YearConvention(map_start),
    )


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data, path.parent)
