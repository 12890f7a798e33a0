"""Point-to-pixel validation of gridded rainfall products against rain gauges."""

from .errors import (
    ConfigError,
    DegenerateOccurrence,
    GridFormatError,
    InputError,
    InvariantError,
    ParseError,
    RaincheckError,
    ValidationError,
)
from .gauge_ingest import (
    DailySeries,
    QcConfig,
    QcReason,
    QcReport,
    StationMeta,
    parse_daily_series,
    parse_station_table,
    run_qc,
)
from .grid_store import (
    GridDescriptor,
    GriddedProduct,
    ProductMeta,
    extract_point_series,
    load_grid,
    nearest_cell,
    write_grid,
)
from .metrics import (
    ContingencyTable,
    IntensityCategory,
    classify_intensity,
    continuous_scores,
    mean_error,
    pbias,
    pearson_r,
    pod,
    rsd,
)
from .pairing import YearConvention, align, annual_summaries, assign_year, paired_annual
from .seasonal_model import (
    HarmonicModel,
    binarize,
    fit_occurrence,
    predict_occurrence,
    threshold_sweep,
)
from .spatial_consistency import blockiness_score, climatology_field

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContingencyTable",
    "DailySeries",
    "DegenerateOccurrence",
    "GridDescriptor",
    "GridFormatError",
    "GriddedProduct",
    "HarmonicModel",
    "InputError",
    "IntensityCategory",
    "InvariantError",
    "ParseError",
    "ProductMeta",
    "QcConfig",
    "QcReason",
    "QcReport",
    "RaincheckError",
    "StationMeta",
    "ValidationError",
    "YearConvention",
    "align",
    "annual_summaries",
    "assign_year",
    "binarize",
    "blockiness_score",
    "classify_intensity",
    "climatology_field",
    "continuous_scores",
    "extract_point_series",
    "fit_occurrence",
    "load_grid",
    "mean_error",
    "nearest_cell",
    "paired_annual",
    "parse_daily_series",
    "parse_station_table",
    "pbias",
    "pearson_r",
    "pod",
    "predict_occurrence",
    "rsd",
    "run_qc",
    "threshold_sweep",
    "write_grid",
]
