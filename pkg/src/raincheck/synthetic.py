"""Synthetic gauge records, products and fields for tests and demos."""

import datetime as dt

import numpy as np

from .gauge_ingest import DailySeries
from .grid_store import GridDescriptor, GriddedProduct, ProductMeta
from .pairing import CALENDAR_YEAR
from .seasonal_model import day_index

# rain-day amount ranges (mm) per rain category, Light .. Violent
CATEGORY_RANGES = ((0.85, 5.0), (5.0, 20.0), (20.0, 40.0), (40.0, 80.0))


def seasonal_probability(t, beta0=-1.0, a1=1.5, b1=0.5, p=365):
    eta = beta0 + a1 * np.cos(2 * np.pi * t / p) + b1 * np.sin(2 * np.pi * t / p)
    return 1.0 / (1.0 + np.exp(-eta))


def gauge_series(
    rng,
    start=dt.date(1983, 1, 1),
    years=40,
    station_id="SYN",
    mix=(0.36, 0.39, 0.16, 0.09),
    convention=CALENDAR_YEAR,
    occurrence=(-1.0, 1.5, 0.5),
):
    """Daily record with harmonic rain occurrence and a given category mix.

    Rain days draw a category from ``mix`` (Light, Moderate, Heavy,
    Violent) and an amount uniformly inside it. Dry days get 0 or a trace
    below 0.85 mm.
    """
    end = dt.date(start.year + years, start.month, start.day)
    n = (end - start).days
    dates = np.datetime64(start, "D") + np.arange(n)
    prob = seasonal_probability(day_index(dates, convention), *occurrence)
    wet = rng.random(n) < prob
    mix = np.asarray(mix, dtype=np.float64)
    cats = rng.choice(len(CATEGORY_RANGES), size=n, p=mix / mix.sum())
    lo = np.array([r[0] for r in CATEGORY_RANGES])[cats]
    hi = np.array([r[1] for r in CATEGORY_RANGES])[cats]
    amount = np.round(lo + (hi - lo) * rng.random(n), 1)
    amount = np.clip(amount, lo, np.nextafter(hi, 0))
    trace = np.where(rng.random(n) < 0.2, np.round(rng.random(n) * 0.8, 1), 0.0)
    values = np.where(wet, amount, trace)
    return DailySeries(station_id, start, values)


def add_drizzle(values, rng, fraction=1.0, amount=1.0, threshold=0.85):
    """Add ``amount`` mm to a random ``fraction`` of the dry days."""
    values = np.array(values, dtype=np.float64)
    dry = np.flatnonzero(~np.isnan(values) & (values < threshold))
    if fraction < 1.0:
        dry = np.sort(rng.choice(dry, size=int(round(fraction * dry.size)), replace=False))
    values[dry] += amount
    return values


def product_from_cells(product_id, descriptor, cells, inputs_class="satellite"):
    """Product whose every cell holds ``cells[row, col](t)``, NaN as missing."""
    cube = np.array(cells, dtype=np.float64)
    cube = np.where(np.isnan(cube), descriptor.missing_sentinel, cube).astype("<f4")
    return GriddedProduct(ProductMeta(product_id, inputs_class), descriptor, cube)


def smooth_field(nlat, nlon, base=1000.0, slope=(15.0, 8.0), bumps=1, rng=None):
    """Planar trend plus broad Gaussian bumps, mimicking a smooth rainfall map."""
    i, j = np.meshgrid(np.arange(nlat), np.arange(nlon), indexing="ij")
    f = base + slope[0] * i + slope[1] * j
    rng = rng or np.random.default_rng(0)
    for _ in range(bumps):
        ci, cj = rng.uniform(0, nlat), rng.uniform(0, nlon)
        width = max(nlat, nlon) / 2.0
        f = f + 200.0 * np.exp(-((i - ci) ** 2 + (j - cj) ** 2) / (2 * width**2))
    return f


def tile_field(nlat, nlon, tile=4, low=500.0, high=1500.0):
    """Checkerboard of flat ``tile`` x ``tile`` squares alternating low/high."""
    i, j = np.meshgrid(np.arange(nlat), np.arange(nlon), indexing="ij")
    return np.where(((i // tile) + (j // tile)) % 2 == 0, low, high)


def descriptor_for(lat0, lon0, step, nlat, nlon, start, ntime, sentinel=-9999.0):
    return GridDescriptor(lat0, lon0, step, step, nlat, nlon, start, ntime, sentinel)
