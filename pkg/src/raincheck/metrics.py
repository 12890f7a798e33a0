"""Continuous and categorical skill scores.

Continuous scores compare an estimate ``sim`` with observations ``obs``
(paired annual summaries). Categorical scores work on paired daily values.
Scores that cannot be computed come back as ``None``; the reason is kept in
:attr:`ContinuousScores.reasons`.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gauge_ingest import DailySeries
from .pairing import DEFAULT_RAIN_DAY_MM

# reason codes for absent scores
EMPTY = "empty"
ZERO_OBS_TOTAL = "zero_observed_total"
ZERO_VARIANCE = "zero_variance"
TOO_FEW_PAIRS = "too_few_pairs"
INSUFFICIENT = "insufficient_data"


def _pair(sim, obs):
    sim = np.asarray(sim, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if sim.shape != obs.shape or sim.ndim != 1:
        raise ValueError("sim and obs must be 1-D arrays of equal length")
    return sim, obs


def mean_error(sim, obs):
    """Mean of ``sim - obs``; positive means overestimation."""
    sim, obs = _pair(sim, obs)
    if sim.size == 0:
        return None
    return math.fsum(sim - obs) / sim.size


def pbias(sim, obs):
    """Percent bias, ``100 * sum(sim - obs) / sum(obs)``."""
    sim, obs = _pair(sim, obs)
    total = math.fsum(obs)
    if sim.size == 0 or not total > 0:
        return None
    return 100.0 * math.fsum(sim - obs) / total


def _centered_sums(sim, obs):
    n = sim.size
    ds = sim - math.fsum(sim) / n
    do = obs - math.fsum(obs) / n
    return math.fsum(ds * ds), math.fsum(do * do), math.fsum(ds * do)


def pearson_r(sim, obs):
    """Product-moment correlation, clamped to [-1, 1]."""
    sim, obs = _pair(sim, obs)
    if sim.size < 2:
        return None
    sss, soo, sso = _centered_sums(sim, obs)
    if sss <= 0 or soo <= 0:
        return None
    r = sso / math.sqrt(sss * soo)
    return min(1.0, max(-1.0, r))


def rsd(sim, obs):
    """Ratio of sample standard deviations (divisor ``n - 1``), sim over obs."""
    sim, obs = _pair(sim, obs)
    if sim.size < 2:
        return None
    sss, soo, _ = _centered_sums(sim, obs)
    if soo <= 0:
        return None
    return math.sqrt(sss / soo)


@dataclass(frozen=True)
class ContinuousScores:
    n: int
    me: Optional[float]
    pbias: Optional[float]
    r: Optional[float]
    rsd: Optional[float]
    reasons: dict = field(default_factory=dict)

    def items(self):
        return [("ME", self.me), ("PBIAS", self.pbias), ("r", self.r), ("RSD", self.rsd)]


def continuous_scores(sim, obs, min_pairs=2):
    """All four continuous scores with reasons for the absent ones.

    Fewer than ``min_pairs`` pairs marks every score insufficient.
    """
    sim, obs = _pair(sim, obs)
    n = int(sim.size)
    if n < min_pairs:
        reason = EMPTY if n == 0 else INSUFFICIENT
        return ContinuousScores(n, None, None, None, None,
                                {k: reason for k in ("ME", "PBIAS", "r", "RSD")})
    values = {
        "ME": mean_error(sim, obs),
        "PBIAS": pbias(sim, obs),
        "r": pearson_r(sim, obs),
        "RSD": rsd(sim, obs),
    }
    reasons = {}
    if values["PBIAS"] is None:
        reasons["PBIAS"] = ZERO_OBS_TOTAL
    if values["r"] is None:
        reasons["r"] = ZERO_VARIANCE
    if values["RSD"] is None:
        reasons["RSD"] = ZERO_VARIANCE
    return ContinuousScores(n, values["ME"], values["PBIAS"], values["r"], values["RSD"],
                            reasons)


class IntensityCategory(enum.IntEnum):
    DRY = 0
    LIGHT = 1
    MODERATE = 2
    HEAVY = 3
    VIOLENT = 4

    @property
    def label(self):
        return self.name.capitalize()


# lower edges of Light, Moderate, Heavy, Violent; an edge value belongs above
CATEGORY_EDGES = np.array([0.85, 5.0, 20.0, 40.0])
RAIN_CATEGORIES = tuple(c for c in IntensityCategory if c is not IntensityCategory.DRY)


def classify(values):
    """Vectorised intensity classification, returns integer category codes."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0) or np.any(np.isnan(values)):
        raise ValueError("intensity is undefined for negative or missing values")
    return np.searchsorted(CATEGORY_EDGES, values, side="right")


def classify_intensity(x):
    if x < 0 or math.isnan(x):
        raise ValueError(f"intensity is undefined for {x}")
    return IntensityCategory(int(np.searchsorted(CATEGORY_EDGES, x, side="right")))


def _daily(pairs):
    if isinstance(pairs, tuple):
        gauge, product = pairs
    else:
        gauge, product = pairs.gauge, pairs.product
    return np.asarray(gauge, dtype=np.float64), np.asarray(product, dtype=np.float64)


@dataclass(frozen=True)
class ContingencyTable:
    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int

    @property
    def total(self):
        return self.hits + self.misses + self.false_alarms + self.correct_negatives

    def proportions(self):
        """Each cell as a fraction of all paired days."""
        n = self.total
        cells = {
            "hits": self.hits,
            "misses": self.misses,
            "false_alarms": self.false_alarms,
            "correct_negatives": self.correct_negatives,
        }
        return {k: (v / n if n else None) for k, v in cells.items()}


def rain_day_contingency(pairs, threshold=DEFAULT_RAIN_DAY_MM):
    """2x2 table of rain-day detection; an event is a day with ``>= threshold``.

    ``pairs`` is a :class:`PairedDailySeries` or a ``(gauge, product)`` tuple.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    gauge, product = _daily(pairs)
    g = gauge >= threshold
    p = product >= threshold
    return ContingencyTable(
        hits=int(np.sum(g & p)),
        misses=int(np.sum(g & ~p)),
        false_alarms=int(np.sum(~g & p)),
        correct_negatives=int(np.sum(~g & ~p)),
    )


def pod(table):
    """Probability of detection, ``hits / (hits + misses)``."""
    events = table.hits + table.misses
    if events == 0:
        return None
    return table.hits / events


def category_pod(pairs):
    """Per-category POD: share of days in an observed category that the
    product placed in the same category. Categories never observed are
    left out.
    """
    gauge, product = _daily(pairs)
    cg, cp = classify(gauge), classify(product)
    out = {}
    for cat in IntensityCategory:
        sel = cg == cat
        n = int(sel.sum())
        if n:
            out[cat] = int(np.sum(cp[sel] == cat)) / n
    return out


@dataclass(frozen=True)
class OutcomeRow:
    n: int
    true_hit: float
    true_miss: float
    lower: float
    higher: float


def category_outcome_decomposition(pairs):
    """Split each observed category's days by what the product reported.

    For a rain category: ``true_hit`` (same category), ``true_miss``
    (product dry), ``lower`` (a lower rain category) and ``higher``. For
    observed dry days only ``true_hit`` and ``higher`` can be non-zero.
    """
    gauge, product = _daily(pairs)
    cg, cp = classify(gauge), classify(product)
    out = {}
    for cat in IntensityCategory:
        sel = cg == cat
        n = int(sel.sum())
        if not n:
            continue
        got = cp[sel]
        hit = int(np.sum(got == cat))
        higher = int(np.sum(got > cat))
        if cat is IntensityCategory.DRY:
            miss = lower = 0
        else:
            miss = int(np.sum(got == IntensityCategory.DRY))
            lower = n - hit - higher - miss
        out[cat] = OutcomeRow(n, hit / n, miss / n, lower / n, higher / n)
    return out


def observed_category_distribution(series):
    """Percent of rain days falling in each rain category.

    ``series`` is a DailySeries or an array of daily values (NaN = missing).
    Returns ``None`` when there is no rain day.
    """
    if isinstance(series, DailySeries):
        data = series.data
    else:
        data = np.asarray(series, dtype=np.float64)
    data = data[~np.isnan(data)]
    cats = classify(data)
    wet = cats[cats > IntensityCategory.DRY]
    if wet.size == 0:
        return None
    return {cat: 100.0 * int(np.sum(wet == cat)) / wet.size for cat in RAIN_CATEGORIES}


SCORES_CSV_HEADER = "station,product,summary,metric,value,n,reason_if_absent"


def score_rows(station_id, product_id, summary, scores, fmt):
    for name, value in scores.items():
        yield ",".join(
            [
                station_id,
                product_id,
                summary,
                name,
                "" if value is None else fmt(value),
                str(scores.n),
                scores.reasons.get(name, "") if value is None else "",
            ]
        )
