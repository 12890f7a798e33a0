"""Harmonic logistic models of daily rain occurrence.

The probability that day ``t`` of the year is a rain day is modelled as

    logit P(t) = b0 + sum_i [A_i cos(2 pi i t / p) + B_i sin(2 pi i t / p)]

and fitted by iteratively reweighted least squares. Each day of the year
is one binomial group (rain days out of observed days), which gives the
same estimates and Bernoulli deviance as fitting every day separately.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateOccurrence, InvariantError
from .pairing import CALENDAR_YEAR, DEFAULT_RAIN_DAY_MM, align

logger = logging.getLogger(__name__)

PERIOD = 365
DEFAULT_HARMONICS = 3
DEFAULT_SWEEP = (0.85, 2.0, 3.0, 4.0, 5.0)
PROB_FLOOR = 1e-15
SEPARATION_NORM = 30.0

_MONTH_START = np.array([0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334])


def day_index(dates, convention=CALENDAR_YEAR):
    """Day of the accounting year in 1..365, Feb 29 sharing Feb 28's index."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    months = dates.astype("datetime64[M]")
    month = months.astype(np.int64) % 12 + 1
    dom = (dates - months.astype("datetime64[D]")).astype(np.int64) + 1
    dom = np.where((month == 2) & (dom == 29), 28, dom)
    doy = _MONTH_START[month - 1] + dom
    origin = _MONTH_START[convention.start_month - 1] + 1
    return (doy - origin) % PERIOD + 1


@dataclass(frozen=True, eq=False)
class BinaryOccurrenceSeries:
    day_index: np.ndarray
    outcome: np.ndarray
    threshold: float
    year_convention: object = CALENDAR_YEAR

    def __len__(self):
        return self.outcome.size


def binarize_values(dates, values, threshold=DEFAULT_RAIN_DAY_MM, convention=CALENDAR_YEAR):
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    values = np.asarray(values, dtype=np.float64)
    keep = ~np.isnan(values)
    t = day_index(np.asarray(dates)[keep], convention)
    y = (values[keep] >= threshold).astype(np.int8)
    return BinaryOccurrenceSeries(t, y, float(threshold), convention)


def binarize(series, threshold=DEFAULT_RAIN_DAY_MM, convention=CALENDAR_YEAR):
    """Rain/no-rain outcome per observed day; a value equal to the threshold is rain."""
    return binarize_values(series.dates, series.data, threshold, convention)


def design_row(t, k=DEFAULT_HARMONICS, p=PERIOD):
    """``[1, cos(2 pi t/p), sin(2 pi t/p), ..., cos(2 pi k t/p), sin(2 pi k t/p)]``."""
    return design_matrix(np.array([t], dtype=np.float64), k, p)[0]


def design_matrix(t, k=DEFAULT_HARMONICS, p=PERIOD):
    t = np.asarray(t, dtype=np.float64)
    X = np.empty((t.size, 2 * k + 1))
    X[:, 0] = 1.0
    for i in range(1, k + 1):
        angle = 2.0 * np.pi * i * t / p
        X[:, 2 * i - 1] = np.cos(angle)
        X[:, 2 * i] = np.sin(angle)
    return X


def _log_sigmoid(eta):
    return -np.logaddexp(0.0, -eta)


def _deviance(eta, successes, trials):
    loglik = successes * _log_sigmoid(eta) + (trials - successes) * _log_sigmoid(-eta)
    return -2.0 * math.fsum(loglik)


def _sigmoid(eta):
    return np.exp(_log_sigmoid(eta))


@dataclass(frozen=True)
class HarmonicModel:
    k: int
    p: int
    beta0: float
    a: tuple
    b: tuple
    converged: bool
    deviance: float
    n_obs: int
    iterations: int = 0
    reason: Optional[str] = None
    deviance_path: tuple = field(default=(), repr=False)

    @property
    def coefficients(self):
        """Coefficients in design-row order."""
        out = [self.beta0]
        for a, b in zip(self.a, self.b):
            out += [a, b]
        return np.array(out)


def fit_occurrence(
    occurrence,
    k=DEFAULT_HARMONICS,
    p=PERIOD,
    tol=1e-8,
    max_iter=100,
    ridge=1e-8,
):
    """Maximum-likelihood harmonic logistic fit by IRLS.

    Iteration stops when the deviance changes by less than ``tol`` or after
    ``max_iter`` steps. ``ridge`` is added to the diagonal of the weighted
    normal equations only, so the fixed point is the exact MLE. Steps that
    would raise the deviance are halved. A coefficient vector whose norm
    exceeds 30 signals (quasi-)separation and the model is returned with
    ``converged=False``.

    Raises
    ------
    DegenerateOccurrence
        If every outcome is 0 or every outcome is 1.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    t = np.asarray(occurrence.day_index, dtype=np.int64)
    y = np.asarray(occurrence.outcome, dtype=np.float64)
    n_obs = int(y.size)
    n_coef = 2 * k + 1
    if n_obs < 10 * n_coef:
        raise ValueError(f"need at least {10 * n_coef} observations, got {n_obs}")
    n_wet = float(y.sum())
    if n_wet == 0 or n_wet == n_obs:
        raise DegenerateOccurrence("degenerate occurrence: outcome has a single class")

    trials = np.bincount(t, minlength=p + 1).astype(np.float64)
    successes = np.bincount(t, weights=y, minlength=p + 1)
    days = np.flatnonzero(trials)
    trials, successes = trials[days], successes[days]
    X = design_matrix(days, k, p)

    beta = np.zeros(n_coef)
    beta[0] = math.log(n_wet / (n_obs - n_wet))
    eta = X @ beta
    dev = _deviance(eta, successes, trials)
    path = [dev]
    converged = False
    reason = None
    it = 0
    eye = ridge * np.eye(n_coef)
    for it in range(1, max_iter + 1):
        mu = _sigmoid(eta)
        w = trials * mu * (1.0 - mu)
        score = X.T @ (successes - trials * mu)
        info = X.T @ (w[:, None] * X) + eye
        step = np.linalg.solve(info, score)
        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            cand_eta = X @ cand
            cand_dev = _deviance(cand_eta, successes, trials)
            if cand_dev <= dev:
                break
            scale *= 0.5
        else:
            # no descent left: already at the optimum to rounding
            converged = True
            break
        change = dev - cand_dev
        beta, eta, dev = cand, cand_eta, cand_dev
        path.append(dev)
        if np.linalg.norm(beta) > SEPARATION_NORM:
            reason = "separation: coefficient norm exceeds 30"
            break
        if change < tol:
            converged = True
            break
    else:
        reason = f"no convergence in {max_iter} iterations"

    if any(b > a for a, b in zip(path, path[1:])):
        raise InvariantError("IRLS deviance increased")
    if not np.all(np.isfinite(beta)):
        converged = False
        reason = reason or "non-finite coefficients"

    return HarmonicModel(
        k=k,
        p=p,
        beta0=float(beta[0]),
        a=tuple(float(v) for v in beta[1::2]),
        b=tuple(float(v) for v in beta[2::2]),
        converged=converged,
        deviance=dev,
        n_obs=n_obs,
        iterations=it,
        reason=reason,
        deviance_path=tuple(path),
    )


def score_vector(model, occurrence):
    """Gradient of the log-likelihood at the model's coefficients."""
    X = design_matrix(occurrence.day_index, model.k, model.p)
    mu = _sigmoid(X @ model.coefficients)
    return X.T @ (np.asarray(occurrence.outcome, dtype=np.float64) - mu)


def predict_occurrence(model, t):
    """Rain-day probability on day(s) ``t``; periodic in ``model.p``."""
    if not model.converged:
        raise ValueError(f"model did not converge ({model.reason})")
    t = np.mod(np.asarray(t, dtype=np.float64), model.p)
    prob = _sigmoid(design_matrix(np.atleast_1d(t), model.k, model.p) @ model.coefficients)
    prob = np.clip(prob, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return prob if np.ndim(t) else float(prob[0])


def occurrence_curve(model):
    """Probabilities for ``t = 1 .. p``."""
    return predict_occurrence(model, np.arange(1, model.p + 1))


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    model: Optional[HarmonicModel]
    curve_distance: Optional[float]
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepResult:
    gauge_threshold: float
    gauge_model: Optional[HarmonicModel]
    rows: tuple
    best_threshold: Optional[float]
    error: Optional[str] = None
    n_pairs: int = 0


def _try_fit(occ, k):
    try:
        model = fit_occurrence(occ, k)
    except (DegenerateOccurrence, ValueError, np.linalg.LinAlgError) as exc:
        return None, str(exc)
    if not model.converged:
        return model, model.reason
    return model, None


def threshold_sweep(
    product,
    gauge,
    thresholds=DEFAULT_SWEEP,
    k=DEFAULT_HARMONICS,
    convention=CALENDAR_YEAR,
    gauge_threshold=DEFAULT_RAIN_DAY_MM,
):
    """Compare the gauge occurrence curve with product curves at several thresholds.

    Both series are first restricted to days observed in both. The gauge is
    fitted once at ``gauge_threshold``; the product once per threshold. The
    distance between curves is the mean absolute difference over the 365
    days, and the threshold with the smallest distance is reported. A failed
    fit is recorded on its row and does not stop the sweep.
    """
    if len(thresholds) == 0:
        raise ValueError("thresholds must not be empty")
    pairs = align(gauge, product)
    g_occ = binarize_values(pairs.dates, pairs.gauge, gauge_threshold, convention)
    g_model, g_err = _try_fit(g_occ, k)
    g_curve = occurrence_curve(g_model) if g_err is None else None

    rows = []
    for tr in sorted(float(x) for x in thresholds):
        p_occ = binarize_values(pairs.dates, pairs.product, tr, convention)
        model, err = _try_fit(p_occ, k)
        dist = None
        if err is None and g_curve is not None:
            dist = float(np.mean(np.abs(g_curve - occurrence_curve(model))))
        rows.append(SweepRow(tr, model, dist, err))
    scored = [r for r in rows if r.curve_distance is not None]
    best = min(scored, key=lambda r: (r.curve_distance, r.threshold)).threshold if scored else None
    if g_err:
        logger.info("gauge occurrence fit failed for %s: %s", gauge.station_id, g_err)
    return SweepResult(gauge_threshold, g_model, tuple(rows), best, g_err, len(pairs))


def model_header(k):
    cols = ["station", "product", "Tr", "k", "beta0"]
    for i in range(1, k + 1):
        cols += [f"A{i}", f"B{i}"]
    return ",".join(cols + ["converged", "deviance", "curve_distance"])
