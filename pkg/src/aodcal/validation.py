"""Random and spatial 10-fold cross-validation with the paper-style metrics.

R-CV assigns records to folds uniformly at random; S-CV clusters monitor
locations with seeded k-means (Lloyd with restarts) so every record of a
monitor lands in one fold, testing spatial extrapolation. Metrics follow
the downscaling convention: R-squared, slope and intercept come from the
least-squares regression of observed on predicted, RMSE from the raw
differences, and interval length/coverage from the 90% predictive interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .types import MonitorRecord, RegionId

R_CV = "rcv"
S_CV = "scv"
KMEANS_RESTARTS = 50
# rough km-per-degree scaling so clustering distances track ground distance
KM_PER_DEG_LAT = 110.57


@dataclass(frozen=True)
class FoldPlan:
    scheme: str
    k: int
    seed: int
    record_folds: np.ndarray            # fold per record index
    site_folds: dict[str, int] = field(default_factory=dict)  # S-CV only

    def __post_init__(self):
        if self.scheme not in (R_CV, S_CV):
            raise InputError(f"unknown CV scheme {self.scheme!r}")


def _kmeans_lloyd(points: np.ndarray, k: int, rng: np.random.Generator,
                  max_iter: int = 100) -> tuple[np.ndarray, float]:
    """One seeded Lloyd run with k-means++ init; empty clusters get the
    farthest point reassigned."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
        centers[j] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    labels = np.zeros(n, dtype=np.intp)
    for _ in range(max_iter):
        dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = dists.argmin(axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                far = dists[np.arange(n), new_labels].argmax()
                new_labels[far] = j
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
    inertia = float(np.sum((points - centers[labels]) ** 2))
    return labels, inertia


def make_folds(records: list[MonitorRecord], scheme: str, k: int,
               seed: int) -> FoldPlan:
    """Partition records into k folds under the chosen scheme, seeded."""
    if k < 2:
        raise InputError(f"need k >= 2 folds, got {k}")
    n = len(records)
    if n == 0:
        raise InputError("cannot build folds on zero records")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if scheme == R_CV:
        folds = np.empty(n, dtype=np.intp)
        perm = rng.permutation(n)
        for f, chunk in enumerate(np.array_split(perm, k)):
            folds[chunk] = f
        return FoldPlan(scheme=R_CV, k=k, seed=seed, record_folds=folds)

    if scheme != S_CV:
        raise InputError(f"unknown CV scheme {scheme!r}")
    sites: dict[str, tuple[float, float]] = {}
    for r in records:
        sites.setdefault(r.site.id, (r.site.lon, r.site.lat))
    if len(sites) < k:
        raise InputError(f"S-CV needs at least {k} monitors, got {len(sites)}")
    ids = sorted(sites)
    lon = np.array([sites[i][0] for i in ids])
    lat = np.array([sites[i][1] for i in ids])
    mean_lat = math.radians(float(lat.mean()))
    points = np.column_stack([lon * KM_PER_DEG_LAT * math.cos(mean_lat),
                              lat * KM_PER_DEG_LAT])
    best_labels, best_inertia = None, math.inf
    for _ in range(KMEANS_RESTARTS):
        labels, inertia = _kmeans_lloyd(points, k, rng)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    site_folds = {sid: int(f) for sid, f in zip(ids, best_labels)}
    folds = np.array([site_folds[r.site.id] for r in records], dtype=np.intp)
    return FoldPlan(scheme=S_CV, k=k, seed=seed, record_folds=folds,
                    site_folds=site_folds)


def regression_metrics(obs: np.ndarray, pred: np.ndarray) -> dict[str, float]:
    """R2/slope/intercept from OLS of observed on predicted, plus RMSE.

    A constant predictor carries no information: slope 0, intercept at the
    observed mean, R2 exactly 0.
    """
    obs = np.asarray(obs, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if obs.shape != pred.shape or obs.ndim != 1 or obs.size == 0:
        raise InputError("metrics need matching non-empty 1-d arrays")
    rmse = float(np.sqrt(np.mean((obs - pred) ** 2)))
    sxx = float(np.sum((pred - pred.mean()) ** 2))
    sst = float(np.sum((obs - obs.mean()) ** 2))
    if sxx == 0.0:
        return {"r2": 0.0, "rmse": rmse, "slope": 0.0,
                "intercept": float(obs.mean())}
    slope = float(np.sum((pred - pred.mean()) * (obs - obs.mean())) / sxx)
    intercept = float(obs.mean() - slope * pred.mean())
    fitted = intercept + slope * pred
    sse = float(np.sum((obs - fitted) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - sse / sst
    return {"r2": r2, "rmse": rmse, "slope": slope, "intercept": intercept}


def coverage_check(obs: np.ndarray, draws: np.ndarray) -> float:
    """Fraction of observations inside their 90% predictive interval."""
    obs = np.asarray(obs, dtype=float)
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] != obs.shape[0]:
        raise InputError("draws must be (n_obs, n_draws)")
    if draws.shape[1] < 2:
        raise InputError("coverage needs at least 2 draws per prediction")
    lo, hi = np.percentile(draws, [5.0, 95.0], axis=1)
    return float(np.mean((obs >= lo) & (obs <= hi)))


def interval_lengths(draws: np.ndarray) -> np.ndarray:
    lo, hi = np.percentile(np.asarray(draws, dtype=float), [5.0, 95.0], axis=1)
    return hi - lo


@dataclass(frozen=True)
class CvReport:
    """Metric bundle per region plus the pooled row, one CV scheme."""

    scheme: str
    k: int
    seed: int
    rows: dict[str, dict[str, float]]   # region name or "overall" -> metrics
    skipped: tuple[str, ...] = ()       # "(fold, block)" labels that were skipped

    def overall(self) -> dict[str, float]:
        return self.rows["overall"]


def build_report(scheme: str, k: int, seed: int, regions: list[RegionId | None],
                 obs: np.ndarray, pred_mean: np.ndarray, draws: np.ndarray,
                 skipped: tuple[str, ...] = ()) -> CvReport:
    """Assemble the per-region and overall metric table from predictions."""
    rows: dict[str, dict[str, float]] = {}

    def metric_row(mask: np.ndarray) -> dict[str, float]:
        m = regression_metrics(obs[mask], pred_mean[mask])
        m["mean_pi90_length"] = float(np.mean(interval_lengths(draws[mask])))
        m["pi90_coverage"] = coverage_check(obs[mask], draws[mask])
        m["n_records"] = int(mask.sum())
        return m

    region_names = np.array([r.value if r is not None else "?" for r in regions])
    for name in sorted(set(region_names)):
        mask = region_names == name
        if mask.any():
            rows[name] = metric_row(mask)
    rows["overall"] = metric_row(np.ones(len(obs), dtype=bool))
    return CvReport(scheme=scheme, k=k, seed=seed, rows=rows, skipped=skipped)


def cross_validate(records, grid_cells, plan: FoldPlan, chain_config,
                   buffer_km: float = 100.0, workers: int = 1,
                   prediction_seed_base: int = 0):
    """Refit affected blocks per fold and score held-out records.

    Thin wrapper over the pipeline orchestration so the metric suite and the
    fold logic live next to each other; see pipeline.cross_validate_impl.
    """
    from . import pipeline

    return pipeline.cross_validate_impl(records, grid_cells, plan, chain_config,
                                        buffer_km=buffer_km, workers=workers)
