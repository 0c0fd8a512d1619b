"""Posterior-predictive surfaces: per-draw composition, blending, aggregation.

Every retained draw is pushed through the observation equation at grid
cells: the latent fields are kriged to the cell sites (sampled from their
conditional in predictive mode, conditional mean in latent mode), daily
effects are read off the sampled series, and residual noise is added only in
predictive mode. Blocks whose buffered region covers a cell each produce a
per-draw value; blending averages them per draw, and temporal aggregation
averages days per draw, so both operations commute.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .mcmc import PosteriorDraws
from .spatialcov import build_covariance, kriging_weights
from .types import SiteId

LATENT = "latent"
PREDICTIVE = "predictive"


@dataclass(frozen=True)
class CellPrediction:
    """Summarized prediction for one cell and one period (day/season/year)."""

    cell: SiteId
    period: str
    mean: float
    sd: float
    pi_lo: float
    pi_hi: float
    n_blocks: int

    def __post_init__(self):
        if np.isfinite(self.pi_lo) and np.isfinite(self.pi_hi) and self.pi_lo > self.pi_hi:
            raise InputError(f"interval lo {self.pi_lo} > hi {self.pi_hi}")
        if np.isfinite(self.sd) and self.sd < 0:
            raise InputError(f"negative sd {self.sd}")


@dataclass
class CellBlockData:
    """Covariates of one block's cells over the requested days.

    ``aod``/``z`` are (n_cells, n_days[, p]) with NaN marking missing
    entries; a NaN AOD or covariate drops that cell-day from the block's
    contribution.
    """

    cell_ids: list[str]
    lons: np.ndarray
    lats: np.ndarray
    aod: np.ndarray
    z: np.ndarray
    day_offsets: np.ndarray  # offset of each requested day within the window


def kriging_caches(draws: PosteriorDraws, lons, lats):
    """Per-candidate kriging weights and conditional variances for new sites;
    reusable across draws and day chunks."""
    caches = []
    for phi in draws.phi_grid_km:
        cov = build_covariance(draws.lons, draws.lats, phi, draws.taper_range_km)
        caches.append(kriging_weights(cov, lons, lats))
    return caches


def predict_block(draws: PosteriorDraws, cells: CellBlockData, mode: str,
                  rng: np.random.Generator, caches=None) -> np.ndarray:
    """Per-draw predicted PM2.5, shape (n_cells, n_days, n_draws).

    In predictive mode the latent fields at cell sites are sampled from
    their kriging conditional and residual noise is added; in latent mode
    the conditional means are used and no noise enters. Cell-days with
    missing AOD or covariates come back NaN.
    """
    if mode not in (LATENT, PREDICTIVE):
        raise InputError(f"prediction mode must be {LATENT!r} or {PREDICTIVE!r}")
    n_cells = len(cells.cell_ids)
    n_days = cells.day_offsets.shape[0]
    k = draws.n_draws
    if np.any(cells.day_offsets < 0) or np.any(cells.day_offsets >= draws.b0.shape[1]):
        raise InputError("requested day offsets fall outside the fitted window")

    if caches is None:
        caches = kriging_caches(draws, cells.lons, cells.lats)
    zg_percov = cells.z  # (n_cells, n_days, p)
    out = np.empty((n_cells, n_days, k))
    for i in range(k):
        wts1, var1 = caches[draws.phi1_idx[i]]
        wts2, var2 = caches[draws.phi2_idx[i]]
        w1c = wts1.T @ draws.w1[i]
        w2c = wts2.T @ draws.w2[i]
        if mode == PREDICTIVE:
            w1c = w1c + np.sqrt(var1) * rng.standard_normal(n_cells)
            w2c = w2c + np.sqrt(var2) * rng.standard_normal(n_cells)
        b0 = draws.b0[i, cells.day_offsets]
        b1 = draws.b1[i, cells.day_offsets]
        intercept = (draws.mu0[i] + draws.coreg[i, 0] * w1c)[:, None] + b0[None, :]
        slope = (draws.mu1[i] + draws.coreg[i, 1] * w1c
                 + draws.coreg[i, 2] * w2c)[:, None] + b1[None, :]
        vals = intercept + slope * cells.aod + zg_percov @ draws.gamma[i]
        if mode == PREDICTIVE:
            vals = vals + np.sqrt(draws.sigma2[i]) * rng.standard_normal((n_cells, n_days))
        out[:, :, i] = vals
    return out


def predict_records(draws: PosteriorDraws, lons, lats, aod, z, day_offsets,
                    rng: np.random.Generator) -> np.ndarray:
    """Full predictive draws for held-out point records, shape (n_records, K).

    Records at a fitted monitor site reuse that site's sampled field values;
    unseen sites are kriged and sampled. Residual noise is always included
    (this path exists for interval validation).
    """
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    aod = np.atleast_1d(np.asarray(aod, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    day_offsets = np.atleast_1d(np.asarray(day_offsets, dtype=np.intp))
    n = lons.shape[0]
    k = draws.n_draws

    # map record sites onto fitted latent sites where coordinates coincide
    fitted = {(lo, la): j for j, (lo, la) in enumerate(zip(draws.lons, draws.lats))}
    site_of = np.array([fitted.get((lo, la), -1) for lo, la in zip(lons, lats)],
                       dtype=np.intp)
    new_idx = np.flatnonzero(site_of < 0)
    caches = kriging_caches(draws, lons[new_idx], lats[new_idx]) if new_idx.size else None

    out = np.empty((n, k))
    for i in range(k):
        w1 = np.empty(n)
        w2 = np.empty(n)
        seen = site_of >= 0
        w1[seen] = draws.w1[i, site_of[seen]]
        w2[seen] = draws.w2[i, site_of[seen]]
        if new_idx.size:
            wts1, var1 = caches[draws.phi1_idx[i]]
            wts2, var2 = caches[draws.phi2_idx[i]]
            w1[new_idx] = wts1.T @ draws.w1[i] + np.sqrt(var1) * rng.standard_normal(new_idx.size)
            w2[new_idx] = wts2.T @ draws.w2[i] + np.sqrt(var2) * rng.standard_normal(new_idx.size)
        intercept = draws.mu0[i] + draws.coreg[i, 0] * w1 + draws.b0[i, day_offsets]
        slope = (draws.mu1[i] + draws.coreg[i, 1] * w1 + draws.coreg[i, 2] * w2
                 + draws.b1[i, day_offsets])
        out[:, i] = (intercept + slope * aod + z @ draws.gamma[i]
                     + np.sqrt(draws.sigma2[i]) * rng.standard_normal(n))
    return out


def blend_draws(block_values: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw unweighted mean across contributing blocks.

    Each input is (n_cells, n_days, K) aligned on the same cell/day/draw
    axes, NaN where the block does not contribute. Returns the blended array
    and the per-cell-day contributor count.
    """
    if not block_values:
        raise InputError("no block predictions to blend")
    stack = np.stack(block_values)
    contrib = np.isfinite(stack[..., 0])
    n_blocks = contrib.sum(axis=0)
    with np.errstate(invalid="ignore"):
        blended = np.nanmean(stack, axis=0)
    return blended, n_blocks


def aggregate_draws(values: np.ndarray) -> np.ndarray:
    """Average the day axis per draw: (n_cells, n_days, K) -> (n_cells, K).

    Days with missing values are skipped per cell; the result reflects the
    posterior of the period average, not the daily spread.
    """
    if values.shape[1] == 0:
        raise InputError("cannot aggregate over an empty period")
    with np.errstate(invalid="ignore"):
        return np.nanmean(values, axis=1)


def summarize_draws(values: np.ndarray):
    """Posterior mean/SD/90% interval along the trailing draw axis."""
    if values.shape[-1] < 2:
        raise InputError("summaries need at least 2 draws")
    mean = values.mean(axis=-1)
    sd = values.std(axis=-1, ddof=1)
    lo, hi = np.percentile(values, [5.0, 95.0], axis=-1)
    return mean, sd, lo, hi
