"""Tapered exponential covariance for the latent unit-variance fields.

The covariance of each latent field is exp(-d/phi) multiplied by a
Wendland-1 taper with compact support, so the matrix is sparse and stays
positive definite (Schur product of PD kernels). Factorization uses a
reverse Cuthill-McKee fill-reducing permutation followed by a banded
Cholesky; solves and log-determinants run on the cached factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import InputError, NumericalError
from .geo import distance_matrix_km, pairwise_distances_km

log = logging.getLogger(__name__)

# Diagonal jitter escalation on factorization failure.
JITTER_START = 1e-10
JITTER_MAX = 1e-6


def taper_weight(d, taper_range: float):
    """Wendland-1 taper (1 - d/r)^4_+ (1 + 4 d/r); 1 at d=0, 0 beyond r."""
    if taper_range <= 0:
        raise InputError(f"taper range must be > 0, got {taper_range}")
    t = np.asarray(d, dtype=float) / taper_range
    w = np.where(t < 1.0, (1.0 - np.minimum(t, 1.0)) ** 4 * (1.0 + 4.0 * t), 0.0)
    if np.ndim(d) == 0:
        return float(w)
    return w


def tapered_correlation(d, range_phi: float, taper_range: float):
    """exp(-d/phi) * wendland1(d; taper_range), elementwise."""
    if range_phi <= 0:
        raise InputError(f"range phi must be > 0, got {range_phi}")
    return np.exp(-np.asarray(d, dtype=float) / range_phi) * taper_weight(d, taper_range)


@dataclass
class TaperedCovariance:
    """Sparse tapered covariance over an ordered site list, with cached factor."""

    lons: np.ndarray
    lats: np.ndarray
    range_phi: float
    taper_range: float
    matrix: scipy.sparse.csr_matrix
    _perm: np.ndarray = field(repr=False)
    _iperm: np.ndarray = field(repr=False)
    _factor: np.ndarray = field(repr=False)  # banded lower Cholesky of permuted matrix
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """C^{-1} rhs via the banded factor; rhs may be a vector or matrix."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise InputError(f"rhs has leading dimension {rhs.shape[0]}, expected {self.n}")
        y = scipy.linalg.cho_solve_banded((self._factor, True), rhs[self._perm])
        return y[self._iperm]

    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(self._factor[0])))

    def inverse(self) -> np.ndarray:
        """Dense inverse, symmetrized; used to cache per-candidate precisions."""
        inv = self.solve(np.eye(self.n))
        return (inv + inv.T) / 2.0


def _banded_cholesky(dense_perm: np.ndarray, bandwidth: int):
    n = dense_perm.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    for k in range(bandwidth + 1):
        ab[k, : n - k] = np.diagonal(dense_perm, -k)
    return scipy.linalg.cholesky_banded(ab, lower=True)


def build_covariance(lons, lats, range_phi: float, taper_range: float) -> TaperedCovariance:
    """Assemble the sparse tapered covariance and cache its Cholesky factor.

    Entries exist only for site pairs closer than the taper range. The
    diagonal is exactly 1 (unit-variance latent process). On factorization
    failure the diagonal is jittered, escalating tenfold up to JITTER_MAX.
    """
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    n = lons.shape[0]
    if n < 1:
        raise InputError("need at least one site")
    d = distance_matrix_km(lons, lats)
    mask = d < taper_range
    vals = np.zeros_like(d)
    vals[mask] = tapered_correlation(d[mask], range_phi, taper_range)
    np.fill_diagonal(vals, 1.0)
    mat = scipy.sparse.csr_matrix(np.where(mask, vals, 0.0))

    perm = np.asarray(reverse_cuthill_mckee(mat, symmetric_mode=True))
    iperm = np.empty_like(perm)
    iperm[perm] = np.arange(n)
    dense_perm = mat.toarray()[np.ix_(perm, perm)]
    rows, cols = mat.nonzero()
    bandwidth = int(np.max(np.abs(iperm[rows] - iperm[cols]))) if rows.size else 0

    jitter = 0.0
    attempt = JITTER_START
    while True:
        try:
            factor = _banded_cholesky(dense_perm + jitter * np.eye(n), bandwidth)
            break
        except scipy.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                evals = np.linalg.eigvalsh(dense_perm)
                raise NumericalError(
                    f"covariance factorization failed at n={n}, phi={range_phi}, "
                    f"taper={taper_range}; smallest eigenvalue {evals[0]:.3e} "
                    f"after jitter {jitter:.1e}")
            jitter = attempt
            attempt *= 10.0
            log.warning("covariance factorization needed jitter %.1e (n=%d, phi=%g)",
                        jitter, n, range_phi)

    return TaperedCovariance(
        lons=lons, lats=lats, range_phi=range_phi, taper_range=taper_range,
        matrix=mat, _perm=perm, _iperm=iperm, _factor=factor, jitter=jitter)


def kriging(cov: TaperedCovariance, w: np.ndarray, new_lons, new_lats):
    """Conditional mean and variance of a unit-variance field at new sites.

    mean = C*^T C^{-1} w and var = 1 - C*^T C^{-1} C* elementwise, clamped
    to [0, 1]. At a site coincident with a monitor the mean interpolates the
    monitor value and the variance vanishes.
    """
    w = np.asarray(w, dtype=float)
    if w.shape[0] != cov.n:
        raise InputError(f"field has length {w.shape[0]}, expected {cov.n}")
    weights, var = kriging_weights(cov, new_lons, new_lats)
    return weights.T @ w, var


def kriging_weights(cov: TaperedCovariance, new_lons, new_lats):
    """Solve-once kriging system: returns (C^{-1} C*, conditional variance).

    The weight matrix is reusable across posterior draws that share the same
    range parameter.
    """
    new_lons = np.atleast_1d(np.asarray(new_lons, dtype=float))
    new_lats = np.atleast_1d(np.asarray(new_lats, dtype=float))
    d = pairwise_distances_km(cov.lons, cov.lats, new_lons, new_lats)
    cross = np.where(d < cov.taper_range,
                     tapered_correlation(d, cov.range_phi, cov.taper_range), 0.0)
    weights = cov.solve(cross)
    var = 1.0 - np.einsum("ij,ij->j", weights, cross)
    if np.any(var < -1e-8):
        raise NumericalError(
            f"kriging variance fell below -1e-8 (min {var.min():.3e}); "
            "covariance solve is inconsistent")
    return weights, np.clip(var, 0.0, 1.0)
