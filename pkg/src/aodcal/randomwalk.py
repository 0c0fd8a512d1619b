"""First-order random-walk daily effects: structure, sampling, interpolation.

The daily intercept and slope series follow an intrinsic first-order random
walk. The level is unidentified against the global fixed effects, so every
emitted series is constrained to sum to zero. Conditional draws use a
tridiagonal (banded) factorization; the sum-to-zero constraint is imposed by
conditioning-by-kriging, the oblique projection that leaves the constrained
full conditional exactly invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError
from .types import TemporalWindow


@dataclass(frozen=True)
class Rw1Series:
    """A sum-to-zero daily effect series for one temporal window."""

    window: TemporalWindow | None
    values: np.ndarray
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise InputError(f"precision tau must be > 0, got {self.tau}")
        if self.window is not None and len(self.values) != self.window.n_days:
            raise InputError(
                f"series length {len(self.values)} != window days {self.window.n_days}")
        total = float(np.sum(self.values))
        scale = max(1.0, float(np.max(np.abs(self.values))) * len(self.values))
        if abs(total) > 1e-9 * scale:
            raise InputError(f"series must sum to zero, got {total}")


def rw1_structure(n_days: int) -> np.ndarray:
    """Tridiagonal RW1 structure matrix: rank n_days - 1, null space = constants."""
    if n_days < 2:
        raise InputError(f"random walk needs at least 2 days, got {n_days}")
    q = np.zeros((n_days, n_days))
    idx = np.arange(n_days)
    q[idx, idx] = 2.0
    q[0, 0] = q[-1, -1] = 1.0
    q[idx[:-1], idx[:-1] + 1] = -1.0
    q[idx[:-1] + 1, idx[:-1]] = -1.0
    return q


def _precision_banded(tau: float, day_weight: np.ndarray, sigma2: float) -> np.ndarray:
    """Lower banded storage of tau*Q + diag(day_weight)/sigma2."""
    n = day_weight.shape[0]
    ab = np.zeros((2, n))
    ab[0] = 2.0 * tau + day_weight / sigma2
    ab[0, 0] -= tau
    ab[0, -1] -= tau
    ab[1, :-1] = -tau
    return ab


def _solve_upper_bidiagonal(factor: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L^T x = rhs given the banded lower Cholesky factor."""
    n = factor.shape[1]
    ab = np.zeros((2, n))
    ab[0, 1:] = factor[1, :-1]
    ab[1] = factor[0]
    return scipy.linalg.solve_banded((0, 1), ab, rhs)


def sample_rw1_conditional(day_signal: np.ndarray, day_weight: np.ndarray,
                           tau: float, sigma2: float,
                           rng: np.random.Generator) -> np.ndarray:
    """Draw the series from its sum-to-zero full conditional.

    ``day_weight[t]`` is the summed squared per-record coefficient on day t
    and ``day_signal[t]`` the matching coefficient-weighted residual sum, so
    the unconstrained conditional is N(L^{-1} b, L^{-1}) with
    L = tau*Q + diag(day_weight)/sigma2 and b = day_signal/sigma2. The draw
    is then projected onto the zero-sum subspace along L^{-1} 1, which is the
    exact constrained conditional.
    """
    day_signal = np.asarray(day_signal, dtype=float)
    day_weight = np.asarray(day_weight, dtype=float)
    n = day_weight.shape[0]
    if n < 2:
        raise InputError(f"random walk needs at least 2 days, got {n}")
    if tau <= 0 or sigma2 <= 0:
        raise InputError(f"tau and sigma2 must be > 0, got tau={tau}, sigma2={sigma2}")

    if not np.any(day_weight > 0):
        # No likelihood contribution anywhere: the constrained prior. An
        # anchored walk recentred to mean zero has exactly that law.
        steps = rng.standard_normal(n - 1) / np.sqrt(tau)
        walk = np.concatenate([[0.0], np.cumsum(steps)])
        return walk - walk.mean()

    ab = _precision_banded(tau, day_weight, sigma2)
    # When the likelihood term underflows, tau*Q alone is singular (rank
    # n-1); a relative ridge keeps the factorization alive and the draw
    # degenerates gracefully towards the constrained prior.
    ridge = 0.0
    scale = float(np.max(ab[0]))
    while True:
        try:
            factor = scipy.linalg.cholesky_banded(
                ab + ridge * np.array([[scale], [0.0]]), lower=True)
            break
        except scipy.linalg.LinAlgError:
            if ridge >= 1e-4:
                raise InputError("temporal precision not positive definite "
                                 f"(tau={tau}, sigma2={sigma2})")
            ridge = 1e-12 if ridge == 0.0 else ridge * 100.0
    mean = scipy.linalg.cho_solve_banded((factor, True), day_signal / sigma2)
    draw = mean + _solve_upper_bidiagonal(factor, rng.standard_normal(n))
    correction = scipy.linalg.cho_solve_banded((factor, True), np.ones(n))
    return draw - correction * (draw.sum() / correction.sum())


def interpolate_missing_days(values: np.ndarray, observed: np.ndarray,
                             tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and variance of the walk at unobserved days.

    Conditions the intrinsic walk on the observed entries: interior gaps
    bridge linearly between neighbours, trailing gaps extrapolate the last
    value with variance growing by 1/tau per step. Returns full-length
    arrays; observed days carry their value and zero variance.
    """
    values = np.asarray(values, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    n = values.shape[0]
    if observed.shape[0] != n:
        raise InputError("mask length does not match series length")
    if tau <= 0:
        raise InputError(f"precision tau must be > 0, got {tau}")
    if not observed.any():
        raise InputError("cannot interpolate with zero observed days")

    mean = values.astype(float).copy()
    var = np.zeros(n)
    unobs = np.flatnonzero(~observed)
    if unobs.size == 0:
        return mean, var

    q = rw1_structure(n) if n >= 2 else np.ones((1, 1))
    obs = np.flatnonzero(observed)
    q_uu = q[np.ix_(unobs, unobs)]
    q_uo = q[np.ix_(unobs, obs)]
    # Q_UU is PD whenever at least one day is observed.
    q_uu_inv = np.linalg.inv(q_uu)
    mean[unobs] = -q_uu_inv @ (q_uo @ values[obs])
    var[unobs] = np.diag(q_uu_inv) / tau
    return mean, var
