"""Per-block Gibbs/Metropolis sampler for the downscaling model.

One block couples, per record r at site s and day t:

    y_r = (mu0 + c1*W1[s] + b0[t])
        + (mu1 + c2*W1[s] + c3*W2[s] + b1[t]) * aod_r
        + gamma . z_r + eps_r,     eps_r ~ N(0, sigma2)

with W1, W2 independent unit-variance tapered-exponential Gaussian fields,
b0, b1 sum-to-zero first-order random walks, and conjugate priors elsewhere.
The scan order is fixed: fixed effects, sigma2, latent fields, coreg
coefficients, temporal series, walk precisions, range parameters. Range
parameters move by Metropolis steps on a discrete candidate grid whose
factorizations are precomputed once per chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.special

from .errors import InputError, NumericalError
from .randomwalk import sample_rw1_conditional
from .spatialcov import TaperedCovariance, build_covariance
from .types import COVARIATES, MonitorRecord, RegionId, TemporalWindow

DEFAULT_PHI_GRID_KM = (50.0, 100.0, 200.0, 400.0, 800.0)


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters; defaults are deliberately vague and all overridable."""

    fixed_effect_var: float = 1e6   # N(0, v) on mu0, mu1 and gamma
    coreg_var: float = 1e6          # N(0, v) on c1, c2, c3 (c1, c3 truncated > 0)
    sigma2_shape: float = 0.001     # inverse-gamma on sigma2
    sigma2_rate: float = 0.001
    tau_shape: float = 0.001        # gamma on the walk precisions
    tau_rate: float = 0.001


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 5000
    n_burnin: int = 2000
    thin: int = 3
    master_seed: int = 0
    phi_grid_km: tuple[float, ...] = DEFAULT_PHI_GRID_KM
    taper_range_km: float = 500.0
    priors: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if not (self.n_iter > self.n_burnin >= 0):
            raise InputError(
                f"need n_iter > n_burnin >= 0, got {self.n_iter}, {self.n_burnin}")
        if self.thin < 1:
            raise InputError(f"thin must be >= 1, got {self.thin}")
        grid = tuple(self.phi_grid_km)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
            raise InputError(f"phi grid must be non-empty, positive, ascending: {grid}")

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.n_burnin) // self.thin


@dataclass
class BlockData:
    """Columnar view of one block's complete records.

    Sites are the unique monitor coordinates (coincident monitors share one
    latent site). ``site_idx``/``day_idx`` map each record to its latent
    site and to its day offset within the window.
    """

    y: np.ndarray
    aod: np.ndarray
    z: np.ndarray            # (n_records, p)
    site_idx: np.ndarray
    day_idx: np.ndarray
    lons: np.ndarray
    lats: np.ndarray
    site_ids: list[str]      # representative monitor id per latent site
    n_days: int
    window: TemporalWindow | None = None
    region: RegionId | None = None

    @property
    def n_records(self) -> int:
        return self.y.shape[0]

    @property
    def n_sites(self) -> int:
        return self.lons.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.z.shape[1]


def build_block_data(records: list[MonitorRecord], window: TemporalWindow,
                     region: RegionId | None = None) -> BlockData:
    """Assemble BlockData from standardized, complete records."""
    usable = [r for r in records if r.complete and window.contains(r.day)]
    if not usable:
        raise InputError("no usable records for this block")
    coord_index: dict[tuple[float, float], int] = {}
    site_ids: list[str] = []
    lons: list[float] = []
    lats: list[float] = []
    site_idx = np.empty(len(usable), dtype=np.intp)
    for i, r in enumerate(usable):
        key = (r.site.lon, r.site.lat)
        j = coord_index.get(key)
        if j is None:
            j = len(site_ids)
            coord_index[key] = j
            site_ids.append(r.site.id)
            lons.append(r.site.lon)
            lats.append(r.site.lat)
        site_idx[i] = j
    return BlockData(
        y=np.array([r.pm25 for r in usable]),
        aod=np.array([r.aod for r in usable]),
        z=np.array([r.z for r in usable]),
        site_idx=site_idx,
        day_idx=np.array([window.day_offset(r.day) for r in usable], dtype=np.intp),
        lons=np.array(lons),
        lats=np.array(lats),
        site_ids=site_ids,
        n_days=window.n_days,
        window=window,
        region=region,
    )


@dataclass
class ModelState:
    """One point of the chain; arrays are owned and mutated in place."""

    mu0: float
    mu1: float
    gamma: np.ndarray
    c1: float
    c2: float
    c3: float
    w1: np.ndarray
    w2: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    tau0: float
    tau1: float
    sigma2: float
    phi1_idx: int
    phi2_idx: int

    def copy(self) -> "ModelState":
        return replace(self, gamma=self.gamma.copy(), w1=self.w1.copy(),
                       w2=self.w2.copy(), b0=self.b0.copy(), b1=self.b1.copy())


@dataclass
class PhiCandidate:
    cov: TaperedCovariance
    inv: np.ndarray
    log_det: float


def build_phi_cache(data: BlockData, config: ChainConfig) -> list[PhiCandidate]:
    """Factor the covariance once per candidate range; shared by both fields."""
    cache = []
    for phi in config.phi_grid_km:
        cov = build_covariance(data.lons, data.lats, phi, config.taper_range_km)
        cache.append(PhiCandidate(cov=cov, inv=cov.inverse(), log_det=cov.log_det()))
    return cache


class _Precompute:
    """Quantities fixed across iterations: design blocks and day weights."""

    def __init__(self, data: BlockData):
        n = data.n_records
        self.x = np.column_stack([np.ones(n), data.aod, data.z])
        self.xtx = self.x.T @ self.x
        self.day_count = np.zeros(data.n_days)
        np.add.at(self.day_count, data.day_idx, 1.0)
        self.day_aod2 = np.zeros(data.n_days)
        np.add.at(self.day_aod2, data.day_idx, data.aod ** 2)


def initial_state(data: BlockData, config: ChainConfig) -> ModelState:
    mid = len(config.phi_grid_km) // 2
    return ModelState(
        mu0=float(np.mean(data.y)), mu1=0.0,
        gamma=np.zeros(data.n_covariates),
        c1=1.0, c2=0.0, c3=1.0,
        w1=np.zeros(data.n_sites), w2=np.zeros(data.n_sites),
        b0=np.zeros(data.n_days), b1=np.zeros(data.n_days),
        tau0=1.0, tau1=1.0,
        sigma2=max(float(np.var(data.y)), 1e-6) / 2.0 + 1e-6,
        phi1_idx=mid, phi2_idx=mid,
    )


def linear_predictor(state: ModelState, data: BlockData) -> np.ndarray:
    """Mean response for every record under the current state."""
    w1r = state.w1[data.site_idx]
    w2r = state.w2[data.site_idx]
    intercept = state.mu0 + state.c1 * w1r + state.b0[data.day_idx]
    slope = state.mu1 + state.c2 * w1r + state.c3 * w2r + state.b1[data.day_idx]
    return intercept + slope * data.aod + data.z @ state.gamma


def log_likelihood(state: ModelState, data: BlockData) -> float:
    resid = data.y - linear_predictor(state, data)
    n = data.n_records
    return float(-0.5 * n * math.log(2.0 * math.pi * state.sigma2)
                 - 0.5 * float(resid @ resid) / state.sigma2)


def sample_truncated_normal_positive(mean: float, sd: float,
                                     rng: np.random.Generator) -> float:
    """Draw from N(mean, sd^2) conditioned on being > 0."""
    alpha = -mean / sd
    if alpha < 5.0:
        # inverse CDF is accurate while Phi(alpha) is far from 1
        lo = scipy.special.ndtr(alpha)
        u = lo + rng.random() * (1.0 - lo)
        return mean + sd * float(scipy.special.ndtri(u))
    # deep tail: exponential rejection (Robert 1995) on the standardized scale
    lam = (alpha + math.sqrt(alpha * alpha + 4.0)) / 2.0
    while True:
        x = alpha + rng.exponential() / lam
        if rng.random() <= math.exp(-0.5 * (x - lam) ** 2):
            return mean + sd * x


def update_fixed_effects(state: ModelState, data: BlockData, pre: _Precompute,
                         prior_var: float, rng: np.random.Generator) -> None:
    w1r = state.w1[data.site_idx]
    w2r = state.w2[data.site_idx]
    resid = (data.y - state.c1 * w1r - state.b0[data.day_idx]
             - (state.c2 * w1r + state.c3 * w2r + state.b1[data.day_idx]) * data.aod)
    k = pre.x.shape[1]
    precision = pre.xtx / state.sigma2 + np.eye(k) / prior_var
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError:
        corr = np.corrcoef(pre.x, rowvar=False)
        np.fill_diagonal(corr, 0.0)
        i, j = np.unravel_index(np.nanargmax(np.abs(corr)), corr.shape)
        names = ["intercept", "aod"] + list(COVARIATES)
        raise NumericalError(
            f"fixed-effect design is rank deficient; most collinear columns: "
            f"{names[i]}, {names[j]}")
    b = pre.x.T @ resid / state.sigma2
    mean = scipy.linalg.cho_solve((chol, True), b)
    draw = mean + scipy.linalg.solve_triangular(chol.T, rng.standard_normal(k))
    state.mu0 = float(draw[0])
    state.mu1 = float(draw[1])
    state.gamma = draw[2:]


def update_sigma2(state: ModelState, data: BlockData, priors: PriorConfig,
                  rng: np.random.Generator, ssr_scale: float = 1.0) -> None:
    """Conjugate inverse-gamma draw.

    ``ssr_scale`` is a fault-injection hook used only by the sampler
    self-test; production paths leave it at 1.
    """
    resid = data.y - linear_predictor(state, data)
    ssr = float(resid @ resid) * ssr_scale
    shape = priors.sigma2_shape + 0.5 * data.n_records
    rate = priors.sigma2_rate + 0.5 * ssr
    state.sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate)


def _sample_field(prior_precision: np.ndarray, coef: np.ndarray,
                  resid: np.ndarray, site_idx: np.ndarray, n_sites: int,
                  sigma2: float, rng: np.random.Generator) -> np.ndarray:
    weight = np.zeros(n_sites)
    np.add.at(weight, site_idx, coef * coef)
    signal = np.zeros(n_sites)
    np.add.at(signal, site_idx, coef * resid)
    precision = prior_precision + np.diag(weight / sigma2)
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError:
        raise NumericalError("latent-field precision not positive definite")
    mean = scipy.linalg.cho_solve((chol, True), signal / sigma2)
    return mean + scipy.linalg.solve_triangular(chol.T, rng.standard_normal(n_sites))


def update_latent_fields(state: ModelState, data: BlockData,
                         cache: list[PhiCandidate], zg: np.ndarray,
                         rng: np.random.Generator) -> None:
    """Blocked draws of each field given the other (coefficients per record)."""
    w2r = state.w2[data.site_idx]
    base1 = (state.mu0 + state.b0[data.day_idx]
             + (state.mu1 + state.c3 * w2r + state.b1[data.day_idx]) * data.aod + zg)
    coef1 = state.c1 + state.c2 * data.aod
    state.w1 = _sample_field(cache[state.phi1_idx].inv, coef1, data.y - base1,
                             data.site_idx, data.n_sites, state.sigma2, rng)
    w1r = state.w1[data.site_idx]
    base2 = (state.mu0 + state.c1 * w1r + state.b0[data.day_idx]
             + (state.mu1 + state.c2 * w1r + state.b1[data.day_idx]) * data.aod + zg)
    coef2 = state.c3 * data.aod
    state.w2 = _sample_field(cache[state.phi2_idx].inv, coef2, data.y - base2,
                             data.site_idx, data.n_sites, state.sigma2, rng)


def update_coreg(state: ModelState, data: BlockData, zg: np.ndarray,
                 prior_var: float, rng: np.random.Generator) -> None:
    """Sequential scalar conjugate draws; c1 and c3 truncated positive."""
    w1r = state.w1[data.site_idx]
    w2r = state.w2[data.site_idx]
    base = (data.y - state.mu0 - state.b0[data.day_idx]
            - (state.mu1 + state.b1[data.day_idx]) * data.aod - zg)
    u1 = w1r
    u2 = w1r * data.aod
    u3 = w2r * data.aod

    def conditional(u, partial):
        prec = float(u @ u) / state.sigma2 + 1.0 / prior_var
        mean = float(u @ partial) / state.sigma2 / prec
        return mean, 1.0 / math.sqrt(prec)

    mean, sd = conditional(u1, base - state.c2 * u2 - state.c3 * u3)
    state.c1 = sample_truncated_normal_positive(mean, sd, rng)
    mean, sd = conditional(u2, base - state.c1 * u1 - state.c3 * u3)
    state.c2 = mean + sd * rng.standard_normal()
    mean, sd = conditional(u3, base - state.c1 * u1 - state.c2 * u2)
    state.c3 = sample_truncated_normal_positive(mean, sd, rng)


def update_temporal(state: ModelState, data: BlockData, pre: _Precompute,
                    zg: np.ndarray, rng: np.random.Generator) -> None:
    w1r = state.w1[data.site_idx]
    w2r = state.w2[data.site_idx]
    slope_nob1 = state.mu1 + state.c2 * w1r + state.c3 * w2r
    r0 = (data.y - state.mu0 - state.c1 * w1r
          - (slope_nob1 + state.b1[data.day_idx]) * data.aod - zg)
    signal0 = np.zeros(data.n_days)
    np.add.at(signal0, data.day_idx, r0)
    state.b0 = sample_rw1_conditional(signal0, pre.day_count, state.tau0,
                                      state.sigma2, rng)
    r1 = (data.y - state.mu0 - state.c1 * w1r - state.b0[data.day_idx]
          - slope_nob1 * data.aod - zg)
    signal1 = np.zeros(data.n_days)
    np.add.at(signal1, data.day_idx, data.aod * r1)
    state.b1 = sample_rw1_conditional(signal1, pre.day_aod2, state.tau1,
                                      state.sigma2, rng)


def update_taus(state: ModelState, priors: PriorConfig,
                rng: np.random.Generator) -> None:
    t = state.b0.shape[0]
    for attr, series in (("tau0", state.b0), ("tau1", state.b1)):
        quad = float(np.sum(np.diff(series) ** 2))
        shape = priors.tau_shape + 0.5 * (t - 1)
        rate = priors.tau_rate + 0.5 * quad
        setattr(state, attr, float(rng.gamma(shape, 1.0 / rate)))


def _field_log_prior(w: np.ndarray, cand: PhiCandidate) -> float:
    return -0.5 * cand.log_det - 0.5 * float(w @ (cand.inv @ w))


def update_phi(state: ModelState, cache: list[PhiCandidate],
               rng: np.random.Generator) -> tuple[bool | None, bool | None]:
    """Metropolis move of each range index to a neighbouring grid candidate.

    Returns per-field acceptance (None when the grid has a single candidate
    and no proposal is possible).
    """
    accepted = []
    for attr, w in (("phi1_idx", state.w1), ("phi2_idx", state.w2)):
        cur = getattr(state, attr)
        neighbours = [j for j in (cur - 1, cur + 1) if 0 <= j < len(cache)]
        if not neighbours:
            accepted.append(None)
            continue
        prop = neighbours[rng.integers(len(neighbours))]
        prop_neighbours = sum(1 for j in (prop - 1, prop + 1) if 0 <= j < len(cache))
        log_alpha = (_field_log_prior(w, cache[prop]) - _field_log_prior(w, cache[cur])
                     + math.log(len(neighbours)) - math.log(prop_neighbours))
        acc = math.log(rng.random()) < log_alpha
        if acc:
            setattr(state, attr, prop)
        accepted.append(acc)
    return accepted[0], accepted[1]


_UPDATE_ORDER = ("fixed_effects", "sigma2", "latent_fields", "coreg",
                 "temporal", "taus", "phi")


def gibbs_sweep(state: ModelState, data: BlockData, pre: _Precompute,
                cache: list[PhiCandidate], config: ChainConfig,
                rng: np.random.Generator,
                ssr_scale: float = 1.0) -> tuple[bool | None, bool | None]:
    """One full systematic scan; mutates ``state`` and reports phi acceptance."""
    priors = config.priors
    update_fixed_effects(state, data, pre, priors.fixed_effect_var, rng)
    zg = data.z @ state.gamma
    update_sigma2(state, data, priors, rng, ssr_scale=ssr_scale)
    update_latent_fields(state, data, cache, zg, rng)
    update_coreg(state, data, zg, priors.coreg_var, rng)
    update_temporal(state, data, pre, zg, rng)
    update_taus(state, priors, rng)
    return update_phi(state, cache, rng)


@dataclass
class PosteriorDraws:
    """Retained chain states plus the metadata needed to reuse them."""

    mu0: np.ndarray
    mu1: np.ndarray
    gamma: np.ndarray        # (K, p)
    coreg: np.ndarray        # (K, 3)
    sigma2: np.ndarray
    tau0: np.ndarray
    tau1: np.ndarray
    phi1_idx: np.ndarray
    phi2_idx: np.ndarray
    w1: np.ndarray           # (K, n_sites)
    w2: np.ndarray
    b0: np.ndarray           # (K, n_days)
    b1: np.ndarray
    loglik: np.ndarray       # per retained draw
    loglik_trace: np.ndarray  # per iteration, full chain
    site_ids: list[str]
    lons: np.ndarray
    lats: np.ndarray
    window: TemporalWindow | None
    region: RegionId | None
    phi_grid_km: tuple[float, ...]
    taper_range_km: float
    accept_phi1: float
    accept_phi2: float

    @property
    def n_draws(self) -> int:
        return self.mu0.shape[0]

    @property
    def phi1_km(self) -> np.ndarray:
        return np.asarray(self.phi_grid_km)[self.phi1_idx]

    @property
    def phi2_km(self) -> np.ndarray:
        return np.asarray(self.phi_grid_km)[self.phi2_idx]


def run_chain(data: BlockData, config: ChainConfig,
              seed_seq: np.random.SeedSequence | None = None) -> PosteriorDraws:
    """Run the block sampler; bit-for-bit reproducible given (data, config, seed)."""
    if data.n_sites < 2:
        raise InputError(f"block needs >= 2 monitors, got {data.n_sites}")
    if len(np.unique(data.day_idx)) < 2:
        raise InputError("block needs records on >= 2 distinct days")
    if seed_seq is None:
        seed_seq = np.random.SeedSequence(config.master_seed)
    rng = np.random.default_rng(seed_seq)

    pre = _Precompute(data)
    cache = build_phi_cache(data, config)
    state = initial_state(data, config)

    k_ret = config.n_retained
    p = data.n_covariates
    out = PosteriorDraws(
        mu0=np.empty(k_ret), mu1=np.empty(k_ret), gamma=np.empty((k_ret, p)),
        coreg=np.empty((k_ret, 3)), sigma2=np.empty(k_ret),
        tau0=np.empty(k_ret), tau1=np.empty(k_ret),
        phi1_idx=np.empty(k_ret, dtype=np.intp),
        phi2_idx=np.empty(k_ret, dtype=np.intp),
        w1=np.empty((k_ret, data.n_sites)), w2=np.empty((k_ret, data.n_sites)),
        b0=np.empty((k_ret, data.n_days)), b1=np.empty((k_ret, data.n_days)),
        loglik=np.empty(k_ret), loglik_trace=np.empty(config.n_iter),
        site_ids=list(data.site_ids), lons=data.lons.copy(), lats=data.lats.copy(),
        window=data.window, region=data.region,
        phi_grid_km=tuple(config.phi_grid_km),
        taper_range_km=config.taper_range_km,
        accept_phi1=math.nan, accept_phi2=math.nan,
    )

    acc1 = acc2 = prop1 = prop2 = 0
    slot = 0
    for it in range(1, config.n_iter + 1):
        a1, a2 = gibbs_sweep(state, data, pre, cache, config, rng)
        if a1 is not None:
            prop1 += 1
            acc1 += a1
        if a2 is not None:
            prop2 += 1
            acc2 += a2
        ll = log_likelihood(state, data)
        out.loglik_trace[it - 1] = ll
        if not math.isfinite(ll):
            bad = _first_nonfinite(state)
            raise NumericalError(
                f"chain diverged at iteration {it}: non-finite log-likelihood "
                f"(first bad quantity: {bad})")
        if it > config.n_burnin and (it - config.n_burnin) % config.thin == 0:
            out.mu0[slot] = state.mu0
            out.mu1[slot] = state.mu1
            out.gamma[slot] = state.gamma
            out.coreg[slot] = (state.c1, state.c2, state.c3)
            out.sigma2[slot] = state.sigma2
            out.tau0[slot] = state.tau0
            out.tau1[slot] = state.tau1
            out.phi1_idx[slot] = state.phi1_idx
            out.phi2_idx[slot] = state.phi2_idx
            out.w1[slot] = state.w1
            out.w2[slot] = state.w2
            out.b0[slot] = state.b0
            out.b1[slot] = state.b1
            out.loglik[slot] = ll
            slot += 1
    assert slot == k_ret
    out.accept_phi1 = acc1 / prop1 if prop1 else math.nan
    out.accept_phi2 = acc2 / prop2 if prop2 else math.nan
    return out


def _first_nonfinite(state: ModelState) -> str:
    checks = [
        ("mu0", state.mu0), ("mu1", state.mu1), ("gamma", state.gamma),
        ("c1", state.c1), ("c2", state.c2), ("c3", state.c3),
        ("w1", state.w1), ("w2", state.w2), ("b0", state.b0), ("b1", state.b1),
        ("tau0", state.tau0), ("tau1", state.tau1), ("sigma2", state.sigma2),
    ]
    for name, value in checks:
        if not np.all(np.isfinite(value)):
            return name
    return "residuals"


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from the autocorrelation sequence (Geyer initial positive pairs)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4 or np.var(x) == 0:
        return float(n)
    centered = x - x.mean()
    # autocovariance via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    # sum pairs rho[2k-1] + rho[2k] while positive
    total = 1.0
    k = 1
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        total += 2.0 * pair
        k += 2
    return float(min(n, max(1.0, n / total)))


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    q05: float
    q95: float
    significant: bool  # 95% equal-tailed interval excludes zero
    ess: float


@dataclass(frozen=True)
class PosteriorSummary:
    rows: tuple[ParameterSummary, ...]

    def __getitem__(self, name: str) -> ParameterSummary:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def names(self) -> list[str]:
        return [row.name for row in self.rows]


def summarize(draws: PosteriorDraws) -> PosteriorSummary:
    """Per-parameter posterior mean, SD, 5/95 quantiles and significance flag.

    Quantiles use linear interpolation; SD uses the n-1 denominator. A
    coefficient is flagged significant when its 95% equal-tailed interval
    excludes zero.
    """
    if draws.n_draws < 2:
        raise InputError("summaries need at least 2 retained draws")
    entries: list[tuple[str, np.ndarray]] = [("intercept", draws.mu0),
                                             ("aod", draws.mu1)]
    entries += [(name, draws.gamma[:, j]) for j, name in enumerate(COVARIATES)
                if j < draws.gamma.shape[1]]
    entries += [(f"z{j}", draws.gamma[:, j])
                for j in range(len(COVARIATES), draws.gamma.shape[1])]
    entries += [("c1", draws.coreg[:, 0]), ("c2", draws.coreg[:, 1]),
                ("c3", draws.coreg[:, 2]), ("sigma2", draws.sigma2),
                ("tau0", draws.tau0), ("tau1", draws.tau1),
                ("phi1_km", draws.phi1_km.astype(float)),
                ("phi2_km", draws.phi2_km.astype(float))]
    rows = []
    for name, samples in entries:
        q025, q05, q95, q975 = np.percentile(samples, [2.5, 5.0, 95.0, 97.5])
        rows.append(ParameterSummary(
            name=name,
            mean=float(np.mean(samples)),
            sd=float(np.std(samples, ddof=1)),
            q05=float(q05), q95=float(q95),
            significant=bool(q025 > 0.0 or q975 < 0.0),
            ess=effective_sample_size(samples),
        ))
    return PosteriorSummary(rows=tuple(rows))
