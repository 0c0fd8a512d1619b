"""Generative simulator: draws data from the exact model the sampler targets.

Implements its own dense covariance and random-walk algebra on purpose; no
code is shared with the production spatial/temporal modules so simulated
data and the oracle checks stay independent of the paths they verify.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InputError
from .types import (
    GridCellDay,
    LOG_COVARIATES,
    BASE_COVARIATES,
    MonitorRecord,
    N_COVARIATES,
    RegionId,
    SiteId,
    TMP_INDEX,
    TemporalWindow,
    windows_for_year,
)

_EARTH_KM = 6371.0

DEFAULT_GAMMA = (1.2, -0.8, 0.6, 0.5, 1.5, -0.4, 0.3, -0.9, 0.4, 2.0)


def _haversine_matrix(lon1, lat1, lon2, lat2):
    rl1 = np.radians(np.asarray(lat1))[:, None]
    rl2 = np.radians(np.asarray(lat2))[None, :]
    dlon = np.radians(np.asarray(lon2))[None, :] - np.radians(np.asarray(lon1))[:, None]
    h = np.sin((rl2 - rl1) / 2) ** 2 + np.cos(rl1) * np.cos(rl2) * np.sin(dlon / 2) ** 2
    return _EARTH_KM * 2 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _dense_tapered_cov(lons, lats, phi, taper_range):
    d = _haversine_matrix(lons, lats, lons, lats)
    np.fill_diagonal(d, 0.0)
    t = d / taper_range
    taper = np.where(t < 1.0, (1.0 - np.minimum(t, 1.0)) ** 4 * (1.0 + 4.0 * t), 0.0)
    cov = np.exp(-d / phi) * taper
    np.fill_diagonal(cov, 1.0)
    return cov


def _draw_field(lons, lats, phi, taper_range, rng):
    cov = _dense_tapered_cov(lons, lats, phi, taper_range)
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(len(lons)))
    return chol @ rng.standard_normal(len(lons))


def _draw_rw1(n_days, tau, rng):
    """Anchored walk recentred to mean zero: the sum-to-zero walk prior."""
    steps = rng.standard_normal(n_days - 1) / math.sqrt(tau)
    walk = np.concatenate([[0.0], np.cumsum(steps)])
    return walk - walk.mean()


@dataclass(frozen=True)
class TruthSpec:
    """Fixed generative parameters for one synthetic block."""

    n_monitors: int = 30
    n_cells: int = 9
    n_days: int = 40
    layout: str = "random"            # or "lattice"
    lon_range: tuple[float, float] = (-100.0, -90.0)
    lat_range: tuple[float, float] = (35.0, 42.0)
    mu0: float = 25.0
    mu1: float = 10.0
    gamma: tuple[float, ...] = DEFAULT_GAMMA
    c1: float = 2.0
    c2: float = 1.0
    c3: float = 4.0
    sigma2: float = 4.0
    tau0: float = 4.0
    tau1: float = 4.0
    phi1_km: float = 200.0
    phi2_km: float = 200.0
    taper_range_km: float = 800.0
    aod_missing_rate: float = 0.1
    obs_rate: float = 1.0
    aod_log_mean: float = math.log(0.15)
    aod_log_sd: float = 0.6

    def __post_init__(self):
        # degenerate zeros (noise-free, effect-free) are legal here so exact
        # arithmetic checks can run; the sampler itself never produces them
        if self.c1 < 0 or self.c3 < 0:
            raise InputError("c1 and c3 must be non-negative")
        if self.sigma2 < 0:
            raise InputError("sigma2 must be non-negative")
        if min(self.tau0, self.tau1, self.phi1_km, self.phi2_km,
               self.taper_range_km) <= 0:
            raise InputError("precision and range parameters must be positive")
        if len(self.gamma) != N_COVARIATES:
            raise InputError(f"gamma must have length {N_COVARIATES}")
        if self.layout not in ("random", "lattice"):
            raise InputError(f"unknown layout {self.layout!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TruthSpec":
        data = json.loads(text)
        for key in ("gamma", "lon_range", "lat_range"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class SimTruth:
    """Everything hidden from the fitting code, kept for recovery scoring."""

    spec: TruthSpec
    window: TemporalWindow
    monitor_lons: np.ndarray
    monitor_lats: np.ndarray
    cell_lons: np.ndarray
    cell_lats: np.ndarray
    w1_monitors: np.ndarray
    w2_monitors: np.ndarray
    w1_cells: np.ndarray
    w2_cells: np.ndarray
    b0: np.ndarray
    b1: np.ndarray


def _site_layout(spec: TruthSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    lo0, lo1 = spec.lon_range
    la0, la1 = spec.lat_range
    if spec.layout == "lattice":
        side = int(math.ceil(math.sqrt(spec.n_monitors)))
        gx, gy = np.meshgrid(np.linspace(lo0, lo1, side), np.linspace(la0, la1, side))
        return gx.ravel()[: spec.n_monitors], gy.ravel()[: spec.n_monitors]
    return (rng.uniform(lo0, lo1, spec.n_monitors),
            rng.uniform(la0, la1, spec.n_monitors))


def _cell_lattice(spec: TruthSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.n_cells == 0:
        return np.empty(0), np.empty(0)
    side = int(math.ceil(math.sqrt(spec.n_cells)))
    gx, gy = np.meshgrid(np.linspace(*spec.lon_range, side),
                         np.linspace(*spec.lat_range, side))
    return gx.ravel()[: spec.n_cells], gy.ravel()[: spec.n_cells]


def simulate(spec: TruthSpec, seed: int,
             region: RegionId = RegionId.West):
    """Run the generative model forward.

    Returns (records, cells, truth). Record covariates are on the model
    scale (the coefficients multiply them directly) and the interaction slot
    is already formed, so these records feed the block sampler as-is.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    window = TemporalWindow(1, dt.date(2011, 1, 1),
                            dt.date(2011, 1, 1) + dt.timedelta(days=spec.n_days - 1))

    mon_lon, mon_lat = _site_layout(spec, rng)
    cell_lon, cell_lat = _cell_lattice(spec)
    all_lon = np.concatenate([mon_lon, cell_lon])
    all_lat = np.concatenate([mon_lat, cell_lat])

    w1 = _draw_field(all_lon, all_lat, spec.phi1_km, spec.taper_range_km, rng)
    w2 = _draw_field(all_lon, all_lat, spec.phi2_km, spec.taper_range_km, rng)
    b0 = _draw_rw1(spec.n_days, spec.tau0, rng)
    b1 = _draw_rw1(spec.n_days, spec.tau1, rng)
    gamma = np.asarray(spec.gamma)

    nm = spec.n_monitors
    records: list[MonitorRecord] = []
    for s in range(nm):
        site = SiteId(id=f"m{s:04d}", lon=float(mon_lon[s]), lat=float(mon_lat[s]))
        for t in range(spec.n_days):
            if spec.obs_rate < 1.0 and rng.random() >= spec.obs_rate:
                continue
            aod = float(rng.lognormal(spec.aod_log_mean, spec.aod_log_sd))
            g = rng.standard_normal(len(BASE_COVARIATES))
            z = np.append(g, aod * g[TMP_INDEX])
            pm = (spec.mu0 + spec.c1 * w1[s] + b0[t]
                  + (spec.mu1 + spec.c2 * w1[s] + spec.c3 * w2[s] + b1[t]) * aod
                  + float(gamma @ z)
                  + math.sqrt(spec.sigma2) * rng.standard_normal())
            if rng.random() < spec.aod_missing_rate:
                aod = math.nan
                z = z.copy()
                z[-1] = math.nan
            records.append(MonitorRecord(
                site=site, day=window.start + dt.timedelta(days=t),
                pm25=float(pm), aod=aod, z=z))

    cells: list[GridCellDay] = []
    for c in range(spec.n_cells):
        site = SiteId(id=f"c{c:04d}", lon=float(cell_lon[c]), lat=float(cell_lat[c]))
        for t in range(spec.n_days):
            aod = float(rng.lognormal(spec.aod_log_mean, spec.aod_log_sd))
            g = rng.standard_normal(len(BASE_COVARIATES))
            z = np.append(g, aod * g[TMP_INDEX])
            cells.append(GridCellDay(
                cell=site, day=window.start + dt.timedelta(days=t),
                aod=aod, z=z, region=region))

    truth = SimTruth(
        spec=spec, window=window,
        monitor_lons=mon_lon, monitor_lats=mon_lat,
        cell_lons=cell_lon, cell_lats=cell_lat,
        w1_monitors=w1[:nm], w2_monitors=w2[:nm],
        w1_cells=w1[nm:], w2_cells=w2[nm:],
        b0=b0, b1=b1)
    return records, cells, truth


# ---------------------------------------------------------------------------
# Multi-region raw-scale datasets (CSV-shaped, continuous truth across seams)


def _to_raw(g: np.ndarray) -> np.ndarray:
    """Invert the preprocessing so the pipeline's log/z steps recover an
    affine image of the model-scale covariates."""
    raw = 5.0 + 2.0 * g
    for j, name in enumerate(BASE_COVARIATES):
        if name in LOG_COVARIATES:
            raw[j] = math.exp(g[j])
    return raw


def region_anchors(n_regions: int, lon_range, lat_range) -> dict[RegionId, tuple[float, float]]:
    """Place the first n_regions region labels on a 3x3 grid of anchors."""
    if not 1 <= n_regions <= 9:
        raise InputError(f"n_regions must be in 1..9, got {n_regions}")
    regions = list(RegionId)[:n_regions]
    if n_regions == 1:
        cols = rows = 1
    elif n_regions <= 3:
        cols, rows = n_regions, 1
    else:
        cols, rows = 3, int(math.ceil(n_regions / 3))
    xs = np.linspace(lon_range[0], lon_range[1], 2 * cols + 1)[1::2]
    ys = np.linspace(lat_range[0], lat_range[1], 2 * rows + 1)[1::2]
    anchors = {}
    for i, region in enumerate(regions):
        anchors[region] = (float(xs[i % cols]), float(ys[i // cols]))
    return anchors


def _nearest_region(lon, lat, anchors) -> RegionId:
    best, best_d = None, math.inf
    for region, (ax, ay) in anchors.items():
        d = float(_haversine_matrix([lon], [lat], [ax], [ay])[0, 0])
        if d < best_d:
            best, best_d = region, d
    return best


@dataclass
class SyntheticDataset:
    """A CSV-shaped multi-region dataset plus its hidden truth."""

    records: list[MonitorRecord]
    region_map: dict[str, RegionId]
    cells: list[GridCellDay]
    year: int
    truths: dict[int, SimTruth] = field(default_factory=dict)  # per window index


def make_dataset(spec: TruthSpec, seed: int, n_regions: int = 2,
                 window_indices: tuple[int, ...] = (1,), year: int = 2011,
                 monitors_per_region: int | None = None) -> SyntheticDataset:
    """Generate a raw-scale dataset spanning ``n_regions`` climate regions.

    One continuous truth field covers the whole domain, so region blocks
    share the generative surface across their buffers. Covariate columns are
    written on the raw CSV scale (positive for the log-transformed trio);
    the model-scale coefficients relate to the pipeline's standardized
    covariates by an affine map, keeping the fitted model well-specified.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(9,)))
    windows = [w for w in windows_for_year(year) if w.index in window_indices]
    if not windows:
        raise InputError(f"no valid window indices in {window_indices}")
    n_mon = monitors_per_region * n_regions if monitors_per_region else spec.n_monitors
    spec = replace(spec, n_monitors=n_mon)

    anchors = region_anchors(n_regions, spec.lon_range, spec.lat_range)
    mon_lon, mon_lat = _site_layout(spec, rng)
    cell_lon, cell_lat = _cell_lattice(spec)
    all_lon = np.concatenate([mon_lon, cell_lon])
    all_lat = np.concatenate([mon_lat, cell_lat])
    w1 = _draw_field(all_lon, all_lat, spec.phi1_km, spec.taper_range_km, rng)
    w2 = _draw_field(all_lon, all_lat, spec.phi2_km, spec.taper_range_km, rng)
    gamma = np.asarray(spec.gamma)

    monitor_sites = [SiteId(id=f"m{s:04d}", lon=float(mon_lon[s]), lat=float(mon_lat[s]))
                     for s in range(spec.n_monitors)]
    cell_sites = [SiteId(id=f"c{c:04d}", lon=float(cell_lon[c]), lat=float(cell_lat[c]))
                  for c in range(spec.n_cells)]
    region_map = {site.id: _nearest_region(site.lon, site.lat, anchors)
                  for site in monitor_sites}
    cell_regions = {site.id: _nearest_region(site.lon, site.lat, anchors)
                    for site in cell_sites}

    records: list[MonitorRecord] = []
    cells: list[GridCellDay] = []
    truths: dict[int, SimTruth] = {}
    for window in windows:
        t_days = window.n_days
        b0 = _draw_rw1(t_days, spec.tau0, rng)
        b1 = _draw_rw1(t_days, spec.tau1, rng)
        truths[window.index] = SimTruth(
            spec=spec, window=window,
            monitor_lons=mon_lon, monitor_lats=mon_lat,
            cell_lons=cell_lon, cell_lats=cell_lat,
            w1_monitors=w1[: spec.n_monitors], w2_monitors=w2[: spec.n_monitors],
            w1_cells=w1[spec.n_monitors:], w2_cells=w2[spec.n_monitors:],
            b0=b0, b1=b1)
        for s, site in enumerate(monitor_sites):
            for t in range(t_days):
                if spec.obs_rate < 1.0 and rng.random() >= spec.obs_rate:
                    continue
                aod = float(rng.lognormal(spec.aod_log_mean, spec.aod_log_sd))
                g = rng.standard_normal(len(BASE_COVARIATES))
                z_model = np.append(g, aod * g[TMP_INDEX])
                pm = (spec.mu0 + spec.c1 * w1[s] + b0[t]
                      + (spec.mu1 + spec.c2 * w1[s] + spec.c3 * w2[s] + b1[t]) * aod
                      + float(gamma @ z_model)
                      + math.sqrt(spec.sigma2) * rng.standard_normal())
                if rng.random() < spec.aod_missing_rate:
                    aod = math.nan
                records.append(MonitorRecord(
                    site=site, day=window.start + dt.timedelta(days=t),
                    pm25=float(pm), aod=aod,
                    z=np.append(_to_raw(g), math.nan)))
        for c, site in enumerate(cell_sites):
            for t in range(t_days):
                aod = float(rng.lognormal(spec.aod_log_mean, spec.aod_log_sd))
                g = rng.standard_normal(len(BASE_COVARIATES))
                cells.append(GridCellDay(
                    cell=site, day=window.start + dt.timedelta(days=t),
                    aod=aod, z=np.append(_to_raw(g), math.nan),
                    region=cell_regions[site.id]))
    return SyntheticDataset(records=records, region_map=region_map, cells=cells,
                            year=year, truths=truths)
