"""File formats: dataset CSVs, run config, block artifacts, manifest.

Everything on disk is delimited text or JSON; floats are written with
``repr`` so values round-trip exactly and reruns are byte-identical. Empty
CSV fields mean missing.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InputError
from .mcmc import ChainConfig, PosteriorDraws, PosteriorSummary, PriorConfig
from .types import (
    BASE_COVARIATES,
    GridCellDay,
    MonitorRecord,
    RegionId,
    SiteId,
    TemporalWindow,
    windows_for_year,
)

MONITOR_HEADER = ["site_id", "lon", "lat", "date", "pm25", "aod",
                  *BASE_COVARIATES, "region"]
GRID_HEADER = ["cell_id", "lon", "lat", "date", "aod", *BASE_COVARIATES, "region"]
PREDICTION_HEADER = ["cell_id", "lon", "lat", "period", "mean", "sd",
                     "pi_lo", "pi_hi", "n_blocks"]
CV_REPORT_HEADER = ["region", "n_records", "r2", "rmse", "slope", "intercept",
                    "mean_pi90_length", "pi90_coverage"]
CV_PREDICTION_HEADER = ["record_id", "site_id", "date", "fold", "observed",
                        "predicted_mean", "pi_lo", "pi_hi"]


def fmt(x) -> str:
    """Exact round-trip float formatting; empty string for missing."""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def _parse_float(text: str, what: str, line_no: int) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise InputError(f"line {line_no}: bad {what} value {text!r}")


def _parse_date(text: str, line_no: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"line {line_no}: bad date {text!r} (expected YYYY-MM-DD)")


def read_monitor_csv(path: str) -> tuple[list[MonitorRecord], dict[str, RegionId]]:
    """Load monitor records; returns records plus the site -> region map."""
    records: list[MonitorRecord] = []
    region_map: dict[str, RegionId] = {}
    site_cache: dict[str, SiteId] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MONITOR_HEADER:
            raise InputError(f"{path}: bad monitor header {header}; "
                             f"expected {MONITOR_HEADER}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MONITOR_HEADER):
                raise InputError(f"{path} line {line_no}: expected "
                                 f"{len(MONITOR_HEADER)} fields, got {len(row)}")
            sid = row[0].strip()
            if not sid:
                raise InputError(f"{path} line {line_no}: empty site_id")
            lon = _parse_float(row[1], "lon", line_no)
            lat = _parse_float(row[2], "lat", line_no)
            site = site_cache.get(sid)
            if site is None:
                site = SiteId(id=sid, lon=lon, lat=lat)
                site_cache[sid] = site
            elif (site.lon, site.lat) != (lon, lat):
                raise InputError(f"{path} line {line_no}: site {sid!r} "
                                 "changes coordinates mid-file")
            day = _parse_date(row[3], line_no)
            pm25 = _parse_float(row[4], "pm25", line_no)
            if math.isnan(pm25):
                raise InputError(f"{path} line {line_no}: pm25 is required")
            aod = _parse_float(row[5], "aod", line_no)
            z = np.array([_parse_float(v, name, line_no)
                          for v, name in zip(row[6:15], BASE_COVARIATES)]
                         + [math.nan])
            region = RegionId.parse(row[15].strip())
            prev = region_map.get(sid)
            if prev is not None and prev is not region:
                raise InputError(f"{path} line {line_no}: site {sid!r} "
                                 f"changes region {prev.value} -> {region.value}")
            region_map[sid] = region
            try:
                records.append(MonitorRecord(site=site, day=day, pm25=pm25,
                                             aod=aod, z=z))
            except InputError as exc:
                raise InputError(f"{path} line {line_no}: {exc}")
    return records, region_map


def read_grid_csv(path: str) -> tuple[list[GridCellDay], list[tuple[int, str]]]:
    """Load grid cell-days.

    Rows naming an unknown region are skipped and returned as
    (line_no, region_text) so the caller can list them; every other
    malformation is a hard error.
    """
    cells: list[GridCellDay] = []
    skipped: list[tuple[int, str]] = []
    site_cache: dict[str, SiteId] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GRID_HEADER:
            raise InputError(f"{path}: bad grid header {header}; expected {GRID_HEADER}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(GRID_HEADER):
                raise InputError(f"{path} line {line_no}: expected "
                                 f"{len(GRID_HEADER)} fields, got {len(row)}")
            cid = row[0].strip()
            if not cid:
                raise InputError(f"{path} line {line_no}: empty cell_id")
            lon = _parse_float(row[1], "lon", line_no)
            lat = _parse_float(row[2], "lat", line_no)
            site = site_cache.get(cid)
            if site is None:
                site = SiteId(id=cid, lon=lon, lat=lat)
                site_cache[cid] = site
            day = _parse_date(row[3], line_no)
            aod = _parse_float(row[4], "aod", line_no)
            z = np.array([_parse_float(v, name, line_no)
                          for v, name in zip(row[5:14], BASE_COVARIATES)]
                         + [math.nan])
            try:
                region = RegionId.parse(row[14].strip())
            except InputError:
                skipped.append((line_no, row[14].strip()))
                continue
            cells.append(GridCellDay(cell=site, day=day, aod=aod, z=z, region=region))
    return cells, skipped


def write_monitor_csv(path: str, records: list[MonitorRecord],
                      region_map: dict[str, RegionId]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MONITOR_HEADER)
        for r in records:
            writer.writerow([r.site.id, fmt(r.site.lon), fmt(r.site.lat),
                             r.day.isoformat(), fmt(r.pm25), fmt(r.aod),
                             *[fmt(v) for v in r.z[:9]],
                             region_map[r.site.id].value])


def write_grid_csv(path: str, cells: list[GridCellDay]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_HEADER)
        for c in cells:
            writer.writerow([c.cell.id, fmt(c.cell.lon), fmt(c.cell.lat),
                             c.day.isoformat(), fmt(c.aod),
                             *[fmt(v) for v in c.z[:9]], c.region.value])


# ---------------------------------------------------------------------------
# Run configuration


@dataclass(frozen=True)
class RunConfig:
    monitor_csv: str | None = None
    grid_csv: str | None = None
    output_dir: str | None = None
    n_iter: int = 5000
    n_burnin: int = 2000
    thin: int = 3
    master_seed: int = 0
    phi_grid_km: tuple[float, ...] = (50.0, 100.0, 200.0, 400.0, 800.0)
    taper_range_km: float = 500.0
    buffer_km: float = 100.0
    prediction_mode: str = "latent"
    cv_scheme: str = "rcv"       # rcv | scv | both
    cv_folds: int = 10
    workers: int = 1
    figures: bool = True
    priors: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if self.prediction_mode not in ("latent", "predictive"):
            raise InputError(f"prediction_mode must be latent|predictive, "
                             f"got {self.prediction_mode!r}")
        if self.cv_scheme not in ("rcv", "scv", "both"):
            raise InputError(f"cv_scheme must be rcv|scv|both, got {self.cv_scheme!r}")
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")
        if self.cv_folds < 2:
            raise InputError(f"cv_folds must be >= 2, got {self.cv_folds}")
        self.chain_config()  # validates chain fields early

    def chain_config(self) -> ChainConfig:
        return ChainConfig(n_iter=self.n_iter, n_burnin=self.n_burnin,
                           thin=self.thin, master_seed=self.master_seed,
                           phi_grid_km=tuple(self.phi_grid_km),
                           taper_range_km=self.taper_range_km, priors=self.priors)

    def as_dict(self, include_paths: bool = True) -> dict:
        data = asdict(self)
        data["phi_grid_km"] = list(self.phi_grid_km)
        # scheduling and destination knobs do not affect the outputs
        data.pop("output_dir", None)
        data.pop("workers", None)
        if not include_paths:
            data.pop("monitor_csv", None)
            data.pop("grid_csv", None)
        return data


_CONFIG_KEYS = {
    "monitor_csv": str, "grid_csv": str, "output_dir": str,
    "n_iter": int, "n_burnin": int, "thin": int, "master_seed": int,
    "phi_grid_km": list, "taper_range_km": (int, float),
    "buffer_km": (int, float), "prediction_mode": str, "cv_scheme": str,
    "cv_folds": int, "workers": int, "figures": bool, "priors": dict,
}
_PRIOR_KEYS = {"fixed_effect_var", "coreg_var", "sigma2_shape", "sigma2_rate",
               "tau_shape", "tau_rate"}


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Parse a JSON config file with strict keys; overrides win over the file."""
    data: dict = {}
    if path is not None:
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON ({exc})")
        if not isinstance(data, dict):
            raise InputError(f"{path}: config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    unknown = set(data) - set(_CONFIG_KEYS)
    if unknown:
        raise InputError("unknown config keys: " + ", ".join(sorted(unknown)))
    for key, expected in _CONFIG_KEYS.items():
        if key in data:
            value = data[key]
            ok = isinstance(value, expected)
            if expected is int and isinstance(value, bool):
                ok = False
            if not ok:
                raise InputError(f"config key {key!r} has wrong type "
                                 f"{type(value).__name__}")
    priors_data = data.pop("priors", {})
    unknown_priors = set(priors_data) - _PRIOR_KEYS
    if unknown_priors:
        raise InputError("unknown prior keys: " + ", ".join(sorted(unknown_priors)))
    kwargs = dict(data)
    if "phi_grid_km" in kwargs:
        kwargs["phi_grid_km"] = tuple(float(v) for v in kwargs["phi_grid_km"])
    kwargs["priors"] = PriorConfig(**{k: float(v) for k, v in priors_data.items()})
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}")


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.as_dict(include_paths=False), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Block artifacts


def block_dir(output_dir: str, block_name: str) -> str:
    return os.path.join(output_dir, "blocks", block_name)


def write_draws(directory: str, draws: PosteriorDraws) -> None:
    os.makedirs(directory, exist_ok=True)
    n_sites = len(draws.site_ids)
    n_days = draws.b0.shape[1]
    with open(os.path.join(directory, "sites.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "site_id", "lon", "lat"])
        for j in range(n_sites):
            writer.writerow([j, draws.site_ids[j], fmt(draws.lons[j]),
                             fmt(draws.lats[j])])
    meta = {
        "region": draws.region.value if draws.region else None,
        "window_index": draws.window.index if draws.window else None,
        "window_start": draws.window.start.isoformat() if draws.window else None,
        "window_end": draws.window.end.isoformat() if draws.window else None,
        "phi_grid_km": list(draws.phi_grid_km),
        "taper_range_km": draws.taper_range_km,
        "accept_phi1": None if math.isnan(draws.accept_phi1) else draws.accept_phi1,
        "accept_phi2": None if math.isnan(draws.accept_phi2) else draws.accept_phi2,
        "n_draws": draws.n_draws,
    }
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    header = (["draw", "loglik", "mu0", "mu1"]
              + [f"gamma_{j}" for j in range(draws.gamma.shape[1])]
              + ["c1", "c2", "c3", "sigma2", "tau0", "tau1",
                 "phi1_idx", "phi2_idx"]
              + [f"w1_{j}" for j in range(n_sites)]
              + [f"w2_{j}" for j in range(n_sites)]
              + [f"b0_{t}" for t in range(n_days)]
              + [f"b1_{t}" for t in range(n_days)])
    with open(os.path.join(directory, "draws.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(draws.n_draws):
            row = ([i, fmt(draws.loglik[i]), fmt(draws.mu0[i]), fmt(draws.mu1[i])]
                   + [fmt(v) for v in draws.gamma[i]]
                   + [fmt(draws.coreg[i, 0]), fmt(draws.coreg[i, 1]),
                      fmt(draws.coreg[i, 2]), fmt(draws.sigma2[i]),
                      fmt(draws.tau0[i]), fmt(draws.tau1[i]),
                      int(draws.phi1_idx[i]), int(draws.phi2_idx[i])]
                   + [fmt(v) for v in draws.w1[i]]
                   + [fmt(v) for v in draws.w2[i]]
                   + [fmt(v) for v in draws.b0[i]]
                   + [fmt(v) for v in draws.b1[i]])
            writer.writerow(row)


def read_draws(directory: str) -> PosteriorDraws:
    with open(os.path.join(directory, "meta.json")) as fh:
        meta = json.load(fh)
    sites: list[tuple[str, float, float]] = []
    with open(os.path.join(directory, "sites.csv"), newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            sites.append((row[1], float(row[2]), float(row[3])))
    window = None
    if meta["window_index"] is not None:
        window = TemporalWindow(meta["window_index"],
                                dt.date.fromisoformat(meta["window_start"]),
                                dt.date.fromisoformat(meta["window_end"]))
    region = RegionId(meta["region"]) if meta["region"] else None

    rows = []
    with open(os.path.join(directory, "draws.csv"), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            rows.append(row)
    n_sites = len(sites)
    n_gamma = sum(1 for h in header if h.startswith("gamma_"))
    n_days = sum(1 for h in header if h.startswith("b0_"))
    k = len(rows)
    arr = np.array([[float(v) if v != "" else math.nan for v in row[1:]]
                    for row in rows])
    col = 0

    def take(width):
        nonlocal col
        block = arr[:, col:col + width]
        col += width
        return block

    loglik = take(1)[:, 0]
    mu0 = take(1)[:, 0]
    mu1 = take(1)[:, 0]
    gamma = take(n_gamma)
    coreg = take(3)
    sigma2 = take(1)[:, 0]
    tau0 = take(1)[:, 0]
    tau1 = take(1)[:, 0]
    phi1_idx = take(1)[:, 0].astype(np.intp)
    phi2_idx = take(1)[:, 0].astype(np.intp)
    w1 = take(n_sites)
    w2 = take(n_sites)
    b0 = take(n_days)
    b1 = take(n_days)
    return PosteriorDraws(
        mu0=mu0, mu1=mu1, gamma=gamma, coreg=coreg, sigma2=sigma2,
        tau0=tau0, tau1=tau1, phi1_idx=phi1_idx, phi2_idx=phi2_idx,
        w1=w1, w2=w2, b0=b0, b1=b1, loglik=loglik,
        loglik_trace=np.empty(0),
        site_ids=[s[0] for s in sites],
        lons=np.array([s[1] for s in sites]),
        lats=np.array([s[2] for s in sites]),
        window=window, region=region,
        phi_grid_km=tuple(meta["phi_grid_km"]),
        taper_range_km=meta["taper_range_km"],
        accept_phi1=meta["accept_phi1"] if meta["accept_phi1"] is not None else math.nan,
        accept_phi2=meta["accept_phi2"] if meta["accept_phi2"] is not None else math.nan,
    )


def write_summary_csv(path: str, summary: PosteriorSummary) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["coefficient", "mean", "sd", "q05", "q95",
                         "significant", "ess"])
        for row in summary.rows:
            writer.writerow([row.name, fmt(row.mean), fmt(row.sd), fmt(row.q05),
                             fmt(row.q95), int(row.significant), fmt(row.ess)])


def write_diagnostics(path: str, draws: PosteriorDraws,
                      summary: PosteriorSummary) -> None:
    """Columnar diagnostics: per-iteration log-likelihood trace, acceptance
    rates, then the coefficient table."""
    with open(path, "w") as fh:
        fh.write("# acceptance_phi1 " + fmt(draws.accept_phi1) + "\n")
        fh.write("# acceptance_phi2 " + fmt(draws.accept_phi2) + "\n")
        fh.write("iteration loglik\n")
        for i, ll in enumerate(draws.loglik_trace, start=1):
            fh.write(f"{i} {fmt(ll)}\n")
        fh.write("\ncoefficient mean sd q05 q95 significant ess\n")
        for row in summary.rows:
            star = "*" if row.significant else "."
            fh.write(f"{row.name} {fmt(row.mean)} {fmt(row.sd)} {fmt(row.q05)} "
                     f"{fmt(row.q95)} {star} {fmt(row.ess)}\n")


def write_predictions_csv(path: str, rows: list[tuple]) -> None:
    """Rows: (cell_id, lon, lat, period, mean, sd, lo, hi, n_blocks)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for cell_id, lon, lat, period, mean, sd, lo, hi, nb in rows:
            writer.writerow([cell_id, fmt(lon), fmt(lat), period, fmt(mean),
                             fmt(sd), fmt(lo), fmt(hi), nb])


def write_cv_report_csv(path: str, report) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CV_REPORT_HEADER)
        names = [n for n in report.rows if n != "overall"] + ["overall"]
        for name in names:
            m = report.rows[name]
            writer.writerow([name, m["n_records"], fmt(m["r2"]), fmt(m["rmse"]),
                             fmt(m["slope"]), fmt(m["intercept"]),
                             fmt(m["mean_pi90_length"]), fmt(m["pi90_coverage"])])


def write_cv_predictions_csv(path: str, rows: list[tuple]) -> None:
    """Rows: (record_id, site_id, date, fold, observed, mean, lo, hi)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CV_PREDICTION_HEADER)
        for rid, sid, date, fold, obs, mean, lo, hi in rows:
            writer.writerow([rid, sid, date, fold, fmt(obs), fmt(mean),
                             fmt(lo), fmt(hi)])


def write_manifest(path: str, config: RunConfig, blocks: list[dict]) -> None:
    manifest = {
        "format": "aodcal-manifest-v1",
        "config": config.as_dict(),
        "config_sha256": config_hash(config),
        "inputs": {},
        "blocks": blocks,
    }
    for key in ("monitor_csv", "grid_csv"):
        p = getattr(config, key)
        if p:
            manifest["inputs"][key] = {"path": p, "sha256": sha256_file(p)}
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)
