"""Orchestration: dataset assembly, parallel block fits, surfaces, CV.

Blocks are independent jobs keyed by a canonical index (region order x
window), and every random stream is spawned from the master seed plus that
index, so results are identical for any worker count or schedule. Results
are merged in canonical block order before anything is written.
"""

from __future__ import annotations

import datetime as dt
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import validation
from .errors import InputError
from .mcmc import BlockData, ChainConfig, PosteriorDraws, build_block_data, run_chain
from .partition import assign_blocks
from .predict import (
    CellBlockData,
    aggregate_draws,
    kriging_caches,
    predict_block,
    predict_records,
    summarize_draws,
)
from .transform import TransformSpec, apply_transform, apply_transform_cells, fit_transform
from .types import (
    BlockSpec,
    GridCellDay,
    MonitorRecord,
    RegionId,
    SiteId,
    TemporalWindow,
    block_order_index,
    window_for_day,
    windows_for_year,
)

log = logging.getLogger(__name__)

SEASON_LABELS = {1: "jan-apr", 2: "may-aug", 3: "sep-dec"}

# spawn-key domains keep fit / predict / CV streams disjoint
_DOMAIN_FIT = 0
_DOMAIN_PREDICT = 1
_DOMAIN_CV_FIT = 2
_DOMAIN_CV_PREDICT = 3


def dataset_year(records: list[MonitorRecord]) -> int:
    years = {r.day.year for r in records}
    if len(years) != 1:
        raise InputError(f"records span multiple study years: {sorted(years)}")
    return years.pop()


def unique_monitors(records: list[MonitorRecord]) -> list[SiteId]:
    seen: dict[str, SiteId] = {}
    for r in records:
        prev = seen.get(r.site.id)
        if prev is None:
            seen[r.site.id] = r.site
        elif (prev.lon, prev.lat) != (r.site.lon, r.site.lat):
            raise InputError(f"site {r.site.id!r} appears with two coordinates")
    return [seen[k] for k in sorted(seen)]


def unique_cells(cells: list[GridCellDay]) -> list[tuple[SiteId, RegionId]]:
    seen: dict[str, tuple[SiteId, RegionId]] = {}
    for c in cells:
        if c.cell.id not in seen:
            seen[c.cell.id] = (c.cell, c.region)
    return [seen[k] for k in sorted(seen)]


@dataclass
class BlockFit:
    name: str
    index: int
    spec: BlockSpec
    draws: PosteriorDraws
    transform: TransformSpec
    n_records: int
    n_excluded: int


@dataclass
class FitResult:
    blocks: list[BlockSpec]
    fits: dict[str, BlockFit] = field(default_factory=dict)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (name, reason)

    @property
    def fitted_names(self) -> list[str]:
        return sorted(self.fits, key=lambda n: self.fits[n].index)


def _block_records(spec: BlockSpec, records: list[MonitorRecord]) -> list[MonitorRecord]:
    members = spec.monitors
    return [r for r in records
            if r.site.id in members and spec.window.contains(r.day)]


def _prepare_block(spec: BlockSpec, records: list[MonitorRecord]):
    """Transform + assemble one block; returns (data, transform, n_excluded)."""
    block_records = _block_records(spec, records)
    if not block_records:
        return None
    transform = fit_transform(block_records)
    std_records = apply_transform(transform, block_records)
    usable = [r for r in std_records if r.complete]
    n_excluded = len(std_records) - len(usable)
    data = build_block_data(usable, spec.window, region=spec.region)
    return data, transform, n_excluded


def _fit_job(payload):
    name, index, data, config = payload
    seed = np.random.SeedSequence(config.master_seed,
                                  spawn_key=(_DOMAIN_FIT, index))
    return name, run_chain(data, config, seed_seq=seed)


def _run_jobs(payloads, worker, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(worker, payloads))


def fit_blocks(records: list[MonitorRecord], region_map: dict[str, RegionId],
               grid_cells: list[GridCellDay], config,
               chain_config: ChainConfig | None = None) -> FitResult:
    """Fit every viable block; vacuously empty blocks are neither fit nor
    counted as skipped, degenerate ones (some data, < 2 monitors or days)
    are skipped with a reason."""
    chain_config = chain_config or config.chain_config()
    year = dataset_year(records)
    windows = windows_for_year(year)
    monitors = unique_monitors(records)
    blocks = assign_blocks(monitors, unique_cells(grid_cells), region_map,
                           windows, buffer_km=config.buffer_km)
    result = FitResult(blocks=blocks)

    payloads = []
    meta = {}
    for spec in sorted(blocks, key=lambda b: block_order_index(b.region, b.window.index)):
        index = block_order_index(spec.region, spec.window.index)
        prepared = None
        try:
            prepared = _prepare_block(spec, records)
        except InputError as exc:
            result.skipped.append((spec.name, str(exc)))
            continue
        if prepared is None:
            continue  # no data at all: block not applicable to this dataset
        data, transform, n_excluded = prepared
        if data.n_sites < 2:
            result.skipped.append((spec.name, f"only {data.n_sites} monitor(s)"))
            continue
        if len(np.unique(data.day_idx)) < 2:
            result.skipped.append((spec.name, "records on fewer than 2 days"))
            continue
        payloads.append((spec.name, index, data, chain_config))
        meta[spec.name] = (index, spec, transform, data.n_records, n_excluded)

    for name, draws in _run_jobs(payloads, _fit_job, config.workers):
        index, spec, transform, n_records, n_excluded = meta[name]
        result.fits[name] = BlockFit(name=name, index=index, spec=spec,
                                     draws=draws, transform=transform,
                                     n_records=n_records, n_excluded=n_excluded)
    for name, reason in result.skipped:
        log.warning("block %s skipped: %s", name, reason)
    return result


# ---------------------------------------------------------------------------
# Prediction surfaces


@dataclass
class SurfaceResult:
    daily_rows: list[tuple] = field(default_factory=list)
    seasonal_rows: list[tuple] = field(default_factory=list)
    annual_rows: list[tuple] = field(default_factory=list)
    n_missing_cell_days: int = 0


def _cell_block_arrays(spec: BlockSpec, fit: BlockFit,
                       grid_by_cell: dict[str, list[GridCellDay]],
                       cell_sites: dict[str, SiteId],
                       window: TemporalWindow):
    """Standardize the block's cells and pack per-day covariate arrays."""
    ids = sorted(spec.cells & set(grid_by_cell))
    if not ids:
        return None
    n_days = window.n_days
    raw: list[GridCellDay] = []
    for cid in ids:
        raw.extend(c for c in grid_by_cell[cid] if window.contains(c.day))
    std = apply_transform_cells(fit.transform, raw)
    pos = {cid: i for i, cid in enumerate(ids)}
    p = std[0].z.shape[0] if std else 10
    aod = np.full((len(ids), n_days), np.nan)
    z = np.full((len(ids), n_days, p), np.nan)
    for c in std:
        i = pos[c.cell.id]
        t = window.day_offset(c.day)
        aod[i, t] = c.aod
        z[i, t] = c.z
    return CellBlockData(
        cell_ids=ids,
        lons=np.array([cell_sites[c].lon for c in ids]),
        lats=np.array([cell_sites[c].lat for c in ids]),
        aod=aod, z=z,
        day_offsets=np.arange(n_days, dtype=np.intp))


def predict_surfaces(fit_result: FitResult, grid_cells: list[GridCellDay],
                     config, mode: str | None = None) -> SurfaceResult:
    """Blend per-block per-draw surfaces into national daily rows, then
    aggregate per draw to seasonal and annual summaries."""
    mode = mode or config.prediction_mode
    out = SurfaceResult()
    if not fit_result.fits:
        return out

    cell_sites = {c.id: c for c, _ in unique_cells(grid_cells)}
    nat_ids = sorted(cell_sites)
    nat_pos = {cid: i for i, cid in enumerate(nat_ids)}
    n_nat = len(nat_ids)
    grid_by_cell: dict[str, list[GridCellDay]] = {}
    for c in grid_cells:
        grid_by_cell.setdefault(c.cell.id, []).append(c)

    first_fit = next(iter(fit_result.fits.values()))
    k = first_fit.draws.n_draws
    annual_sum = np.zeros((n_nat, k))
    annual_days = np.zeros(n_nat, dtype=np.intp)
    annual_blocks = np.zeros(n_nat, dtype=np.intp)

    windows = sorted({f.spec.window for f in fit_result.fits.values()},
                     key=lambda w: w.index)
    for window in windows:
        fits = [f for f in fit_result.fits.values() if f.spec.window == window]
        fits.sort(key=lambda f: f.index)
        n_days = window.n_days
        dates = window.dates()

        block_cells = []
        for f in fits:
            packed = _cell_block_arrays(f.spec, f, grid_by_cell, cell_sites, window)
            if packed is not None:
                caches = kriging_caches(f.draws, packed.lons, packed.lats)
                rng = np.random.default_rng(np.random.SeedSequence(
                    config.master_seed, spawn_key=(_DOMAIN_PREDICT, f.index)))
                block_cells.append((f, packed, caches, rng))

        season_sum = np.zeros((n_nat, k))
        season_days = np.zeros(n_nat, dtype=np.intp)
        season_blocks = np.zeros(n_nat, dtype=np.intp)

        chunk = max(1, int(4_000_000 / max(1, n_nat * k)))
        for start in range(0, n_days, chunk):
            stop = min(start + chunk, n_days)
            width = stop - start
            acc = np.zeros((n_nat, width, k))
            count = np.zeros((n_nat, width), dtype=np.intp)
            for f, packed, caches, rng in block_cells:
                sub = CellBlockData(
                    cell_ids=packed.cell_ids, lons=packed.lons, lats=packed.lats,
                    aod=packed.aod[:, start:stop], z=packed.z[:, start:stop],
                    day_offsets=packed.day_offsets[start:stop])
                vals = predict_block(f.draws, sub, mode, rng, caches=caches)
                ok = np.isfinite(vals[:, :, 0])
                rows = np.array([nat_pos[cid] for cid in packed.cell_ids])
                acc[rows] += np.where(ok[:, :, None], vals, 0.0)
                count[rows] += ok
            with np.errstate(invalid="ignore"):
                blended = np.where(count[:, :, None] > 0,
                                   acc / np.maximum(count, 1)[:, :, None], np.nan)
            ok_day = count > 0
            season_sum += np.where(ok_day[:, :, None], blended, 0.0).sum(axis=1)
            season_days += ok_day.sum(axis=1)

            mean, sd, lo, hi = summarize_draws(blended)
            for d in range(width):
                date_str = dates[start + d].isoformat()
                for i in range(n_nat):
                    nb = int(count[i, d])
                    if nb == 0:
                        out.daily_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                               cell_sites[nat_ids[i]].lat, date_str,
                                               np.nan, np.nan, np.nan, np.nan, 0))
                        out.n_missing_cell_days += 1
                    else:
                        out.daily_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                               cell_sites[nat_ids[i]].lat, date_str,
                                               mean[i, d], sd[i, d], lo[i, d],
                                               hi[i, d], nb))

        for f, packed, _, _ in block_cells:
            rows = np.array([nat_pos[cid] for cid in packed.cell_ids])
            touched = np.isfinite(packed.aod).any(axis=1)
            season_blocks[rows] += touched

        label = SEASON_LABELS.get(window.index, f"window{window.index}")
        with np.errstate(invalid="ignore"):
            season_vals = np.where(season_days[:, None] > 0,
                                   season_sum / np.maximum(season_days, 1)[:, None],
                                   np.nan)
        mean, sd, lo, hi = summarize_draws(season_vals)
        for i in range(n_nat):
            if season_days[i] == 0:
                out.seasonal_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                          cell_sites[nat_ids[i]].lat, label,
                                          np.nan, np.nan, np.nan, np.nan, 0))
            else:
                out.seasonal_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                          cell_sites[nat_ids[i]].lat, label,
                                          mean[i], sd[i], lo[i], hi[i],
                                          int(season_blocks[i])))
        annual_sum += season_sum
        annual_days += season_days
        annual_blocks += season_blocks

    with np.errstate(invalid="ignore"):
        annual_vals = np.where(annual_days[:, None] > 0,
                               annual_sum / np.maximum(annual_days, 1)[:, None],
                               np.nan)
    mean, sd, lo, hi = summarize_draws(annual_vals)
    for i in range(n_nat):
        if annual_days[i] == 0:
            out.annual_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                    cell_sites[nat_ids[i]].lat, "annual",
                                    np.nan, np.nan, np.nan, np.nan, 0))
        else:
            out.annual_rows.append((nat_ids[i], cell_sites[nat_ids[i]].lon,
                                    cell_sites[nat_ids[i]].lat, "annual",
                                    mean[i], sd[i], lo[i], hi[i],
                                    int(annual_blocks[i])))
    return out


# ---------------------------------------------------------------------------
# Cross-validation


def _cv_job(payload):
    (fold, name, index, data, config, held) = payload
    seed = np.random.SeedSequence(config.master_seed,
                                  spawn_key=(_DOMAIN_CV_FIT, fold, index))
    draws = run_chain(data, config, seed_seq=seed)
    rng = np.random.default_rng(np.random.SeedSequence(
        config.master_seed, spawn_key=(_DOMAIN_CV_PREDICT, fold, index)))
    indices, lons, lats, aod, z, day_offsets, obs = held
    pred = predict_records(draws, lons, lats, aod, z, day_offsets, rng)
    return fold, name, indices, obs, pred


def cross_validate_impl(records: list[MonitorRecord],
                        region_map: dict[str, RegionId],
                        grid_cells: list[GridCellDay],
                        plan: validation.FoldPlan,
                        config, chain_config: ChainConfig | None = None):
    """Refit owning blocks per fold, score held-out records.

    Held-out records are removed globally before training, so a monitor in
    a held-out fold also vanishes from foreign buffers (no leakage). Each
    held-out record is predicted by its primary block with full predictive
    draws. Returns (CvReport, prediction rows) with rows ordered by record.
    """
    chain_config = chain_config or config.chain_config()
    year = dataset_year(records)
    windows = windows_for_year(year)
    monitors = unique_monitors(records)
    blocks = assign_blocks(monitors, unique_cells(grid_cells), region_map,
                           windows, buffer_km=config.buffer_km)
    by_key = {(b.region, b.window.index): b for b in blocks}

    payloads = []
    skipped: list[str] = []
    for fold in range(plan.k):
        held_mask = plan.record_folds == fold
        train = [r for r, h in zip(records, held_mask) if not h]
        held_by_block: dict[tuple, list[int]] = {}
        for i, r in enumerate(records):
            if not held_mask[i]:
                continue
            window = window_for_day(r.day, windows)
            key = (region_map[r.site.id], window.index)
            held_by_block.setdefault(key, []).append(i)

        for key in sorted(held_by_block,
                          key=lambda kk: block_order_index(kk[0], kk[1])):
            spec = by_key[key]
            index = block_order_index(spec.region, spec.window.index)
            try:
                prepared = _prepare_block(spec, train)
            except InputError as exc:
                skipped.append(f"fold {fold} block {spec.name}: {exc}")
                continue
            if prepared is None:
                skipped.append(f"fold {fold} block {spec.name}: no training records")
                continue
            data, transform, _ = prepared
            if data.n_sites < 2 or len(np.unique(data.day_idx)) < 2:
                skipped.append(f"fold {fold} block {spec.name}: degenerate training block")
                continue
            held_idx = held_by_block[key]
            held_records = apply_transform(transform, [records[i] for i in held_idx])
            kept = [(i, r) for i, r in zip(held_idx, held_records) if r.complete]
            if not kept:
                continue
            indices = np.array([i for i, _ in kept])
            lons = np.array([r.site.lon for _, r in kept])
            lats = np.array([r.site.lat for _, r in kept])
            aod = np.array([r.aod for _, r in kept])
            z = np.array([r.z for _, r in kept])
            day_offsets = np.array([spec.window.day_offset(r.day) for _, r in kept],
                                   dtype=np.intp)
            obs = np.array([r.pm25 for _, r in kept])
            payloads.append((fold, spec.name, index, data, chain_config,
                             (indices, lons, lats, aod, z, day_offsets, obs)))

    results = _run_jobs(payloads, _cv_job, config.workers)

    all_idx: list[int] = []
    all_obs: list[float] = []
    all_pred: list[np.ndarray] = []
    all_fold: list[int] = []
    for fold, name, indices, obs, pred in results:
        all_idx.extend(int(i) for i in indices)
        all_obs.extend(obs)
        all_pred.extend(pred)
        all_fold.extend([fold] * len(indices))
    if not all_idx:
        raise InputError("cross-validation produced no predictions "
                         f"({len(skipped)} block-folds skipped)")
    order = np.argsort(np.array(all_idx), kind="stable")
    idx = np.array(all_idx)[order]
    obs = np.array(all_obs)[order]
    pred = np.array(all_pred)[order]
    folds = np.array(all_fold)[order]
    regions = [region_map[records[i].site.id] for i in idx]

    report = validation.build_report(
        plan.scheme, plan.k, plan.seed, regions, obs,
        pred.mean(axis=1), pred, skipped=tuple(skipped))
    lo, hi = np.percentile(pred, [5.0, 95.0], axis=1)
    rows = [(int(i), records[int(i)].site.id, records[int(i)].day.isoformat(),
             int(f), float(o), float(m), float(l), float(h))
            for i, f, o, m, l, h in zip(idx, folds, obs, pred.mean(axis=1), lo, hi)]
    for message in skipped:
        log.warning("cross-validation: %s", message)
    return report, rows
