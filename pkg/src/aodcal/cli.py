"""Batch command line: fit | predict | validate | simulate.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 partial
completion (some blocks or folds skipped). All randomness flows from the
single master seed, so reruns and different worker counts are byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import figures, io, pipeline, synthetic, validation
from .errors import InputError, NumericalError
from .mcmc import summarize

log = logging.getLogger("aodcal")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_PARTIAL = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--monitor-csv", dest="monitor_csv")
    parser.add_argument("--grid-csv", dest="grid_csv")
    parser.add_argument("--out", dest="output_dir")
    parser.add_argument("--n-iter", dest="n_iter", type=int)
    parser.add_argument("--burnin", dest="n_burnin", type=int)
    parser.add_argument("--thin", dest="thin", type=int)
    parser.add_argument("--seed", dest="master_seed", type=int)
    parser.add_argument("--taper-range", dest="taper_range_km", type=float)
    parser.add_argument("--buffer-km", dest="buffer_km", type=float)
    parser.add_argument("--mode", dest="prediction_mode",
                        choices=["latent", "predictive"])
    parser.add_argument("--cv-scheme", dest="cv_scheme",
                        choices=["rcv", "scv", "both"])
    parser.add_argument("--folds", dest="cv_folds", type=int)
    parser.add_argument("--workers", dest="workers", type=int)
    fig = parser.add_mutually_exclusive_group()
    fig.add_argument("--figures", dest="figures", action="store_true", default=None)
    fig.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    parser.add_argument("--quiet", action="store_true")


def _config_from_args(args) -> io.RunConfig:
    override_keys = ["monitor_csv", "grid_csv", "output_dir", "n_iter", "n_burnin",
                     "thin", "master_seed", "taper_range_km", "buffer_km",
                     "prediction_mode", "cv_scheme", "cv_folds", "workers", "figures"]
    overrides = {k: getattr(args, k, None) for k in override_keys}
    return io.load_config(args.config, overrides)


def _require(config: io.RunConfig, *fields: str) -> None:
    missing = [f for f in fields if not getattr(config, f)]
    if missing:
        raise InputError("missing required settings: " + ", ".join(missing))


def _load_dataset(config: io.RunConfig):
    records, region_map = io.read_monitor_csv(config.monitor_csv)
    if not records:
        raise InputError(f"{config.monitor_csv}: no records")
    grid_cells, unknown = io.read_grid_csv(config.grid_csv)
    if unknown:
        listing = ", ".join(f"line {ln} ({reg!r})" for ln, reg in unknown[:10])
        log.warning("grid: skipped %d rows with unknown regions: %s",
                    len(unknown), listing)
    return records, region_map, grid_cells, unknown


def cmd_fit(args) -> int:
    config = _config_from_args(args)
    _require(config, "monitor_csv", "grid_csv", "output_dir")
    records, region_map, grid_cells, _ = _load_dataset(config)
    result = pipeline.fit_blocks(records, region_map, grid_cells, config)
    if not result.fits:
        raise InputError("no block could be fit; "
                         f"skipped: {result.skipped}")

    os.makedirs(config.output_dir, exist_ok=True)
    manifest_blocks = []
    for name in result.fitted_names:
        fit = result.fits[name]
        bdir = io.block_dir(config.output_dir, name)
        io.write_draws(bdir, fit.draws)
        summary = summarize(fit.draws)
        io.write_summary_csv(os.path.join(bdir, "summary.csv"), summary)
        io.write_diagnostics(os.path.join(bdir, "diagnostics.txt"),
                             fit.draws, summary)
        with open(os.path.join(bdir, "transform.txt"), "w") as fh:
            fh.write(fit.transform.to_text())
        manifest_blocks.append({
            "name": name, "index": fit.index,
            "n_records": fit.n_records, "n_excluded": fit.n_excluded,
            "n_draws": fit.draws.n_draws, "skipped": None,
        })
        if config.figures:
            fig_dir = figures.ensure_dir(os.path.join(config.output_dir, "figures"))
            figures.chain_trace(name, fit.draws.loglik_trace,
                                os.path.join(fig_dir, f"fit_{name}_trace.png"))
    for name, reason in sorted(result.skipped):
        manifest_blocks.append({"name": name, "index": None, "n_records": None,
                                "n_excluded": None, "n_draws": 0, "skipped": reason})
    manifest_blocks.sort(key=lambda b: b["name"])
    io.write_manifest(os.path.join(config.output_dir, "manifest.json"),
                      config, manifest_blocks)
    log.info("fit %d blocks, skipped %d", len(result.fits), len(result.skipped))
    return EXIT_PARTIAL if result.skipped else EXIT_OK


def _load_fit_result(config: io.RunConfig, records, region_map, grid_cells):
    """Rebuild a FitResult from a fit output directory."""
    manifest = io.read_manifest(os.path.join(config.output_dir, "manifest.json"))
    year = pipeline.dataset_year(records)
    windows = pipeline.windows_for_year(year)
    monitors = pipeline.unique_monitors(records)
    blocks = pipeline.assign_blocks(monitors, pipeline.unique_cells(grid_cells),
                                    region_map, windows, buffer_km=config.buffer_km)
    by_name = {b.name: b for b in blocks}
    result = pipeline.FitResult(blocks=blocks)
    for entry in manifest["blocks"]:
        if entry.get("skipped") or entry["n_draws"] == 0:
            continue
        name = entry["name"]
        bdir = io.block_dir(config.output_dir, name)
        draws = io.read_draws(bdir)
        with open(os.path.join(bdir, "transform.txt")) as fh:
            transform = pipeline.TransformSpec.from_text(fh.read())
        result.fits[name] = pipeline.BlockFit(
            name=name, index=entry["index"], spec=by_name[name], draws=draws,
            transform=transform, n_records=entry["n_records"],
            n_excluded=entry["n_excluded"])
    return result


def cmd_predict(args) -> int:
    config = _config_from_args(args)
    _require(config, "monitor_csv", "grid_csv", "output_dir")
    records, region_map, grid_cells, unknown = _load_dataset(config)
    result = _load_fit_result(config, records, region_map, grid_cells)
    if not result.fits:
        raise InputError("fit directory contains no fitted blocks")
    surfaces = pipeline.predict_surfaces(result, grid_cells, config)

    pred_dir = os.path.join(config.output_dir, "predictions")
    os.makedirs(pred_dir, exist_ok=True)
    io.write_predictions_csv(os.path.join(pred_dir, "daily.csv"), surfaces.daily_rows)
    io.write_predictions_csv(os.path.join(pred_dir, "seasonal.csv"),
                             surfaces.seasonal_rows)
    io.write_predictions_csv(os.path.join(pred_dir, "annual.csv"), surfaces.annual_rows)
    if config.figures:
        fig_dir = figures.ensure_dir(os.path.join(config.output_dir, "figures"))
        figures.surface_map(surfaces.annual_rows, "mean", "annual mean PM2.5",
                            os.path.join(fig_dir, "annual_mean.png"))
        figures.surface_map(surfaces.annual_rows, "sd", "annual PM2.5 SD",
                            os.path.join(fig_dir, "annual_sd.png"))
        figures.seasonal_maps(surfaces.seasonal_rows, "mean",
                              os.path.join(fig_dir, "seasonal_mean.png"))
        figures.seasonal_maps(surfaces.seasonal_rows, "sd",
                              os.path.join(fig_dir, "seasonal_sd.png"))
    log.info("wrote %d daily, %d seasonal, %d annual rows (%d missing cell-days)",
             len(surfaces.daily_rows), len(surfaces.seasonal_rows),
             len(surfaces.annual_rows), surfaces.n_missing_cell_days)
    return EXIT_PARTIAL if unknown else EXIT_OK


def cmd_validate(args) -> int:
    config = _config_from_args(args)
    _require(config, "monitor_csv", "grid_csv", "output_dir")
    records, region_map, grid_cells, _ = _load_dataset(config)
    schemes = [config.cv_scheme] if config.cv_scheme != "both" else ["rcv", "scv"]
    cv_dir = os.path.join(config.output_dir, "cv")
    os.makedirs(cv_dir, exist_ok=True)
    any_skipped = False
    for scheme in schemes:
        plan = validation.make_folds(records, scheme, config.cv_folds,
                                     config.master_seed)
        report, rows = pipeline.cross_validate_impl(
            records, region_map, grid_cells, plan, config)
        io.write_cv_report_csv(os.path.join(cv_dir, f"report_{scheme}.csv"), report)
        io.write_cv_predictions_csv(os.path.join(cv_dir, f"predictions_{scheme}.csv"),
                                    rows)
        any_skipped = any_skipped or bool(report.skipped)
        if config.figures:
            fig_dir = figures.ensure_dir(os.path.join(config.output_dir, "figures"))
            regions_of = {sid: region_map[sid].value for sid in region_map}
            figures.cv_scatter(rows, regions_of,
                               os.path.join(fig_dir, f"cv_scatter_{scheme}.png"))
        overall = report.overall()
        log.info("%s: r2=%.3f rmse=%.3f slope=%.3f coverage=%.3f",
                 scheme, overall["r2"], overall["rmse"], overall["slope"],
                 overall["pi90_coverage"])
    return EXIT_PARTIAL if any_skipped else EXIT_OK


_PRESETS = {
    # 2 regions, 1 window: the bundled small end-to-end dataset
    "mini-conus": dict(n_regions=2, window_indices=(1,), monitors_per_region=12,
                       n_cells=64, obs_rate=0.34),
    # all 9 regions, all 3 windows: partition bookkeeping at full structure
    "full-year": dict(n_regions=9, window_indices=(1, 2, 3), monitors_per_region=4,
                      n_cells=81, obs_rate=0.1),
    # two regions sharing one truth, dense cells across the seam
    "two-region": dict(n_regions=2, window_indices=(1,), monitors_per_region=14,
                       n_cells=100, obs_rate=0.34),
}


def cmd_simulate(args) -> int:
    preset = _PRESETS[args.preset]
    spec = synthetic.TruthSpec(
        n_cells=args.cells if args.cells is not None else preset["n_cells"],
        obs_rate=preset["obs_rate"],
        mu0=30.0, tau0=25.0, tau1=25.0, c1=2.0, c3=3.0,
        lon_range=(-100.0, -88.0), lat_range=(34.0, 42.0),
        phi1_km=250.0, phi2_km=250.0,
        aod_missing_rate=args.aod_missing,
    )
    monitors_per_region = (args.monitors if args.monitors is not None
                           else preset["monitors_per_region"])
    dataset = synthetic.make_dataset(
        spec, seed=args.seed, n_regions=preset["n_regions"],
        window_indices=preset["window_indices"],
        monitors_per_region=monitors_per_region)
    os.makedirs(args.out, exist_ok=True)
    io.write_monitor_csv(os.path.join(args.out, "monitors.csv"),
                         dataset.records, dataset.region_map)
    io.write_grid_csv(os.path.join(args.out, "grid.csv"), dataset.cells)
    with open(os.path.join(args.out, "truth_spec.json"), "w") as fh:
        fh.write(dataset.truths[min(dataset.truths)].spec.to_json())
        fh.write("\n")
    log.info("wrote %d monitor records, %d grid rows to %s",
             len(dataset.records), len(dataset.cells), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aodcal",
        description="Regional Bayesian downscaling of gridded AOD to daily "
                    "PM2.5 surfaces with posterior uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit all region x window blocks")
    _add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="render surfaces from a fit directory")
    _add_common(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_val = sub.add_parser("validate", help="run cross-validation")
    _add_common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_sim = sub.add_parser("simulate", help="emit a synthetic dataset")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--preset", choices=sorted(_PRESETS), default="mini-conus")
    p_sim.add_argument("--monitors", type=int, default=None,
                       help="monitors per region (preset default otherwise)")
    p_sim.add_argument("--cells", type=int, default=None)
    p_sim.add_argument("--aod-missing", type=float, default=0.1)
    p_sim.add_argument("--quiet", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
