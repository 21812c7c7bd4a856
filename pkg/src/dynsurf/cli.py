"""Batch command-line front end.

Subcommands: fit (run the pipeline), sample (surface grid CSV), iso
(iso-u curve CSV), report (recompute residuals from persisted outputs),
validate (ingestion checks only). All diagnostics go to standard error;
data is written to files only. Exit codes: 0 success, 2 validation error,
3 numerical or feasibility error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    DynsurfError,
    InputError,
)
from .pipeline import (
    PipelineConfig,
    extract_iso_u_curve,
    grid_path,
    ingest,
    report_path,
    run_pipeline,
    sample_surface,
    station_residuals,
    volume_path,
)
from .storage import atomic_write_text, read_grid, read_volume

log = logging.getLogger("dynsurf")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _load_config(path: str) -> PipelineConfig:
    if not Path(path).exists():
        raise ConfigError(f"config file {path} does not exist")
    return PipelineConfig.from_file(path)


def _ingest_from_config(config: PipelineConfig):
    for name, value in (
        ("stations_csv", config.stations_csv),
        ("readings_csv", config.readings_csv),
        ("border_csv", config.border_csv),
    ):
        if not value:
            raise ConfigError(f"config is missing {name}")
    return ingest(config.stations_csv, config.readings_csv, config.border_csv)


def _cmd_fit(args) -> int:
    config = _load_config(args.config)
    dataset = _ingest_from_config(config)
    volume, report = run_pipeline(config, dataset)
    log.info("volume written to %s", volume_path(config))
    log.info("grid written to %s", grid_path(config))
    log.info("report written to %s", report_path(config))
    log.info(
        "stations %d, grid %s, controls %s, max residual %.3e",
        report.n_stations,
        "x".join(map(str, report.grid_shape)),
        "x".join(map(str, report.control_shape)),
        report.max_station_residual,
    )
    return EXIT_OK


def _cmd_sample(args) -> int:
    config = _load_config(args.config)
    vol = read_volume(volume_path(config))
    us, vs, values = sample_surface(vol, args.t, args.res_u, args.res_v)
    out = args.out or str(Path(config.output_dir) / f"surface_t{args.t:g}.csv")
    lines = ["u,v,value"]
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            lines.append(f"{u:.17g},{v:.17g},{values[i, j]:.17g}")
    atomic_write_text(out, "\n".join(lines) + "\n")
    log.info("surface sample written to %s", out)
    return EXIT_OK


def _cmd_iso(args) -> int:
    config = _load_config(args.config)
    vol = read_volume(volume_path(config))
    grid = read_grid(grid_path(config))
    iso = extract_iso_u_curve(vol, grid, args.u, args.t, args.res)
    out = args.out or str(Path(config.output_dir) / f"iso_u{args.u:g}_t{args.t:g}.csv")
    lines = ["kind,v,value"]
    for v, val in zip(iso.v_samples, iso.curve_values):
        lines.append(f"curve,{v:.17g},{val:.17g}")
    for v, val, is_key in zip(iso.marker_v, iso.marker_values, iso.marker_is_key):
        kind = "key" if is_key else "nonkey"
        lines.append(f"{kind},{v:.17g},{val:.17g}")
    atomic_write_text(out, "\n".join(lines) + "\n")
    log.info("iso-u curve written to %s", out)
    return EXIT_OK


def _cmd_report(args) -> int:
    config = _load_config(args.config)
    dataset = _ingest_from_config(config)
    vol = read_volume(volume_path(config))
    grid = read_grid(grid_path(config))
    cells = np.argwhere(grid.key_mask)
    if cells.shape[0] != dataset.n_stations:
        raise InputError("persisted grid does not match the configured dataset")
    max_res, mean_res = station_residuals(vol, grid)
    payload = {
        "max_station_residual": max_res,
        "mean_station_residual": mean_res,
        "grid_shape": list(grid.shape),
        "control_shape": list(vol.shape),
    }
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = _load_config(args.config)
    dataset = _ingest_from_config(config)
    log.info(
        "inputs valid: %d stations, %d steps, %d border vertices",
        dataset.n_stations,
        dataset.n_steps,
        len(dataset.border),
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynsurf",
        description="Fit a time-varying B-spline surface to scattered station data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="run the full pipeline")
    p_fit.add_argument("--config", required=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_sample = sub.add_parser("sample", help="sample the fitted surface at one time")
    p_sample.add_argument("--config", required=True)
    p_sample.add_argument("--t", type=float, required=True)
    p_sample.add_argument("--res-u", type=int, default=50)
    p_sample.add_argument("--res-v", type=int, default=50)
    p_sample.add_argument("--out")
    p_sample.set_defaults(func=_cmd_sample)

    p_iso = sub.add_parser("iso", help="extract an iso-u curve with grid markers")
    p_iso.add_argument("--config", required=True)
    p_iso.add_argument("--u", type=float, required=True)
    p_iso.add_argument("--t", type=float, required=True)
    p_iso.add_argument("--res", type=int, default=200)
    p_iso.add_argument("--out")
    p_iso.set_defaults(func=_cmd_iso)

    p_report = sub.add_parser("report", help="recompute residuals from saved outputs")
    p_report.add_argument("--config", required=True)
    p_report.set_defaults(func=_cmd_report)

    p_validate = sub.add_parser("validate", help="run ingestion checks only")
    p_validate.add_argument("--config", required=True)
    p_validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError, DomainError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except DynsurfError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
