"""Batch orchestration: CSV ingestion, staged pipeline run, result export.

Input CSV schemas (UTF-8, '.' decimal, headers required):
  stations: id,x,y                    unique ids, planar coordinates
  readings: station_id,step_index,value   0-based consecutive steps,
                                          complete station x step matrix
  border:   x,y                       polygon vertices in order,
                                      implicitly closed
"""

from __future__ import annotations

import csv
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .border import CornerParams, Polyline, simplify_border
from .bspline import BSplineVolume, eval_volume
from .errors import ConfigError, DomainError, InputError
from .keyfit import fit_volume
from .kriging import GriddedDataset, build_grid
from .meshparam import mean_value_param, perturbation_loop
from .storage import atomic_write_text, read_volume, write_grid, write_volume
from .triangulation import constrained_delaunay

_VARIOGRAM_KINDS = ("spherical", "exponential", "gaussian")
_KRIGING_SPACES = ("param", "geo")


@dataclass(frozen=True)
class PipelineConfig:
    """Validated knobs for one pipeline run, loadable from key=value text."""

    stations_csv: str = ""
    readings_csv: str = ""
    border_csv: str = ""
    output_dir: str = "out"
    degree_u: int = 3
    degree_v: int = 3
    degree_t: int = 3
    border_target_ratio: float = 0.5
    corner_d_min: float = 0.0  # 0 means scale-relative default
    corner_d_max: float = 0.0
    corner_alpha_max: float = 160.0
    perturb_growth: float = 2.0
    perturb_cap_fraction: float = 0.7
    perturb_max_iters: int = 10
    variogram_kind: str = "spherical"
    variogram_bins: int = 12
    variogram_max_lag: float = 0.0  # 0 means automatic
    kriging_space: str = "param"
    key_tolerance: float = 1e-10
    condition_warn_threshold: float = 1e12

    def __post_init__(self):
        if min(self.degree_u, self.degree_v, self.degree_t) < 1:
            raise ConfigError("degrees must be at least 1")
        if not 0.0 < self.border_target_ratio <= 1.0:
            raise ConfigError("border_target_ratio must be in (0, 1]")
        if self.corner_d_min < 0 or self.corner_d_max < 0:
            raise ConfigError("corner arm bounds must be non-negative")
        if (self.corner_d_min > 0) != (self.corner_d_max > 0):
            raise ConfigError("set both corner_d_min and corner_d_max or neither")
        if not 0.0 < self.corner_alpha_max < 180.0:
            raise ConfigError("corner_alpha_max must be in (0, 180)")
        if self.perturb_growth <= 1.0:
            raise ConfigError("perturb_growth must exceed 1")
        if not 0.0 < self.perturb_cap_fraction <= 1.0:
            raise ConfigError("perturb_cap_fraction must be in (0, 1]")
        if self.perturb_max_iters < 1:
            raise ConfigError("perturb_max_iters must be at least 1")
        if self.variogram_kind not in _VARIOGRAM_KINDS:
            raise ConfigError(f"variogram_kind must be one of {_VARIOGRAM_KINDS}")
        if self.variogram_bins < 1:
            raise ConfigError("variogram_bins must be at least 1")
        if self.variogram_max_lag < 0:
            raise ConfigError("variogram_max_lag must be non-negative")
        if self.kriging_space not in _KRIGING_SPACES:
            raise ConfigError(f"kriging_space must be one of {_KRIGING_SPACES}")
        if self.key_tolerance <= 0 or self.condition_warn_threshold <= 0:
            raise ConfigError("tolerances must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        """Parse a flat key=value document; unknown keys are rejected."""
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            kind = known[key]
            try:
                if kind == "int" or kind is int:
                    kwargs[key] = int(value)
                elif kind == "float" or kind is float:
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = value
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
        return cls(**kwargs)


@dataclass
class Dataset:
    """Ingested and cross-validated inputs."""

    station_ids: tuple[str, ...]
    station_xy: np.ndarray
    readings: np.ndarray
    border: Polyline

    @property
    def n_stations(self) -> int:
        return len(self.station_ids)

    @property
    def n_steps(self) -> int:
        return self.readings.shape[1]


def _read_csv(path: str | Path, header: list[str]) -> list[tuple[int, list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [(i, row) for i, row in enumerate(reader, 1) if row]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty file")
    first_no, first = rows[0]
    if [c.strip() for c in first] != header:
        raise InputError(f"{path}:{first_no}: header must be {','.join(header)}")
    return rows[1:]


def ingest(
    stations_path: str | Path,
    readings_path: str | Path,
    border_path: str | Path,
) -> Dataset:
    """Load and cross-validate the three input CSV files.

    Raises InputError with the offending row number for malformed rows,
    unknown or duplicate station ids, missing readings, or stations
    outside the border.
    """
    ids: list[str] = []
    xy: list[list[float]] = []
    seen: set[str] = set()
    for lineno, row in _read_csv(stations_path, ["id", "x", "y"]):
        if len(row) != 3:
            raise InputError(f"{stations_path}:{lineno}: expected 3 columns")
        sid = row[0].strip()
        if not sid:
            raise InputError(f"{stations_path}:{lineno}: empty station id")
        if sid in seen:
            raise InputError(f"{stations_path}:{lineno}: duplicate station id {sid!r}")
        try:
            xy.append([float(row[1]), float(row[2])])
        except ValueError as exc:
            raise InputError(f"{stations_path}:{lineno}: bad coordinate: {exc}") from exc
        seen.add(sid)
        ids.append(sid)
    if not ids:
        raise InputError(f"{stations_path}: no stations")
    index = {sid: k for k, sid in enumerate(ids)}

    triples: dict[tuple[int, int], float] = {}
    max_step = -1
    for lineno, row in _read_csv(readings_path, ["station_id", "step_index", "value"]):
        if len(row) != 3:
            raise InputError(f"{readings_path}:{lineno}: expected 3 columns")
        sid = row[0].strip()
        if sid not in index:
            raise InputError(f"{readings_path}:{lineno}: unknown station id {sid!r}")
        try:
            step = int(row[1])
            value = float(row[2])
        except ValueError as exc:
            raise InputError(f"{readings_path}:{lineno}: bad row: {exc}") from exc
        if step < 0:
            raise InputError(f"{readings_path}:{lineno}: negative step index")
        key = (index[sid], step)
        if key in triples:
            raise InputError(
                f"{readings_path}:{lineno}: duplicate reading for {sid!r} step {step}"
            )
        triples[key] = value
        max_step = max(max_step, step)
    n_steps = max_step + 1
    if n_steps < 1:
        raise InputError(f"{readings_path}: no readings")
    readings = np.full((len(ids), n_steps), np.nan)
    for (s, k), value in triples.items():
        readings[s, k] = value
    missing = np.argwhere(np.isnan(readings))
    if missing.size:
        s, k = missing[0]
        raise InputError(
            f"{readings_path}: missing reading for station {ids[int(s)]!r} step {int(k)}"
        )

    border_pts: list[list[float]] = []
    for lineno, row in _read_csv(border_path, ["x", "y"]):
        if len(row) != 2:
            raise InputError(f"{border_path}:{lineno}: expected 2 columns")
        try:
            border_pts.append([float(row[0]), float(row[1])])
        except ValueError as exc:
            raise InputError(f"{border_path}:{lineno}: bad coordinate: {exc}") from exc
    if len(border_pts) >= 2 and border_pts[0] == border_pts[-1]:
        border_pts = border_pts[:-1]  # accept an explicit closing vertex
    if len(border_pts) < 3:
        raise InputError(f"{border_path}: a border needs at least 3 vertices")
    border = Polyline(np.asarray(border_pts))

    from shapely.geometry import Point, Polygon

    poly = Polygon(border.points)
    if not poly.is_valid:
        raise InputError(f"{border_path}: border polygon is not simple")
    stations = np.asarray(xy)
    for k, (x, y) in enumerate(stations):
        if not poly.contains(Point(x, y)):
            raise InputError(f"station {ids[k]!r} lies outside (or on) the border")
    return Dataset(
        station_ids=tuple(ids), station_xy=stations, readings=readings, border=border
    )


@dataclass
class RunReport:
    """Facts about one pipeline run; residuals come from re-evaluating the
    persisted volume, not from solver internals."""

    stage_seconds: dict[str, float]
    n_stations: int
    n_steps: int
    border_vertices_in: int
    border_vertices_out: int
    params_before: tuple[int, int]
    params_after: tuple[int, int]
    perturb_iterations: int
    grid_shape: tuple[int, int, int]
    control_shape: tuple[int, int, int]
    max_station_residual: float
    mean_station_residual: float
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "stage_seconds": {k: round(v, 6) for k, v in self.stage_seconds.items()},
            "n_stations": self.n_stations,
            "n_steps": self.n_steps,
            "border_vertices_in": self.border_vertices_in,
            "border_vertices_out": self.border_vertices_out,
            "params_before": list(self.params_before),
            "params_after": list(self.params_after),
            "perturb_iterations": self.perturb_iterations,
            "grid_shape": list(self.grid_shape),
            "control_shape": list(self.control_shape),
            "max_station_residual": self.max_station_residual,
            "mean_station_residual": self.mean_station_residual,
            "warnings": self.warnings,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def station_residuals(vol: BSplineVolume, grid: GriddedDataset) -> tuple[float, float]:
    """Max and mean absolute volume error over all station cells and steps.

    Key cells hold the original readings verbatim, so this measures the
    reconstruction error at the trusted samples.
    """
    cells = np.argwhere(grid.key_mask)
    errs = []
    for i, j in cells:
        u, v = grid.u_values[i], grid.v_values[j]
        for k, t in enumerate(grid.t_values):
            value = eval_volume(vol, u, v, t)[0]
            errs.append(abs(value - grid.values[i, j, k]))
    errs = np.asarray(errs)
    return float(errs.max()), float(errs.mean())


def volume_path(config: PipelineConfig) -> Path:
    return Path(config.output_dir) / "volume.txt"


def grid_path(config: PipelineConfig) -> Path:
    return Path(config.output_dir) / "grid.txt"


def report_path(config: PipelineConfig) -> Path:
    return Path(config.output_dir) / "report.json"


def run_pipeline(config: PipelineConfig, dataset: Dataset) -> tuple[BSplineVolume, RunReport]:
    """Run border -> mesh -> parametrize -> merge -> krige -> fit, persist
    the volume, grid and report, and return the reloaded results.

    Station cell ordering follows the key mask, which matches the station
    input order produced by the perturbation stage.
    """
    timings: dict[str, float] = {}
    warnings: list[str] = []

    @contextmanager
    def timed(name):
        t0 = time.perf_counter()
        yield
        timings[name] = time.perf_counter() - t0

    n_stations = dataset.n_stations
    target = int(np.floor(n_stations * config.border_target_ratio))
    target = min(max(target, 8), max(n_stations, 8))
    with timed("simplify_border"):
        cp = None
        if config.corner_d_min > 0:
            cp = CornerParams(
                d_min=config.corner_d_min,
                d_max=config.corner_d_max,
                alpha_max=config.corner_alpha_max,
            )
        # Corner cutting may strand a station outside the simplified
        # polygon; back off toward the original border until none is.
        from shapely.geometry import Point, Polygon

        while True:
            border = simplify_border(dataset.border, target, cp)
            poly = Polygon(border.points)
            if all(poly.contains(Point(x, y)) for x, y in dataset.station_xy):
                break
            if target >= len(dataset.border):
                raise InputError("no simplified border contains every station")
            warnings.append(
                f"border target {target} stranded a station; retrying coarser"
            )
            target = min(2 * target, len(dataset.border))

    with timed("triangulate"):
        mesh = constrained_delaunay(dataset.station_xy, border)

    with timed("parametrize"):
        assignment = mean_value_param(mesh)
    params_before = (assignment.distinct_u().size, assignment.distinct_v().size)

    with timed("perturb"):
        cap = max(4, int(np.ceil(config.perturb_cap_fraction * n_stations)))
        perturbed = perturbation_loop(
            assignment,
            mesh,
            max_iters=config.perturb_max_iters,
            growth=config.perturb_growth,
            cap_u=cap,
            cap_v=cap,
        )
    grid_axes = perturbed.grid
    params_after = grid_axes.shape

    with timed("krige"):
        t_values = (
            np.linspace(0.0, 1.0, dataset.n_steps)
            if dataset.n_steps > 1
            else np.array([0.0])
        )
        grid, fits = build_grid(
            grid_axes,
            grid_axes.station_params(),
            dataset.readings,
            t_values,
            kind=config.variogram_kind,
            n_bins=config.variogram_bins,
            max_lag=config.variogram_max_lag or None,
            kriging_space=config.kriging_space,
            mesh=mesh,
            assignment=perturbed.assignment,
            station_xy=dataset.station_xy,
        )
        for k, fit in enumerate(fits):
            if fit.status != "ok":
                warnings.append(f"variogram step {k}: {fit.status}")

    with timed("fit_volume"):
        volume, fit_report = fit_volume(
            grid,
            degrees=(config.degree_u, config.degree_v, config.degree_t),
            key_tol=config.key_tolerance,
            cond_threshold=config.condition_warn_threshold,
        )
    warnings.extend(fit_report.condition_warnings)

    with timed("persist"):
        write_volume(volume, volume_path(config))
        write_grid(grid, grid_path(config))

    with timed("verify"):
        reloaded = read_volume(volume_path(config))
        max_res, mean_res = station_residuals(reloaded, grid)

    report = RunReport(
        stage_seconds=timings,
        n_stations=n_stations,
        n_steps=dataset.n_steps,
        border_vertices_in=len(dataset.border),
        border_vertices_out=len(border),
        params_before=params_before,
        params_after=params_after,
        perturb_iterations=perturbed.iterations,
        grid_shape=grid.shape,
        control_shape=fit_report.control_shape,
        max_station_residual=max_res,
        mean_station_residual=mean_res,
        warnings=warnings,
    )
    atomic_write_text(report_path(config), report.to_json())
    return reloaded, report


def sample_surface(
    vol: BSplineVolume, t: float, res_u: int, res_v: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform res_u x res_v sampling of the surface at time t.

    Returns (u, v, values) where values[i, j] is the first value component
    at (u[i], v[j], t).
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t={t} outside [0, 1]")
    if res_u < 2 or res_v < 2:
        raise ValueError("resolutions must be at least 2")
    us = np.linspace(0.0, 1.0, res_u)
    vs = np.linspace(0.0, 1.0, res_v)
    values = np.empty((res_u, res_v))
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            values[i, j] = eval_volume(vol, u, v, t)[0]
    return us, vs, values


@dataclass
class IsoCurve:
    """An iso-u polyline plus the grid-row markers it should thread."""

    v_samples: np.ndarray
    curve_values: np.ndarray
    marker_v: np.ndarray
    marker_values: np.ndarray
    marker_is_key: np.ndarray
    grid_u_index: int
    grid_t_index: int


def extract_iso_u_curve(
    vol: BSplineVolume, grid: GriddedDataset, u: float, t: float, res: int
) -> IsoCurve:
    """Sample the curve v -> M(u, v, t) plus overlay markers.

    Markers are the grid row at the grid u value nearest to `u` and the
    grid time nearest to `t`: key markers are station readings, the rest
    are kriged values.
    """
    if not 0.0 <= u <= 1.0 or not 0.0 <= t <= 1.0:
        raise DomainError("u and t must lie in [0, 1]")
    if res < 2:
        raise ValueError("res must be at least 2")
    vs = np.linspace(0.0, 1.0, res)
    curve = np.array([eval_volume(vol, u, v, t)[0] for v in vs])
    iu = int(np.argmin(np.abs(grid.u_values - u)))
    it = int(np.argmin(np.abs(grid.t_values - t)))
    return IsoCurve(
        v_samples=vs,
        curve_values=curve,
        marker_v=grid.v_values.copy(),
        marker_values=grid.values[iu, :, it].copy(),
        marker_is_key=grid.key_mask[iu, :].copy(),
        grid_u_index=iu,
        grid_t_index=it,
    )


def config_with_paths(
    config: PipelineConfig, stations: str, readings: str, border: str
) -> PipelineConfig:
    return replace(
        config, stations_csv=stations, readings_csv=readings, border_csv=border
    )
