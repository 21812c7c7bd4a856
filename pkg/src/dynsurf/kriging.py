"""Ordinary kriging onto the merged parameter grid.

Each time step fits a variogram model to that step's station values and
solves one ordinary-kriging system (weights constrained to sum to 1) for
all non-key grid cells at once. Key cells always carry the original
station readings verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import least_squares

from .errors import GeometryError, InputError, NumericalError
from .meshparam import ParamAssignment, ParamGrid
from .triangulation import TriangleMesh, barycentric_locate

VARIOGRAM_KINDS = ("spherical", "exponential", "gaussian")

_SILL_FLOOR = 1e-12


@dataclass(frozen=True)
class VariogramModel:
    """Isotropic semivariogram with nugget, total sill, and practical range.

    gamma(0) is exactly 0; for h > 0 the model rises from the nugget toward
    the sill, reaching (or closely approaching) it at `range_`.
    """

    kind: str
    nugget: float
    sill: float
    range_: float

    def __post_init__(self):
        if self.kind not in VARIOGRAM_KINDS:
            raise ValueError(f"unknown variogram kind {self.kind!r}")
        if self.nugget < 0 or self.sill <= 0 or self.range_ <= 0:
            raise ValueError("need nugget >= 0, sill > 0, range > 0")
        if self.nugget > self.sill:
            raise ValueError("nugget must not exceed the sill")

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        c = self.sill - self.nugget
        x = h / self.range_
        if self.kind == "spherical":
            g = np.where(x < 1.0, 1.5 * x - 0.5 * x**3, 1.0)
        elif self.kind == "exponential":
            g = 1.0 - np.exp(-3.0 * x)
        else:
            g = 1.0 - np.exp(-3.0 * x**2)
        return np.where(h > 0.0, self.nugget + c * g, 0.0)


def empirical_semivariogram(
    positions: np.ndarray,
    values: np.ndarray,
    n_bins: int = 12,
    max_lag: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Binned semivariance estimates (lags, gamma_hat, pair counts).

    gamma_hat(h) = sum (z_i - z_j)^2 / (2 N(h)) over point pairs whose
    distance falls in the bin; the reported lag is the mean pair distance
    in the bin and empty bins are omitted.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float).ravel()
    if positions.shape[0] < 2:
        raise ValueError("need at least 2 points")
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    iu = np.triu_indices(positions.shape[0], k=1)
    d = dist[iu]
    if np.all(d == 0.0):
        raise GeometryError("all points coincide")
    if max_lag is None:
        max_lag = 0.5 * float(d.max())
    sq = (values[iu[0]] - values[iu[1]]) ** 2
    keep = (d > 0.0) & (d <= max_lag)
    d, sq = d[keep], sq[keep]
    edges = np.linspace(0.0, max_lag, n_bins + 1)
    which = np.clip(np.digitize(d, edges) - 1, 0, n_bins - 1)
    lags, gammas, counts = [], [], []
    for b in range(n_bins):
        mask = which == b
        if not mask.any():
            continue
        lags.append(d[mask].mean())
        gammas.append(sq[mask].sum() / (2.0 * mask.sum()))
        counts.append(int(mask.sum()))
    return np.asarray(lags), np.asarray(gammas), np.asarray(counts)


@dataclass
class VariogramFit:
    model: VariogramModel
    residual: float
    status: str = "ok"


def fit_variogram(
    lags: np.ndarray,
    gammas: np.ndarray,
    counts: np.ndarray,
    kind: str = "spherical",
) -> VariogramFit:
    """Weighted least-squares fit of (nugget, sill, range) to binned data.

    Bin pair counts act as weights. A near-zero empirical sill falls back
    to a flat nugget-only model with status "nugget-only".
    """
    lags = np.asarray(lags, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if lags.size < 3:
        raise ValueError("need at least 3 non-empty bins")
    if kind not in VARIOGRAM_KINDS:
        raise ValueError(f"unknown variogram kind {kind!r}")
    scale = float(gammas.max())
    max_lag = float(lags.max())
    if scale <= _SILL_FLOOR:
        model = VariogramModel(kind, nugget=_SILL_FLOOR, sill=2 * _SILL_FLOOR, range_=max_lag)
        return VariogramFit(model=model, residual=0.0, status="nugget-only")

    w = np.sqrt(counts / counts.max())

    def residuals(theta):
        nugget, psill, rng = theta
        m = VariogramModel(kind, nugget=nugget, sill=nugget + psill + _SILL_FLOOR, range_=rng)
        return w * (m(lags) - gammas)

    sat = lags[gammas >= 0.95 * scale]
    range0 = float(sat[0]) if sat.size else 0.6 * max_lag
    starts = [
        (0.0, scale, range0),
        (0.5 * float(gammas[0]), scale, 0.5 * max_lag),
        (0.0, scale, max_lag),
    ]
    best = None
    lower = [0.0, 0.0, 1e-6 * max_lag]
    upper = [2.0 * scale, 4.0 * scale, 10.0 * max_lag]
    for x0 in starts:
        x0 = np.clip(x0, lower, upper)
        try:
            res = least_squares(residuals, x0, bounds=(lower, upper))
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        model = VariogramModel(kind, nugget=scale, sill=scale + _SILL_FLOOR, range_=max_lag)
        return VariogramFit(model=model, residual=float("nan"), status="fit-failed")
    nugget, psill, rng = best.x
    if psill <= _SILL_FLOOR:
        nugget = max(nugget, _SILL_FLOOR)
        model = VariogramModel(kind, nugget=nugget, sill=nugget + _SILL_FLOOR, range_=rng)
        return VariogramFit(model=model, residual=float(2 * best.cost), status="nugget-only")
    model = VariogramModel(kind, nugget=float(nugget), sill=float(nugget + psill + _SILL_FLOOR), range_=float(rng))
    return VariogramFit(model=model, residual=float(2 * best.cost), status="ok")


def _dedupe(positions: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inverse = np.unique(positions, axis=0, return_inverse=True)
    if uniq.shape[0] == positions.shape[0]:
        return positions, values
    means = np.zeros(uniq.shape[0])
    for k in range(uniq.shape[0]):
        means[k] = values[inverse == k].mean()
    return uniq, means


def kriging_system(positions: np.ndarray, model: VariogramModel) -> np.ndarray:
    """Augmented ordinary-kriging matrix [[Gamma, 1], [1^T, 0]]."""
    diff = positions[:, None, :] - positions[None, :, :]
    gamma = model(np.hypot(diff[..., 0], diff[..., 1]))
    n = positions.shape[0]
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = gamma
    system[:n, n] = 1.0
    system[n, :n] = 1.0
    return system


def kriging_weights(
    positions: np.ndarray, model: VariogramModel, queries: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Kriging weights (n, m) and Lagrange multipliers (m,) for m queries."""
    positions = np.asarray(positions, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    n = positions.shape[0]
    system = kriging_system(positions, model)
    diff = positions[:, None, :] - queries[None, :, :]
    rhs = np.zeros((n + 1, queries.shape[0]))
    rhs[:n] = model(np.hypot(diff[..., 0], diff[..., 1]))
    rhs[n] = 1.0
    try:
        sol = sla.solve(system, rhs, assume_a="sym")
    except sla.LinAlgError as exc:
        raise NumericalError(f"singular kriging system: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalError("kriging solve produced non-finite weights")
    return sol[:n], sol[n]


def krige(
    positions: np.ndarray,
    values: np.ndarray,
    model: VariogramModel,
    query: np.ndarray,
) -> float:
    """Ordinary-kriging prediction at one query point.

    Duplicate sample positions are averaged before solving. The weights
    solve the variogram-based augmented system and sum to 1, so constant
    fields reproduce exactly and (with zero nugget) so do the samples
    themselves.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float).ravel()
    if positions.shape[0] < 1:
        raise ValueError("need at least one sample")
    positions, values = _dedupe(positions, values)
    weights, _ = kriging_weights(positions, model, np.asarray(query, dtype=float))
    return float(weights[:, 0] @ values)


def krige_many(
    positions: np.ndarray,
    values: np.ndarray,
    model: VariogramModel,
    queries: np.ndarray,
) -> np.ndarray:
    """Vectorized ordinary kriging over many query points."""
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float).ravel()
    positions, values = _dedupe(positions, values)
    weights, _ = kriging_weights(positions, model, queries)
    return weights.T @ values


@dataclass(frozen=True)
class GriddedDataset:
    """Values on the (u, v, t) parameter grid with a key-cell mask.

    key_mask marks exactly the station cells; values there are the
    original readings, bit for bit.
    """

    u_values: np.ndarray
    v_values: np.ndarray
    t_values: np.ndarray
    values: np.ndarray
    key_mask: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.u_values, dtype=float))
        v = np.ascontiguousarray(np.asarray(self.v_values, dtype=float))
        t = np.ascontiguousarray(np.asarray(self.t_values, dtype=float))
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        mask = np.ascontiguousarray(np.asarray(self.key_mask, dtype=bool))
        if vals.shape != (u.size, v.size, t.size):
            raise ValueError("values must have shape (nu, nv, nt)")
        if mask.shape != (u.size, v.size):
            raise ValueError("key_mask must have shape (nu, nv)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        for arr in (u, v, t, vals, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "u_values", u)
        object.__setattr__(self, "v_values", v)
        object.__setattr__(self, "t_values", t)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "key_mask", mask)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def _geo_preimages(
    grid_points: np.ndarray,
    mesh: TriangleMesh,
    assignment: ParamAssignment,
) -> np.ndarray:
    """Physical pre-image of parameter-space points via barycentric inversion."""
    out = np.empty_like(grid_points)
    for k, q in enumerate(grid_points):
        fi, lam = barycentric_locate(assignment.coords, mesh.faces, q)
        out[k] = lam @ mesh.vertices[mesh.faces[fi]]
    return out


def build_grid(
    pg: ParamGrid,
    station_params: np.ndarray,
    readings: np.ndarray,
    t_values: np.ndarray,
    *,
    kind: str = "spherical",
    n_bins: int = 12,
    max_lag: float | None = None,
    kriging_space: str = "param",
    mesh: TriangleMesh | None = None,
    assignment: ParamAssignment | None = None,
    station_xy: np.ndarray | None = None,
) -> tuple[GriddedDataset, list[VariogramFit]]:
    """Densify station readings onto the full parameter grid.

    For every time step a variogram is refit to that step's values and all
    non-key cells are kriged; key cells receive the readings verbatim.
    kriging_space selects whether distances live in the (u, v) parameter
    square (default) or in physical coordinates at each cell's pre-image
    under the parametrization (requires mesh, assignment and station_xy).
    Returns the grid plus the per-step variogram fits.
    """
    station_params = np.asarray(station_params, dtype=float)
    readings = np.asarray(readings, dtype=float)
    t_values = np.asarray(t_values, dtype=float)
    n_stations = pg.station_cells.shape[0]
    if station_params.shape != (n_stations, 2):
        raise InputError("station_params must align with the grid's station cells")
    if not np.allclose(station_params, pg.station_params(), rtol=0, atol=0):
        raise InputError("station_params disagree with the grid cell assignment")
    if readings.ndim != 2 or readings.shape[0] != n_stations:
        raise InputError("readings must be (n_stations, n_steps)")
    if readings.shape[1] != t_values.size:
        raise InputError("one reading per station per time step is required")
    if not np.all(np.isfinite(readings)):
        raise InputError("missing or non-finite readings are not allowed")
    if kriging_space not in ("param", "geo"):
        raise ValueError("kriging_space must be 'param' or 'geo'")

    nu, nv = pg.shape
    key_mask = pg.key_mask()
    uu, vv = np.meshgrid(pg.u_values, pg.v_values, indexing="ij")
    cells = np.column_stack([uu.ravel(), vv.ravel()])
    nonkey = ~key_mask.ravel()

    if kriging_space == "param":
        sample_pos = station_params
        query_pos = cells[nonkey]
        if max_lag is None:
            max_lag = 0.5 * float(np.hypot(1.0, 1.0))
    else:
        if mesh is None or assignment is None or station_xy is None:
            raise ValueError("geo kriging needs mesh, assignment and station_xy")
        sample_pos = np.asarray(station_xy, dtype=float)
        query_pos = _geo_preimages(cells[nonkey], mesh, assignment)
        if max_lag is None:
            span = np.ptp(sample_pos, axis=0)
            max_lag = 0.5 * float(np.hypot(span[0], span[1]))

    values = np.empty((nu, nv, t_values.size))
    fits: list[VariogramFit] = []
    for k in range(t_values.size):
        z = readings[:, k]
        if n_stations >= 2:
            lags, gammas, counts = empirical_semivariogram(
                sample_pos, z, n_bins=n_bins, max_lag=max_lag
            )
            if lags.size >= 3:
                fit = fit_variogram(lags, gammas, counts, kind=kind)
            else:
                fit = VariogramFit(
                    model=VariogramModel(
                        kind,
                        nugget=0.0,
                        sill=max(float(gammas.max()), _SILL_FLOOR) if gammas.size else _SILL_FLOOR,
                        range_=max_lag,
                    ),
                    residual=float("nan"),
                    status="too-few-bins",
                )
        else:
            fit = VariogramFit(
                model=VariogramModel(kind, nugget=0.0, sill=_SILL_FLOOR, range_=max_lag),
                residual=0.0,
                status="single-station",
            )
        fits.append(fit)
        step = np.empty(nu * nv)
        step[nonkey] = krige_many(sample_pos, z, fit.model, query_pos)
        values[:, :, k] = step.reshape(nu, nv)
        # Key cells carry the readings verbatim, untouched by the model.
        values[pg.station_cells[:, 0], pg.station_cells[:, 1], k] = z
    return (
        GriddedDataset(
            u_values=pg.u_values,
            v_values=pg.v_values,
            t_values=t_values,
            values=values,
            key_mask=key_mask,
        ),
        fits,
    )
