"""Key-constrained least-squares curve fitting and three-level volume lofting.

A fitted curve must pass exactly through its key points (equality
constraints) while least-squares approximating the remaining points.
Feasibility of the constraints is ensured by inserting span midpoints into
the knot vector until no span holds more than one key parameter; rows
whose points are all keys interpolate instead, on an averaging knot
vector. The volume fit chains three such levels (along u, then v, then t),
propagating each key to the control points whose basis functions are
nonzero at it so station readings survive to the final volume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .bspline import (
    BSplineCurve,
    BSplineVolume,
    KnotVector,
    averaging_knots,
    collocation_matrix,
    find_span,
    merge_knot_vectors,
    minimal_knots,
)
from .errors import FeasibilityError, NumericalError
from .kriging import GriddedDataset

_MIN_KEY_GAP = 1e-9


@dataclass(frozen=True)
class FitRow:
    """One fitting problem: sorted parameters, values, and key flags."""

    params: np.ndarray
    values: np.ndarray
    key_flags: np.ndarray

    def __post_init__(self):
        params = np.ascontiguousarray(np.asarray(self.params, dtype=float))
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        values = np.ascontiguousarray(values)
        flags = np.ascontiguousarray(np.asarray(self.key_flags, dtype=bool))
        if params.ndim != 1 or params.size < 1:
            raise ValueError("need at least one point")
        if np.any(np.diff(params) <= 0):
            raise ValueError("parameters must be strictly increasing")
        if params[0] < 0.0 or params[-1] > 1.0:
            raise ValueError("parameters must lie in [0, 1]")
        if values.shape[0] != params.size or flags.shape != params.shape:
            raise ValueError("params, values and key_flags lengths must agree")
        for arr in (params, values, flags):
            arr.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "key_flags", flags)

    @property
    def key_params(self) -> np.ndarray:
        return self.params[self.key_flags]


@dataclass
class KeyCurveFit:
    """Fitted curve plus the residuals that certify it.

    key_residual is the largest absolute constraint violation at the key
    parameters; objective is the sum of squared residuals over the
    non-key points.
    """

    curve: BSplineCurve
    key_params: np.ndarray
    key_residual: float
    objective: float
    condition_estimate: float
    condition_warning: bool


def refine_knots_for_keys(kv: KnotVector, key_params: np.ndarray) -> KnotVector:
    """Insert span midpoints until each span holds at most one key parameter.

    The result contains the input knots as a sub-multiset. Key parameters
    closer than 1e-9 cannot be separated and raise FeasibilityError (they
    indicate an upstream parameter-merge defect).
    """
    keys = np.sort(np.asarray(key_params, dtype=float))
    if keys.size == 0:
        return kv
    gaps = np.diff(keys)
    if np.any(gaps <= 0):
        raise FeasibilityError("key parameters must be distinct")
    if np.any(gaps < _MIN_KEY_GAP):
        raise FeasibilityError(
            f"key parameters closer than {_MIN_KEY_GAP} cannot share a curve"
        )
    while True:
        spans = np.fromiter((find_span(kv, u) for u in keys), dtype=int)
        crowded = None
        for s in np.unique(spans):
            if np.count_nonzero(spans == s) > 1:
                crowded = int(s)
                break
        if crowded is None:
            return kv
        lo, hi = kv.knots[crowded], kv.knots[crowded + 1]
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise FeasibilityError(
                f"span [{lo}, {hi}] too narrow to separate key parameters"
            )
        kv = kv.with_knot(mid)


def propagate_keys(kv: KnotVector, key_params: np.ndarray) -> np.ndarray:
    """Control-point indices that become keys at the next lofting level.

    For each key parameter this is the full span window of degree+1
    indices, which covers every basis function that is nonzero there.
    """
    p = kv.degree
    out: set[int] = set()
    for u in np.asarray(key_params, dtype=float).ravel():
        span = find_span(kv, u)
        out.update(range(span - p, span + 1))
    return np.asarray(sorted(out), dtype=int)


def _solve_constrained(
    A1: np.ndarray,
    z1: np.ndarray,
    C: np.ndarray,
    d: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Minimize |A1 x - z1|^2 subject to C x = d via the KKT system.

    Returns the stacked solution for all right-hand-side columns and the
    condition estimate of the KKT matrix. With no constraints this
    degenerates to the normal equations; with square constraints the
    constraints determine the solution outright.
    """
    n = A1.shape[1] if A1.size else C.shape[1]
    m2 = C.shape[0]
    if m2 == 0:
        K = 2.0 * (A1.T @ A1)
        rhs = 2.0 * (A1.T @ z1)
    else:
        K = np.zeros((n + m2, n + m2))
        K[:n, :n] = 2.0 * (A1.T @ A1) if A1.size else 0.0
        K[:n, n:] = C.T
        K[n:, :n] = C
        rhs = np.vstack([2.0 * (A1.T @ z1) if A1.size else np.zeros((n, d.shape[1])), d])
    cond = float(np.linalg.cond(K))
    try:
        sol = sla.solve(K, rhs, assume_a="sym")
    except sla.LinAlgError as exc:
        raise NumericalError(f"singular constrained-fit system: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalError("constrained fit produced non-finite control points")
    return sol[:n], cond


def _build_knots(row: FitRow, degree: int) -> KnotVector:
    if bool(row.key_flags.all()):
        # Everything is a key: interpolate on the averaging knot vector,
        # whose collocation matrix is non-singular for these parameters.
        return averaging_knots(row.params, degree)
    kv = refine_knots_for_keys(minimal_knots(degree), row.key_params)
    if kv.n_controls > row.params.size or np.linalg.matrix_rank(
        collocation_matrix(kv, row.params)
    ) < kv.n_controls:
        # Key separation demands more control points than the data can
        # pin down; interpolate everything instead (always feasible).
        return averaging_knots(row.params, degree)
    return kv


def fit_key_curve(
    row: FitRow,
    degree: int = 3,
    knots: KnotVector | None = None,
    *,
    key_tol: float = 1e-10,
    cond_threshold: float = 1e12,
) -> KeyCurveFit:
    """Fit a curve that interpolates the key points and approximates the rest.

    When `knots` is omitted the knot vector is the coarsest clamped vector
    refined until every span holds at most one key parameter (all-key rows
    use the averaging knot vector and reduce to plain interpolation). The
    equality-constrained least squares is solved through one symmetric
    indefinite KKT system; a condition estimate above cond_threshold only
    raises a warning flag on the result.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if row.params.size < degree + 1:
        raise FeasibilityError(
            f"{row.params.size} points cannot determine a degree-{degree} curve"
        )
    kv = knots if knots is not None else _build_knots(row, degree)
    if kv.degree != degree:
        raise ValueError("knot vector degree disagrees with requested degree")
    A = collocation_matrix(kv, row.params)
    keys = row.key_flags
    A1, z1 = A[~keys], row.values[~keys]
    C, dvals = A[keys], row.values[keys]
    n_ctrl = kv.n_controls
    if C.shape[0] < n_ctrl and A1.shape[0] + C.shape[0] < n_ctrl:
        raise FeasibilityError(
            f"{row.params.size} points cannot determine {n_ctrl} control points"
        )
    if C.shape[0] > 0:
        if np.linalg.matrix_rank(C) < C.shape[0]:
            raise FeasibilityError("key-point constraint rows are linearly dependent")
    x, cond = _solve_constrained(A1, z1, C, dvals)
    curve = BSplineCurve(kv, x)
    key_residual = float(np.abs(C @ x - dvals).max()) if C.shape[0] else 0.0
    if key_residual > key_tol:
        raise NumericalError(
            f"key-point residual {key_residual:.3e} exceeds tolerance {key_tol:.1e}"
        )
    objective = float(np.sum((A1 @ x - z1) ** 2)) if A1.shape[0] else 0.0
    return KeyCurveFit(
        curve=curve,
        key_params=row.key_params.copy(),
        key_residual=key_residual,
        objective=objective,
        condition_estimate=cond,
        condition_warning=cond > cond_threshold,
    )


@dataclass
class VolumeFitReport:
    """Diagnostics from a three-level volume fit."""

    kv_u: KnotVector
    kv_v: KnotVector
    kv_t: KnotVector
    control_shape: tuple[int, int, int]
    condition_warnings: list[str] = field(default_factory=list)
    max_key_residual: float = 0.0


def _level_knots(
    degree: int, key_sets: list[np.ndarray], params: np.ndarray
) -> KnotVector:
    """Shared knot vector for one lofting level.

    Multiset union of the per-row refined vectors; falls back to the
    averaging (interpolation) knot vector when key separation would need
    more control points than the level has data points per row, or when
    the grid parameters cannot pin all the refined control points down.
    """
    kvs = [
        refine_knots_for_keys(minimal_knots(degree), keys)
        for keys in key_sets
        if keys.size
    ]
    kv = merge_knot_vectors(kvs + [minimal_knots(degree)])
    if kv.n_controls > params.size or np.linalg.matrix_rank(
        collocation_matrix(kv, params)
    ) < kv.n_controls:
        return averaging_knots(params, degree)
    return kv


def _constrained_level(
    A: np.ndarray,
    key_rows: np.ndarray,
    data: np.ndarray,
    label: str,
    cond_threshold: float,
    key_tol: float,
    warnings: list[str],
) -> tuple[np.ndarray, float]:
    """Solve one lofting row shared across all trailing value columns.

    `data` has shape (n_points, n_rhs). Returns (controls, key residual).
    """
    A1, C = A[~key_rows], A[key_rows]
    z1, dvals = data[~key_rows], data[key_rows]
    if C.shape[0] < A.shape[1] and data.shape[0] < A.shape[1]:
        raise FeasibilityError(f"{label}: not enough data for the refined knots")
    try:
        x, cond = _solve_constrained(A1, z1, C, dvals)
    except NumericalError as exc:
        raise NumericalError(f"{label}: {exc}") from exc
    if cond > cond_threshold:
        warnings.append(f"{label}: condition estimate {cond:.2e}")
    key_residual = float(np.abs(C @ x - dvals).max()) if C.shape[0] else 0.0
    if key_residual > key_tol:
        raise NumericalError(
            f"{label}: key residual {key_residual:.3e} exceeds {key_tol:.1e}"
        )
    return x, key_residual


def fit_volume(
    grid: GriddedDataset,
    degrees: tuple[int, int, int] = (3, 3, 3),
    *,
    key_tol: float = 1e-10,
    cond_threshold: float = 1e12,
) -> tuple[BSplineVolume, VolumeFitReport]:
    """Loft the gridded data into a trivariate B-spline volume.

    Level 1 fits curves along u for every (v, t) grid line with the
    station cells as keys; level 2 fits along v through the level-1
    control points, with keys propagated through each station's u basis
    window; level 3 interpolates along t (station lines report at every
    time step, so time rows are fully keyed and the remaining rows share
    the same square system). All rows of a level share one knot vector,
    the multiset union of the per-row refined vectors, so control grids
    stay rectangular. The result reproduces every station reading.
    """
    p, q, r = degrees
    if min(p, q, r) < 1:
        raise ValueError("degrees must be at least 1")
    U, V, T = grid.u_values, grid.v_values, grid.t_values
    nu, nv, nt = grid.shape
    for count, deg, axis in ((nu, p, "u"), (nv, q, "v"), (nt, r, "t")):
        if count < deg + 1:
            raise ValueError(f"need at least {deg + 1} parameters along {axis}")
    mask = grid.key_mask
    values = grid.values[..., None]  # scalar grid, value dimension 1
    dv = values.shape[3]
    warnings: list[str] = []
    max_key_res = 0.0

    # Level 1: along u, keys are the station cells of each column.
    kv_u = _level_knots(p, [U[mask[:, j]] for j in range(nv)], U)
    A_u = collocation_matrix(kv_u, U)
    ncu = kv_u.n_controls
    level1 = np.empty((ncu, nv, nt, dv))
    for j in range(nv):
        data = values[:, j].reshape(nu, nt * dv)
        x, res = _constrained_level(
            A_u, mask[:, j], data, f"level 1 row v={j}", cond_threshold, key_tol, warnings
        )
        level1[:, j] = x.reshape(ncu, nt, dv)
        max_key_res = max(max_key_res, res)

    # Level 2: along v, keys propagate through each station's u window.
    cells = np.argwhere(mask)
    keys_by_a: list[set[float]] = [set() for _ in range(ncu)]
    for i_s, j_s in cells:
        for a in propagate_keys(kv_u, [U[i_s]]):
            keys_by_a[a].add(float(V[j_s]))
    kv_v = _level_knots(
        q, [np.sort(np.fromiter(ks, dtype=float)) for ks in keys_by_a], V
    )
    A_v = collocation_matrix(kv_v, V)
    ncv = kv_v.n_controls
    level2 = np.empty((ncu, ncv, nt, dv))
    v_index = {float(val): j for j, val in enumerate(V)}
    for a in range(ncu):
        key_rows = np.zeros(nv, dtype=bool)
        for val in keys_by_a[a]:
            key_rows[v_index[val]] = True
        data = level1[a].reshape(nv, nt * dv)
        x, res = _constrained_level(
            A_v, key_rows, data, f"level 2 row u-control={a}", cond_threshold, key_tol, warnings
        )
        level2[a] = x.reshape(ncv, nt, dv)
        max_key_res = max(max_key_res, res)

    # Level 3: along t. Station lines are keyed at every time step, which
    # pins them to exact interpolation; the same square averaging-knot
    # system interpolates the remaining lines as their least-squares fit.
    kv_t = averaging_knots(T, r)
    A_t = collocation_matrix(kv_t, T)
    nct = kv_t.n_controls
    cond_t = float(np.linalg.cond(A_t))
    if cond_t > cond_threshold:
        warnings.append(f"level 3: condition estimate {cond_t:.2e}")
    data_t = level2.reshape(ncu * ncv, nt, dv).transpose(1, 0, 2).reshape(nt, -1)
    try:
        sol = sla.solve(A_t, data_t)
    except sla.LinAlgError as exc:
        raise NumericalError(f"level 3 interpolation failed: {exc}") from exc
    controls = sol.reshape(nct, ncu * ncv, dv).transpose(1, 0, 2).reshape(ncu, ncv, nct, dv)
    res_t = float(np.abs(A_t @ sol - data_t).max())
    if res_t > key_tol:
        raise NumericalError(f"level 3 interpolation residual {res_t:.3e} exceeds {key_tol:.1e}")
    max_key_res = max(max_key_res, res_t)

    volume = BSplineVolume(kv_u=kv_u, kv_v=kv_v, kv_t=kv_t, controls=controls)
    report = VolumeFitReport(
        kv_u=kv_u,
        kv_v=kv_v,
        kv_t=kv_t,
        control_shape=(ncu, ncv, nct),
        condition_warnings=warnings,
        max_key_residual=max_key_res,
    )
    return volume, report
