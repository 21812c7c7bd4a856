"""Unit-square mesh parametrization and parameter merging.

Interior vertices are parametrized with mean value coordinates (each
interior vertex a convex combination of its one-ring), the border is
mapped to the unit-square boundary by chord length, and near-duplicate
parameter values are merged under a triangle-orientation guard so the
final distinct u and v values form a usable grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve
from scipy.spatial.distance import pdist

from .errors import ParametrizationError, TopologyError
from .triangulation import TriangleMesh


@dataclass(frozen=True)
class ParamAssignment:
    """Per-vertex parameter pairs in the unit square, mesh-aligned."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coords, dtype=float))
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must be an (n, 2) array")
        if np.any(c < -1e-12) or np.any(c > 1 + 1e-12):
            raise ValueError("parameters must lie in the unit square")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    def distinct_u(self) -> np.ndarray:
        return np.unique(self.coords[:, 0])

    def distinct_v(self) -> np.ndarray:
        return np.unique(self.coords[:, 1])


@dataclass(frozen=True)
class ParamGrid:
    """Distinct parameter values per axis plus station cell assignments."""

    u_values: np.ndarray
    v_values: np.ndarray
    station_cells: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(np.asarray(self.u_values, dtype=float))
        v = np.ascontiguousarray(np.asarray(self.v_values, dtype=float))
        cells = np.ascontiguousarray(np.asarray(self.station_cells, dtype=int))
        for name, arr in (("u", u), ("v", v)):
            if arr[0] != 0.0 or arr[-1] != 1.0 or np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} values must increase strictly from 0 to 1")
        if cells.ndim != 2 or cells.shape[1] != 2:
            raise ValueError("station_cells must be an (s, 2) array")
        if np.unique(cells, axis=0).shape[0] != cells.shape[0]:
            raise ParametrizationError("two stations share one grid cell")
        for arr in (u, v, cells):
            arr.setflags(write=False)
        object.__setattr__(self, "u_values", u)
        object.__setattr__(self, "v_values", v)
        object.__setattr__(self, "station_cells", cells)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u_values.size, self.v_values.size

    def key_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.station_cells[:, 0], self.station_cells[:, 1]] = True
        return mask

    def station_params(self) -> np.ndarray:
        return np.column_stack(
            [self.u_values[self.station_cells[:, 0]], self.v_values[self.station_cells[:, 1]]]
        )


def orientation_sign(r_i, r_j, r_k) -> int:
    """Sign of det([r_j - r_i; r_k - r_i]): +1 CCW, -1 CW, 0 degenerate."""
    e_ij = (r_j[0] - r_i[0], r_j[1] - r_i[1])
    e_ik = (r_k[0] - r_i[0], r_k[1] - r_i[1])
    det = e_ij[0] * e_ik[1] - e_ij[1] * e_ik[0]
    return int(det > 0) - int(det < 0)


def _face_signs(coords: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = coords[faces[:, 0]]
    b = coords[faces[:, 1]]
    c = coords[faces[:, 2]]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    return np.sign(det)


def _select_corners(boundary_xy: np.ndarray) -> list[int]:
    """Four well-spread cycle positions via farthest-point selection."""
    m = boundary_xy.shape[0]
    d = np.linalg.norm(boundary_xy[:, None, :] - boundary_xy[None, :, :], axis=2)
    first, second = np.unravel_index(np.argmax(d), d.shape)
    chosen = [int(first), int(second)]
    while len(chosen) < 4:
        min_d = d[:, chosen].min(axis=1)
        min_d[chosen] = -1.0
        chosen.append(int(np.argmax(min_d)))
    return sorted(chosen)


def _boundary_square_map(mesh: TriangleMesh) -> dict[int, tuple[float, float]]:
    cycle = mesh.border_cycle
    xy = mesh.vertices[cycle]
    corners = _select_corners(xy)
    sides = [
        ((0.0, 0.0), (1.0, 0.0)),
        ((1.0, 0.0), (1.0, 1.0)),
        ((1.0, 1.0), (0.0, 1.0)),
        ((0.0, 1.0), (0.0, 0.0)),
    ]
    m = cycle.size
    out: dict[int, tuple[float, float]] = {}
    for arc in range(4):
        start = corners[arc]
        stop = corners[(arc + 1) % 4]
        idx = [start]
        k = start
        while k != stop:
            k = (k + 1) % m
            idx.append(k)
        pts = xy[idx]
        seg = np.hypot(*np.diff(pts, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        frac = cum / cum[-1]
        (x0, y0), (x1, y1) = sides[arc]
        for pos, f in zip(idx[:-1], frac[:-1]):
            out[int(cycle[pos])] = (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
    return out


def _one_ring_weights(mesh: TriangleMesh, i: int, neighbors: np.ndarray) -> np.ndarray:
    """Mean value weights of vertex i over its angularly ordered one-ring."""
    xy = mesh.vertices
    rel = xy[neighbors] - xy[i]
    order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
    nb = neighbors[order]
    rel = rel[order]
    dist = np.hypot(*rel.T)
    k = nb.size
    angles = np.empty(k)
    for a in range(k):
        u1 = rel[a] / dist[a]
        u2 = rel[(a + 1) % k] / dist[(a + 1) % k]
        angles[a] = np.arccos(np.clip(u1 @ u2, -1.0, 1.0))
    w = np.empty(k)
    for a in range(k):
        w[a] = (np.tan(angles[a - 1] / 2.0) + np.tan(angles[a] / 2.0)) / dist[a]
    weights = np.zeros(k)
    weights[order] = w  # undo angular reordering
    return weights / weights.sum()


def mean_value_param(mesh: TriangleMesh) -> ParamAssignment:
    """Map the mesh into the unit square with mean value coordinates.

    Border vertices go to the square boundary (chord-length arcs between
    four farthest-spread corners); each interior vertex solves to the mean
    value convex combination of its neighbors. Raises TopologyError when
    the interior system is singular (disconnected mesh).
    """
    n = mesh.vertices.shape[0]
    boundary_map = _boundary_square_map(mesh)
    is_boundary = np.zeros(n, dtype=bool)
    is_boundary[mesh.border_cycle] = True
    interior = np.flatnonzero(~is_boundary)
    index_of = {int(v): k for k, v in enumerate(interior)}

    neighbor_sets: list[set[int]] = [set() for _ in range(n)]
    for a, b, c in mesh.faces:
        neighbor_sets[a].update((b, c))
        neighbor_sets[b].update((a, c))
        neighbor_sets[c].update((a, b))

    coords = np.zeros((n, 2))
    for v, uv in boundary_map.items():
        coords[v] = uv

    if interior.size:
        rows, cols, data = [], [], []
        rhs = np.zeros((interior.size, 2))
        for k, i in enumerate(interior):
            nb = np.fromiter(neighbor_sets[i], dtype=int)
            if nb.size < 3:
                raise TopologyError(f"interior vertex {i} has fewer than 3 neighbors")
            lam = _one_ring_weights(mesh, int(i), nb)
            rows.append(k)
            cols.append(k)
            data.append(1.0)
            for j, l in zip(nb, lam):
                if is_boundary[j]:
                    rhs[k] += l * coords[j]
                else:
                    rows.append(k)
                    cols.append(index_of[int(j)])
                    data.append(-l)
        A = csr_matrix((data, (rows, cols)), shape=(interior.size, interior.size))
        sol = spsolve(A, rhs)
        if not np.all(np.isfinite(sol)):
            raise TopologyError("parametrization system is singular")
        residual = np.abs(A @ sol - rhs).max()
        if residual > 1e-10:
            raise TopologyError(f"parametrization residual {residual:.2e} too large")
        coords[interior] = np.clip(sol, 0.0, 1.0)
    return ParamAssignment(coords)


@dataclass
class MergeStats:
    """Merge bookkeeping for one pass (or a whole perturbation run)."""

    committed_u: int = 0
    committed_v: int = 0
    withdrawn_u: int = 0
    withdrawn_v: int = 0

    def add(self, other: "MergeStats"):
        self.committed_u += other.committed_u
        self.committed_v += other.committed_v
        self.withdrawn_u += other.withdrawn_u
        self.withdrawn_v += other.withdrawn_v


def _merge_axis(
    coords: np.ndarray,
    axis: int,
    bound: float,
    faces: np.ndarray,
    vertex_faces: list[list[int]],
    station_mask: np.ndarray,
    base_signs: np.ndarray,
) -> tuple[int, int]:
    """One ascending merge pass over the distinct values of one axis.

    Mutates coords in place; returns (committed, withdrawn). A candidate
    merge moves every vertex holding the next distinct value down to the
    current target value, and is withdrawn when any incident face changes
    orientation or two stations would collapse into one parameter pair.
    """
    committed = withdrawn = 0
    values = np.unique(coords[:, axis])
    target = values[0]
    for val in values[1:]:
        # 0 may not absorb and 1 may not move; both stay grid endpoints.
        if target == 0.0 or val == 1.0:
            target = val
            continue
        if val - target >= bound:
            target = val
            continue
        moved = np.flatnonzero(coords[:, axis] == val)
        saved = coords[moved, axis].copy()
        coords[moved, axis] = target
        incident = sorted({fi for m in moved for fi in vertex_faces[m]})
        ok = bool(np.all(_face_signs(coords, faces[incident]) == base_signs[incident]))
        if ok:
            stations = np.flatnonzero(station_mask)
            pairs = coords[stations]
            if np.unique(pairs, axis=0).shape[0] != stations.size:
                ok = False
        if ok:
            committed += 1
        else:
            coords[moved, axis] = saved
            withdrawn += 1
            target = val
    return committed, withdrawn


def merge_params(
    pa: ParamAssignment,
    mesh: TriangleMesh,
    c1: float,
    c2: float,
) -> tuple[ParamAssignment, MergeStats]:
    """Merge parameter values closer than c1 (u) and c2 (v).

    Distinct values are scanned in increasing order and each one is pulled
    down onto its predecessor when the gap is below the bound, unless doing
    so would flip the orientation of an incident parametric triangle or
    collapse two stations onto one parameter pair; such merges are
    withdrawn silently. The endpoint values 0 and 1 never move.
    """
    if c1 <= 0 or c2 <= 0:
        raise ValueError("merge bounds must be positive")
    coords = pa.coords.copy()
    faces = mesh.faces
    vertex_faces = mesh.vertex_faces()
    base_signs = _face_signs(coords, faces)
    stats = MergeStats()
    stats.committed_u, stats.withdrawn_u = _merge_axis(
        coords, 0, c1, faces, vertex_faces, mesh.station_mask, base_signs
    )
    stats.committed_v, stats.withdrawn_v = _merge_axis(
        coords, 1, c2, faces, vertex_faces, mesh.station_mask, base_signs
    )
    return ParamAssignment(coords), stats


@dataclass
class PerturbationResult:
    grid: ParamGrid
    assignment: ParamAssignment
    iterations: int
    stats: MergeStats
    counts_history: list[tuple[int, int]] = field(default_factory=list)


def perturbation_loop(
    pa: ParamAssignment,
    mesh: TriangleMesh,
    max_iters: int = 10,
    growth: float = 2.0,
    cap_u: int | None = None,
    cap_v: int | None = None,
) -> PerturbationResult:
    """Iterate merge passes with growing bounds until the grid is small.

    The initial bound is half the minimum pairwise distance between
    parameter pairs; each iteration multiplies it by `growth`. Iteration
    stops once the distinct u and v counts both reach their caps (by
    default 70 percent of the station count) or max_iters passes ran.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if growth <= 1.0:
        raise ValueError("growth must exceed 1")
    n_stations = int(mesh.n_stations)
    if cap_u is None:
        cap_u = max(4, int(np.ceil(0.7 * n_stations)))
    if cap_v is None:
        cap_v = max(4, int(np.ceil(0.7 * n_stations)))

    gaps = pdist(pa.coords)
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        raise ParametrizationError("all parameter pairs coincide")
    bound = 0.5 * float(gaps.min())

    current = pa
    total = MergeStats()
    history = [(current.distinct_u().size, current.distinct_v().size)]
    iterations = 0
    for _ in range(max_iters):
        nu, nv = history[-1]
        if nu <= cap_u and nv <= cap_v:
            break
        current, stats = merge_params(current, mesh, bound, bound)
        total.add(stats)
        iterations += 1
        history.append((current.distinct_u().size, current.distinct_v().size))
        bound *= growth

    grid = _build_grid_from_assignment(current, mesh)
    return PerturbationResult(
        grid=grid,
        assignment=current,
        iterations=iterations,
        stats=total,
        counts_history=history,
    )


def _build_grid_from_assignment(pa: ParamAssignment, mesh: TriangleMesh) -> ParamGrid:
    u_values = pa.distinct_u()
    v_values = pa.distinct_v()
    stations = pa.coords[: mesh.n_stations]
    iu = np.searchsorted(u_values, stations[:, 0])
    iv = np.searchsorted(v_values, stations[:, 1])
    if np.any(u_values[iu] != stations[:, 0]) or np.any(v_values[iv] != stations[:, 1]):
        raise ParametrizationError("station parameters missing from the grid axes")
    return ParamGrid(
        u_values=u_values, v_values=v_values, station_cells=np.column_stack([iu, iv])
    )
