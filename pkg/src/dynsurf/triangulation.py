"""Constrained Delaunay triangulation of stations inside a simple border.

The triangulation starts from an unconstrained Delaunay triangulation of
all points, recovers the border edges by diagonal flips, discards the
triangles outside the border by a flood fill across unconstrained edges,
and restores the local Delaunay property with Lawson flips on the
remaining unconstrained edges.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay as _Delaunay
from shapely.geometry import Point as _ShapelyPoint
from shapely.geometry import Polygon as _ShapelyPolygon

from .border import Polyline
from .errors import GeometryError, InputError, TopologyError

_ORIENT_EPS = 1e-13
_INCIRCLE_EPS = 1e-12


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _in_circle(a, b, c, d) -> float:
    """Positive when d lies inside the circumcircle of CCW triangle abc."""
    m = np.array(
        [
            [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
            [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
            [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
        ]
    )
    return float(np.linalg.det(m))


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper intersection of open segments (shared endpoints excluded)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return (d1 * d2 < -_ORIENT_EPS**2) and (d3 * d4 < -_ORIENT_EPS**2)


@dataclass(frozen=True)
class TriangleMesh:
    """Oriented triangulation of station and border vertices.

    The first n_stations vertices are the stations in input order; the
    rest are border vertices, listed counter-clockwise in border_cycle.
    Faces are counter-clockwise vertex-index triples. Border edges
    (consecutive border_cycle pairs) are the constrained edges.
    """

    vertices: np.ndarray
    n_stations: int
    border_cycle: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=int))
        cyc = np.ascontiguousarray(np.asarray(self.border_cycle, dtype=int))
        for arr in (v, f, cyc):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "border_cycle", cyc)

    @property
    def station_mask(self) -> np.ndarray:
        mask = np.zeros(self.vertices.shape[0], dtype=bool)
        mask[: self.n_stations] = True
        return mask

    @property
    def edges(self) -> np.ndarray:
        """Sorted unique vertex-index pairs appearing in faces."""
        e = np.vstack(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        return np.unique(np.sort(e, axis=1), axis=0)

    def constrained_edges(self) -> set[tuple[int, int]]:
        cyc = self.border_cycle
        out = set()
        for i in range(cyc.size):
            a, b = int(cyc[i]), int(cyc[(i + 1) % cyc.size])
            out.add((min(a, b), max(a, b)))
        return out

    def vertex_faces(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.vertices.shape[0])]
        for fi, (a, b, c) in enumerate(self.faces):
            out[a].append(fi)
            out[b].append(fi)
            out[c].append(fi)
        return out


class _EditableTriangulation:
    """Face/edge maps supporting diagonal flips."""

    def __init__(self, points: np.ndarray, simplices: np.ndarray):
        self.points = points
        self.faces: dict[int, tuple[int, int, int]] = {}
        self.edge_map: dict[tuple[int, int], set[int]] = {}
        self._next = 0
        for tri in simplices:
            a, b, c = (int(x) for x in tri)
            if _orient(points[a], points[b], points[c]) < 0:
                b, c = c, b
            self._add_face((a, b, c))

    @staticmethod
    def _ekey(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _add_face(self, tri: tuple[int, int, int]) -> int:
        fid = self._next
        self._next += 1
        self.faces[fid] = tri
        a, b, c = tri
        for e in ((a, b), (b, c), (c, a)):
            self.edge_map.setdefault(self._ekey(*e), set()).add(fid)
        return fid

    def _remove_face(self, fid: int):
        a, b, c = self.faces.pop(fid)
        for e in ((a, b), (b, c), (c, a)):
            key = self._ekey(*e)
            self.edge_map[key].discard(fid)
            if not self.edge_map[key]:
                del self.edge_map[key]

    def has_edge(self, a: int, b: int) -> bool:
        return self._ekey(a, b) in self.edge_map

    def opposite_vertices(self, a: int, b: int) -> list[tuple[int, int]]:
        """(face_id, third vertex) for each face adjacent to edge (a, b)."""
        out = []
        for fid in self.edge_map.get(self._ekey(a, b), ()):
            tri = self.faces[fid]
            other = [v for v in tri if v != a and v != b]
            out.append((fid, other[0]))
        return out

    def flip(self, a: int, b: int) -> tuple[int, int]:
        """Replace diagonal (a, b) of the surrounding quad with the other
        diagonal; returns the new edge."""
        adj = self.opposite_vertices(a, b)
        if len(adj) != 2:
            raise GeometryError("cannot flip a boundary edge")
        (f1, c), (f2, d) = adj
        # Order (a, b) so that f1 holds the directed edge a -> b.
        tri1 = self.faces[f1]
        directed = {(tri1[0], tri1[1]), (tri1[1], tri1[2]), (tri1[2], tri1[0])}
        if (a, b) not in directed:
            a, b = b, a
        self._remove_face(f1)
        self._remove_face(f2)
        self._add_face((a, d, c))
        self._add_face((d, b, c))
        return self._ekey(c, d)

    def quad_is_convex(self, a: int, b: int, c: int, d: int) -> bool:
        """True when diagonals (a,b) and (c,d) properly cross."""
        return _segments_cross(self.points[a], self.points[b], self.points[c], self.points[d])


def _recover_constraint(tri: _EditableTriangulation, a: int, b: int):
    pts = tri.points
    for v in range(pts.shape[0]):
        if v in (a, b):
            continue
        if abs(_orient(pts[a], pts[b], pts[v])) <= _ORIENT_EPS:
            lo = np.minimum(pts[a], pts[b]) - _ORIENT_EPS
            hi = np.maximum(pts[a], pts[b]) + _ORIENT_EPS
            if np.all(pts[v] >= lo) and np.all(pts[v] <= hi):
                raise GeometryError(
                    f"vertex {v} lies on the border edge ({a}, {b}); "
                    "perturb the input or simplify the border differently"
                )
    crossing = deque(
        key
        for key in tri.edge_map
        if a not in key
        and b not in key
        and _segments_cross(pts[a], pts[b], pts[key[0]], pts[key[1]])
    )
    stall = 0
    limit = 4 * (len(crossing) + 1) ** 2 + 64
    while crossing:
        if stall > limit:
            raise GeometryError(f"failed to recover border edge ({a}, {b})")
        c, d = crossing.popleft()
        if (c, d) not in tri.edge_map:
            continue
        adj = tri.opposite_vertices(c, d)
        if len(adj) != 2:
            raise GeometryError(f"border edge ({a}, {b}) leaves the triangulation")
        x, y = adj[0][1], adj[1][1]
        if not tri.quad_is_convex(c, d, x, y):
            crossing.append((c, d))
            stall += 1
            continue
        new_edge = tri.flip(c, d)
        stall = 0
        nx, ny = new_edge
        if (
            a not in new_edge
            and b not in new_edge
            and _segments_cross(pts[a], pts[b], pts[nx], pts[ny])
        ):
            crossing.append(new_edge)
    if not tri.has_edge(a, b):
        raise GeometryError(f"border edge ({a}, {b}) could not be recovered")


def _drop_outside(tri: _EditableTriangulation, constrained: set[tuple[int, int]]):
    outside: set[int] = set()
    queue: deque[int] = deque()
    for key, fids in tri.edge_map.items():
        if len(fids) == 1 and key not in constrained:
            for fid in fids:
                if fid not in outside:
                    outside.add(fid)
                    queue.append(fid)
    while queue:
        fid = queue.popleft()
        a, b, c = tri.faces[fid]
        for e in ((a, b), (b, c), (c, a)):
            key = tri._ekey(*e)
            if key in constrained:
                continue
            for nb in tri.edge_map.get(key, ()):
                if nb != fid and nb not in outside:
                    outside.add(nb)
                    queue.append(nb)
    for fid in outside:
        tri._remove_face(fid)


def _legalize(tri: _EditableTriangulation, constrained: set[tuple[int, int]]):
    pts = tri.points
    queue = deque(key for key in tri.edge_map if key not in constrained)
    seen = set(queue)
    guard = 0
    limit = 50 * (len(tri.faces) + 1) + 1000
    while queue:
        guard += 1
        if guard > limit:
            raise GeometryError("Delaunay legalization did not converge")
        key = queue.popleft()
        seen.discard(key)
        if key in constrained or key not in tri.edge_map:
            continue
        adj = tri.opposite_vertices(*key)
        if len(adj) != 2:
            continue
        a, b = key
        (_, c), (_, d) = adj
        if not tri.quad_is_convex(a, b, c, d):
            continue
        if _orient(pts[a], pts[b], pts[c]) < 0:
            a, b = b, a
        if _in_circle(pts[a], pts[b], pts[c], pts[d]) <= _INCIRCLE_EPS:
            continue
        new_edge = tri.flip(a, b)
        for v1, v2 in ((a, c), (c, b), (b, d), (d, a), new_edge):
            k = tri._ekey(v1, v2)
            if k in tri.edge_map and k not in constrained and k not in seen:
                queue.append(k)
                seen.add(k)


def constrained_delaunay(stations: np.ndarray, border: Polyline) -> TriangleMesh:
    """Triangulate stations plus border vertices with border edges constrained.

    The triangulation covers exactly the border polygon interior. Stations
    must lie strictly inside the border and no two input points may
    coincide.
    """
    stations = np.asarray(stations, dtype=float)
    if stations.ndim != 2 or stations.shape[1] != 2:
        raise InputError("stations must be an (n, 2) array")
    border_pts = border.points
    if not _ShapelyPolygon(border_pts).is_valid:
        raise InputError("border polygon is not simple")
    # Counter-clockwise border so faces can be oriented consistently.
    area2 = np.sum(
        border_pts[:, 0] * np.roll(border_pts[:, 1], -1)
        - np.roll(border_pts[:, 0], -1) * border_pts[:, 1]
    )
    if area2 < 0:
        border_pts = border_pts[::-1]
    poly = _ShapelyPolygon(border_pts)
    for i, (x, y) in enumerate(stations):
        if not poly.contains(_ShapelyPoint(x, y)):
            raise InputError(f"station {i} is not strictly inside the border")
    points = np.vstack([stations, border_pts])
    if np.unique(points, axis=0).shape[0] != points.shape[0]:
        raise InputError("duplicate points among stations and border vertices")

    n_stations = stations.shape[0]
    n_border = border_pts.shape[0]
    # Work in a normalized box so the geometric predicates are well scaled.
    lo = points.min(axis=0)
    extent = max(float(np.ptp(points[:, 0])), float(np.ptp(points[:, 1])), 1e-300)
    norm = (points - lo) / extent

    delaunay = _Delaunay(norm)
    tri = _EditableTriangulation(norm, delaunay.simplices)

    cycle = np.arange(n_stations, n_stations + n_border)
    constrained = set()
    for i in range(n_border):
        a, b = int(cycle[i]), int(cycle[(i + 1) % n_border])
        constrained.add(tri._ekey(a, b))
    for i in range(n_border):
        a, b = int(cycle[i]), int(cycle[(i + 1) % n_border])
        if not tri.has_edge(a, b):
            _recover_constraint(tri, a, b)
    _drop_outside(tri, constrained)
    _legalize(tri, constrained)

    faces = np.array(sorted(tri.faces.values()), dtype=int)
    if faces.size == 0:
        raise TopologyError("triangulation is empty")
    used = np.zeros(points.shape[0], dtype=bool)
    used[faces.ravel()] = True
    if not used.all():
        raise TopologyError("some vertices are unused by the triangulation")
    for key in constrained:
        if len(tri.edge_map.get(key, ())) != 1:
            raise TopologyError(f"border edge {key} is not a boundary edge of the mesh")
    return TriangleMesh(
        vertices=points, n_stations=n_stations, border_cycle=cycle, faces=faces
    )


def barycentric_locate(
    coords: np.ndarray, faces: np.ndarray, query: np.ndarray
) -> tuple[int, np.ndarray]:
    """Face containing `query` plus its barycentric coordinates there.

    Works in any 2-D embedding of the mesh (physical or parametric). When
    the query sits exactly on an edge any adjacent face may be returned.
    Falls back to the face with the least-negative barycentric minimum so
    boundary queries survive floating-point underflow.
    """
    coords = np.asarray(coords, dtype=float)
    best = (-np.inf, -1, None)
    for fi, (a, b, c) in enumerate(faces):
        pa, pb, pc = coords[a], coords[b], coords[c]
        det = _orient(pa, pb, pc)
        if det == 0.0:
            continue
        l1 = _orient(query, pb, pc) / det
        l2 = _orient(pa, query, pc) / det
        l3 = 1.0 - l1 - l2
        worst = min(l1, l2, l3)
        if worst > best[0]:
            best = (worst, fi, np.array([l1, l2, l3]))
        if worst >= 0.0:
            break
    if best[1] < 0:
        raise GeometryError("query point is outside the mesh")
    return best[1], best[2]
