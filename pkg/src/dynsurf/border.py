"""Feature-point detection and simplification of dense closed borders.

The detector inscribes triangles at each vertex with arm lengths inside
[d_min, d_max] and flags vertices whose sharpest admissible opening angle
stays below alpha_max, then suppresses non-maxima within d_max arc
distance. Simplification keeps the sharpest feature points so the border
vertex count becomes comparable to the sparse-data count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon

from .errors import GeometryError


@dataclass(frozen=True)
class Polyline:
    """An ordered 2-D point sequence, closed by default (first to last)."""

    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("points must be an (n, 2) array")
        if self.closed and pts.shape[0] < 3:
            raise GeometryError("a closed polyline needs at least 3 points")
        nxt = np.roll(pts, -1, axis=0) if self.closed else pts[1:]
        cur = pts if self.closed else pts[:-1]
        if np.any(np.all(cur == nxt, axis=1)):
            raise GeometryError("consecutive duplicate points are not allowed")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def edge_lengths(self) -> np.ndarray:
        nxt = np.roll(self.points, -1, axis=0) if self.closed else self.points[1:]
        cur = self.points if self.closed else self.points[:-1]
        return np.hypot(*(nxt - cur).T)


@dataclass(frozen=True)
class CornerParams:
    """Inscribed-triangle bounds for the corner detector.

    d_min and d_max bound the triangle arm lengths; alpha_max (degrees) is
    the largest opening angle still considered a corner.
    """

    d_min: float
    d_max: float
    alpha_max: float = 160.0

    def __post_init__(self):
        if not 0.0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        if not 0.0 < self.alpha_max < 180.0:
            raise ValueError("alpha_max must lie in (0, 180) degrees")

    @classmethod
    def for_polyline(cls, line: Polyline, alpha_max: float = 160.0) -> "CornerParams":
        """Scale-relative defaults: arms between 2x and 10x the mean edge."""
        mean_edge = float(line.edge_lengths().mean())
        return cls(d_min=2.0 * mean_edge, d_max=10.0 * mean_edge, alpha_max=alpha_max)


_ARM_CAP = 16  # evenly subsample denser arm candidate sets


def _arm_vectors(
    points: np.ndarray, cum: np.ndarray, i: int, step: int, cp: CornerParams
) -> np.ndarray:
    """Arm vectors from vertex i in one direction with admissible length.

    The scan stops at the first point whose chord to i exceeds d_max (and
    never past 4x d_max of arc length or half the polygon). Dense
    candidate sets are subsampled evenly to keep the pair scan cheap.
    """
    n = points.shape[0]
    limit = n // 2
    if step > 0:
        arcs = cum[i + 1 : i + 1 + limit] - cum[i]
        idx = (i + 1 + np.arange(limit)) % n
    else:
        base = i + n
        arcs = cum[base] - cum[base - limit : base][::-1]
        idx = (i - 1 - np.arange(limit)) % n
    stop = int(np.searchsorted(arcs, 4.0 * cp.d_max))
    idx = idx[: max(stop, 1)]
    d = np.hypot(*(points[idx] - points[i]).T)
    beyond = np.flatnonzero(d > cp.d_max)
    if beyond.size:
        idx, d = idx[: beyond[0]], d[: beyond[0]]
    keep = d >= cp.d_min
    idx = idx[keep]
    if idx.size > _ARM_CAP:
        pick = np.unique(np.linspace(0, idx.size - 1, _ARM_CAP).round().astype(int))
        idx = idx[pick]
    return points[idx] - points[i]


def _sharpness(points: np.ndarray, cp: CornerParams) -> np.ndarray:
    """Per-vertex sharpness in degrees (180 minus the sharpest admissible
    opening angle), or -1 where no admissible triangle exists."""
    n = points.shape[0]
    out = np.full(n, -1.0)
    cos_min = np.cos(np.radians(cp.alpha_max))
    edges = np.hypot(*(np.roll(points, -1, axis=0) - points).T)
    cum = np.concatenate([[0.0], np.cumsum(edges)])
    # doubled cumulative arc so wrapped windows index without branching
    cum = np.concatenate([cum, cum[-1] + cum[1:]])
    for i in range(n):
        a = _arm_vectors(points, cum, i, +1, cp)
        b = _arm_vectors(points, cum, i, -1, cp)
        if a.size == 0 or b.size == 0:
            continue
        cosines = (a @ b.T) / np.outer(np.hypot(*a.T), np.hypot(*b.T))
        best = float(np.max(cosines))
        # alpha <= alpha_max means cos(alpha) >= cos(alpha_max)
        if best >= cos_min:
            alpha = np.degrees(np.arccos(np.clip(best, -1.0, 1.0)))
            out[i] = 180.0 - alpha
    return out


def detect_corners(line: Polyline, cp: CornerParams) -> np.ndarray:
    """Indices of high-curvature vertices of a closed polyline.

    Two passes: admissible-triangle candidate selection, then strongest-
    first non-maximum suppression that drops a candidate whenever an
    already kept, strictly sharper candidate sits within d_max arc
    distance. Output is sorted and duplicate-free.
    """
    if not line.closed or len(line) < 3:
        raise GeometryError("corner detection needs a closed polyline with >= 3 points")
    points = line.points
    sharp = _sharpness(points, cp)
    candidates = np.flatnonzero(sharp >= 0.0)
    if candidates.size == 0:
        return candidates

    edge_len = line.edge_lengths()
    cum = np.concatenate([[0.0], np.cumsum(edge_len)])
    total = cum[-1]
    slack = cp.d_max * (1.0 + 1e-9)  # tolerate arc lengths a few ulps over

    def arc_dist(i: int, j: int) -> float:
        d = abs(cum[j] - cum[i])
        return min(d, total - d)

    keep: list[int] = []
    for i in sorted(candidates.tolist(), key=lambda k: (-sharp[k], k)):
        if not any(sharp[j] > sharp[i] and arc_dist(i, j) <= slack for j in keep):
            keep.append(int(i))
    return np.asarray(sorted(keep), dtype=int)


def corner_sharpness(line: Polyline, cp: CornerParams) -> np.ndarray:
    """Sharpness values backing detect_corners, -1 for non-candidates."""
    return _sharpness(line.points, cp)


def _is_simple_polygon(points: np.ndarray) -> bool:
    try:
        return _ShapelyPolygon(points).is_valid
    except Exception:
        return False


def simplify_border(
    line: Polyline,
    target_count: int,
    corner_params: CornerParams | None = None,
) -> Polyline:
    """Reduce a dense closed border to a polygon through its feature points.

    Keeps the target_count sharpest feature points when more are detected;
    falls back to uniform subsampling when fewer than 3 are found. Every
    output vertex is a vertex of the input and the cyclic order is
    preserved. Raises GeometryError when the result self-intersects, in
    which case the caller should loosen the corner parameters.
    """
    if target_count < 3:
        raise ValueError("target_count must be at least 3")
    n = len(line)
    if n <= target_count:
        return line
    cp = corner_params or CornerParams.for_polyline(line)
    corners = detect_corners(line, cp)
    if corners.size < 3:
        idx = np.unique(np.linspace(0, n, target_count, endpoint=False).astype(int))
    elif corners.size > target_count:
        sharp = _sharpness(line.points, cp)
        # Sharpest first; index as tiebreak keeps the choice deterministic.
        order = sorted(corners.tolist(), key=lambda i: (-sharp[i], i))
        idx = np.asarray(sorted(order[:target_count]), dtype=int)
    else:
        idx = corners
    simplified = line.points[idx]
    if not _is_simple_polygon(simplified):
        raise GeometryError(
            "simplified border self-intersects; loosen the corner parameters"
        )
    return Polyline(simplified)
