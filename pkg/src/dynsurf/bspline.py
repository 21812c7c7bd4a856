"""Clamped B-spline machinery: knot vectors, basis evaluation, curves, volumes.

All parameter domains are normalized to [0, 1] and all knot vectors are
clamped (endpoint multiplicity degree+1), so curves and volumes interpolate
their first and last control points. Evaluation at u = 1 maps into the last
non-degenerate span.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RefinementError


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KnotVector:
    """A clamped, non-decreasing knot sequence over [0, 1].

    For n+1 control points the sequence holds n + degree + 2 knots, the
    first and last degree+1 of which are pinned to 0 and 1. Interior knots
    may repeat up to `degree` times.
    """

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        knots = _as_readonly(np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError(f"need at least {2 * (p + 1)} knots, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if not (np.all(knots[: p + 1] == 0.0) and np.all(knots[-(p + 1):] == 1.0)):
            raise ValueError("knot vector must be clamped to [0, 1]")
        interior = knots[p + 1 : knots.size - p - 1]
        if interior.size:
            if interior[0] <= 0.0 or interior[-1] >= 1.0:
                raise ValueError("interior knots must lie strictly inside (0, 1)")
            _, counts = np.unique(interior, return_counts=True)
            if np.any(counts > p):
                raise ValueError(f"interior knot multiplicity exceeds degree {p}")

    @property
    def n_controls(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def n_spans(self) -> int:
        """Number of non-degenerate spans in the domain."""
        return int(np.count_nonzero(np.diff(self.knots) > 0))

    def with_knot(self, value: float) -> "KnotVector":
        """Return a copy with one extra knot at `value` (0 < value < 1)."""
        if not 0.0 < value < 1.0:
            raise DomainError(f"new knot must lie in (0, 1), got {value}")
        if np.count_nonzero(self.knots == value) >= self.degree:
            raise RefinementError(
                f"inserting {value} would exceed multiplicity {self.degree}"
            )
        idx = int(np.searchsorted(self.knots, value, side="right"))
        return KnotVector(self.degree, np.insert(self.knots, idx, value))


def minimal_knots(degree: int) -> KnotVector:
    """Coarsest clamped knot vector of the given degree (single span)."""
    return KnotVector(degree, [0.0] * (degree + 1) + [1.0] * (degree + 1))


def merge_knot_vectors(kvs: list[KnotVector]) -> KnotVector:
    """Multiset union of knot vectors sharing one degree.

    Each knot value appears with the maximum multiplicity it has in any
    input, so the result refines every input.
    """
    if not kvs:
        raise ValueError("need at least one knot vector")
    degree = kvs[0].degree
    if any(kv.degree != degree for kv in kvs):
        raise ValueError("knot vectors must share one degree")
    merged: dict[float, int] = {}
    for kv in kvs:
        values, counts = np.unique(kv.knots, return_counts=True)
        for v, c in zip(values.tolist(), counts.tolist()):
            if c > merged.get(v, 0):
                merged[v] = c
    knots = np.repeat(
        np.array(sorted(merged)), [merged[v] for v in sorted(merged)]
    )
    return KnotVector(degree, knots)


def find_span(kv: KnotVector, u: float) -> int:
    """Index i of the span with knots[i] <= u < knots[i+1].

    u = 1 returns the last non-degenerate span so the right domain
    endpoint stays evaluable.
    """
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"parameter {u} outside [0, 1]")
    n = kv.n_controls - 1
    span = int(np.searchsorted(kv.knots, u, side="right")) - 1
    return min(max(span, kv.degree), n)


def basis_funs(kv: KnotVector, u: float) -> np.ndarray:
    """The degree+1 possibly-nonzero basis values at u.

    Entry j is N[span-degree+j](u) for the span containing u, computed by
    the standard triangular recurrence. Values are non-negative and sum
    to 1.
    """
    span = find_span(kv, u)
    p = kv.degree
    knots = kv.knots
    out = np.empty(p + 1)
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    out[0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            temp = out[r] / (right[r + 1] + left[j - r])
            out[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        out[j] = saved
    return out


def collocation_matrix(kv: KnotVector, params: np.ndarray) -> np.ndarray:
    """Dense matrix A with A[a, j] = N_j(params[a]) for all basis indices j."""
    params = np.asarray(params, dtype=float)
    A = np.zeros((params.size, kv.n_controls))
    p = kv.degree
    for a, u in enumerate(params):
        span = find_span(kv, u)
        A[a, span - p : span + 1] = basis_funs(kv, u)
    return A


def _controls_2d(controls: np.ndarray) -> np.ndarray:
    c = np.asarray(controls, dtype=float)
    if c.ndim == 1:
        c = c[:, None]
    if c.ndim != 2 or c.shape[0] < 1:
        raise ValueError("controls must be a (n+1, d) array")
    return c


@dataclass(frozen=True)
class BSplineCurve:
    """A clamped B-spline curve with vector-valued control points.

    Control values have dimension d >= 1; d = 1 models a scalar field.
    """

    kv: KnotVector
    controls: np.ndarray

    def __post_init__(self):
        c = _as_readonly(_controls_2d(self.controls))
        object.__setattr__(self, "controls", c)
        if c.shape[0] != self.kv.n_controls:
            raise ValueError(
                f"knot vector implies {self.kv.n_controls} controls, got {c.shape[0]}"
            )

    @property
    def dim(self) -> int:
        return self.controls.shape[1]


def eval_curve(c: BSplineCurve, u: float) -> np.ndarray:
    """Curve value at u, using only the nonzero basis window."""
    span = find_span(c.kv, u)
    funs = basis_funs(c.kv, u)
    p = c.kv.degree
    return funs @ c.controls[span - p : span + 1]


@dataclass(frozen=True)
class BSplineVolume:
    """Tensor-product trivariate B-spline over the unit cube.

    The control grid has shape (n+1, m+1, l+1, d) matching the three knot
    vectors; d is the value dimension.
    """

    kv_u: KnotVector
    kv_v: KnotVector
    kv_t: KnotVector
    controls: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.controls, dtype=float)
        if c.ndim == 3:
            c = c[..., None]
        if c.ndim != 4:
            raise ValueError("controls must have shape (nu, nv, nt) or (nu, nv, nt, d)")
        expected = (self.kv_u.n_controls, self.kv_v.n_controls, self.kv_t.n_controls)
        if c.shape[:3] != expected:
            raise ValueError(f"control grid {c.shape[:3]} does not match knots {expected}")
        object.__setattr__(self, "controls", _as_readonly(c))

    @property
    def dim(self) -> int:
        return self.controls.shape[3]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.controls.shape[:3]


def eval_volume(vol: BSplineVolume, u: float, v: float, t: float) -> np.ndarray:
    """Volume value at (u, v, t) via the local tensor-product window."""
    su, sv, st = find_span(vol.kv_u, u), find_span(vol.kv_v, v), find_span(vol.kv_t, t)
    bu, bv, bt = basis_funs(vol.kv_u, u), basis_funs(vol.kv_v, v), basis_funs(vol.kv_t, t)
    p, q, r = vol.kv_u.degree, vol.kv_v.degree, vol.kv_t.degree
    window = vol.controls[su - p : su + 1, sv - q : sv + 1, st - r : st + 1]
    return np.einsum("i,j,k,ijkd->d", bu, bv, bt, window)


def averaging_knots(params: np.ndarray, degree: int) -> KnotVector:
    """Knot vector for interpolation at `params` by the averaging rule.

    Interior knot j+degree is the mean of params[j : j+degree]; the ends are
    clamped to 0 and 1. The resulting collocation matrix at `params` is
    non-singular (the diagonal basis values are positive for any strictly
    increasing parameter sequence in [0, 1]).
    """
    params = np.asarray(params, dtype=float)
    if degree < 1:
        raise ValueError("averaging knots need degree >= 1")
    if params.ndim != 1 or params.size < degree + 1:
        raise ValueError(f"need at least {degree + 1} parameters, got {params.size}")
    if np.any(np.diff(params) <= 0):
        raise ValueError("parameters must be strictly increasing")
    if params[0] < 0.0 or params[-1] > 1.0:
        raise ValueError("parameters must lie within [0, 1]")
    m = params.size - 1
    p = degree
    interior = np.array([params[j : j + p].mean() for j in range(1, m - p + 1)])
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(p, knots)


def insert_knot(c: BSplineCurve, u_new: float) -> BSplineCurve:
    """Insert one knot at u_new without changing the curve as a function.

    Boehm insertion: the returned curve has one more knot and one more
    control point; control points outside the affected window are copied
    unchanged.
    """
    if not 0.0 < u_new < 1.0:
        raise DomainError(f"knot to insert must lie in (0, 1), got {u_new}")
    kv = c.kv
    p = kv.degree
    s = int(np.count_nonzero(kv.knots == u_new))
    if s >= p:
        raise RefinementError(
            f"knot {u_new} already has multiplicity {s}, limit is {p}"
        )
    k = find_span(kv, u_new)
    old = c.controls
    new = np.empty((old.shape[0] + 1, old.shape[1]))
    new[: k - p + 1] = old[: k - p + 1]
    new[k - s + 1 :] = old[k - s :]
    for i in range(k - p + 1, k - s + 1):
        denom = kv.knots[i + p] - kv.knots[i]
        alpha = (u_new - kv.knots[i]) / denom
        new[i] = alpha * old[i] + (1.0 - alpha) * old[i - 1]
    return BSplineCurve(kv.with_knot(u_new), new)
