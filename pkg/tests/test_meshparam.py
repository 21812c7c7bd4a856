"""Mesh parametrization and parameter merging tests."""

import numpy as np

from dynsurf import (
    ParamAssignment,
    Polyline,
    constrained_delaunay,
    mean_value_param,
    merge_params,
    orientation_sign,
    perturbation_loop,
)
from dynsurf.triangulation import TriangleMesh
from tests.conftest import regular_polygon, scatter_inside


def square_border() -> Polyline:
    return Polyline(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float))


def mean_value_weights_oracle(mesh: TriangleMesh, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Independent tan-half-angle weight computation for one vertex."""
    neighbors = set()
    for a, b, c in mesh.faces:
        if i in (a, b, c):
            neighbors.update((a, b, c))
    neighbors.discard(i)
    nb = np.array(sorted(neighbors))
    rel = mesh.vertices[nb] - mesh.vertices[i]
    order = np.argsort(np.arctan2(rel[:, 1], rel[:, 0]))
    nb = nb[order]
    rel = rel[order]
    k = nb.size
    w = np.zeros(k)
    for a in range(k):
        r = rel[a]
        r_prev = rel[(a - 1) % k]
        r_next = rel[(a + 1) % k]

        def angle(x, y):
            cx = np.clip(
                (x @ y) / (np.linalg.norm(x) * np.linalg.norm(y)), -1.0, 1.0
            )
            return np.arccos(cx)

        w[a] = (
            np.tan(angle(r_prev, r) / 2.0) + np.tan(angle(r, r_next) / 2.0)
        ) / np.linalg.norm(r)
    return nb, w / w.sum()


class TestMeanValueParam:
    def test_symmetric_center_maps_to_half_half(self):
        mesh = constrained_delaunay(np.array([[0.5, 0.5]]), square_border())
        pa = mean_value_param(mesh)
        np.testing.assert_allclose(pa.coords[0], [0.5, 0.5], atol=1e-12)

    def test_boundary_on_square_interior_strictly_inside(self, rng):
        border = Polyline(regular_polygon(10))
        stations = scatter_inside(border.points, 20, rng, margin=0.05)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        boundary = pa.coords[mesh.n_stations :]
        on_edge = (
            (boundary[:, 0] == 0.0)
            | (boundary[:, 0] == 1.0)
            | (boundary[:, 1] == 0.0)
            | (boundary[:, 1] == 1.0)
        )
        assert on_edge.all()
        interior = pa.coords[: mesh.n_stations]
        assert np.all(interior > 0.0) and np.all(interior < 1.0)

    def test_convex_combination_residual(self, rng):
        border = Polyline(regular_polygon(8))
        stations = scatter_inside(border.points, 30, rng, margin=0.03)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        for i in range(mesh.n_stations):
            nb, lam = mean_value_weights_oracle(mesh, i)
            combo = lam @ pa.coords[nb]
            assert np.linalg.norm(pa.coords[i] - combo) <= 1e-9

    def test_interior_inside_neighbor_hull(self, rng):
        border = Polyline(regular_polygon(6))
        stations = scatter_inside(border.points, 12, rng, margin=0.05)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        for i in range(mesh.n_stations):
            nb, _ = mean_value_weights_oracle(mesh, i)
            lo = pa.coords[nb].min(axis=0)
            hi = pa.coords[nb].max(axis=0)
            assert np.all(pa.coords[i] >= lo - 1e-12)
            assert np.all(pa.coords[i] <= hi + 1e-12)


class TestOrientationSign:
    def test_ccw(self):
        assert orientation_sign((0, 0), (1, 0), (0, 1)) == 1

    def test_cw(self):
        assert orientation_sign((0, 0), (0, 1), (1, 0)) == -1

    def test_collinear(self):
        assert orientation_sign((0, 0), (1, 1), (2, 2)) == 0


def tiny_mesh_with_params(param_rows: np.ndarray) -> tuple[TriangleMesh, ParamAssignment]:
    """A 5-vertex mesh (1 interior station, 4-corner border) with handmade
    parameters; vertex 0 is the station."""
    vertices = np.array(
        [[0.5, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]], dtype=float
    )
    faces = np.array([[1, 2, 0], [2, 3, 0], [3, 4, 0], [4, 1, 0]])
    mesh = TriangleMesh(
        vertices=vertices, n_stations=1, border_cycle=np.array([1, 2, 3, 4]), faces=faces
    )
    return mesh, ParamAssignment(param_rows)


class TestMergeParams:
    def test_nothing_within_tolerance(self):
        mesh, pa = tiny_mesh_with_params(
            np.array([[0.5, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        )
        merged, stats = merge_params(pa, mesh, 1e-6, 1e-6)
        np.testing.assert_array_equal(merged.coords, pa.coords)
        assert stats.committed_u == stats.committed_v == 0

    def test_hand_traced_scan(self):
        # distinct u values {0, 0.40, 0.41, 1}; bound 0.05 collapses 0.41
        # onto 0.40 and leaves the endpoints alone
        mesh, pa = tiny_mesh_with_params(
            np.array(
                [[0.40, 0.5], [0, 0], [1, 0], [1, 1], [0.41, 1]], dtype=float
            )
        )
        merged, stats = merge_params(pa, mesh, 0.05, 1e-9)
        assert stats.committed_u == 1
        assert merged.coords[4, 0] == 0.40
        assert merged.distinct_u().size == 3

    def test_chain_does_not_overshoot(self):
        # {0, .40, .41, .42, 1} with bound .015: .41 joins .40, but .42 is
        # then too far from the merged value and stays
        vertices = np.array(
            [[0.40, 0.4], [0.41, 0.6], [0.42, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]],
            dtype=float,
        )
        faces = np.array(
            [[3, 4, 0], [4, 2, 0], [2, 1, 0], [1, 6, 0], [6, 3, 0],
             [4, 5, 2], [5, 1, 2], [5, 6, 1]]
        )
        mesh = TriangleMesh(
            vertices=vertices,
            n_stations=3,
            border_cycle=np.array([3, 4, 5, 6]),
            faces=faces,
        )
        pa = ParamAssignment(vertices.copy())
        merged, stats = merge_params(pa, mesh, 0.015, 1e-9)
        u = merged.coords[:3, 0]
        assert u[0] == 0.40 and u[1] == 0.40 and u[2] == 0.42

    def test_flip_inducing_merge_withdrawn(self):
        # brute-force search over sliver placements for a merge candidate
        # whose commit would flip an incident parametric triangle
        found = None
        for x3 in np.linspace(0.301, 0.319, 10):
            params = np.array(
                [[0.30, 0.0], [0.32, 1.0], [float(x3), 0.5], [0, 0], [1, 0], [1, 1], [0, 1]]
            )
            before = orientation_sign(params[0], params[1], params[2])
            after_params = params.copy()
            after_params[1, 0] = 0.30  # the candidate merge 0.32 -> 0.30
            after = orientation_sign(after_params[0], after_params[1], after_params[2])
            if before != 0 and after != before:
                found = params
                break
        assert found is not None, "search failed to produce a flip case"
        vertices = np.array(
            [[0.3, 0.1], [0.32, 0.9], [0.31, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]]
        )
        faces = np.array(
            [[3, 4, 0], [4, 1, 0], [0, 1, 2], [2, 1, 6], [6, 3, 2], [3, 0, 2],
             [4, 5, 1], [5, 6, 1]]
        )
        mesh = TriangleMesh(
            vertices=vertices,
            n_stations=3,
            border_cycle=np.array([3, 4, 5, 6]),
            faces=faces,
        )
        pa = ParamAssignment(found)
        merged, stats = merge_params(pa, mesh, 0.05, 1e-9)
        assert stats.withdrawn_u >= 1
        # the flip-inducing pair is left untouched
        assert 0.32 in merged.coords[:, 0]

    def test_committed_merges_preserve_orientation(self, rng):
        border = Polyline(regular_polygon(14))
        stations = scatter_inside(border.points, 40, rng, margin=0.03)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        signs_before = np.array(
            [orientation_sign(*pa.coords[f]) for f in mesh.faces]
        )
        merged, _ = merge_params(pa, mesh, 0.05, 0.05)
        signs_after = np.array(
            [orientation_sign(*merged.coords[f]) for f in mesh.faces]
        )
        np.testing.assert_array_equal(signs_before, signs_after)


def replay_merge_oracle(coords: np.ndarray, mesh: TriangleMesh, c1: float, c2: float):
    """Independent replay of the documented merge scan."""
    coords = coords.copy()

    def signs():
        out = []
        for f in mesh.faces:
            out.append(orientation_sign(coords[f[0]], coords[f[1]], coords[f[2]]))
        return np.array(out)

    def stations_ok():
        st = coords[: mesh.n_stations]
        return np.unique(st, axis=0).shape[0] == st.shape[0]

    for axis, bound in ((0, c1), (1, c2)):
        values = sorted(set(coords[:, axis].tolist()))
        target = values[0]
        for val in values[1:]:
            if target == 0.0 or val == 1.0 or val - target >= bound:
                target = val
                continue
            before = signs()
            movers = coords[:, axis] == val
            saved = coords[movers, axis].copy()
            coords[movers, axis] = target
            if np.array_equal(signs(), before) and stations_ok():
                continue
            coords[movers, axis] = saved
            target = val
    return coords


class TestPerturbationLoop:
    def test_counts_non_increasing_and_orientation_safe(self, rng):
        border = Polyline(regular_polygon(10))
        stations = scatter_inside(border.points, 36, rng, margin=0.04)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        result = perturbation_loop(pa, mesh, max_iters=6, growth=2.0, cap_u=10, cap_v=10)
        counts = np.array(result.counts_history)
        assert np.all(np.diff(counts[:, 0]) <= 0)
        assert np.all(np.diff(counts[:, 1]) <= 0)
        signs_before = np.array([orientation_sign(*pa.coords[f]) for f in mesh.faces])
        signs_after = np.array(
            [orientation_sign(*result.assignment.coords[f]) for f in mesh.faces]
        )
        np.testing.assert_array_equal(signs_before, signs_after)

    def test_early_exit_when_sparse(self):
        mesh, pa = tiny_mesh_with_params(
            np.array([[0.5, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        )
        result = perturbation_loop(pa, mesh, max_iters=5, growth=2.0, cap_u=5, cap_v=5)
        assert result.iterations == 0
        assert result.stats.committed_u == 0

    def test_matches_replay_oracle(self, rng):
        border = Polyline(regular_polygon(12))
        stations = scatter_inside(border.points, 38, rng, margin=0.04)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        merged, _ = merge_params(pa, mesh, 0.03, 0.02)
        expected = replay_merge_oracle(pa.coords, mesh, 0.03, 0.02)
        np.testing.assert_array_equal(merged.coords, expected)

    def test_station_cells_unique(self, rng):
        border = Polyline(regular_polygon(10))
        stations = scatter_inside(border.points, 30, rng, margin=0.05)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        result = perturbation_loop(pa, mesh, max_iters=8, growth=2.5, cap_u=8, cap_v=8)
        cells = result.grid.station_cells
        assert np.unique(cells, axis=0).shape[0] == cells.shape[0]

    def test_boundary_values_immutable(self, rng):
        border = Polyline(regular_polygon(10))
        stations = scatter_inside(border.points, 30, rng, margin=0.05)
        mesh = constrained_delaunay(stations, border)
        pa = mean_value_param(mesh)
        result = perturbation_loop(pa, mesh, max_iters=8, growth=3.0, cap_u=6, cap_v=6)
        assert result.grid.u_values[0] == 0.0 and result.grid.u_values[-1] == 1.0
        assert result.grid.v_values[0] == 0.0 and result.grid.v_values[-1] == 1.0
        # stations never land on the boundary values
        st = result.assignment.coords[: mesh.n_stations]
        assert np.all((st > 0.0) & (st < 1.0))
