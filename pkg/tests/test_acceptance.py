"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them on success)."""

import dataclasses
import time

import numpy as np

from dynsurf import (
    BSplineCurve,
    BSplineVolume,
    CornerParams,
    FitRow,
    PipelineConfig,
    Polyline,
    VariogramModel,
    basis_funs,
    constrained_delaunay,
    eval_curve,
    eval_volume,
    fit_key_curve,
    ingest,
    insert_knot,
    krige,
    mean_value_param,
    merge_params,
    orientation_sign,
    perturbation_loop,
    run_pipeline,
    simplify_border,
)
from dynsurf.bspline import collocation_matrix
from dynsurf.kriging import kriging_system, kriging_weights
from dynsurf.meshparam import ParamAssignment
from dynsurf.pipeline import grid_path, station_residuals, volume_path
from dynsurf.storage import read_grid, read_volume
from dynsurf.triangulation import TriangleMesh
from tests.conftest import field_value, regular_polygon, scatter_inside, write_dataset_csvs
from tests.test_border import hausdorff, loop_samples, square_polyline
from tests.test_bspline import naive_all_basis, random_knot_vector
from tests.test_keyfit import kkt_oracle, random_fit_row
from tests.test_kriging import gaussian_elimination


def _verdict(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def _synthetic_run(tmp_path, n_stations=100, n_steps=10, seed=20240817):
    rng = np.random.default_rng(seed)
    border = regular_polygon(20)
    stations = scatter_inside(border, n_stations, rng, margin=1e-3)
    t = np.linspace(0.0, 1.0, n_steps)
    readings = field_value(stations[:, [0]], stations[:, [1]], t[None, :])
    paths = write_dataset_csvs(tmp_path, stations, readings, border)
    config = PipelineConfig(
        stations_csv=str(paths[0]),
        readings_csv=str(paths[1]),
        border_csv=str(paths[2]),
        output_dir=str(tmp_path / "out"),
    )
    dataset = ingest(*paths)
    return config, dataset


def test_criterion_1_interpolation_exactness(tmp_path):
    """100 scattered stations, 10 steps: the volume reproduces all 1000
    readings within 1e-9, in under 60 seconds."""
    t0 = time.perf_counter()
    config, dataset = _synthetic_run(tmp_path)
    volume, report = run_pipeline(config, dataset)
    elapsed = time.perf_counter() - t0
    ok = report.max_station_residual <= 1e-9 and elapsed <= 60.0
    _verdict(
        "criterion 1: interpolation exactness",
        ok,
        f"max residual {report.max_station_residual:.3e}, {elapsed:.1f}s",
    )


def test_criterion_2_kkt_oracle_equivalence():
    """50 random constrained rows match the dense full-pivot solver to 1e-8."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        row = random_fit_row(rng, max_points=20, max_keys=6)
        fit = fit_key_curve(row, degree=3)
        expected = kkt_oracle(fit.curve.kv, row)
        worst = max(worst, float(np.abs(fit.curve.controls - expected).max()))
    _verdict("criterion 2: constrained-fit oracle equivalence", worst <= 1e-8, f"max diff {worst:.2e}")


def test_criterion_3_unconstrained_degeneration():
    """Zero keys: objective equals the normal-equations optimum (1e-9 rel)."""
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(50):
        base = random_fit_row(rng, max_points=20, max_keys=6)
        row = FitRow(base.params, base.values, np.zeros(base.params.size, dtype=bool))
        fit = fit_key_curve(row, degree=3)
        A = collocation_matrix(fit.curve.kv, row.params)
        x = np.linalg.solve(A.T @ A, A.T @ row.values)
        oracle = float(np.sum((A @ x - row.values) ** 2))
        rel = abs(fit.objective - oracle) / max(oracle, 1e-300)
        worst = max(worst, rel)
    _verdict("criterion 3: unconstrained degeneration", worst <= 1e-9, f"max rel diff {worst:.2e}")


def test_criterion_4_basis_sanity():
    """Partition of unity on 1000 random draws; volume evaluation matches
    the naive triple sum on 50 random volumes."""
    rng = np.random.default_rng(17)
    unity_ok = True
    for _ in range(1000):
        kv = random_knot_vector(rng)
        u = float(rng.uniform(0, 1))
        vals = basis_funs(kv, u)
        if abs(vals.sum() - 1.0) > 1e-12 or np.any(vals < -1e-15):
            unity_ok = False
            break
    worst = 0.0
    for _ in range(50):
        kvs = []
        while len(kvs) < 3:
            kv = random_knot_vector(rng, degree=int(rng.integers(1, 4)))
            if kv.n_controls <= 8:
                kvs.append(kv)
        controls = rng.normal(size=tuple(kv.n_controls for kv in kvs) + (1,))
        vol = BSplineVolume(*kvs, controls)
        for u, v, t in rng.uniform(0, 1, (5, 3)):
            bu = naive_all_basis(kvs[0], float(u))
            bv = naive_all_basis(kvs[1], float(v))
            bt = naive_all_basis(kvs[2], float(t))
            expected = np.einsum("i,j,k,ijkd->d", bu, bv, bt, controls)
            got = eval_volume(vol, float(u), float(v), float(t))
            worst = max(worst, float(np.abs(got - expected).max()))
    _verdict(
        "criterion 4: basis sanity",
        unity_ok and worst <= 1e-12,
        f"naive-sum max diff {worst:.2e}",
    )


def test_criterion_5_kriging_exactness_unbiasedness():
    """Zero-nugget exactness, weight sums over 1000 queries, and a 3-point
    case against a hand-rolled elimination."""
    rng = np.random.default_rng(19)
    model = VariogramModel("spherical", nugget=0.0, sill=2.0, range_=0.7)
    pos = rng.uniform(0, 1, (20, 2))
    z = rng.normal(size=20)
    exact_ok = all(
        abs(krige(pos, z, model, pos[k]) - z[k]) <= 1e-10 for k in range(20)
    )
    queries = rng.uniform(0, 1, (1000, 2))
    weights, _ = kriging_weights(pos, model, queries)
    sums_ok = bool(np.all(np.abs(weights.sum(axis=0) - 1.0) <= 1e-10))

    pos3 = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    z3 = np.array([1.0, 2.0, 4.0])
    q = np.array([0.4, 0.2])
    system = kriging_system(pos3, model)
    rhs = np.concatenate([model(np.hypot(*(pos3 - q).T)), [1.0]])
    expected = gaussian_elimination(system, rhs)[:3] @ z3
    three_ok = abs(krige(pos3, z3, model, q) - expected) <= 1e-10
    _verdict(
        "criterion 5: kriging exactness and unbiasedness",
        exact_ok and sums_ok and three_ok,
    )


def _random_mesh(rng, n_stations, n_border):
    border = Polyline(regular_polygon(n_border, radius=1.0))
    stations = scatter_inside(border.points, n_stations, rng, margin=0.02)
    mesh = constrained_delaunay(stations, border)
    return mesh, mean_value_param(mesh)


def test_criterion_6_perturbation_safety():
    """Across 20 random meshes every merge pass preserves triangle
    orientations and distinct counts never grow; an engineered flip
    candidate is withdrawn; clustered inputs drop 30 percent in 5 passes."""
    rng = np.random.default_rng(23)
    orient_ok = True
    monotone_ok = True
    for _ in range(20):
        n_st = int(rng.integers(40, 180))
        n_bd = int(rng.integers(8, 22))
        mesh, pa = _random_mesh(rng, n_st, n_bd)
        before = np.array([orientation_sign(*pa.coords[f]) for f in mesh.faces])
        result = perturbation_loop(pa, mesh, max_iters=4, growth=2.0, cap_u=8, cap_v=8)
        after = np.array(
            [orientation_sign(*result.assignment.coords[f]) for f in mesh.faces]
        )
        if not np.array_equal(before, after):
            orient_ok = False
        counts = np.array(result.counts_history)
        if np.any(np.diff(counts[:, 0]) > 0) or np.any(np.diff(counts[:, 1]) > 0):
            monotone_ok = False

    # engineered sliver: merging u = 0.32 down to 0.30 flips face (0, 1, 2)
    params = np.array(
        [[0.30, 0.0], [0.32, 1.0], [0.305, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]]
    )
    vertices = np.array(
        [[0.3, 0.1], [0.32, 0.9], [0.31, 0.5], [0, 0], [1, 0], [1, 1], [0, 1]]
    )
    faces = np.array(
        [[3, 4, 0], [4, 1, 0], [0, 1, 2], [2, 1, 6], [6, 3, 2], [3, 0, 2],
         [4, 5, 1], [5, 6, 1]]
    )
    mesh = TriangleMesh(
        vertices=vertices, n_stations=3, border_cycle=np.array([3, 4, 5, 6]), faces=faces
    )
    merged, stats = merge_params(ParamAssignment(params), mesh, 0.05, 1e-9)
    withdrawn_ok = stats.withdrawn_u >= 1 and 0.32 in merged.coords[:, 0]

    # clustered stations: blobs force dense parameters that then collapse
    rng2 = np.random.default_rng(29)
    border = Polyline(regular_polygon(16, radius=1.0))
    centers = np.array([[-0.3, -0.3], [0.35, 0.1], [-0.05, 0.4]])
    pts = []
    while len(pts) < 90:
        c = centers[rng2.integers(0, 3)]
        p = c + 0.08 * rng2.standard_normal(2)
        from shapely.geometry import Point, Polygon

        if Polygon(border.points).contains(Point(*p)) and Polygon(
            border.points
        ).exterior.distance(Point(*p)) > 0.02:
            pts.append(p)
    stations = np.unique(np.asarray(pts), axis=0)
    mesh = constrained_delaunay(stations, border)
    pa = mean_value_param(mesh)
    result = perturbation_loop(pa, mesh, max_iters=5, growth=3.0, cap_u=4, cap_v=4)
    first = np.array(result.counts_history[0], dtype=float)
    last = np.array(result.counts_history[-1], dtype=float)
    drop = 1.0 - last / first
    drop_ok = bool(np.all(drop >= 0.30))
    _verdict(
        "criterion 6: perturbation safety",
        orient_ok and monotone_ok and withdrawn_ok and drop_ok,
        f"clustered drop u {drop[0]:.0%}, v {drop[1]:.0%}",
    )


def test_criterion_7_border_simplification():
    """Noisy 5000-point square reduces to a simple 4..8-gon within twice
    the noise amplitude; the half-ratio default keeps borders at or below
    half the station count."""
    rng = np.random.default_rng(31)
    noise = 0.01
    noisy = square_polyline(1250, jitter=noise, rng=rng)
    cp = CornerParams(d_min=0.1, d_max=0.35, alpha_max=140.0)
    simplified = simplify_border(noisy, 8, cp)
    from shapely.geometry import Polygon

    simple_ok = Polygon(simplified.points).is_valid
    count_ok = 4 <= len(simplified) <= 8
    h = hausdorff(loop_samples(simplified.points), loop_samples(square_polyline(50).points))
    hausdorff_ok = h <= 2 * noise

    ratio_ok = True
    for seed in range(3):
        rng2 = np.random.default_rng(100 + seed)
        theta = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
        radius = 1.0 + 0.25 * np.sin(3 * theta + rng2.uniform(0, 6.28))
        blob = Polyline(np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]))
        n_stations = int(rng2.integers(40, 90))
        target = min(max(int(np.floor(0.5 * n_stations)), 8), n_stations)
        out = simplify_border(blob, target)
        if len(out) > 0.5 * n_stations and len(out) > 8:
            ratio_ok = False
    _verdict(
        "criterion 7: border simplification",
        count_ok and simple_ok and hausdorff_ok and ratio_ok,
        f"{len(simplified)} vertices, hausdorff {h:.4f} vs limit {2 * noise}",
    )


def test_criterion_8_knot_insertion_exactness():
    """100 random insertions leave the curve unchanged at 200 parameters."""
    rng = np.random.default_rng(37)
    worst = 0.0
    done = 0
    while done < 100:
        kv = random_knot_vector(rng, degree=3)
        curve = BSplineCurve(kv, rng.normal(size=(kv.n_controls, 1)))
        u_new = float(rng.uniform(0.03, 0.97))
        if np.count_nonzero(kv.knots == u_new) >= kv.degree:
            continue
        refined = insert_knot(curve, u_new)
        us = rng.uniform(0, 1, 200)
        for u in us:
            diff = abs(eval_curve(refined, float(u))[0] - eval_curve(curve, float(u))[0])
            worst = max(worst, diff)
        done += 1
    _verdict("criterion 8: knot-insertion exactness", worst <= 1e-12, f"max diff {worst:.2e}")


def test_criterion_9_determinism_roundtrip(tmp_path):
    """Identical runs write byte-identical volumes; reloading reproduces
    the report's residuals exactly."""
    config, dataset = _synthetic_run(tmp_path, n_stations=40, n_steps=5, seed=41)
    volume, report = run_pipeline(config, dataset)
    bytes_first = volume_path(config).read_bytes()

    config2 = dataclasses.replace(config, output_dir=str(tmp_path / "out2"))
    run_pipeline(config2, dataset)
    identical = volume_path(config2).read_bytes() == bytes_first

    reloaded = read_volume(volume_path(config))
    grid = read_grid(grid_path(config))
    max_res, mean_res = station_residuals(reloaded, grid)
    res_ok = (
        max_res == report.max_station_residual
        and mean_res == report.mean_station_residual
    )
    _verdict("criterion 9: determinism and round-trip", identical and res_ok)
