#!/usr/bin/env python3
"""Triangulation, unit-square parametrization, and parameter merging.

    python demos/03_mesh_parametrization.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from shapely.geometry import Point, Polygon

from dynsurf import Polyline, constrained_delaunay, mean_value_param, perturbation_loop

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(5)

# Region: a 20-gon. Stations: 80 points scattered inside, deliberately
# clustered so the raw parameters come out dense and non-uniform.
theta = np.linspace(0, 2 * np.pi, 20, endpoint=False)
border = Polyline(np.column_stack([np.cos(theta), np.sin(theta)]))
poly = Polygon(border.points)
centers = np.array([[-0.35, -0.2], [0.4, 0.15], [0.0, 0.45], [-0.1, -0.5]])
pts = []
while len(pts) < 80:
    p = centers[rng.integers(0, len(centers))] + 0.16 * rng.standard_normal(2)
    if poly.contains(Point(*p)) and poly.exterior.distance(Point(*p)) > 0.02:
        pts.append(p)
stations = np.asarray(pts)

mesh = constrained_delaunay(stations, border)
print(f"mesh: {mesh.vertices.shape[0]} vertices, {mesh.faces.shape[0]} faces")

assignment = mean_value_param(mesh)
nu0, nv0 = assignment.distinct_u().size, assignment.distinct_v().size
print(f"distinct parameters before merging: u={nu0}, v={nv0}")

result = perturbation_loop(assignment, mesh, max_iters=8, growth=2.0, cap_u=40, cap_v=40)
nu1, nv1 = result.grid.shape
print(f"after {result.iterations} merge passes: u={nu1}, v={nv1}")
print(f"merge history: {result.counts_history}")
print(f"withdrawn merges (orientation guard): u={result.stats.withdrawn_u}, v={result.stats.withdrawn_v}")

fig, axes = plt.subplots(1, 3, figsize=(14, 4.6))
axes[0].triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.faces, lw=0.5)
axes[0].plot(*stations.T, "r.", ms=4)
axes[0].set_title("constrained triangulation")
axes[0].set_aspect("equal")
for ax, pa, title in (
    (axes[1], assignment, f"raw parameters ({nu0} x {nv0})"),
    (axes[2], result.assignment, f"merged parameters ({nu1} x {nv1})"),
):
    ax.triplot(pa.coords[:, 0], pa.coords[:, 1], mesh.faces, lw=0.5)
    ax.plot(*pa.coords[: mesh.n_stations].T, "r.", ms=4)
    ax.set_title(title)
    ax.set_aspect("equal")
fig.tight_layout()
fig.savefig(OUT / "parametrization.png", dpi=120)
print(f"plot saved under {OUT}")
