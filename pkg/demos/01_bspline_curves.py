#!/usr/bin/env python3
"""Tour of the B-spline core: basis functions, curves, knot insertion.

Run from the repository root:

    python demos/01_bspline_curves.py

Writes plots into demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dynsurf import (
    BSplineCurve,
    KnotVector,
    averaging_knots,
    basis_funs,
    eval_curve,
    find_span,
    insert_knot,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# A cubic clamped knot vector with two interior knots. The first and last
# four knots are pinned to 0 and 1, so the curve interpolates its end
# control points.
kv = KnotVector(3, [0, 0, 0, 0, 0.3, 0.7, 1, 1, 1, 1])
print(f"knot vector: {kv.knots}")
print(f"controls implied: {kv.n_controls}, spans: {kv.n_spans}")

# Plot every basis function by sweeping u and scattering the local window
# values into their global slots.
us = np.linspace(0, 1, 400)
basis = np.zeros((us.size, kv.n_controls))
for row, u in enumerate(us):
    span = find_span(kv, float(u))
    basis[row, span - 3 : span + 1] = basis_funs(kv, float(u))

fig, ax = plt.subplots(figsize=(7, 3.5))
for j in range(kv.n_controls):
    ax.plot(us, basis[:, j], label=f"N{j}")
ax.set_title("Cubic basis functions (partition of unity)")
ax.set_xlabel("u")
ax.legend(ncol=3, fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "basis_functions.png", dpi=120)
print(f"sum of basis at u=0.42: {basis[int(0.42 * 399)].sum():.15f}")

# A wavy planar curve and the same curve after inserting a knot at 0.5:
# one more control point, identical geometry.
controls = np.array([[0, 0], [1, 2], [2.5, -1], [4, 2.5], [5, 0], [6, 1]], dtype=float)
curve = BSplineCurve(kv, controls)
refined = insert_knot(curve, 0.5)
samples = np.array([eval_curve(curve, float(u)) for u in us])
samples_ref = np.array([eval_curve(refined, float(u)) for u in us])
print(f"max deviation after knot insertion: {np.abs(samples - samples_ref).max():.2e}")

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(samples[:, 0], samples[:, 1], "b-", label="curve")
ax.plot(controls[:, 0], controls[:, 1], "ko--", mfc="none", label="controls")
ax.plot(
    refined.controls[:, 0], refined.controls[:, 1], "rs:", mfc="none",
    label="controls after insertion",
)
ax.legend()
ax.set_title("Knot insertion preserves the curve")
fig.tight_layout()
fig.savefig(OUT / "knot_insertion.png", dpi=120)

# Averaging knots: build an interpolation-ready knot vector from data
# parameters and check the collocation determinant is comfortably nonzero.
params = np.array([0.0, 0.1, 0.35, 0.55, 0.8, 1.0])
akv = averaging_knots(params, 3)
from dynsurf.bspline import collocation_matrix

A = collocation_matrix(akv, params)
print(f"averaging knots: {akv.knots}")
print(f"collocation determinant: {np.linalg.det(A):.3e}")
print(f"plots saved under {OUT}")
