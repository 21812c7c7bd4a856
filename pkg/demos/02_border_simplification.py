#!/usr/bin/env python3
"""Feature-point detection on dense borders and polygon simplification.

    python demos/02_border_simplification.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dynsurf import CornerParams, Polyline, detect_corners, simplify_border

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
rng = np.random.default_rng(3)

# A jagged coastline-like border: a smooth blob plus high frequency noise,
# sampled densely (2400 points).
theta = np.linspace(0, 2 * np.pi, 2400, endpoint=False)
radius = 1.0 + 0.25 * np.sin(3 * theta) + 0.06 * np.sin(17 * theta)
radius += 0.01 * rng.standard_normal(theta.size)
border = Polyline(np.column_stack([radius * np.cos(theta), radius * np.sin(theta)]))

cp = CornerParams(d_min=0.08, d_max=0.4, alpha_max=150.0)
corners = detect_corners(border, cp)
print(f"dense border: {len(border)} points, feature points: {corners.size}")

simplified = simplify_border(border, 40, cp)
print(f"simplified border: {len(simplified)} vertices")

fig, axes = plt.subplots(1, 2, figsize=(10, 5), sharex=True, sharey=True)
axes[0].plot(*border.points.T, "-", lw=0.5, color="gray")
axes[0].plot(*border.points[corners].T, "r.", ms=6)
axes[0].set_title(f"{len(border)} points, {corners.size} feature points")
closed = np.vstack([simplified.points, simplified.points[:1]])
axes[1].plot(*border.points.T, "-", lw=0.4, color="lightgray")
axes[1].plot(*closed.T, "b-o", ms=3, lw=1)
axes[1].set_title(f"simplified to {len(simplified)} vertices")
for ax in axes:
    ax.set_aspect("equal")
fig.tight_layout()
fig.savefig(OUT / "border_simplification.png", dpi=120)
print(f"plot saved under {OUT}")
