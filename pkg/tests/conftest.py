"""Shared synthetic-data helpers for the test suite."""

import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from dynsurf import Polyline


def regular_polygon(n_sides: int, radius: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    theta = np.linspace(0.0, 2.0 * np.pi, n_sides, endpoint=False)
    return np.column_stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)]
    )


def scatter_inside(border_points: np.ndarray, count: int, rng, margin: float = 1e-3) -> np.ndarray:
    """Uniform rejection sampling strictly inside a polygon."""
    poly = Polygon(border_points)
    lo = border_points.min(axis=0)
    hi = border_points.max(axis=0)
    out = []
    while len(out) < count:
        x = rng.uniform(lo[0], hi[0])
        y = rng.uniform(lo[1], hi[1])
        p = Point(x, y)
        if poly.contains(p) and poly.exterior.distance(p) > margin:
            out.append([x, y])
    return np.asarray(out)


def field_value(x, y, t):
    """Smooth space-time test field used across the suite."""
    return np.sin(3.0 * x) * np.cos(2.0 * y) + t * t


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def write_dataset_csvs(tmp_path, stations, readings, border):
    """Write the three input CSVs and return their paths."""
    stations_path = tmp_path / "stations.csv"
    readings_path = tmp_path / "readings.csv"
    border_path = tmp_path / "border.csv"
    with open(stations_path, "w") as fh:
        fh.write("id,x,y\n")
        for i, (x, y) in enumerate(stations):
            fh.write(f"s{i:04d},{float(x)!r},{float(y)!r}\n")
    with open(readings_path, "w") as fh:
        fh.write("station_id,step_index,value\n")
        for i in range(readings.shape[0]):
            for k in range(readings.shape[1]):
                fh.write(f"s{i:04d},{k},{float(readings[i, k])!r}\n")
    with open(border_path, "w") as fh:
        fh.write("x,y\n")
        for x, y in border:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
    return stations_path, readings_path, border_path


def make_border(n_sides: int = 20, radius: float = 1.0) -> Polyline:
    return Polyline(regular_polygon(n_sides, radius))
