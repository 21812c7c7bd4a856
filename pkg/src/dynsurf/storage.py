"""Deterministic text persistence for volumes and grids.

Numbers are serialized with 17 significant digits so reads round-trip
bit for bit, and files are written atomically (temp file plus rename).
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .bspline import BSplineVolume, KnotVector
from .errors import InputError
from .kriging import GriddedDataset

FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(row) -> str:
    return " ".join(_fmt(x) for x in np.atleast_1d(row))


def atomic_write_text(path: str | Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_volume(vol: BSplineVolume, path: str | Path):
    nu, nv, nt = vol.shape
    lines = [
        f"format_version {FORMAT_VERSION}",
        f"degrees {vol.kv_u.degree} {vol.kv_v.degree} {vol.kv_t.degree}",
        f"dims {nu} {nv} {nt} {vol.dim}",
        "knots_u " + _fmt_row(vol.kv_u.knots),
        "knots_v " + _fmt_row(vol.kv_v.knots),
        "knots_t " + _fmt_row(vol.kv_t.knots),
        "control_points",
    ]
    flat = vol.controls.reshape(nu * nv * nt, vol.dim)
    lines.extend(_fmt_row(row) for row in flat)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _expect(line: str, key: str) -> list[str]:
    parts = line.split()
    if not parts or parts[0] != key:
        raise InputError(f"expected '{key}' line, got {line!r}")
    return parts[1:]


def read_volume(path: str | Path) -> BSplineVolume:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if len(lines) < 7:
        raise InputError(f"volume file {path} is truncated")
    version = int(_expect(lines[0], "format_version")[0])
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported volume format version {version}")
    degrees = [int(x) for x in _expect(lines[1], "degrees")]
    dims = [int(x) for x in _expect(lines[2], "dims")]
    knots = [
        np.array([float(x) for x in _expect(lines[3 + k], f"knots_{axis}")])
        for k, axis in enumerate("uvt")
    ]
    if lines[6].strip() != "control_points":
        raise InputError("missing control_points section")
    nu, nv, nt, dv = dims
    body = lines[7 : 7 + nu * nv * nt]
    if len(body) != nu * nv * nt:
        raise InputError("control point count disagrees with dims")
    controls = np.array([[float(x) for x in row.split()] for row in body])
    if controls.shape[1] != dv:
        raise InputError("control point dimension disagrees with dims")
    return BSplineVolume(
        kv_u=KnotVector(degrees[0], knots[0]),
        kv_v=KnotVector(degrees[1], knots[1]),
        kv_t=KnotVector(degrees[2], knots[2]),
        controls=controls.reshape(nu, nv, nt, dv),
    )


def write_grid(grid: GriddedDataset, path: str | Path):
    nu, nv, nt = grid.shape
    cells = np.argwhere(grid.key_mask)
    lines = [
        f"format_version {FORMAT_VERSION}",
        f"dims {nu} {nv} {nt}",
        "u_params " + _fmt_row(grid.u_values),
        "v_params " + _fmt_row(grid.v_values),
        "t_params " + _fmt_row(grid.t_values),
        f"key_cells {cells.shape[0]}",
    ]
    lines.extend(f"{i} {j}" for i, j in cells)
    lines.append("values")
    flat = grid.values.reshape(nu * nv, nt)
    lines.extend(_fmt_row(row) for row in flat)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_grid(path: str | Path) -> GriddedDataset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    version = int(_expect(lines[0], "format_version")[0])
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported grid format version {version}")
    nu, nv, nt = (int(x) for x in _expect(lines[1], "dims"))
    u = np.array([float(x) for x in _expect(lines[2], "u_params")])
    v = np.array([float(x) for x in _expect(lines[3], "v_params")])
    t = np.array([float(x) for x in _expect(lines[4], "t_params")])
    n_cells = int(_expect(lines[5], "key_cells")[0])
    mask = np.zeros((nu, nv), dtype=bool)
    for line in lines[6 : 6 + n_cells]:
        i, j = (int(x) for x in line.split())
        mask[i, j] = True
    if lines[6 + n_cells].strip() != "values":
        raise InputError("missing values section")
    body = lines[7 + n_cells : 7 + n_cells + nu * nv]
    if len(body) != nu * nv:
        raise InputError("value row count disagrees with dims")
    values = np.array([[float(x) for x in row.split()] for row in body])
    return GriddedDataset(
        u_values=u, v_values=v, t_values=t, values=values.reshape(nu, nv, nt), key_mask=mask
    )
