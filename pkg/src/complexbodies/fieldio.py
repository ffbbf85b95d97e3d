"""Artifact writers for scenario runs.

Every writer is deterministic: floats are rendered with %.17g (round-trip
exact for doubles), rows follow array order, and no timestamps or machine
identifiers enter the files.  Identical states therefore produce bitwise
identical artifacts.

Formats
-------
trace.csv        iter,energy,grad_sup,step,rejects
fields_u.csv     <idx>,<coords>,u1,u2,u3           idx = i[,j[,k]] node index
fields_nu.csv    <idx>,<coords>,nu1,...,nuM        coords = x1[,x2[,x3]]
residuals.csv    law,raw,scale,ratio
fields.npz       u, nu, pinned_u, pinned_nu, active, lo, hi, cells
report.txt       free-form summary, one finding per line
"""

from __future__ import annotations

import io
import itertools
import zipfile
from pathlib import Path

import numpy as np

from .balance import ResidualReport
from .fields import FieldState


def _fg(v: float) -> str:
    return f"{float(v):.17g}"


def write_trace(path: Path, trace: np.ndarray) -> None:
    lines = ["iter,energy,grad_sup,step,rejects"]
    for k, row in enumerate(np.asarray(trace)):
        lines.append(f"{k},{_fg(row[0])},{_fg(row[1])},{_fg(row[2])},{int(row[3])}")
    Path(path).write_text("\n".join(lines) + "\n")


def _index_header(dim: int) -> str:
    return ",".join("ijk"[:dim])


def _coord_header(dim: int) -> str:
    return ",".join(f"x{a + 1}" for a in range(dim))


def _node_rows(state: FieldState, values: np.ndarray, comp_header: str) -> str:
    grid = state.grid
    coords = grid.node_coords()
    dim = grid.dim
    lines = [f"{_index_header(dim)},{_coord_header(dim)},{comp_header}"]
    for idx in itertools.product(*(range(n) for n in grid.nodes)):
        pos = ",".join(_fg(c) for c in coords[idx])
        vals = ",".join(_fg(v) for v in values[idx])
        lines.append(f"{','.join(str(i) for i in idx)},{pos},{vals}")
    return "\n".join(lines) + "\n"


def _savez_deterministic(path: Path, arrays: dict[str, np.ndarray]) -> None:
    # np.savez stamps entries with the wall clock; freeze the timestamp so
    # repeated runs byte-match.  np.load reads the result as usual.
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def write_fields(out_dir: Path, state: FieldState) -> None:
    out = Path(out_dir)
    u_header = ",".join(f"u{a + 1}" for a in range(3))
    (out / "fields_u.csv").write_text(_node_rows(state, state.u, u_header))
    m = state.embed_dim
    nu_header = ",".join(f"nu{a + 1}" for a in range(m))
    (out / "fields_nu.csv").write_text(_node_rows(state, state.nu, nu_header))
    _savez_deterministic(
        out / "fields.npz",
        {
            "u": state.u,
            "nu": state.nu,
            "pinned_u": state.pinned_u,
            "pinned_nu": state.pinned_nu,
            "active": state.active,
            "lo": np.asarray(state.grid.lo),
            "hi": np.asarray(state.grid.hi),
            "cells": np.asarray(state.grid.cells),
        },
    )


def write_residuals(path: Path, report: ResidualReport) -> None:
    lines = ["law,raw,scale,ratio"]
    for name, raw, scale, ratio in report.rows():
        lines.append(f"{name},{_fg(raw)},{_fg(scale)},{_fg(ratio)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(path: Path, lines: list[str]) -> None:
    Path(path).write_text("\n".join(lines) + "\n")


def load_fields(path: Path) -> dict:
    """Read back a fields.npz dump (verification and plotting helpers)."""
    with np.load(Path(path)) as data:
        return {k: data[k] for k in data.files}
