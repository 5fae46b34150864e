"""CSV tables, legacy VTK files and run manifests.

All writers produce deterministic bytes: fixed number formatting, LF line
endings, sorted manifest keys and no timestamps.
"""

from __future__ import annotations

import json
import math
from importlib import metadata
from pathlib import Path

import numpy as np

from .analysis import ConvergenceTable
from .mesh import Mesh

CSV_COLUMNS = ("level", "n", "h", "rho", "dofs", "err_l2", "err_h1", "eoc_l2", "eoc_h1",
               "newton_iters", "wall_ms")


def fmt(x) -> str:
    """12 significant digits, locale independent; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def table_csv(table: ConvergenceTable, extra: tuple[str, ...] = ()) -> str:
    cols = CSV_COLUMNS + tuple(extra)
    lines = [",".join(cols)]
    for row in table.rows:
        lines.append(",".join(fmt(getattr(row, c)) for c in cols))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(table: ConvergenceTable, path, extra: tuple[str, ...] = ()) -> Path:
    return write_text(path, table_csv(table, extra))


def vtk_unstructured(mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None,
                     title: str = "energyoc") -> str:
    """Legacy ASCII VTK UNSTRUCTURED_GRID with scalar point and cell fields."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    ne = mesh.n_elements
    out.append(f"CELLS {ne} {4 * ne}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    out.append(f"CELL_TYPES {ne}")
    out += ["5"] * ne  # VTK_TRIANGLE
    for section, data, size in (("POINT_DATA", point_data, mesh.n_nodes),
                                ("CELL_DATA", cell_data, ne)):
        if not data:
            continue
        out.append(f"{section} {size}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float).ravel()
            if values.shape != (size,):
                raise ValueError(f"field {name!r} has {values.size} values, expected {size}")
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [fmt(v) for v in values]
    return "\n".join(out) + "\n"


def read_vtk_scalars(path) -> dict[str, np.ndarray]:
    """Minimal reader for files written by :func:`vtk_unstructured` (used for validation)."""
    lines = Path(path).read_text(encoding="ascii").split("\n")
    if not lines[0].startswith("# vtk DataFile") or lines[2] != "ASCII":
        raise ValueError("not a legacy ASCII VTK file")
    fields: dict[str, np.ndarray] = {}
    size = 0
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if parts and parts[0] in ("POINT_DATA", "CELL_DATA"):
            size = int(parts[1])
        elif parts and parts[0] == "SCALARS":
            vals = np.array([float(v) for v in lines[i + 2:i + 2 + size]])
            fields[parts[1]] = vals
            i += 1 + size
        i += 1
    return fields


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest_json(data: dict) -> str:
    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            v = float(v)
            return v if math.isfinite(v) else str(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v

    return json.dumps(clean(data), indent=2, sort_keys=True) + "\n"
