"""CSV field files and JSON reports.

Formats (header line required)::

    node,theta                 temperature field
    elem,exx[,eyy,exy]         eigenstrain field
    node,ux[,uy]               nodal displacement
    elem,sxx[,syy,sxy]         element stress

Rows may appear in any order but must cover every node (element) once.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .mesh import Mesh

_VOIGT_STRAIN = ["exx", "eyy", "exy"]
_VOIGT_STRESS = ["sxx", "syy", "sxy"]
_DISP = ["ux", "uy"]


class FieldFormatError(ValueError):
    pass


def _read_table(text: str, key: str, columns: list[str], count: int) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise FieldFormatError("empty field file")
    header = [h.strip() for h in rows[0]]
    if header != [key] + columns:
        raise FieldFormatError(f"expected header '{','.join([key] + columns)}', got '{','.join(header)}'")
    out = np.full((count, len(columns)), np.nan)
    seen = np.zeros(count, dtype=bool)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FieldFormatError(f"line {lineno}: expected {len(header)} values")
        try:
            idx = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise FieldFormatError(f"line {lineno}: not a number") from None
        if not 0 <= idx < count:
            raise FieldFormatError(f"line {lineno}: {key} {idx} out of range")
        if seen[idx]:
            raise FieldFormatError(f"line {lineno}: duplicate {key} {idx}")
        seen[idx] = True
        out[idx] = vals
    if not seen.all():
        raise FieldFormatError(f"missing {key} {int(np.flatnonzero(~seen)[0])}")
    return out


def _write_table(key: str, columns: list[str], values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key] + columns)
    for i, row in enumerate(np.atleast_2d(values)):
        w.writerow([i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def read_temperature(text: str, mesh: Mesh) -> np.ndarray:
    return _read_table(text, "node", ["theta"], mesh.n_nodes)[:, 0]


def write_temperature(theta) -> str:
    return _write_table("node", ["theta"], np.asarray(theta, dtype=float)[:, None])


def read_eigenstrain(text: str, mesh: Mesh) -> np.ndarray:
    nv = 1 if mesh.dim == 1 else 3
    return _read_table(text, "elem", _VOIGT_STRAIN[:nv], mesh.n_elements)


def write_eigenstrain(eps) -> str:
    eps = np.asarray(eps, dtype=float)
    eps = eps[:, None] if eps.ndim == 1 else eps
    return _write_table("elem", _VOIGT_STRAIN[: eps.shape[1]], eps)


def read_displacement(text: str, mesh: Mesh) -> np.ndarray:
    """Nodal displacements, shape (n_nodes, dim)."""
    return _read_table(text, "node", _DISP[: mesh.dim], mesh.n_nodes)


def write_displacement(mesh: Mesh, u_free, fill_prescribed: bool = True) -> str:
    """Export a free-DOF vector node by node (constrained DOFs prescribed)."""
    return _write_table("node", _DISP[: mesh.dim], mesh.expand(u_free, fill_prescribed))


def write_stress(stress) -> str:
    stress = np.asarray(stress, dtype=float)
    return _write_table("elem", _VOIGT_STRESS[: stress.shape[1]], stress)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_jsonable(obj):
    """Convert numpy containers to plain JSON types; NaN and inf become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"
