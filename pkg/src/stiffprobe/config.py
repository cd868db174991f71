"""JSON run configuration: one file describes one scenario.

Example::

    {
      "mesh": {"grid": {"nx": 10, "ny": 10, "lx": 1.0, "ly": 1.0, "thickness": 0.01},
               "pin_rigid_body": true},
      "material": {"E0": 200e9, "nu": 0.3, "softening": 4e-4, "alpha": 1.2e-5,
                   "theta_ref": 293.15, "mode_2d": "plane_stress"},
      "eigenstrain": {"regions": [{"disc": {"center": [0.35, 0.4], "radius": 0.22},
                                   "strain": [2e-3, 2e-3, 0.0]}]},
      "perturbation": {"hotspot": {"center": [0.6, 0.55], "radius": 0.4, "peak": 250.0}},
      "framing": "fixed_load",
      "expansion": false,
      "noise": {"sigma": 0.0, "seed": 0},
      "eta": null,
      "output": "out"
    }

Mesh sources
    ``{"file": path}`` or ``{"grid": {...}}`` (mutually exclusive), plus
    optional ``constraints`` (list of ``[node, axis, value]``),
    ``clamp_edges`` (grid edge names; all axes fixed) and
    ``pin_rigid_body``.
Eigenstrain sources
    ``file`` (CSV), ``values`` (per element), ``uniform`` (one Voigt
    vector for all elements) or ``regions`` (``box`` ``[xmin, xmax, ymin,
    ymax]`` or ``disc`` rules; later rules overwrite earlier ones). An
    explicit dead load is given instead as top-level ``"load"``: a list with
    one entry per free DOF.
Perturbation sources
    ``file`` (CSV), ``values`` (per node), ``uniform`` (temperature rise) or
    ``hotspot``.

Relative paths are resolved against the directory holding the config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fields
from .material import PLANE_STRESS, MaterialModel
from .mesh import Constraint, Mesh, edge_nodes, generate_rect_grid, load_mesh, rigid_body_pins
from .pipeline import FIXED_LOAD, Scenario
from .scenarios import element_centroids, gaussian_hotspot


class ConfigError(ValueError):
    """Invalid or unresolvable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    output: Path
    source: Path | None = None


def _one_of(block: dict, keys, where: str) -> str:
    present = [k for k in keys if k in block]
    if len(present) != 1:
        raise ConfigError(f"{where}: give exactly one of {', '.join(keys)}")
    return present[0]


def _read_text(base: Path, rel) -> str:
    path = base / str(rel)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read '{path}': {exc.strerror or exc}") from None


def _build_mesh(block: dict, base: Path) -> Mesh:
    kind = _one_of(block, ("file", "grid"), "mesh")
    if kind == "file":
        mesh = load_mesh(_read_text(base, block["file"]))
    else:
        g = block["grid"]
        mesh = generate_rect_grid(
            int(g["nx"]), int(g["ny"]), float(g.get("lx", 1.0)), float(g.get("ly", 1.0)), float(g.get("thickness", 1.0))
        )
    cons = []
    for edge in block.get("clamp_edges", []):
        for node in edge_nodes(mesh, edge):
            cons += [Constraint(int(node), axis, 0.0) for axis in range(mesh.dim)]
    for item in block.get("constraints", []):
        node, axis, *value = item
        cons.append(Constraint(int(node), int(axis), float(value[0]) if value else 0.0))
    if block.get("pin_rigid_body", False):
        taken = {(c.node, c.axis) for c in (*mesh.constraints, *cons)}
        cons += [c for c in rigid_body_pins(mesh) if (c.node, c.axis) not in taken]
    return mesh.with_constraints(cons)


def _build_material(block: dict) -> MaterialModel:
    known = {"E0", "nu", "softening", "alpha", "theta_ref", "mode_2d"}
    extra = set(block) - known
    if extra:
        raise ConfigError(f"material: unknown keys {sorted(extra)}")
    try:
        return MaterialModel(
            E0=float(block["E0"]),
            nu=float(block.get("nu", 0.0)),
            softening=block.get("softening", 0.0),
            alpha=block.get("alpha", 0.0),
            theta_ref=float(block.get("theta_ref", 293.15)),
            mode_2d=block.get("mode_2d", PLANE_STRESS),
        )
    except KeyError as exc:
        raise ConfigError(f"material: missing {exc}") from None


def _build_eigenstrain(block: dict, mesh: Mesh, base: Path) -> np.ndarray:
    kind = _one_of(block, ("file", "values", "uniform", "regions"), "eigenstrain")
    nv = 1 if mesh.dim == 1 else 3
    if kind == "file":
        return fields.read_eigenstrain(_read_text(base, block["file"]), mesh)
    if kind == "values":
        return np.asarray(block["values"], dtype=float).reshape(mesh.n_elements, nv)
    if kind == "uniform":
        return np.tile(np.atleast_1d(np.asarray(block["uniform"], dtype=float)), (mesh.n_elements, 1))
    eps = np.zeros((mesh.n_elements, nv))
    cent = element_centroids(mesh)
    for i, rule in enumerate(block["regions"]):
        strain = np.atleast_1d(np.asarray(rule["strain"], dtype=float))
        shape = _one_of(rule, ("box", "disc"), f"eigenstrain region {i}")
        if shape == "box":
            lo, hi = np.asarray(rule["box"], dtype=float).reshape(mesh.dim, 2).T
            inside = np.all((cent >= lo) & (cent <= hi), axis=1)
        else:
            disc = rule["disc"]
            inside = np.linalg.norm(cent - np.asarray(disc["center"], dtype=float), axis=1) <= float(disc["radius"])
        eps[inside] = strain
    return eps


def _build_temperature(block: dict, mesh: Mesh, theta_ref: float, base: Path) -> np.ndarray:
    kind = _one_of(block, ("file", "values", "uniform", "hotspot"), "perturbation")
    if kind == "file":
        return fields.read_temperature(_read_text(base, block["file"]), mesh)
    if kind == "values":
        return np.asarray(block["values"], dtype=float)
    if kind == "uniform":
        return np.full(mesh.n_nodes, theta_ref + float(block["uniform"]))
    h = block["hotspot"]
    return gaussian_hotspot(mesh, theta_ref, h["center"], float(h["radius"]), float(h["peak"]))


def parse_config(data: dict, base: Path | str = ".", source: Path | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a decoded JSON document.

    Raises
    ------
    ConfigError
        Unknown blocks, missing keys, unreadable files, or any validation
        failure of the mesh, material or scenario.
    """
    base = Path(base)
    known = {
        "mesh", "material", "eigenstrain", "load", "perturbation", "framing", "expansion",
        "noise", "eta", "mask_tol", "solver", "output",
    }
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    try:
        mesh = _build_mesh(data["mesh"], base)
        material = _build_material(data["material"])
        if ("eigenstrain" in data) == ("load" in data):
            raise ConfigError("give exactly one of eigenstrain or load")
        eps = _build_eigenstrain(data["eigenstrain"], mesh, base) if "eigenstrain" in data else None
        load = np.asarray(data["load"], dtype=float) if "load" in data else None
        theta = _build_temperature(data.get("perturbation", {"uniform": 0.0}), mesh, material.theta_ref, base)
        noise = data.get("noise", {})
        solver = data.get("solver", {})
        scenario = Scenario(
            mesh,
            material,
            theta,
            eigenstrain=eps,
            load=load,
            load_framing=data.get("framing", FIXED_LOAD),
            include_expansion=bool(data.get("expansion", False)),
            noise_sigma=float(noise.get("sigma", 0.0)),
            seed=int(noise.get("seed", 0)),
            eta=data.get("eta"),
            mask_tol=float(data.get("mask_tol", 1e-12)),
            rtol=float(solver.get("rtol", 1e-10)),
            solver_method=solver.get("method", "auto"),
        )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(scenario, base / data.get("output", "out"), source)


def load_config(path) -> RunConfig:
    """Read and parse a JSON config file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data, path.parent, path)
