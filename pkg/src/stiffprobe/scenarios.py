"""Ready-made scenarios and field generators used by tests, demos and the CLI."""

from __future__ import annotations

import numpy as np

from .material import MaterialModel
from .mesh import Constraint, Mesh, generate_bar_chain, generate_rect_grid, rigid_body_pins
from .pipeline import FIXED_LOAD, Scenario


def gaussian_hotspot(mesh: Mesh, theta_ref: float, center, radius: float, peak: float) -> np.ndarray:
    """Nodal temperatures ``theta_ref + peak * exp(-|x - center|^2 / radius^2)``."""
    if not radius > 0:
        raise ValueError("hot-spot radius must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (mesh.dim,):
        raise ValueError(f"hot-spot center must have {mesh.dim} coordinates")
    r2 = np.sum((mesh.coords - center) ** 2, axis=1)
    return theta_ref + peak * np.exp(-r2 / radius**2)


def element_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.coords[mesh.connectivity].mean(axis=1)


# -- two-spring chain --------------------------------------------------------
#
#   node0 --[A: EA/L = 2]-- node1 --[B: EA/L = 1]-- node2, both ends pinned.
#   Bar A carries an eigenstrain (pre-stretch); heating node 2 softens bar B
#   only, because bar A's mean temperature stays at the reference.

SPRING_SOFTENING = 1e-3


def two_spring_mesh() -> Mesh:
    mesh = generate_bar_chain([0.0, 1.0, 2.0], [2.0, 1.0])
    return mesh.with_constraints([Constraint(0, 0, 0.0), Constraint(2, 0, 0.0)])


def two_spring_scenario(
    kB_after: float = 0.5,
    prestretch: float = 0.3,
    alpha: float = 0.0,
    **kwargs,
) -> Scenario:
    """Two-spring chain with bar B softened from stiffness 1 to ``kB_after``."""
    mesh = two_spring_mesh()
    material = MaterialModel(E0=1.0, nu=0.0, softening=SPRING_SOFTENING, alpha=alpha, theta_ref=300.0)
    # element temperature of bar B is half the node-2 rise
    rise = 2.0 * (1.0 - kB_after) / SPRING_SOFTENING
    theta = np.array([300.0, 300.0, 300.0 + rise])
    return Scenario(mesh, material, theta, eigenstrain=np.array([prestretch, 0.0]), **kwargs)


# -- standard plate ------------------------------------------------------------


def standard_material(**overrides) -> MaterialModel:
    """Steel-like plane-stress material with linear softening."""
    params = dict(E0=200e9, nu=0.3, softening=4e-4, alpha=1.2e-5, theta_ref=293.15)
    params.update(overrides)
    return MaterialModel(**params)


def inclusion_eigenstrain(mesh: Mesh, center=(0.35, 0.4), radius=0.22, strain=2e-3) -> np.ndarray:
    """Uniform dilatational eigenstrain in elements whose centroid lies in a disc."""
    inside = np.linalg.norm(element_centroids(mesh) - np.asarray(center), axis=1) <= radius
    eps = np.zeros((mesh.n_elements, 3))
    eps[inside, 0] = strain
    eps[inside, 1] = strain
    return eps


def standard_plate_scenario(
    n: int = 10,
    peak_softening: float = 0.1,
    load_framing: str = FIXED_LOAD,
    center=(0.6, 0.55),
    radius: float = 0.4,
    material: MaterialModel | None = None,
    **kwargs,
) -> Scenario:
    """Unit square plate with an eigenstrain inclusion and a Gaussian hot spot.

    The plate is pinned only against rigid-body motion, so the initial
    stress is self-equilibrated. The hot-spot peak is chosen so that the
    softening at the peak equals ``peak_softening`` under the linear law.
    """
    material = material or standard_material()
    mesh = generate_rect_grid(n, n, 1.0, 1.0, 0.01)
    mesh = mesh.with_constraints(rigid_body_pins(mesh))
    peak = peak_softening / material.softening
    theta = gaussian_hotspot(mesh, material.theta_ref, center, radius, peak)
    return Scenario(mesh, material, theta, eigenstrain=inclusion_eigenstrain(mesh), load_framing=load_framing, **kwargs)
