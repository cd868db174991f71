"""Element and global assembly for bars and constant-strain triangles.

Conventions used throughout:

* Voigt ordering (xx, yy, xy) with engineering shear strain ``2 * e_xy``.
* Element temperature is the mean of its nodal temperatures.
* Constraints are eliminated: global matrices and vectors live on the free
  DOFs of the mesh, in ``mesh.free_dofs`` order. Prescribed non-zero values
  enter through :func:`boundary_load`.
* Eigenstrain and thermal strain enter as equivalent nodal loads, and
  stresses are ``C (B u - eps_star - eps_thermal)``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .material import (
    MaterialModel,
    constitutive_matrix,
    thermal_strain_vector,
)
from .mesh import BAR1D, TRI3, Element, Mesh, MeshError

N_VOIGT = {BAR1D: 1, TRI3: 3}


# -- element level -----------------------------------------------------------


def _strain_displacement(kind, coords):
    """Batched B matrices and element measures.

    ``coords`` has shape (n_el, n_nodes, dim). Returns ``(B, measure)`` with
    ``B`` of shape (n_el, n_voigt, n_nodes*dim) and ``measure`` the bar
    length or the signed triangle area.
    """
    if kind == BAR1D:
        L = coords[:, 1, 0] - coords[:, 0, 0]
        B = np.stack([-1.0 / L, 1.0 / L], axis=-1)[:, None, :]
        return B, L
    if kind != TRI3:
        raise ValueError(f"unknown element kind '{kind}'")
    x, y = coords[..., 0], coords[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=-1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=-1)
    B = np.zeros((len(coords), 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = c
    B[:, 2, 1::2] = b
    B /= (2.0 * area)[:, None, None]
    return B, area


def element_stiffness(element: Element, C, node_coords) -> np.ndarray:
    """Stiffness matrix ``B^T C B * volume`` of a single element.

    ``node_coords`` holds the coordinates of the element's own nodes, in
    element order, shape (n_nodes, dim).
    """
    coords = np.asarray(node_coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    B, measure = _strain_displacement(element.kind, coords[None])
    if not measure[0] > 0:
        raise MeshError(f"element {element.id}: degenerate geometry")
    Ke = measure[0] * element.section * B[0].T @ np.asarray(C, dtype=float) @ B[0]
    return 0.5 * (Ke + Ke.T)


class _Geometry:
    """Per-mesh cached B matrices, volumes and DOF scatter indices."""

    _cache: dict[int, tuple] = {}

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.kind = mesh.kind
        self.B, measure = _strain_displacement(mesh.kind, mesh.coords[mesh.connectivity])
        self.volume = measure * mesh.sections
        self.edofs = mesh.element_dofs()
        self.n_total = mesh.n_nodes * mesh.dim

    @classmethod
    def of(cls, mesh: Mesh) -> "_Geometry":
        hit = cls._cache.get(id(mesh))
        if hit is not None and hit[0] is mesh:
            return hit[1]
        geo = cls(mesh)
        if len(cls._cache) > 16:
            cls._cache.clear()
        cls._cache[id(mesh)] = (mesh, geo)
        return geo


def element_temperatures(mesh: Mesh, theta) -> np.ndarray:
    """Mean nodal temperature of each element."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        return np.full(mesh.n_elements, float(theta))
    if theta.shape != (mesh.n_nodes,):
        raise ValueError(f"temperature field must have one value per node ({mesh.n_nodes}), got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("temperature field has non-finite entries")
    return theta[mesh.connectivity].mean(axis=1)


def _element_matrices(mesh, model, theta):
    geo = _Geometry.of(mesh)
    C = constitutive_matrix(model, element_temperatures(mesh, theta), mesh.kind)
    Ke = np.einsum("eki,ekl,elj->eij", geo.B, C, geo.B) * geo.volume[:, None, None]
    Ke = 0.5 * (Ke + Ke.transpose(0, 2, 1))
    return geo, Ke


def _scatter_matrix(geo, Ke):
    rows = np.repeat(geo.edofs, geo.edofs.shape[1], axis=1).ravel()
    cols = np.tile(geo.edofs, (1, geo.edofs.shape[1])).ravel()
    return sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(geo.n_total, geo.n_total))


def _scatter_vector(geo, fe):
    out = np.zeros(geo.n_total)
    np.add.at(out, geo.edofs.ravel(), fe.ravel())
    return out


# -- global assembly ---------------------------------------------------------


def assemble_stiffness(mesh: Mesh, model: MaterialModel, theta, full: bool = False) -> sp.csr_matrix:
    """Global stiffness matrix at the temperature field ``theta``.

    Returns the free-free block (constrained rows and columns eliminated)
    unless ``full`` is set. A uniform ``theta == model.theta_ref`` gives the
    reference stiffness.
    """
    geo, Ke = _element_matrices(mesh, model, theta)
    K = _scatter_matrix(geo, Ke)
    if full:
        return K
    free = mesh.free_dofs
    return K[free][:, free].tocsr()


def boundary_load(mesh: Mesh, model: MaterialModel, theta) -> np.ndarray:
    """Load on the free DOFs from non-zero prescribed displacements."""
    values = mesh.prescribed_values()
    if not np.any(values):
        return np.zeros(mesh.n_free)
    K = assemble_stiffness(mesh, model, theta, full=True)
    return -(K[mesh.free_dofs][:, mesh.fixed_dofs] @ values)


def _as_eigenstrain(mesh, eps_star):
    nv = N_VOIGT[mesh.kind]
    if eps_star is None:
        return np.zeros((mesh.n_elements, nv))
    eps = np.asarray(eps_star, dtype=float)
    if eps.ndim == 1 and nv == 1:
        eps = eps[:, None]
    if eps.shape != (mesh.n_elements, nv):
        raise ValueError(f"eigenstrain must have shape ({mesh.n_elements}, {nv}), got {eps.shape}")
    if not np.all(np.isfinite(eps)):
        raise ValueError("eigenstrain has non-finite entries")
    return eps


def _strain_load(mesh, model, theta, eps):
    geo = _Geometry.of(mesh)
    C = constitutive_matrix(model, element_temperatures(mesh, theta), mesh.kind)
    fe = np.einsum("eki,ekl,el->ei", geo.B, C, eps) * geo.volume[:, None]
    return _scatter_vector(geo, fe)[mesh.free_dofs]


def eigenstrain_load(mesh: Mesh, model: MaterialModel, theta, eps_star) -> np.ndarray:
    """Equivalent nodal load ``sum_e B^T C(theta_e) eps*_e V_e`` on free DOFs."""
    return _strain_load(mesh, model, theta, _as_eigenstrain(mesh, eps_star))


def thermal_load(mesh: Mesh, model: MaterialModel, theta) -> np.ndarray:
    """Equivalent nodal load of free thermal expansion on free DOFs.

    Equals ``sum_e B^T k_th(theta_e) m V_e`` with ``m = [1, 1, 0]`` (or
    ``[1]`` for bars) and ``k_th`` from
    :func:`~stiffprobe.material.thermal_stress_coeff` for the element kind.
    """
    theta_e = element_temperatures(mesh, theta)
    return _strain_load(mesh, model, theta, thermal_strain_vector(model, theta_e, mesh.kind))


def element_strains(mesh: Mesh, u) -> np.ndarray:
    """Constant strain ``B u`` of each element (Voigt), shape (n_el, n_voigt).

    ``u`` is a free-DOF vector; constrained DOFs take their prescribed values.
    """
    geo = _Geometry.of(mesh)
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_free,):
        raise ValueError(f"displacement must have length {mesh.n_free}, got {u.shape}")
    ue = mesh.expand(u).ravel()[geo.edofs]
    return np.einsum("eki,ei->ek", geo.B, ue)


def compute_stress(mesh: Mesh, model: MaterialModel, theta, eps_star, u, thermal: bool = True) -> np.ndarray:
    """Element stresses ``C(theta_e) (B u - eps*) - k_th m``, shape (n_el, n_voigt).

    With ``thermal=False`` the expansion term is dropped, for states solved
    with stiffness change only.
    """
    theta_e = element_temperatures(mesh, theta)
    C = constitutive_matrix(model, theta_e, mesh.kind)
    elastic = element_strains(mesh, u) - _as_eigenstrain(mesh, eps_star)
    if thermal:
        elastic = elastic - thermal_strain_vector(model, theta_e, mesh.kind)
    return np.einsum("ekl,el->ek", C, elastic)


def internal_forces(mesh: Mesh, stress) -> np.ndarray:
    """Nodal forces ``sum_e B^T sigma_e V_e`` on all DOFs, shape (n_nodes, dim).

    Vanishes at free DOFs in a solved state with no external load; at
    constrained DOFs it gives the support reactions.
    """
    geo = _Geometry.of(mesh)
    fe = np.einsum("eki,ek->ei", geo.B, np.asarray(stress, dtype=float)) * geo.volume[:, None]
    return _scatter_vector(geo, fe).reshape(mesh.n_nodes, mesh.dim)


def equilibrium_residual(K, u, P) -> float:
    """Euclidean norm of ``K u - P``."""
    u = np.asarray(u, dtype=float)
    P = np.asarray(P, dtype=float)
    if K.shape != (len(P), len(u)):
        raise ValueError(f"dimension mismatch: K {K.shape}, u {u.shape}, P {P.shape}")
    return float(np.linalg.norm(K @ u - P))
