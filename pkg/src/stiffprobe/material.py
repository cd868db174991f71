"""Temperature-dependent isotropic elasticity.

Young's modulus follows a softening law, either linear
``E(T) = E0 * (1 - c * (T - T_ref))`` or a piecewise-linear table of
``(T, E)`` pairs. Poisson's ratio is constant. The thermal expansion
coefficient is a constant or a table of ``(T, alpha)`` pairs; free thermal
strain is integrated from the reference temperature so the reference state
is thermally stress free.

All functions accept scalar or array temperatures and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .mesh import BAR1D, TRI3

PLANE_STRESS = "plane_stress"
PLANE_STRAIN = "plane_strain"

Law = Union[float, Sequence[Sequence[float]]]


class MaterialRangeError(ValueError):
    """Temperature outside the range where the material law is defined."""


def _as_table(law, name):
    if np.ndim(law) == 0:
        return None
    table = np.asarray(law, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or len(table) < 2:
        raise ValueError(f"{name} table must be a list of at least two (theta, value) pairs")
    if not np.all(np.isfinite(table)):
        raise ValueError(f"{name} table has non-finite entries")
    if np.any(np.diff(table[:, 0]) <= 0):
        raise ValueError(f"{name} table temperatures must be strictly increasing")
    table.setflags(write=False)
    return table


@dataclass(frozen=True, eq=False)
class MaterialModel:
    """Isotropic material with temperature-dependent stiffness.

    Parameters
    ----------
    E0 : float
        Young's modulus at ``theta_ref`` (Pa).
    nu : float
        Poisson's ratio, ``-1 < nu < 0.5``.
    softening : float or sequence of (theta, E) pairs
        Linear softening coefficient ``c`` (1/K), or a modulus table. A
        table must pass through ``E0`` at ``theta_ref``.
    alpha : float or sequence of (theta, alpha) pairs
        Thermal expansion coefficient (1/K).
    theta_ref : float
        Reference (ambient) temperature (K).
    mode_2d : {"plane_stress", "plane_strain"}
        Planar reduction used for ``tri3`` elements.
    """

    E0: float
    nu: float
    softening: Law = 0.0
    alpha: Law = 0.0
    theta_ref: float = 293.15
    mode_2d: str = PLANE_STRESS

    def __post_init__(self):
        if not (np.isfinite(self.E0) and self.E0 > 0):
            raise ValueError("E0 must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("nu must lie in (-1, 0.5)")
        if self.mode_2d not in (PLANE_STRESS, PLANE_STRAIN):
            raise ValueError(f"mode_2d must be '{PLANE_STRESS}' or '{PLANE_STRAIN}'")
        object.__setattr__(self, "_E_table", _as_table(self.softening, "softening"))
        object.__setattr__(self, "_alpha_table", _as_table(self.alpha, "alpha"))
        if self._E_table is not None:
            E_ref = self._interp(self._E_table, self.theta_ref, "softening")
            if not np.isclose(E_ref, self.E0, rtol=1e-12, atol=0.0):
                raise ValueError(f"softening table gives E({self.theta_ref}) = {E_ref}, expected E0 = {self.E0}")
            if np.any(self._E_table[:, 1] <= 0):
                raise ValueError("softening table has non-positive moduli")
        if self._alpha_table is not None:
            self._interp(self._alpha_table, self.theta_ref, "alpha")

    @staticmethod
    def _interp(table, theta, name):
        theta = np.asarray(theta, dtype=float)
        lo, hi = table[0, 0], table[-1, 0]
        if np.any(theta < lo) or np.any(theta > hi) or not np.all(np.isfinite(theta)):
            raise MaterialRangeError(f"temperature outside the {name} table range [{lo}, {hi}]")
        return np.interp(theta, table[:, 0], table[:, 1])


def youngs_at(model: MaterialModel, theta):
    """Young's modulus at temperature ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if model._E_table is not None:
        E = model._interp(model._E_table, theta, "softening")
        E = np.where(theta == model.theta_ref, model.E0, E)
    else:
        E = model.E0 * (1.0 - model.softening * (theta - model.theta_ref))
        if np.any(~(E > 0)):
            bad = np.atleast_1d(theta)[np.argmin(np.atleast_1d(E))]
            raise MaterialRangeError(f"non-positive Young's modulus at theta = {bad:g}")
    return E if E.ndim else float(E)


def lame_at(model: MaterialModel, theta):
    """Lame constants ``(mu, lam)`` at ``theta``."""
    E = youngs_at(model, theta)
    nu = model.nu
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


def expansion_integral(model: MaterialModel, theta):
    """Free thermal strain ``int_{theta_ref}^{theta} alpha(T) dT``.

    For a tabulated alpha the piecewise-linear interpolant is integrated
    exactly (trapezoids over table nodes plus the partial end segments).
    """
    theta = np.asarray(theta, dtype=float)
    table = model._alpha_table
    if table is None:
        out = model.alpha * (theta - model.theta_ref)
        return out if out.ndim else float(out)

    def primitive(t):
        a_t = model._interp(table, t, "alpha")
        k = np.clip(np.searchsorted(table[:, 0], t, side="right") - 1, 0, len(table) - 2)
        seg = 0.5 * np.diff(table[:, 0]) * (table[:-1, 1] + table[1:, 1])
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return cum[k] + 0.5 * (t - table[k, 0]) * (table[k, 1] + a_t)

    out = primitive(theta) - primitive(np.float64(model.theta_ref))
    out = np.where(theta == model.theta_ref, 0.0, out)
    return out if out.ndim else float(out)


def _thermal_modulus(model, theta, kind):
    """Stress per unit free thermal strain for the given element kind."""
    if kind is None:
        mu, lam = lame_at(model, theta)
        return 3.0 * lam + 2.0 * mu
    E = np.asarray(youngs_at(model, theta))
    nu = model.nu
    if kind == BAR1D:
        return E
    if kind == TRI3:
        if model.mode_2d == PLANE_STRESS:
            return E / (1.0 - nu)
        return E / (1.0 - 2.0 * nu)
    raise ValueError(f"unknown element kind '{kind}'")


def thermal_stress_coeff(model: MaterialModel, theta, kind: str | None = None):
    """Isotropic thermal stress magnitude at ``theta``.

    With ``kind=None`` this is the 3D value ``(3 lam + 2 mu) * int alpha dT``.
    For an element kind it is the value consistent with that kind's
    constitutive reduction: ``E * int alpha`` for bars, ``E/(1-nu)`` times the
    integral in plane stress, and the 3D value in plane strain. The
    constitutive thermal term is ``-k_th`` on each normal stress component.
    """
    k = _thermal_modulus(model, theta, kind) * np.asarray(expansion_integral(model, theta))
    return k if np.ndim(k) else float(k)


def thermal_strain_vector(model: MaterialModel, theta, kind: str) -> np.ndarray:
    """Free in-plane thermal strain in Voigt form, shape (..., n_voigt).

    Plane strain picks up the factor ``1 + nu`` from the suppressed
    out-of-plane expansion.
    """
    eps = np.asarray(expansion_integral(model, theta), dtype=float)
    if kind == BAR1D:
        return eps[..., None]
    scale = 1.0 + model.nu if model.mode_2d == PLANE_STRAIN else 1.0
    return np.stack([scale * eps, scale * eps, np.zeros_like(eps)], axis=-1)


def constitutive_matrix(model: MaterialModel, theta, kind: str) -> np.ndarray:
    """Voigt constitutive matrix, ordering (xx, yy, xy) with engineering shear.

    Returns shape (1, 1) for bars and (3, 3) for triangles; array
    temperatures prepend their shape.
    """
    E = np.asarray(youngs_at(model, theta), dtype=float)
    nu = model.nu
    if kind == BAR1D:
        return E[..., None, None] * np.ones((1, 1))
    if kind != TRI3:
        raise ValueError(f"unknown element kind '{kind}'")
    if model.mode_2d == PLANE_STRESS:
        base = np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]) / (1.0 - nu**2)
        return E[..., None, None] * base
    mu, lam = lame_at(model, theta)
    mu = np.asarray(mu)[..., None, None]
    lam = np.asarray(lam)[..., None, None]
    return lam * np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]]) + mu * np.diag([2.0, 2.0, 1.0])
