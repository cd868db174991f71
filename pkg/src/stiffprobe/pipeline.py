"""Forward stiffness-perturbation experiment and recovery of the initial field.

A residually stressed body (eigenstrain, or an explicit dead load) is solved
at the uniform reference temperature to give the initial displacement
``u0``. Heating softens the material, the stiffness changes from ``K0`` to
``K1 = K0 + dK`` and the displacement moves to ``u1 = u0 + du``. Because

    K0 u0 = P0,    K1 u1 = P1,

the increment satisfies ``dK u0 + K1 du = P1 - P0``. With the load held
fixed the right-hand side vanishes and ``u0`` can be recovered from ``du``
on the DOFs where ``dK`` acts.

Two load framings are supported:

``fixed_load``
    ``P1 = P0``. The identity above holds with zero right-hand side.
``eigenstrain``
    ``P1`` is recomputed from the softened constitutive matrix, which adds a
    load change wherever heating overlaps the eigenstrain.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .linsolve import SingularSystemError, SolveReport, observable_mask, solve_spd, solve_tikhonov
from .material import MaterialModel, youngs_at
from .mesh import Mesh, rigid_body_dofs

log = logging.getLogger(__name__)

FIXED_LOAD = "fixed_load"
EIGENSTRAIN = "eigenstrain"

SOFTENING_WARN = 0.30
ETA_SWEEP = np.logspace(-10, -2, 10)
SIGNIFICANCE = 2.0
MIN_GAIN = 0.01
SURE_MAX_SIZE = 4000


class PerturbationWarning(UserWarning):
    """Softening too strong for the small-perturbation approximation."""


class EmptyObservableSetError(ValueError):
    """The stiffness perturbation touches no free DOF."""


class ScenarioError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` holds the original error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True, eq=False)
class Scenario:
    """Inputs of one forward/inverse run.

    Exactly one of ``eigenstrain`` (per element, Voigt) and ``load`` (per
    free DOF) must be given. ``eta`` is the Tikhonov weight; ``None`` means
    0 for noiseless runs and ``"auto"`` otherwise; see :func:`select_eta`.
    """

    mesh: Mesh
    material: MaterialModel
    theta_pert: np.ndarray
    eigenstrain: np.ndarray | None = None
    load: np.ndarray | None = None
    load_framing: str = FIXED_LOAD
    include_expansion: bool = False
    noise_sigma: float = 0.0
    seed: int = 0
    eta: float | str | None = None
    mask_tol: float = 1e-12
    rtol: float = 1e-10
    solver_method: str = "auto"

    def __post_init__(self):
        if (self.eigenstrain is None) == (self.load is None):
            raise ValueError("give exactly one of eigenstrain or load")
        if self.load_framing not in (FIXED_LOAD, EIGENSTRAIN):
            raise ValueError(f"load_framing must be '{FIXED_LOAD}' or '{EIGENSTRAIN}'")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if isinstance(self.eta, str):
            if self.eta != "auto":
                raise ValueError("eta must be a number >= 0, 'auto' or None")
        elif self.eta is not None and not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        theta = np.asarray(self.theta_pert, dtype=float)
        if theta.ndim == 0:
            theta = np.full(self.mesh.n_nodes, float(theta))
        if theta.shape != (self.mesh.n_nodes,) or not np.all(np.isfinite(theta)):
            raise ValueError(f"theta_pert must hold one finite value per node ({self.mesh.n_nodes})")
        object.__setattr__(self, "theta_pert", theta)
        if self.eigenstrain is not None:
            object.__setattr__(self, "eigenstrain", fem._as_eigenstrain(self.mesh, self.eigenstrain))
        else:
            load = np.asarray(self.load, dtype=float)
            if load.shape != (self.mesh.n_free,):
                raise ValueError(f"load must have one entry per free DOF ({self.mesh.n_free})")
            object.__setattr__(self, "load", load)
        need = rigid_body_dofs(self.mesh.dim)
        if len(self.mesh.constraints) < need:
            raise ValueError(
                f"under-constrained mesh: {len(self.mesh.constraints)} constraints, "
                f"at least {need} needed to remove rigid-body modes"
            )

    @property
    def theta_ref_field(self) -> np.ndarray:
        return np.full(self.mesh.n_nodes, float(self.material.theta_ref))

    @property
    def effective_eta(self):
        if self.eta is None:
            return "auto" if self.noise_sigma > 0 else 0.0
        return self.eta


@dataclass
class RecoveryReport:
    observable: np.ndarray
    eta: float
    relative_residual: float
    condition: float | None


@dataclass
class ScenarioResult:
    """All forward and inverse outputs of :func:`run_scenario`.

    Displacements are free-DOF vectors; stresses are per element (Voigt).
    ``u0_recovered`` and ``u0_first_order`` are indexed by ``observable``.
    ``identity_residual`` is the relative residual from
    :func:`verify_identity` evaluated on the noiseless forward fields.
    """

    u0: np.ndarray
    sigma0: np.ndarray
    u1: np.ndarray
    du: np.ndarray
    dP: np.ndarray
    sigma1: np.ndarray
    u_TE: np.ndarray | None
    u_rel: np.ndarray | None
    u_obs: np.ndarray | None
    du_measured: np.ndarray
    identity_residual: float
    observable: np.ndarray
    u0_recovered: np.ndarray
    u0_first_order: np.ndarray
    recovery_error: float
    first_order_error: float
    eta: float
    condition: float | None
    max_softening: float
    warnings: list[str] = field(default_factory=list)

    @property
    def dP_norm(self) -> float:
        return float(np.linalg.norm(self.dP))


# -- forward ---------------------------------------------------------------


def framing_load(scenario: Scenario, theta) -> np.ndarray:
    """Load vector of the scenario at ``theta`` (eigenstrain or dead load plus prescribed values)."""
    mesh, model = scenario.mesh, scenario.material
    if scenario.load is not None:
        P = scenario.load.copy()
    else:
        P = fem.eigenstrain_load(mesh, model, theta, scenario.eigenstrain)
    return P + fem.boundary_load(mesh, model, theta)


def _solve(scenario, K, rhs) -> SolveReport:
    return solve_spd(K, rhs, rtol=scenario.rtol, method=scenario.solver_method)


def _eigenstrain(scenario):
    if scenario.eigenstrain is not None:
        return scenario.eigenstrain
    return np.zeros((scenario.mesh.n_elements, fem.N_VOIGT[scenario.mesh.kind]))


def solve_initial(scenario: Scenario):
    """Initial state at the uniform reference temperature.

    Returns ``(u0, sigma0)``.
    """
    mesh, model = scenario.mesh, scenario.material
    theta0 = scenario.theta_ref_field
    K0 = fem.assemble_stiffness(mesh, model, theta0)
    P0 = framing_load(scenario, theta0)
    u0 = _solve(scenario, K0, P0).solution
    res = fem.equilibrium_residual(K0, u0, P0)
    if res > scenario.rtol * max(np.linalg.norm(P0), np.finfo(float).tiny):
        raise SingularSystemError(f"initial equilibrium residual {res:.3e} too large")
    sigma0 = fem.compute_stress(mesh, model, theta0, _eigenstrain(scenario), u0)
    return u0, sigma0


def solve_perturbed(scenario: Scenario, u0):
    """Softened state at ``theta_pert`` without thermal expansion.

    Returns ``(u1, du, dP)`` with ``du = u1 - u0`` and ``dP = P1 - P0``.
    """
    mesh, model = scenario.mesh, scenario.material
    P0 = framing_load(scenario, scenario.theta_ref_field)
    if scenario.load_framing == FIXED_LOAD:
        P1 = P0
    else:
        P1 = framing_load(scenario, scenario.theta_pert)
    K1 = fem.assemble_stiffness(mesh, model, scenario.theta_pert)
    u1 = _solve(scenario, K1, P1).solution
    return u1, u1 - u0, P1 - P0


def decompose_observable(scenario: Scenario, u0):
    """Split the observable increment into expansion and relaxation parts.

    Returns ``(u_obs, u_TE, u_rel)`` where ``u_obs`` is the displacement
    change under heating with expansion, ``u_TE`` the response to the
    thermal load alone and ``u_rel`` the stiffness-perturbation increment.
    """
    mesh, model = scenario.mesh, scenario.material
    theta1 = scenario.theta_pert
    _, u_rel, dP = solve_perturbed(scenario, u0)
    P1 = framing_load(scenario, scenario.theta_ref_field) + dP
    K1 = fem.assemble_stiffness(mesh, model, theta1)
    F_th = fem.thermal_load(mesh, model, theta1)
    u_TE = _solve(scenario, K1, F_th).solution
    u_total = _solve(scenario, K1, P1 + F_th).solution
    u_obs = u_total - u0
    gap = np.linalg.norm(u_obs - (u_TE + u_rel))
    if gap > 1e-10 * np.linalg.norm(u_obs) + 1e-300:
        raise ArithmeticError(f"superposition violated: ||u_obs - (u_TE + u_rel)|| = {gap:.3e}")
    return u_obs, u_TE, u_rel


def stiffness_pair(scenario: Scenario):
    """``(K0, K1)`` at the reference and perturbed temperature fields."""
    mesh, model = scenario.mesh, scenario.material
    return (
        fem.assemble_stiffness(mesh, model, scenario.theta_ref_field),
        fem.assemble_stiffness(mesh, model, scenario.theta_pert),
    )


def max_softening(scenario: Scenario) -> float:
    """Largest relative modulus drop ``1 - E(theta_e)/E0`` over elements."""
    theta_e = fem.element_temperatures(scenario.mesh, scenario.theta_pert)
    E = np.asarray(youngs_at(scenario.material, theta_e))
    return float(np.max(1.0 - E / scenario.material.E0)) if E.size else 0.0


# -- inverse ---------------------------------------------------------------


def _as_csr_pair(K0, K1):
    K0 = sp.csr_matrix(K0) if sp.issparse(K0) else sp.csr_matrix(np.atleast_2d(np.asarray(K0, dtype=float)))
    K1 = sp.csr_matrix(K1) if sp.issparse(K1) else sp.csr_matrix(np.atleast_2d(np.asarray(K1, dtype=float)))
    if K0.shape != K1.shape:
        raise ValueError(f"dimension mismatch: K0 {K0.shape}, K1 {K1.shape}")
    return K0, K1


def _solve_restricted(dK, b, noise_map, eta, mask_tol, noise_sigma):
    obs = observable_mask(dK, mask_tol)
    if obs.size == 0:
        raise EmptyObservableSetError("empty observable set: perturbation touches nothing")
    A = sp.csr_matrix(dK)[obs][:, obs]
    b_r = b[obs]
    if eta == "auto":
        eta = select_eta(A, b_r, noise_map[obs], noise_sigma)
    report = solve_tikhonov(A, b_r, float(eta))
    return report.solution, RecoveryReport(obs, float(eta), report.relative_residual, report.condition)


def recover_initial(K0, K1, du_measured, eta=0.0, mask_tol: float = 1e-12, noise_sigma: float = 0.0):
    """Recover ``u0`` from the increment ``du`` on the observable DOFs.

    Solves ``dK_rr u0_r = -(K1 du)_r`` where ``r`` is the set of rows on
    which ``dK = K1 - K0`` is non-zero. ``eta="auto"`` picks the Tikhonov
    weight with :func:`select_eta`, using ``noise_sigma`` as the standard
    deviation of the noise on ``du``. Returns ``(u0_r, report)``.
    """
    K0, K1 = _as_csr_pair(K0, K1)
    du = np.asarray(du_measured, dtype=float)
    if du.shape != (K0.shape[0],) or not np.all(np.isfinite(du)):
        raise ValueError("du_measured must be a finite vector matching K0")
    return _solve_restricted(K1 - K0, -(K1 @ du), K1, eta, mask_tol, noise_sigma)


def recover_first_order(K0, dK, du_measured, eta=0.0, mask_tol: float = 1e-12, noise_sigma: float = 0.0):
    """Small-perturbation recovery: ``dK_rr u0_r = -(K0 du)_r``.

    Drops the ``dK du`` term of the exact relation, so the error is of
    first order in the perturbation size.
    """
    K0, dK = _as_csr_pair(K0, dK)
    du = np.asarray(du_measured, dtype=float)
    if du.shape != (K0.shape[0],) or not np.all(np.isfinite(du)):
        raise ValueError("du_measured must be a finite vector matching K0")
    return _solve_restricted(dK, -(K0 @ du), K0, eta, mask_tol, noise_sigma)[0]


def select_eta(
    A,
    b,
    noise_map,
    noise_sigma: float,
    candidates=ETA_SWEEP,
    min_gain: float = MIN_GAIN,
    z: float = SIGNIFICANCE,
) -> float:
    """Pick a Tikhonov weight for ``A x = b`` from a logarithmic sweep.

    ``b = noise_map @ d`` where the measured vector ``d`` carries i.i.d.
    noise of standard deviation ``noise_sigma``. Each candidate weight
    (``candidates`` times ``||A||_1``) is scored by Stein's unbiased
    estimate of the squared solution error, computed in the eigenbasis of
    symmetric ``A``. A candidate replaces the unregularised solve only if
    it lowers the estimated risk by more than the fraction ``min_gain``,
    with ``z`` standard errors of the estimate to spare; otherwise 0 is
    returned. Of the qualifying candidates the lowest estimate wins.

    Systems larger than ``SURE_MAX_SIZE`` skip the sweep and return 0.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    scale = float(abs(A).sum(axis=0).max()) if n else 0.0
    if scale == 0:
        return 0.0
    if n > SURE_MAX_SIZE:
        log.warning("eta sweep skipped: %d unknowns exceeds %d", n, SURE_MAX_SIZE)
        return 0.0
    lam, V = np.linalg.eigh(A.toarray())
    beta = V.T @ np.asarray(b, dtype=float)
    W = sp.csr_matrix(noise_map).T @ V
    w = noise_sigma**2 * np.sum(W**2, axis=0)
    live = np.abs(lam) > 1e-12 * np.abs(lam).max()
    singular = not live.all()
    lam, beta, w = lam[live], beta[live], w[live]
    signal = np.maximum(beta**2 - w, 0.0)
    base = np.inf if singular else np.sum(w / lam**2)
    best_eta, best_score = 0.0, base
    for rel in candidates:
        eta = float(rel) * scale
        f = lam**2 / (lam**2 + eta**2)
        bias = ((f - 1.0) / lam) ** 2
        score = np.sum(bias * (beta**2 - w)) + np.sum(f**2 * w / lam**2)
        se = np.sqrt(np.sum(bias**2 * (4.0 * signal * w + 2.0 * w**2)))
        log.debug("eta %.3e: risk estimate %.6e +- %.2e", eta, score, se)
        if singular:
            if score < best_score:
                best_eta, best_score = eta, score
        elif score + z * se < (1.0 - min_gain) * base and score < best_score:
            best_eta, best_score = eta, score
    return best_eta


def verify_identity(K0, K1, u0, du, dP=None) -> float:
    """Relative residual ``||(K1 - K0) u0 + K1 du - dP|| / ||K1 du||``."""
    u0 = np.asarray(u0, dtype=float)
    du = np.asarray(du, dtype=float)
    dP = np.zeros_like(u0) if dP is None else np.asarray(dP, dtype=float)
    n = len(u0)
    if K0.shape != (n, n) or K1.shape != (n, n) or du.shape != (n,) or dP.shape != (n,):
        raise ValueError("dimension mismatch in verify_identity")
    K1du = K1 @ du
    r = (K1 - K0) @ u0 + K1du - dP
    return float(np.linalg.norm(r) / max(np.linalg.norm(K1du), np.finfo(float).tiny))


def add_measurement_noise(du, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of standard deviation ``sigma``."""
    if not sigma >= 0:
        raise ValueError("sigma must be >= 0")
    du = np.asarray(du, dtype=float)
    if sigma == 0:
        return du.copy()
    return du + np.random.default_rng(seed).normal(0.0, sigma, size=du.shape)


def relative_error(estimate, truth) -> float:
    """``||estimate - truth|| / ||truth||``, or the absolute error when ``truth`` is zero."""
    err = np.linalg.norm(np.asarray(estimate) - np.asarray(truth))
    ref = np.linalg.norm(truth)
    return float(err / ref) if ref > 0 else float(err)


# -- orchestration ---------------------------------------------------------


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Run forward solves, decomposition, optional noise and both recoveries."""
    notes = []

    def stage(name, fn, *args):
        try:
            return fn(*args)
        except (ValueError, ArithmeticError) as exc:
            raise ScenarioError(name, exc) from exc

    soft = stage("perturbed", max_softening, scenario)
    if soft > SOFTENING_WARN:
        msg = f"max softening {soft:.1%} exceeds {SOFTENING_WARN:.0%}; first-order recovery degrades"
        warnings.warn(msg, PerturbationWarning, stacklevel=2)
        notes.append(msg)

    u0, sigma0 = stage("initial", solve_initial, scenario)
    u1, du, dP = stage("perturbed", solve_perturbed, scenario, u0)
    sigma1 = stage(
        "perturbed", fem.compute_stress, scenario.mesh, scenario.material, scenario.theta_pert, _eigenstrain(scenario), u1,
        False,
    )
    u_obs = u_TE = u_rel = None
    du_clean = du
    if scenario.include_expansion:
        u_obs, u_TE, u_rel = stage("decompose", decompose_observable, scenario, u0)
        du_clean = u_obs - u_TE
    du_meas = stage("noise", add_measurement_noise, du_clean, scenario.noise_sigma, scenario.seed)

    K0, K1 = stage("recover", stiffness_pair, scenario)
    eta = scenario.effective_eta
    sigma = scenario.noise_sigma
    u0_rec, rep = stage("recover", recover_initial, K0, K1, du_meas, eta, scenario.mask_tol, sigma)
    u0_fo = stage("recover", recover_first_order, K0, K1 - K0, du_meas, rep.eta, scenario.mask_tol, sigma)
    resid = stage("identity", verify_identity, K0, K1, u0, du, dP)

    if scenario.load_framing == EIGENSTRAIN and np.linalg.norm(dP) > 0:
        notes.append(f"eigenstrain framing: load change ||dP|| = {np.linalg.norm(dP):.3e} is not modelled by recovery")

    obs = rep.observable
    return ScenarioResult(
        u0=u0,
        sigma0=sigma0,
        u1=u1,
        du=du,
        dP=dP,
        sigma1=sigma1,
        u_TE=u_TE,
        u_rel=u_rel,
        u_obs=u_obs,
        du_measured=du_meas,
        identity_residual=resid,
        observable=obs,
        u0_recovered=u0_rec,
        u0_first_order=u0_fo,
        recovery_error=relative_error(u0_rec, u0[obs]),
        first_order_error=relative_error(u0_fo, u0[obs]),
        eta=rep.eta,
        condition=rep.condition,
        max_softening=soft,
        warnings=notes,
    )
