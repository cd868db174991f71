"""Self-check suite run by ``stiffprobe verify``.

``quick`` covers the two-spring oracle, the patch tests and small solver
checks in well under five seconds. ``full`` adds grid-scale pipeline
properties: the discrete identity on random grids, exact round trip,
first-order scaling, uniform softening and superposition.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fem
from .linsolve import solve_spd, solve_tikhonov
from .material import MaterialModel
from .mesh import Constraint, generate_rect_grid, rigid_body_pins
from .pipeline import (
    EIGENSTRAIN,
    FIXED_LOAD,
    Scenario,
    decompose_observable,
    recover_first_order,
    recover_initial,
    relative_error,
    run_scenario,
    solve_initial,
    solve_perturbed,
    stiffness_pair,
    verify_identity,
)
from .scenarios import gaussian_hotspot, standard_material, standard_plate_scenario, two_spring_scenario

QUICK = "quick"
FULL = "full"


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _close(a, b, tol):
    return abs(a - b) <= tol * max(abs(b), 1.0)


# -- quick ---------------------------------------------------------------------


def check_spring_oracle():
    # a 50% cut on bar B trips the softening guardrail by design
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_scenario(two_spring_scenario())
    vals = dict(u0=res.u0[0], u1=res.u1[0], du=res.du[0], exact=res.u0_recovered[0], first=res.u0_first_order[0])
    want = dict(u0=0.2, u1=0.24, du=0.04, exact=0.2, first=0.24)
    ok = all(_close(vals[k], want[k], 1e-12) for k in want) and res.identity_residual <= 1e-12
    return ok, ", ".join(f"{k}={v:.15g}" for k, v in vals.items())


def _patch_mesh():
    mesh = generate_rect_grid(3, 2, 1.5, 1.0, 0.1)
    # perturb interior nodes so the patch is irregular
    coords = mesh.coords.copy()
    coords[5] += [0.07, -0.05]
    coords[6] += [-0.04, 0.06]
    return mesh.__class__(coords, mesh.elements, ())


def check_patch_free_eigenstrain():
    base = _patch_mesh()
    mesh = base.with_constraints(rigid_body_pins(base))
    model = MaterialModel(E0=70e9, nu=0.33)
    eps = np.tile([1e-3, -4e-4, 6e-4], (mesh.n_elements, 1))
    u = solve_spd(fem.assemble_stiffness(mesh, model, model.theta_ref), fem.eigenstrain_load(mesh, model, model.theta_ref, eps)).solution
    smax = np.abs(fem.compute_stress(mesh, model, model.theta_ref, eps, u)).max()
    return smax <= 1e-10 * model.E0, f"max |sigma| / E0 = {smax / model.E0:.2e}"


def check_patch_clamped_eigenstrain():
    base = _patch_mesh()
    mesh = base.with_constraints([Constraint(n, a, 0.0) for n in range(base.n_nodes) for a in (0, 1)])
    model = MaterialModel(E0=70e9, nu=0.33)
    eps = np.tile([1e-3, -4e-4, 6e-4], (mesh.n_elements, 1))
    sigma = fem.compute_stress(mesh, model, model.theta_ref, eps, np.zeros(0))
    C = fem.constitutive_matrix(model, model.theta_ref, mesh.kind)
    want = -(C @ eps[0])
    err = np.abs(sigma - want).max() / np.abs(want).max()
    return err <= 1e-12, f"relative deviation from -C eps* = {err:.2e}"


def check_patch_thermal():
    base = _patch_mesh()
    mesh = base.with_constraints(rigid_body_pins(base))
    model = MaterialModel(E0=70e9, nu=0.33, alpha=2.3e-5, theta_ref=293.15)
    dT = 80.0
    theta = np.full(mesh.n_nodes, model.theta_ref + dT)
    K = fem.assemble_stiffness(mesh, model, theta)
    u = solve_spd(K, fem.thermal_load(mesh, model, theta)).solution
    smax = np.abs(fem.compute_stress(mesh, model, theta, None, u)).max()
    strain = fem.element_strains(mesh, u)
    want = np.array([model.alpha * dT, model.alpha * dT, 0.0])
    serr = np.abs(strain - want).max() / (model.alpha * dT)
    ok = smax <= 1e-10 * model.E0 and serr <= 1e-10
    return ok, f"max |sigma| / E0 = {smax / model.E0:.2e}, strain deviation {serr:.2e}"


def check_tikhonov_closed_form():
    x = solve_tikhonov(np.array([[1.0]]), np.array([1.0]), eta=1.0).solution[0]
    return _close(x, 0.5, 1e-12), f"x = {x:.15g} (want 0.5)"


def check_spring_superposition():
    sc = two_spring_scenario(alpha=1e-5, include_expansion=True)
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    gap = np.linalg.norm(u_obs - u_TE - u_rel) / np.linalg.norm(u_obs)
    return gap <= 1e-10, f"relative gap {gap:.2e}"


# -- full ----------------------------------------------------------------------


def _random_scenario(rng):
    nx, ny = rng.integers(2, 21, size=2)
    mesh = generate_rect_grid(int(nx), int(ny), float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0)), 0.01)
    mesh = mesh.with_constraints(rigid_body_pins(mesh))
    model = standard_material()
    eps = rng.normal(0.0, 1e-3, size=(mesh.n_elements, 3))
    box = mesh.coords.max(axis=0)
    center = rng.uniform(0, 1, size=2) * box
    peak = rng.uniform(0.01, 0.25) / model.softening
    theta = gaussian_hotspot(mesh, model.theta_ref, center, float(rng.uniform(0.1, 0.6) * box.max()), peak)
    return Scenario(mesh, model, theta, eigenstrain=eps)


def check_random_identity():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(20):
        sc = _random_scenario(rng)
        u0, _ = solve_initial(sc)
        _, du, dP = solve_perturbed(sc, u0)
        K0, K1 = stiffness_pair(sc)
        worst = max(worst, verify_identity(K0, K1, u0, du, dP))
    return worst <= 1e-10, f"worst relative residual over 20 grids {worst:.2e}"


def check_round_trip():
    res = run_scenario(standard_plate_scenario(n=10, peak_softening=0.1))
    return res.recovery_error <= 1e-8, f"relative error {res.recovery_error:.2e} on {res.observable.size} DOFs"


def check_first_order_scaling():
    e1 = run_scenario(standard_plate_scenario(peak_softening=0.1)).first_order_error
    e2 = run_scenario(standard_plate_scenario(peak_softening=0.05)).first_order_error
    ratio = e1 / e2
    return 1.6 <= ratio <= 2.4, f"error ratio {ratio:.3f} ({e1:.3e} / {e2:.3e})"


def check_uniform_softening():
    s = 0.5
    model = standard_material()
    theta = model.theta_ref + (1.0 - s) / model.softening
    out = []
    ok = True
    for framing in (FIXED_LOAD, EIGENSTRAIN):
        base = standard_plate_scenario(load_framing=framing)
        sc = Scenario(base.mesh, model, np.full(base.mesh.n_nodes, theta), eigenstrain=base.eigenstrain, load_framing=framing)
        u0, sigma0 = solve_initial(sc)
        u1, du, _ = solve_perturbed(sc, u0)
        if framing == FIXED_LOAD:
            err = relative_error(du, (1.0 / s - 1.0) * u0)
        else:
            sigma1 = fem.compute_stress(sc.mesh, model, sc.theta_pert, sc.eigenstrain, u1, thermal=False)
            err = max(np.linalg.norm(du) / np.linalg.norm(u0), relative_error(sigma1, s * sigma0))
        ok &= err <= 1e-12
        out.append(f"{framing} {err:.1e}")
    return ok, ", ".join(out)


def check_plate_superposition():
    sc = standard_plate_scenario(include_expansion=True)
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    gap = np.linalg.norm(u_obs - u_TE - u_rel) / np.linalg.norm(u_obs)
    return gap <= 1e-10, f"relative gap {gap:.2e}"


def check_first_order_spring():
    sc = two_spring_scenario(kB_after=0.75)
    u0, _ = solve_initial(sc)
    _, du, _ = solve_perturbed(sc, u0)
    K0, K1 = stiffness_pair(sc)
    exact = recover_initial(K0, K1, du)[0][0]
    first = recover_first_order(K0, K1 - K0, du)[0]
    return _close(exact, 0.2, 1e-12) and first > exact, f"exact {exact:.15g}, first order {first:.15g}"


QUICK_CHECKS: dict[str, Callable] = {
    "two-spring oracle": check_spring_oracle,
    "patch: free body eigenstrain": check_patch_free_eigenstrain,
    "patch: clamped eigenstrain": check_patch_clamped_eigenstrain,
    "patch: free body heating": check_patch_thermal,
    "tikhonov closed form": check_tikhonov_closed_form,
    "superposition (spring)": check_spring_superposition,
}

FULL_CHECKS: dict[str, Callable] = {
    "identity on 20 random grids": check_random_identity,
    "exact recovery round trip": check_round_trip,
    "first-order scaling": check_first_order_scaling,
    "first-order spring, halved cut": check_first_order_spring,
    "uniform softening dichotomy": check_uniform_softening,
    "superposition (plate)": check_plate_superposition,
}


def run_checks(level: str = QUICK) -> list[CheckResult]:
    if level not in (QUICK, FULL):
        raise ValueError(f"level must be '{QUICK}' or '{FULL}'")
    checks = dict(QUICK_CHECKS)
    if level == FULL:
        checks.update(FULL_CHECKS)
    results = []
    for name, fn in checks.items():
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results


def format_table(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.2f}s  {r.detail}")
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} passed")
    return "\n".join(lines)
