"""Forward experiment, decomposition and recovery of the initial field.

Two-spring oracles (kA = 2, kB = 1, pre-stretch 0.3 on bar A, ends pinned):

    u0 = kA * 0.3 / (kA + kB)      = 0.2
    u1 = kA * 0.3 / (kA + kB')
    exact recovery  -K1 du / dK    = u0
    first order     -K0 du / dK
"""

import numpy as np
import pytest

from stiffprobe import fem
from stiffprobe.material import youngs_at
from stiffprobe.pipeline import (
    EIGENSTRAIN,
    FIXED_LOAD,
    EmptyObservableSetError,
    PerturbationWarning,
    Scenario,
    ScenarioError,
    add_measurement_noise,
    decompose_observable,
    recover_first_order,
    recover_initial,
    relative_error,
    run_scenario,
    select_eta,
    solve_initial,
    solve_perturbed,
    stiffness_pair,
    verify_identity,
)
from stiffprobe.scenarios import standard_material, standard_plate_scenario, two_spring_mesh, two_spring_scenario


# -- two-spring oracles -----------------------------------------------------------


def test_spring_initial_state():
    u0, sigma0 = solve_initial(two_spring_scenario())
    assert u0[0] == pytest.approx(0.2, abs=1e-15)
    forces = sigma0[:, 0] * np.array([2.0, 1.0])
    np.testing.assert_allclose(forces, [-0.2, -0.2], rtol=1e-14)


@pytest.mark.parametrize("framing", [FIXED_LOAD, EIGENSTRAIN])
def test_spring_perturbed_both_framings(framing):
    sc = two_spring_scenario(load_framing=framing)
    u0, _ = solve_initial(sc)
    u1, du, dP = solve_perturbed(sc, u0)
    assert u1[0] == pytest.approx(0.24, abs=1e-15)
    assert du[0] == pytest.approx(0.04, abs=1e-15)
    assert not np.any(dP)


def test_spring_recovery_scalar_oracles():
    K0, K1 = np.array([[3.0]]), np.array([[2.5]])
    u0r, rep = recover_initial(K0, K1, np.array([0.04]))
    assert u0r[0] == pytest.approx(0.2, abs=1e-15)
    np.testing.assert_array_equal(rep.observable, [0])
    fo = recover_first_order(K0, K1 - K0, np.array([0.04]))
    assert fo[0] == pytest.approx(0.24, abs=1e-15)
    assert not np.any(recover_initial(K0, K1, np.zeros(1))[0])
    assert not np.any(recover_first_order(K0, K1 - K0, np.zeros(1)))


def test_spring_halved_cut():
    # kB' = 0.75: u1 = 0.6 / 2.75, first order = K0 u0 / K1 = u1
    sc = two_spring_scenario(kB_after=0.75)
    res = run_scenario(sc)
    assert res.u0_recovered[0] == pytest.approx(0.2, abs=1e-14)
    assert res.u0_first_order[0] == pytest.approx(0.6 / 2.75, rel=1e-13)
    full_err = run_scenario(two_spring_scenario()).first_order_error
    assert full_err == pytest.approx(0.2, rel=1e-12)
    assert res.first_order_error == pytest.approx(0.6 / 2.75 / 0.2 - 1.0, rel=1e-12)
    assert 1.6 <= full_err / res.first_order_error <= 2.4


def test_spring_identity():
    K0, K1 = np.array([[3.0]]), np.array([[2.5]])
    assert verify_identity(K0, K1, np.array([0.2]), np.array([0.04])) <= 1e-15
    assert verify_identity(K0, K1, np.zeros(1), np.zeros(1), np.zeros(1)) == 0.0
    bad = verify_identity(K0, K1, np.array([0.2]), np.array([0.044]))
    assert bad == pytest.approx(0.1 / 1.1, rel=1e-12)
    with pytest.raises(ValueError):
        verify_identity(K0, K1, np.zeros(2), np.zeros(1))


def test_spring_expansion_oracle():
    # bar B at kB' = 0.9 heated by 100 K: thermal push -kB' alpha dT on node 1
    sc = two_spring_scenario(kB_after=0.9, alpha=1e-5, include_expansion=True)
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    assert u_TE[0] == pytest.approx(-0.9 * 1e-5 * 100.0 / 2.9, rel=1e-12)
    assert u_rel[0] == pytest.approx(0.6 / 2.9 - 0.2, rel=1e-12)
    assert np.linalg.norm(u_obs - u_TE - u_rel) <= 1e-10 * np.linalg.norm(u_obs)
    res = run_scenario(sc)
    assert res.u0_recovered[0] == pytest.approx(0.2, abs=1e-13)


def test_spring_run_scenario():
    res = run_scenario(two_spring_scenario())
    assert res.u0_recovered[0] == pytest.approx(0.2, abs=1e-12)
    assert res.identity_residual <= 1e-12
    np.testing.assert_allclose(res.u0 + res.du, res.u1, rtol=1e-15)
    assert res.max_softening == pytest.approx(0.5)
    assert res.warnings and "softening" in res.warnings[0]


def test_guardrail_warns():
    with pytest.warns(PerturbationWarning):
        run_scenario(two_spring_scenario())


# -- degenerate inputs ------------------------------------------------------------


def test_zero_eigenstrain_gives_zero_outputs():
    sc = standard_plate_scenario(n=4)
    sc = Scenario(sc.mesh, sc.material, sc.theta_pert, eigenstrain=np.zeros_like(sc.eigenstrain))
    res = run_scenario(sc)
    for arr in (res.u0, res.sigma0, res.du, res.u0_recovered, res.u0_first_order):
        assert not np.any(arr)


def test_unperturbed_gives_empty_observable_set():
    sc = two_spring_scenario(kB_after=1.0)
    u0, _ = solve_initial(sc)
    u1, du, _ = solve_perturbed(sc, u0)
    np.testing.assert_array_equal(u1, u0)
    assert not np.any(du)
    with pytest.raises(ScenarioError) as info:
        run_scenario(sc)
    assert info.value.stage == "recover"
    assert isinstance(info.value.cause, EmptyObservableSetError)
    assert "perturbation touches nothing" in str(info.value)
    with pytest.raises(EmptyObservableSetError):
        recover_initial(np.eye(2), np.eye(2), np.zeros(2))


def test_stage_tagged_material_error():
    sc = two_spring_scenario(kB_after=-0.5)
    with pytest.raises(ScenarioError) as info:
        run_scenario(sc)
    assert info.value.stage == "perturbed"


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(load=np.zeros(1)), "exactly one"),
        (dict(eigenstrain=None), "exactly one"),
        (dict(noise_sigma=-1.0), "noise_sigma"),
        (dict(eta="gcv"), "eta"),
        (dict(eta=-1.0), "eta"),
        (dict(load_framing="both"), "load_framing"),
        (dict(theta_pert=np.zeros(2)), "theta_pert"),
    ],
)
def test_scenario_validation(kwargs, fragment):
    base = dict(mesh=two_spring_mesh(), material=two_spring_scenario().material, theta_pert=np.full(3, 300.0), eigenstrain=[0.3, 0.0])
    base.update(kwargs)
    with pytest.raises(ValueError, match=fragment):
        Scenario(**base)


def test_underconstrained_scenario_rejected():
    sc = standard_plate_scenario(n=3)
    mesh = sc.mesh.__class__(sc.mesh.coords, sc.mesh.elements, sc.mesh.constraints[:2])
    with pytest.raises(ValueError, match="under-constrained"):
        Scenario(mesh, sc.material, sc.theta_pert, eigenstrain=sc.eigenstrain)


def test_explicit_dead_load():
    sc = two_spring_scenario()
    dead = Scenario(sc.mesh, sc.material, sc.theta_pert, load=np.array([0.6]))
    res = run_scenario(dead)
    assert res.u0[0] == pytest.approx(0.2, abs=1e-15)
    assert res.u0_recovered[0] == pytest.approx(0.2, abs=1e-13)


# -- plate properties --------------------------------------------------------------


def test_plate_round_trip_and_identity():
    res = run_scenario(standard_plate_scenario(n=10, peak_softening=0.1))
    assert res.recovery_error <= 1e-8
    assert res.identity_residual <= 1e-10
    assert res.observable.size > 0 and res.condition > 1


def test_eigenstrain_framing_identity_with_dP():
    sc = standard_plate_scenario(load_framing=EIGENSTRAIN, center=(0.35, 0.4))
    u0, _ = solve_initial(sc)
    _, du, dP = solve_perturbed(sc, u0)
    K0, K1 = stiffness_pair(sc)
    assert np.linalg.norm(dP) > 0
    assert verify_identity(K0, K1, u0, du, dP) <= 1e-10
    assert verify_identity(K0, K1, u0, du) > 1e-3
    res = run_scenario(sc)
    assert res.dP_norm > 0 and any("dP" in w for w in res.warnings)


def test_eigenstrain_framing_disjoint_heating_has_zero_dP():
    # broad heating that anchors on the pins, switched off on the inclusion
    sc = standard_plate_scenario(load_framing=EIGENSTRAIN, center=(0.8, 0.15), radius=0.6)
    eps_support = np.flatnonzero(np.any(sc.eigenstrain != 0, axis=1))
    theta = sc.theta_pert.copy()
    for e in eps_support:
        theta[list(sc.mesh.elements[e].node_ids)] = sc.material.theta_ref
    sc = Scenario(sc.mesh, sc.material, theta, eigenstrain=sc.eigenstrain, load_framing=EIGENSTRAIN)
    assert np.all(fem.element_temperatures(sc.mesh, theta)[eps_support] == sc.material.theta_ref)
    u0, _ = solve_initial(sc)
    _, du, dP = solve_perturbed(sc, u0)
    assert not np.any(dP)
    res = run_scenario(sc)
    assert res.recovery_error <= 1e-8
    assert res.identity_residual <= 1e-10


def test_floating_hot_patch_is_singular_without_eta():
    # a hot spot clear of the pins leaves the patch's rigid-body modes in dK_rr
    sc = standard_plate_scenario(center=(0.95, 0.95), radius=0.05)
    with pytest.raises(ScenarioError, match="eta > 0"):
        run_scenario(sc)
    res = run_scenario(standard_plate_scenario(center=(0.95, 0.95), radius=0.05, eta=1e-6))
    assert res.eta == 1e-6 and np.all(np.isfinite(res.u0_recovered))


@pytest.mark.parametrize("s", [0.5, 0.9, 0.75])
def test_uniform_softening_laws(s):
    model = standard_material()
    base = standard_plate_scenario(n=6)
    theta = np.full(base.mesh.n_nodes, model.theta_ref + (1.0 - s) / model.softening)
    s_eff = youngs_at(model, theta[0]) / model.E0
    fixed = Scenario(base.mesh, model, theta, eigenstrain=base.eigenstrain, load_framing=FIXED_LOAD)
    u0, _ = solve_initial(fixed)
    _, du, _ = solve_perturbed(fixed, u0)
    assert relative_error(du, (1.0 / s_eff - 1.0) * u0) <= 1e-12
    eig = Scenario(base.mesh, model, theta, eigenstrain=base.eigenstrain, load_framing=EIGENSTRAIN)
    u0, sigma0 = solve_initial(eig)
    u1, du, _ = solve_perturbed(eig, u0)
    sigma1 = fem.compute_stress(eig.mesh, model, theta, eig.eigenstrain, u1, thermal=False)
    assert np.linalg.norm(du) <= 1e-12 * np.linalg.norm(u0)
    assert relative_error(sigma1, s_eff * sigma0) <= 1e-12


def test_superposition_with_expansion():
    sc = standard_plate_scenario(include_expansion=True)
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    assert np.linalg.norm(u_obs - (u_TE + u_rel)) <= 1e-10 * np.linalg.norm(u_obs)
    res = run_scenario(sc)
    assert res.recovery_error <= 1e-8


def test_expansion_degenerate_cases():
    sc = standard_plate_scenario(n=5, include_expansion=True, material=standard_material(alpha=0.0))
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    assert not np.any(u_TE)
    np.testing.assert_allclose(u_obs, u_rel, rtol=0, atol=1e-12 * np.abs(u_rel).max())
    sc = standard_plate_scenario(n=5, include_expansion=True)
    sc = Scenario(sc.mesh, sc.material, sc.theta_pert, eigenstrain=np.zeros_like(sc.eigenstrain), include_expansion=True)
    u0, _ = solve_initial(sc)
    u_obs, u_TE, u_rel = decompose_observable(sc, u0)
    assert not np.any(u_rel)
    np.testing.assert_array_equal(u_obs, u_TE)


# -- noise and regularisation ------------------------------------------------------


def test_noise_contract():
    du = np.linspace(-1.0, 1.0, 1000)
    np.testing.assert_array_equal(add_measurement_noise(du, 0.0, 3), du)
    a = add_measurement_noise(du, 1e-6, 7)
    np.testing.assert_array_equal(a, add_measurement_noise(du, 1e-6, 7))
    assert not np.array_equal(a, add_measurement_noise(du, 1e-6, 8))
    assert 0.9e-6 <= np.std(a - du) <= 1.1e-6
    with pytest.raises(ValueError):
        add_measurement_noise(du, -1.0, 0)


def _noisy_errors(rel_sigma, eta, seeds):
    base = standard_plate_scenario()
    u0, _ = solve_initial(base)
    _, du, _ = solve_perturbed(base, u0)
    K0, K1 = stiffness_pair(base)
    sigma = rel_sigma * np.abs(du).max()
    errs, etas = [], []
    for seed in seeds:
        d = add_measurement_noise(du, sigma, seed)
        x, rep = recover_initial(K0, K1, d, eta=eta, noise_sigma=sigma)
        errs.append(relative_error(x, u0[rep.observable]))
        etas.append(rep.eta)
    return np.array(errs), np.array(etas)


def test_noise_monotonicity():
    base = standard_plate_scenario()
    means = []
    for sigma in (0.0, 1e-8, 1e-6):
        errs = []
        for seed in range(5):
            sc = Scenario(base.mesh, base.material, base.theta_pert, eigenstrain=base.eigenstrain, noise_sigma=sigma, seed=seed, eta=0.0)
            errs.append(run_scenario(sc).recovery_error)
        means.append(np.mean(errs))
    assert means[0] <= means[1] <= means[2]


def test_auto_eta_keeps_zero_at_low_noise():
    e0, _ = _noisy_errors(1e-6, 0.0, range(10))
    ea, etas = _noisy_errors(1e-6, "auto", range(10))
    assert np.mean(ea) <= np.mean(e0)
    assert np.all(etas == 0.0)


def test_auto_eta_helps_at_high_noise():
    e0, _ = _noisy_errors(0.2, 0.0, range(20))
    ea, etas = _noisy_errors(0.2, "auto", range(20))
    assert np.mean(ea) < np.mean(e0)
    assert np.any(etas > 0)


def test_select_eta_on_diagonal_system():
    # weak modes drowned in noise: regularisation must pay off
    lam = np.array([1.0, 1e-3, 1e-4])
    A = np.diag(lam)
    x = np.array([1.0, 1.0, 1.0])
    rng = np.random.default_rng(0)
    b = A @ x + rng.normal(0, 1e-2, 3)
    eta = select_eta(A, b, np.eye(3), 1e-2, candidates=np.logspace(-6, 0, 13))
    assert eta > 0
    assert select_eta(A, A @ x, np.eye(3), 0.0) == 0.0
    assert select_eta(np.zeros((2, 2)), np.zeros(2), np.eye(2), 1.0) == 0.0


def test_noisy_run_is_deterministic():
    sc = standard_plate_scenario(noise_sigma=1e-9, seed=7, eta="auto")
    a, b = run_scenario(sc), run_scenario(sc)
    np.testing.assert_array_equal(a.u0_recovered, b.u0_recovered)
    assert a.eta == b.eta
