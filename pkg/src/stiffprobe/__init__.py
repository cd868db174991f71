"""Stiffness-perturbation toolkit for linear elasticity.

Synthesise a residually stressed body, soften it with a non-uniform
temperature field and recover the initial displacement from the
displacement increment.
"""

from .fem import (
    assemble_stiffness,
    compute_stress,
    eigenstrain_load,
    element_stiffness,
    equilibrium_residual,
    internal_forces,
    thermal_load,
)
from .linsolve import SingularSystemError, SolveReport, observable_mask, solve_spd, solve_tikhonov
from .material import (
    PLANE_STRAIN,
    PLANE_STRESS,
    MaterialModel,
    MaterialRangeError,
    constitutive_matrix,
    lame_at,
    thermal_stress_coeff,
    youngs_at,
)
from .mesh import (
    BAR1D,
    TRI3,
    Constraint,
    Element,
    Mesh,
    MeshError,
    MeshParseError,
    dof_count,
    generate_bar_chain,
    generate_rect_grid,
    load_mesh,
    rigid_body_pins,
    write_mesh,
)
from .pipeline import (
    EIGENSTRAIN,
    FIXED_LOAD,
    EmptyObservableSetError,
    PerturbationWarning,
    Scenario,
    ScenarioError,
    ScenarioResult,
    add_measurement_noise,
    decompose_observable,
    recover_first_order,
    recover_initial,
    run_scenario,
    select_eta,
    solve_initial,
    solve_perturbed,
    verify_identity,
)

__version__ = "0.1.0"
