"""Mesh parsing, validation, generators and DOF bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stiffprobe.mesh import (
    Constraint,
    MeshError,
    MeshParseError,
    dof_count,
    edge_nodes,
    generate_bar_chain,
    generate_rect_grid,
    load_mesh,
    rigid_body_dofs,
    rigid_body_pins,
    write_mesh,
)

ONE_TRIANGLE = """\
# minimal valid 2D mesh
node 0 0.0 0.0
node 1 1.0 0.0
node 2 0.0 1.0
elem 0 tri3 0 1 2 0.5
fix 0 0 0.0
fix 0 1 0.0
fix 1 1 0.0
"""

TWO_SPRINGS = """\
node 0 0
node 1 1
node 2 2
elem 0 bar1d 0 1 2.0
elem 1 bar1d 1 2 1.0
fix 0 0 0
fix 2 0 0
"""


def test_single_triangle_counts():
    mesh = load_mesh(ONE_TRIANGLE)
    assert dof_count(mesh) == (6, 3)
    assert mesh.dim == 2 and mesh.n_elements == 1


def test_clockwise_triangle_rejected():
    text = ONE_TRIANGLE.replace("elem 0 tri3 0 1 2", "elem 0 tri3 0 2 1")
    with pytest.raises(MeshError, match="negative area"):
        load_mesh(text)


def test_zero_area_rejected():
    text = ONE_TRIANGLE.replace("node 2 0.0 1.0", "node 2 2.0 0.0")
    with pytest.raises(MeshError, match="zero area"):
        load_mesh(text)


def test_two_spring_chain_has_one_free_dof():
    mesh = load_mesh(TWO_SPRINGS)
    assert dof_count(mesh) == (3, 1)
    np.testing.assert_array_equal(mesh.dof_map.ravel(), [-1, 0, -1])


def test_unconstrained_and_fully_pinned_counts():
    mesh = generate_rect_grid(1, 1, 1.0, 1.0)
    assert dof_count(mesh) == (8, 8)
    pinned = mesh.with_constraints([Constraint(n, a) for n in range(4) for a in (0, 1)])
    assert dof_count(pinned) == (8, 0)
    assert pinned.n_free == 0


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("node 0 0 0\nnode 1 x 0\n", 2),
        ("node 0 0\nbogus 1\n", 2),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 0 1\n", 3),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 0 1 1\nfix 0 1 0\n", 4),
        ("node 0 0 0\nnode 1 1\n", 2),
        ("node 0 0\nnode 0 1\n", 2),
        ("node 0 0\nfix 0 2 0\n", 2),
        ("node 0 nan\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(MeshParseError) as info:
        load_mesh(text)
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"line {lineno}:")


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("node 0 0\nnode 2 1\n", "dense"),
        (TWO_SPRINGS + "fix 0 0 0\n", "duplicate constraint"),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 0 0 1\n", "repeated node"),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 0 3 1\n", "out of range"),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 0 1 -1\n", "section"),
        ("node 0 0\nnode 1 1\nelem 0 bar1d 1 0 1\n", "negative bar length"),
        ("node 0 0\nnode 1 1\nelem 0 tri3 0 1 0 1\n", "kind"),
        ("node 0 0\nfix 4 0 0\n", "unknown node"),
        ("", "no nodes"),
    ],
)
def test_validation_names_the_invariant(text, fragment):
    with pytest.raises(MeshError, match=fragment):
        load_mesh(text)


def test_round_trip_exact():
    mesh = generate_rect_grid(3, 2, 0.7, 1.3, 0.01)
    mesh = mesh.with_constraints(rigid_body_pins(mesh) + [Constraint(5, 0, 1e-4)])
    again = load_mesh(write_mesh(mesh))
    assert again == mesh
    assert write_mesh(again) == write_mesh(mesh)
    assert load_mesh(write_mesh(load_mesh(TWO_SPRINGS))) == load_mesh(TWO_SPRINGS)


def test_grid_counts_and_errors():
    m = generate_rect_grid(1, 1, 1, 1, 1)
    assert (m.n_nodes, m.n_elements) == (4, 2)
    m = generate_rect_grid(2, 3, 1.0, 2.0, 0.1)
    assert (m.n_nodes, m.n_elements) == (12, 12)
    for bad in [(0, 1, 1, 1, 1), (1, 1, 0, 1, 1), (1, 1, 1, -1, 1), (1, 1, 1, 1, 0)]:
        with pytest.raises(MeshError):
            generate_rect_grid(*bad)


def test_grid_diagonal_runs_lower_left_to_upper_right():
    m = generate_rect_grid(1, 1, 1.0, 1.0)
    assert m.elements[0].node_ids == (0, 1, 3)
    assert m.elements[1].node_ids == (0, 3, 2)


@settings(max_examples=40, deadline=None)
@given(
    nx=st.integers(1, 12),
    ny=st.integers(1, 12),
    lx=st.floats(1e-3, 1e3),
    ly=st.floats(1e-3, 1e3),
)
def test_grid_area_sums_to_rectangle(nx, ny, lx, ly):
    m = generate_rect_grid(nx, ny, lx, ly)
    assert np.sum(m.element_measures()) == pytest.approx(lx * ly, rel=1e-12)
    assert np.all(m.element_measures() > 0)


@settings(max_examples=40, deadline=None)
@given(
    nx=st.integers(1, 6),
    ny=st.integers(1, 6),
    picks=st.sets(st.tuples(st.integers(0, 48), st.integers(0, 1)), max_size=20),
)
def test_dof_map_is_bijection(nx, ny, picks):
    m = generate_rect_grid(nx, ny, 1.0, 1.0)
    cons = [Constraint(n, a) for n, a in sorted(picks) if n < m.n_nodes]
    m = m.with_constraints(cons)
    free = m.dof_map[m.dof_map >= 0]
    np.testing.assert_array_equal(np.sort(free), np.arange(m.n_free))
    for c in cons:
        assert m.dof_map[c.node * m.dim + c.axis] == -1


def test_rigid_body_helpers():
    assert rigid_body_dofs(1) == 1 and rigid_body_dofs(2) == 3
    m = generate_rect_grid(3, 2, 1.0, 1.0)
    assert rigid_body_pins(m) == [Constraint(0, 0), Constraint(0, 1), Constraint(3, 1)]
    chain = generate_bar_chain([0.0, 0.5, 2.0], [1.0, 1.0])
    assert rigid_body_pins(chain) == [Constraint(0, 0)]


def test_edge_nodes():
    m = generate_rect_grid(2, 2, 1.0, 1.0)
    np.testing.assert_array_equal(edge_nodes(m, "left"), [0, 3, 6])
    np.testing.assert_array_equal(edge_nodes(m, "top"), [6, 7, 8])


def test_expand_fills_prescribed_values():
    m = generate_bar_chain([0.0, 1.0, 2.0], [1.0, 1.0]).with_constraints([Constraint(0, 0), Constraint(2, 0, 0.1)])
    np.testing.assert_array_equal(m.expand(np.array([0.05])).ravel(), [0.0, 0.05, 0.1])
