"""Geometry, connectivity, constraints and DOF numbering.

Two element kinds are supported: ``bar1d`` (two-node bars on a line) and
``tri3`` (three-node constant-strain triangles in the plane). A mesh is
homogeneous in dimension: 1D meshes carry only bars, 2D meshes only
triangles.

Free DOFs are numbered node-major, axis-minor, skipping constrained
(node, axis) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

BAR1D = "bar1d"
TRI3 = "tri3"
ELEMENT_NODES = {BAR1D: 2, TRI3: 3}


class MeshError(ValueError):
    """A mesh violates one of its structural invariants."""


class MeshParseError(MeshError):
    """Malformed mesh text; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Element:
    id: int
    kind: str
    node_ids: tuple[int, ...]
    section: float


@dataclass(frozen=True)
class Constraint:
    node: int
    axis: int
    value: float = 0.0


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable finite element mesh.

    Parameters
    ----------
    coords : ndarray, shape (n_nodes, dim)
        Nodal coordinates; node ``i`` is row ``i``.
    elements : sequence of Element
        Element ``e`` must have ``id == e``.
    constraints : sequence of Constraint
        Prescribed nodal displacements.
    """

    coords: np.ndarray
    elements: tuple[Element, ...]
    constraints: tuple[Constraint, ...] = ()
    dof_map: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        self._validate()
        dof_map = np.full(self.n_nodes * self.dim, -1, dtype=np.int64)
        fixed = np.zeros(self.n_nodes * self.dim, dtype=bool)
        for c in self.constraints:
            fixed[c.node * self.dim + c.axis] = True
        dof_map[~fixed] = np.arange(np.count_nonzero(~fixed))
        dof_map.setflags(write=False)
        object.__setattr__(self, "dof_map", dof_map)

    # -- basic properties -------------------------------------------------

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def kind(self) -> str:
        return BAR1D if self.dim == 1 else TRI3

    @cached_property
    def connectivity(self) -> np.ndarray:
        """Element-to-node table, shape (n_elements, nodes_per_element)."""
        return np.array([e.node_ids for e in self.elements], dtype=np.int64).reshape(
            self.n_elements, ELEMENT_NODES[self.kind]
        )

    @cached_property
    def sections(self) -> np.ndarray:
        return np.array([e.section for e in self.elements], dtype=float)

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(self.dof_map >= 0))

    @property
    def free_dofs(self) -> np.ndarray:
        """Global (node*dim + axis) indices of the free DOFs, in free order."""
        return np.flatnonzero(self.dof_map >= 0)

    @property
    def fixed_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.dof_map < 0)

    def prescribed_values(self) -> np.ndarray:
        """Prescribed displacement for each entry of :attr:`fixed_dofs`."""
        values = np.zeros(self.n_nodes * self.dim)
        for c in self.constraints:
            values[c.node * self.dim + c.axis] = c.value
        return values[self.fixed_dofs]

    def element_dofs(self) -> np.ndarray:
        """Global DOF indices per element, shape (n_elements, nodes*dim)."""
        conn = self.connectivity
        d = self.dim
        return (conn[:, :, None] * d + np.arange(d)).reshape(len(conn), -1)

    def element_measures(self) -> np.ndarray:
        """Bar lengths (1D) or signed triangle areas (2D)."""
        conn = self.connectivity
        if self.dim == 1:
            x = self.coords[:, 0]
            return x[conn[:, 1]] - x[conn[:, 0]]
        p = self.coords[conn]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def expand(self, u_free, fill_prescribed: bool = True) -> np.ndarray:
        """Scatter a free-DOF vector to all DOFs, shape (n_nodes, dim).

        Constrained entries take their prescribed values, or NaN when
        ``fill_prescribed`` is False.
        """
        full = np.zeros(self.n_nodes * self.dim)
        full[self.free_dofs] = u_free
        full[self.fixed_dofs] = self.prescribed_values() if fill_prescribed else np.nan
        return full.reshape(self.n_nodes, self.dim)

    def with_constraints(self, constraints: Iterable[Constraint]) -> "Mesh":
        """Copy of this mesh with ``constraints`` appended."""
        return Mesh(self.coords, self.elements, self.constraints + tuple(constraints))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords)
            and self.elements == other.elements
            and self.constraints == other.constraints
        )

    __hash__ = None

    # -- validation -------------------------------------------------------

    def _validate(self):
        if self.coords.ndim != 2 or self.dim not in (1, 2):
            raise MeshError("node coordinates must be 1D or 2D")
        if not np.all(np.isfinite(self.coords)):
            raise MeshError("non-finite node coordinate")
        kind = self.kind
        for i, e in enumerate(self.elements):
            if e.id != i:
                raise MeshError(f"element ids must be dense 0..{self.n_elements - 1}; got {e.id} at position {i}")
            if e.kind != kind:
                raise MeshError(f"element {e.id}: kind {e.kind} not allowed in a {self.dim}D mesh")
            if len(e.node_ids) != ELEMENT_NODES[kind]:
                raise MeshError(f"element {e.id}: {kind} needs {ELEMENT_NODES[kind]} nodes")
            if len(set(e.node_ids)) != len(e.node_ids):
                raise MeshError(f"element {e.id}: repeated node id")
            if any(n < 0 or n >= self.n_nodes for n in e.node_ids):
                raise MeshError(f"element {e.id}: node id out of range")
            if not (np.isfinite(e.section) and e.section > 0):
                raise MeshError(f"element {e.id}: section must be positive")
        if self.elements:
            measures = self.element_measures()
            bad = np.flatnonzero(~(measures > 0))
            if bad.size:
                e = int(bad[0])
                what = "bar length" if kind == BAR1D else "area"
                sign = "zero" if measures[e] == 0 else "negative"
                raise MeshError(f"element {e}: {sign} {what} ({measures[e]:g})")
        seen = set()
        for c in self.constraints:
            if not 0 <= c.node < self.n_nodes:
                raise MeshError(f"constraint on unknown node {c.node}")
            if not 0 <= c.axis < self.dim:
                raise MeshError(f"constraint axis {c.axis} invalid for a {self.dim}D mesh")
            if not np.isfinite(c.value):
                raise MeshError(f"constraint ({c.node}, {c.axis}): non-finite value")
            if (c.node, c.axis) in seen:
                raise MeshError(f"duplicate constraint on node {c.node} axis {c.axis}")
            seen.add((c.node, c.axis))


def dof_count(mesh: Mesh) -> tuple[int, int]:
    """Return ``(total, free)`` DOF counts."""
    total = mesh.n_nodes * mesh.dim
    return total, total - len(mesh.constraints)


def rigid_body_dofs(dim: int) -> int:
    """Number of rigid-body modes in ``dim`` dimensions."""
    return dim * (dim + 1) // 2


# -- text format -------------------------------------------------------------


def load_mesh(text: str) -> Mesh:
    """Parse mesh text.

    Recognised lines::

        node <id> <x> [<y>]
        elem <id> bar1d|tri3 <n0> <n1> [<n2>] <section>
        fix <node> <axis> <value>

    Blank lines and ``#`` comments are ignored. Node and element lines may
    appear in any order but their ids must be dense from zero.
    """
    nodes: dict[int, tuple[float, ...]] = {}
    elems: dict[int, Element] = {}
    fixes: list[tuple[int, Constraint]] = []
    dim = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        if key == "node":
            if len(tok) not in (3, 4):
                raise MeshParseError(lineno, "expected 'node <id> <x> [<y>]'")
            nid = _int(tok[1], lineno)
            xy = tuple(_float(t, lineno) for t in tok[2:])
            if dim is None:
                dim = len(xy)
            elif len(xy) != dim:
                raise MeshParseError(lineno, f"node has {len(xy)} coordinates, mesh is {dim}D")
            if nid in nodes:
                raise MeshParseError(lineno, f"duplicate node id {nid}")
            nodes[nid] = xy
        elif key == "elem":
            if len(tok) < 3 or tok[2] not in ELEMENT_NODES:
                raise MeshParseError(lineno, "expected 'elem <id> bar1d|tri3 ...'")
            kind = tok[2]
            nn = ELEMENT_NODES[kind]
            if len(tok) != 4 + nn:
                raise MeshParseError(lineno, f"{kind} needs {nn} node ids and a section")
            eid = _int(tok[1], lineno)
            if eid in elems:
                raise MeshParseError(lineno, f"duplicate element id {eid}")
            ids = tuple(_int(t, lineno) for t in tok[3 : 3 + nn])
            elems[eid] = Element(eid, kind, ids, _float(tok[3 + nn], lineno))
        elif key == "fix":
            if len(tok) != 4:
                raise MeshParseError(lineno, "expected 'fix <node> <axis> <value>'")
            axis = _int(tok[2], lineno)
            if axis not in (0, 1):
                raise MeshParseError(lineno, f"axis must be 0 or 1, got {axis}")
            fixes.append((lineno, Constraint(_int(tok[1], lineno), axis, _float(tok[3], lineno))))
        else:
            raise MeshParseError(lineno, f"unknown record '{key}'")
    if not nodes:
        raise MeshError("mesh has no nodes")
    if sorted(nodes) != list(range(len(nodes))):
        raise MeshError("node ids must be dense 0..N-1")
    if sorted(elems) != list(range(len(elems))):
        raise MeshError("element ids must be dense 0..M-1")
    for lineno, c in fixes:
        if dim == 1 and c.axis == 1:
            raise MeshParseError(lineno, "axis 1 is not allowed in a 1D mesh")
    coords = np.array([nodes[i] for i in range(len(nodes))], dtype=float)
    return Mesh(coords, [elems[i] for i in range(len(elems))], [c for _, c in fixes])


def write_mesh(mesh: Mesh) -> str:
    """Serialise ``mesh`` to text that :func:`load_mesh` parses back exactly."""
    out = []
    for i, xy in enumerate(mesh.coords):
        out.append("node %d %s" % (i, " ".join(repr(float(v)) for v in xy)))
    for e in mesh.elements:
        out.append("elem %d %s %s %r" % (e.id, e.kind, " ".join(map(str, e.node_ids)), float(e.section)))
    for c in mesh.constraints:
        out.append("fix %d %d %r" % (c.node, c.axis, float(c.value)))
    return "\n".join(out) + "\n"


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise MeshParseError(lineno, f"expected an integer, got '{tok}'") from None


def _float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise MeshParseError(lineno, f"expected a number, got '{tok}'") from None
    if not np.isfinite(v):
        raise MeshParseError(lineno, f"non-finite number '{tok}'")
    return v


# -- generators --------------------------------------------------------------


def generate_rect_grid(nx: int, ny: int, lx: float, ly: float, thickness: float = 1.0) -> Mesh:
    """Structured triangulation of ``[0, lx] x [0, ly]``.

    Nodes are numbered row by row from the lower-left corner. Each cell is
    split along its lower-left to upper-right diagonal into two
    counter-clockwise triangles. No constraints are attached.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError("nx and ny must be integers >= 1")
    if not (lx > 0 and ly > 0 and thickness > 0):
        raise MeshError("lx, ly and thickness must be positive")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    coords = np.column_stack([X.ravel(), Y.ravel()])
    elements = []
    for j in range(ny):
        for i in range(nx):
            n00 = j * (nx + 1) + i
            n10, n01, n11 = n00 + 1, n00 + nx + 1, n00 + nx + 2
            for tri in ((n00, n10, n11), (n00, n11, n01)):
                elements.append(Element(len(elements), TRI3, tri, float(thickness)))
    return Mesh(coords, elements)


def generate_bar_chain(xs: Sequence[float], areas: Sequence[float]) -> Mesh:
    """1D chain of bars through the node positions ``xs``."""
    if len(areas) != len(xs) - 1:
        raise MeshError("need one area per bar")
    elements = [Element(i, BAR1D, (i, i + 1), float(a)) for i, a in enumerate(areas)]
    return Mesh(np.asarray(xs, dtype=float)[:, None], elements)


def edge_nodes(mesh: Mesh, edge: str, tol: float = 1e-12) -> np.ndarray:
    """Node indices on one side of the mesh bounding box.

    ``edge`` is one of ``left``, ``right``, ``bottom``, ``top``.
    """
    axis, pick = {"left": (0, np.min), "right": (0, np.max), "bottom": (1, np.min), "top": (1, np.max)}[edge]
    if axis >= mesh.dim:
        raise MeshError(f"edge '{edge}' undefined for a {mesh.dim}D mesh")
    c = mesh.coords[:, axis]
    span = max(np.ptp(mesh.coords), 1.0)
    return np.flatnonzero(np.abs(c - pick(c)) <= tol * span)


def rigid_body_pins(mesh: Mesh) -> list[Constraint]:
    """Minimal zero-displacement constraints removing rigid-body motion.

    1D: the leftmost node. 2D: both axes of the lower-left-most node and the
    y axis of the node farthest from it along x on the same row.
    """
    if mesh.dim == 1:
        return [Constraint(int(np.argmin(mesh.coords[:, 0])), 0, 0.0)]
    xy = mesh.coords
    a = int(np.lexsort((xy[:, 0], xy[:, 1]))[0])
    same_row = np.flatnonzero(np.abs(xy[:, 1] - xy[a, 1]) <= 1e-12 * max(np.ptp(xy), 1.0))
    b = int(same_row[np.argmax(xy[same_row, 0])])
    if b == a:
        raise MeshError("cannot place rigid-body pins: bottom row has a single node")
    return [Constraint(a, 0, 0.0), Constraint(a, 1, 0.0), Constraint(b, 1, 0.0)]
