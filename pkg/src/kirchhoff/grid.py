"""Meshes and discrete operators for intervals and tensor rectangles.

Piecewise-linear conforming elements (bilinear on rectangles, assembled by
tensor products of the 1D stiffness/mass matrices), so that ``u @ K @ u``
is exactly the H1_0 seminorm of the interpolant.  Integrals of powers of
the interpolant are evaluated with a per-element Gauss rule that is exact
for the quartic of a (bi)linear function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ProvenanceError, ResolutionError

# 3-point Gauss-Legendre on [0, 1]: exact through degree 5, enough for the
# fourth power of a linear shape function.
_GP = 0.5 * (1.0 + np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)]))
_GW = 0.5 * np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh on an interval or a tensor rectangle.

    Attributes:
        domain_kind: "interval" or "rectangle".
        bounds: per-axis (lo, hi) endpoint tuples.
        resolution: elements per axis.
        nodes: coordinates of all vertices, shape (n_nodes, dim).
        elements: vertex index tuples, shape (n_elems, 2) or (n_elems, 4).
        element_measure: length/area per element.
        boundary: Dirichlet flag per node.
    """

    domain_kind: str
    bounds: tuple
    resolution: tuple
    nodes: np.ndarray
    elements: np.ndarray
    element_measure: np.ndarray
    boundary: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def interior_count(self) -> int:
        return int(np.count_nonzero(~self.boundary))

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[~self.boundary]

    @property
    def mesh_id(self) -> str:
        return "{}|{}|{}".format(self.domain_kind, self.bounds, self.resolution)

    @property
    def measure(self) -> float:
        """Total measure |Omega|."""
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def to_json(self) -> str:
        """Serialize the defining description; geometry is rebuilt on load."""
        return json.dumps(
            {
                "domain_kind": self.domain_kind,
                "bounds": [list(b) for b in self.bounds],
                "resolution": list(self.resolution),
            }
        )

    @staticmethod
    def from_json(text: str) -> "Mesh":
        desc = json.loads(text)
        return build_mesh(desc["domain_kind"], desc["bounds"], desc["resolution"])


@dataclass
class FieldVector:
    """Nodal values on the interior of a mesh; boundary values are zero."""

    values: np.ndarray
    mesh_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


def build_mesh(domain_kind, bounds, resolution) -> Mesh:
    """Build a uniform mesh on an interval or tensor rectangle.

    Args:
        domain_kind: "interval" or "rectangle".
        bounds: (lo, hi) for an interval, ((lox, hix), (loy, hiy)) for a
            rectangle; a single (lo, hi) pair is broadcast to both axes.
        resolution: elements per axis (int or per-axis sequence), >= 2.
    """
    if domain_kind not in ("interval", "rectangle"):
        raise DomainError("unknown domain kind: {!r}".format(domain_kind))
    dim = 1 if domain_kind == "interval" else 2

    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (dim, 1)) if dim == 2 else bounds[None, :]
    if bounds.shape != (dim, 2):
        raise DomainError("bounds shape {} invalid for {}".format(bounds.shape, domain_kind))
    for lo, hi in bounds:
        if not hi > lo:
            raise DomainError("degenerate bounds ({}, {})".format(lo, hi))

    res = np.atleast_1d(np.asarray(resolution, dtype=int))
    if res.size == 1:
        res = np.repeat(res, dim)
    if res.size != dim:
        raise ResolutionError("resolution must have one entry per axis")
    if np.any(res < 2):
        raise ResolutionError("resolution must be >= 2, got {}".format(res.tolist()))

    bounds_t = tuple((float(lo), float(hi)) for lo, hi in bounds)
    res_t = tuple(int(n) for n in res)

    if dim == 1:
        (lo, hi), n = bounds_t[0], res_t[0]
        x = np.linspace(lo, hi, n + 1)
        nodes = x[:, None]
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        measures = np.full(n, (hi - lo) / n)
        boundary = np.zeros(n + 1, dtype=bool)
        boundary[[0, n]] = True
    else:
        (lox, hix), (loy, hiy) = bounds_t
        nx, ny = res_t
        x = np.linspace(lox, hix, nx + 1)
        y = np.linspace(loy, hiy, ny + 1)
        X, Y = np.meshgrid(x, y)  # row index = y, fastest index = x
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
        v00 = (iy * (nx + 1) + ix).ravel()
        elements = np.column_stack([v00, v00 + 1, v00 + nx + 2, v00 + nx + 1])
        measures = np.full(nx * ny, (hix - lox) / nx * (hiy - loy) / ny)
        bx = np.isin(np.arange(nx + 1), [0, nx])
        by = np.isin(np.arange(ny + 1), [0, ny])
        boundary = (by[:, None] | bx[None, :]).ravel()

    return Mesh(domain_kind, bounds_t, res_t, nodes, elements, measures, boundary)


def _axis_matrices(n, h):
    """Interior 1D stiffness and consistent mass matrices on n elements."""
    m = n - 1
    K = sp.diags_array(
        [np.full(m - 1, -1.0 / h), np.full(m, 2.0 / h), np.full(m - 1, -1.0 / h)],
        offsets=[-1, 0, 1],
    )
    M = sp.diags_array(
        [np.full(m - 1, h / 6.0), np.full(m, 4.0 * h / 6.0), np.full(m - 1, h / 6.0)],
        offsets=[-1, 0, 1],
    )
    return K.tocsr(), M.tocsr()


def _shape_matrix(dim):
    """Shape function values at Gauss points: (n_quad, nodes_per_element)."""
    if dim == 1:
        S = np.column_stack([1.0 - _GP, _GP])
        w = _GW.copy()
    else:
        tx, ty = np.meshgrid(_GP, _GP)
        tx, ty = tx.ravel(), ty.ravel()
        S = np.column_stack(
            [(1 - tx) * (1 - ty), tx * (1 - ty), tx * ty, (1 - tx) * ty]
        )
        w = np.outer(_GW, _GW).ravel()
    return S, w


@dataclass(frozen=True)
class DiscreteOperators:
    """Assembled stiffness/mass matrices and the per-element quartic rule.

    Immutable after assembly; safe to share across concurrent solvers.
    """

    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    quartic_quadrature: tuple  # (shape values at Gauss points, weights)

    @property
    def interior_count(self) -> int:
        return self.mesh.interior_count

    def full_values(self, u: FieldVector) -> np.ndarray:
        """Nodal values on all vertices, boundary entries zero."""
        self.check_field(u)
        full = np.zeros(len(self.mesh.nodes))
        full[~self.mesh.boundary] = u.values
        return full

    def check_field(self, u: FieldVector):
        if u.mesh_id != self.mesh.mesh_id:
            raise ProvenanceError(
                "field from mesh {!r} used with operators for {!r}".format(
                    u.mesh_id, self.mesh.mesh_id
                )
            )
        if u.values.shape != (self.mesh.interior_count,):
            raise ProvenanceError("field length does not match interior node count")

    def field(self, values) -> FieldVector:
        return FieldVector(np.asarray(values, dtype=float), self.mesh.mesh_id)

    def h1_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(max(values @ (self.stiffness @ values), 0.0)))

    def l2_norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(max(values @ (self.mass @ values), 0.0)))


def assemble_operators(mesh: Mesh) -> DiscreteOperators:
    """Assemble stiffness and mass matrices over the interior nodes."""
    if mesh.dim == 1:
        n = mesh.resolution[0]
        lo, hi = mesh.bounds[0]
        K, M = _axis_matrices(n, (hi - lo) / n)
    else:
        nx, ny = mesh.resolution
        (lox, hix), (loy, hiy) = mesh.bounds
        Kx, Mx = _axis_matrices(nx, (hix - lox) / nx)
        Ky, My = _axis_matrices(ny, (hiy - loy) / ny)
        K = (sp.kron(My, Kx) + sp.kron(Ky, Mx)).tocsr()
        M = sp.kron(My, Mx).tocsr()
    S, w = _shape_matrix(mesh.dim)
    return DiscreteOperators(mesh, K.tocsr(), M.tocsr(), (S, w))


def _element_values(ops: DiscreteOperators, u: FieldVector) -> np.ndarray:
    """Values of the interpolant at the element Gauss points, (n_elems, n_quad)."""
    full = ops.full_values(u)
    S, _ = ops.quartic_quadrature
    return full[ops.mesh.elements] @ S.T


def integrate_power(u: FieldVector, p: int, ops: DiscreteOperators) -> float:
    """Exact integral of the p-th power of the piecewise-linear interpolant."""
    if p not in (1, 2, 3, 4):
        raise ValueError("p must be one of 1, 2, 3, 4")
    _, w = ops.quartic_quadrature
    vals = _element_values(ops, u)
    per_elem = (vals**p) @ w
    return float(ops.mesh.element_measure @ per_elem)


def power_gradient(u: FieldVector, p: int, ops: DiscreteOperators) -> np.ndarray:
    """Gradient of ``integrate_power(., p)`` with respect to the interior values."""
    if p not in (2, 3, 4):
        raise ValueError("p must be one of 2, 3, 4")
    S, w = ops.quartic_quadrature
    vals = _element_values(ops, u)
    W = S * w[:, None]
    local = (p * vals ** (p - 1)) @ W * ops.mesh.element_measure[:, None]
    grad = np.zeros(len(ops.mesh.nodes))
    np.add.at(grad, ops.mesh.elements, local)
    return grad[~ops.mesh.boundary]


def interpolate(mesh: Mesh, fn) -> FieldVector:
    """Interpolate a callable of the coordinates onto the interior nodes."""
    pts = mesh.interior_nodes
    if mesh.dim == 1:
        vals = np.asarray([fn(x) for x in pts[:, 0]], dtype=float)
    else:
        vals = np.asarray([fn(x, y) for x, y in pts], dtype=float)
    return FieldVector(vals, mesh.mesh_id)
