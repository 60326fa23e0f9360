"""First eigenvalue of the nonlocal problem -||u||^2 Lap(u) = mu u^3.

mu1 is computed by minimizing the degree-4 quotient (u' K u)^2 / int(u^4)
with a projected-gradient descent: the descent direction is preconditioned
by K (gradient in the H1 inner product, which keeps the iteration count
mesh-independent), with backtracking and renormalization to int(u^4) = 1
after every step.  A second eigenvalue is estimated by restricting the
minimization to the odd-symmetry subspace about the domain midpoint.

Two discrete conventions coexist:

* ``minimize_mu1``/``estimate_mu2`` use the exact per-element quartic
  quadrature, so the constraint and the value/constraint identity
  mu = (psi K psi)^2 hold to solver precision;
* ``nodewise_cubic_eigenpair`` solves the companion system
  ||u||^2 K u = mu M u^3 (cubed nodewise), the convention used by the
  Kirchhoff residual.  The two eigenfunctions differ by O(h^2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import factorized

from .errors import ConvergenceError, PositivityError, SeedError, UnsupportedDomainError
from .grid import (
    DiscreteOperators,
    FieldVector,
    Mesh,
    assemble_operators,
    build_mesh,
    integrate_power,
    power_gradient,
)

_DEF_MAX_ITERS = 5000


@dataclass
class NonlocalEigenPair:
    """(mu, psi) with psi normalized to int(psi^4) = 1.

    ``residual`` is the relative norm of the discrete eigen-equation
    residual; ``converged_from`` records the initialization seed.
    """

    mu: float
    psi: FieldVector
    residual: float
    converged_from: str
    iterations: int = 0


def _quartic(u_vals, ops):
    return integrate_power(ops.field(u_vals), 4, ops)


def _cubic_pairing(u_vals, ops):
    """Exact gradient of (1/4) int(u^4): entries int(u^3 phi_i)."""
    return 0.25 * power_gradient(ops.field(u_vals), 4, ops)


def _normalize(u_vals, ops):
    q = _quartic(u_vals, ops)
    if q <= 0.0:
        raise SeedError("iterate has vanishing quartic norm")
    return u_vals / q**0.25


def _quotient(u_vals, ops):
    e = u_vals @ (ops.stiffness @ u_vals)
    return e * e / _quartic(u_vals, ops)


def _minimize_quotient(ops, x0, tol, max_iters, project=None, seed_id=""):
    """Projected-gradient descent on the quotient; core of mu1/mu2."""
    K = ops.stiffness
    solve = factorized(K.tocsc())

    x = np.asarray(x0, dtype=float)
    if project is not None:
        x = project(x)
    if np.linalg.norm(x) == 0.0 or _quartic(x, ops) <= 0.0:
        raise SeedError("seed is zero (or has zero quartic norm)")
    x = _normalize(x, ops)

    for it in range(1, max_iters + 1):
        kx = K @ x
        e = x @ kx
        mu = e * e
        c = _cubic_pairing(x, ops)
        r = e * kx - mu * c
        scale = e * np.linalg.norm(kx)
        rel = np.linalg.norm(r) / scale
        if rel <= tol:
            return NonlocalEigenPair(float(mu), ops.field(x), float(rel), seed_id, it)

        d = -solve(r) / e  # H1-preconditioned descent direction
        if project is not None:
            d = project(d)
        q0 = _quotient(x, ops)
        alpha = 1.0
        for _ in range(40):
            trial = x + alpha * d
            if _quartic(trial, ops) > 0.0 and _quotient(trial, ops) < q0:
                break
            alpha *= 0.5
        else:
            # no descent found: already at numerical stationarity
            return NonlocalEigenPair(float(mu), ops.field(x), float(rel), seed_id, it)
        x = _normalize(x + alpha * d, ops)
        if project is not None:
            x = _normalize(project(x), ops)

    raise ConvergenceError(
        "quotient minimization stalled at residual {:.3e}".format(rel),
        residual=float(rel),
        iterate=ops.field(x),
    )


def minimize_mu1(ops, seed, tol=1e-9, max_iters=_DEF_MAX_ITERS, seed_id="") -> NonlocalEigenPair:
    """Minimize the nonlocal quotient from ``seed``.

    With a positive seed the descent stays in the positive cone and the
    result is the principal eigenpair (mu1, psi1).
    """
    ops.check_field(seed)
    if not np.any(seed.values):
        raise SeedError("seed must be nonzero")
    if not seed_id:
        seed_id = "seed-{:08x}".format(abs(hash(seed.values.tobytes())) % 2**32)
    return _minimize_quotient(ops, seed.values, tol, max_iters, seed_id=seed_id)


def _mirror_indices(mesh: Mesh):
    """Interior-node permutation mirroring the first axis about its midpoint."""
    if mesh.dim == 1:
        m = mesh.interior_count
        return np.arange(m)[::-1]
    nx, ny = mesh.resolution
    mx, my = nx - 1, ny - 1
    idx = np.arange(mx * my).reshape(my, mx)
    return idx[:, ::-1].ravel()


def estimate_mu2(ops, tol=1e-9, max_iters=_DEF_MAX_ITERS) -> NonlocalEigenPair:
    """Minimize the quotient over the odd-symmetry subspace.

    The returned eigenfunction changes sign (odd about the midpoint of the
    first axis).  The level is an upper bound for the second minimax
    eigenvalue; it is used only by the isolation probe and nodal tests.
    """
    mesh = ops.mesh
    if mesh.domain_kind not in ("interval", "rectangle"):
        raise UnsupportedDomainError("odd restriction needs an interval or rectangle")
    mirror = _mirror_indices(mesh)

    def project(v):
        return 0.5 * (v - v[mirror])

    x0 = np.zeros(mesh.interior_count)
    if mesh.dim == 1:
        lo, hi = mesh.bounds[0]
        x = mesh.interior_nodes[:, 0]
        x0[:] = np.sin(2.0 * np.pi * (x - lo) / (hi - lo))
    else:
        (lox, hix), _ = mesh.bounds
        x = mesh.interior_nodes[:, 0]
        y = mesh.interior_nodes[:, 1]
        (loy, hiy) = mesh.bounds[1]
        x0[:] = np.sin(2.0 * np.pi * (x - lox) / (hix - lox)) * np.sin(
            np.pi * (y - loy) / (hiy - loy)
        )
    return _minimize_quotient(ops, x0, tol, max_iters, project=project, seed_id="odd-symmetric")


def nodewise_cubic_eigenpair(ops, tol=1e-12, max_iters=2000) -> NonlocalEigenPair:
    """Ground state of the companion system ||u||^2 K u = mu M u^3.

    Fixed-point iteration u <- K^{-1} M u^3, rescaled to u @ M @ u^3 = 1
    (the Nemitsky-pairing normalization of the Kirchhoff residual); at the
    fixed point mu = (u' K u)^2 and the relation holds to ``tol``.
    """
    K, M = ops.stiffness, ops.mass
    solve = factorized(K.tocsc())
    lo = ops.mesh.interior_nodes
    # positive hump seed
    x = np.ones(ops.interior_count)
    for axis, (a, b) in enumerate(ops.mesh.bounds):
        x *= np.sin(np.pi * (lo[:, axis] - a) / (b - a))
    x /= (x @ (M @ x**3)) ** 0.25

    rel = np.inf
    for it in range(1, max_iters + 1):
        y = solve(M @ x**3)
        x = y / (y @ (M @ y**3)) ** 0.25
        kx = K @ x
        e = x @ kx
        mu = e * e
        r = e * kx - mu * (M @ x**3)
        rel = np.linalg.norm(r) / (e * np.linalg.norm(kx))
        if rel <= tol:
            return NonlocalEigenPair(float(mu), ops.field(x), float(rel), "nodewise-fixed-point", it)
    raise ConvergenceError(
        "nodewise fixed point stalled at residual {:.3e}".format(rel),
        residual=float(rel),
        iterate=ops.field(x),
    )


@dataclass
class NodalDecomposition:
    """Connected strictly-signed regions of a nodal field."""

    components: list  # list of interior-node index arrays
    measures: list
    signs: list


def nodal_domains(u: FieldVector, mesh: Mesh, zero_band=None) -> NodalDecomposition:
    """Decompose the sign structure of ``u`` into connected components.

    Nodes with |value| <= zero_band are excluded.  In 1D the measures split
    elements pro-rata at sign changes; in 2D each element's full area is
    attributed to every component it touches.
    """
    vals = np.asarray(u.values, dtype=float)
    if zero_band is None:
        zero_band = 1e-8 * (np.max(np.abs(vals)) if vals.size else 0.0)
    if zero_band < 0:
        raise ValueError("zero_band must be nonnegative")

    full = np.zeros(len(mesh.nodes))
    full[~mesh.boundary] = vals
    sign = np.where(full > zero_band, 1, np.where(full < -zero_band, -1, 0))

    interior_index = np.full(len(mesh.nodes), -1)
    interior_index[~mesh.boundary] = np.arange(mesh.interior_count)

    if not np.any(sign != 0):
        return NodalDecomposition([], [], [])

    # union-find over signed nodes connected through shared elements
    parent = np.arange(len(mesh.nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    for elem in mesh.elements:
        signed = [v for v in elem if sign[v] != 0]
        for s in (1, -1):
            same = [v for v in signed if sign[v] == s]
            for v in same[1:]:
                union(same[0], v)

    roots = {}
    for v in np.flatnonzero(sign != 0):
        roots.setdefault(find(v), []).append(v)

    comp_of = {}
    components, signs = [], []
    for root, members in sorted(roots.items()):
        for v in members:
            comp_of[v] = len(components)
        components.append(
            np.array(sorted(interior_index[v] for v in members if interior_index[v] >= 0))
        )
        signs.append(int(sign[root]))

    measures = [0.0] * len(components)
    if mesh.dim == 1:
        for elem, h in zip(mesh.elements, mesh.element_measure):
            l, r = elem
            sl, sr = sign[l], sign[r]
            if sl != 0 and sr != 0 and sl != sr:
                xi = full[l] / (full[l] - full[r])  # crossing fraction
                measures[comp_of[l]] += xi * h
                measures[comp_of[r]] += (1.0 - xi) * h
            elif sl != 0:
                measures[comp_of[l]] += h
            elif sr != 0:
                measures[comp_of[r]] += h
    else:
        for elem, area in zip(mesh.elements, mesh.element_measure):
            touched = {comp_of[v] for v in elem if sign[v] != 0}
            for c in touched:
                measures[c] += area

    return NodalDecomposition(components, measures, signs)


def nodal_measure_lower_bound(mu: float) -> float:
    """1D lower bound |N| >= (16/mu)^(1/3) for any nodal domain at level mu.

    Derived from sup(w)^2 <= (|N|/4) int(w'^2) on an interval of length
    |N| (embedding constant convention: H1_0 into L-infinity with c = 1/2
    on the L1 norm of w'), combined with (int w'^2)^2 = mu int(w^4) and
    int(w^4) <= sup(w)^4 |N|.
    """
    return (16.0 / mu) ** (1.0 / 3.0)


def picone_defect(u: FieldVector, v: FieldVector, ops: DiscreteOperators) -> float:
    """Element quadrature of |grad u|^2 + (u/v)^2 |grad v|^2 - 2 (u/v) grad u . grad v.

    Gradients are taken piecewise constant (element center) and u/v at the
    element midpoint, so the integrand is a perfect square per element and
    the result is nonnegative up to round-off.
    """
    ops.check_field(u)
    ops.check_field(v)
    if np.any(v.values <= 0.0):
        raise PositivityError("v must be strictly positive on interior nodes")

    mesh = ops.mesh
    fu = ops.full_values(u)
    fv = ops.full_values(v)
    eu = fu[mesh.elements]
    ev = fv[mesh.elements]

    if mesh.dim == 1:
        h = mesh.element_measure
        gu = (eu[:, 1] - eu[:, 0]) / h
        gv = (ev[:, 1] - ev[:, 0]) / h
        t = eu.mean(axis=1) / ev.mean(axis=1)
        integrand = gu**2 + t**2 * gv**2 - 2.0 * t * gu * gv
        return float(np.sum(h * integrand))

    nx, ny = mesh.resolution
    (lox, hix), (loy, hiy) = mesh.bounds
    hx, hy = (hix - lox) / nx, (hiy - loy) / ny
    # corners ordered (v00, v10, v11, v01); center gradient of the bilinear
    gux = (eu[:, 1] + eu[:, 2] - eu[:, 0] - eu[:, 3]) / (2.0 * hx)
    guy = (eu[:, 3] + eu[:, 2] - eu[:, 0] - eu[:, 1]) / (2.0 * hy)
    gvx = (ev[:, 1] + ev[:, 2] - ev[:, 0] - ev[:, 3]) / (2.0 * hx)
    gvy = (ev[:, 3] + ev[:, 2] - ev[:, 0] - ev[:, 1]) / (2.0 * hy)
    t = eu.mean(axis=1) / ev.mean(axis=1)
    integrand = (
        gux**2 + guy**2 + t**2 * (gvx**2 + gvy**2) - 2.0 * t * (gux * gvx + guy * gvy)
    )
    return float(np.sum(mesh.element_measure * integrand))


@dataclass
class GapReport:
    """Isolation probe: the spectral gap above mu1 and its refinement stability."""

    mu1: float
    mu2: float
    gap: float
    refined_mu1: float
    refined_mu2: float
    refined_gap: float
    gap_relative_change: float
    sweep_mus: list
    distinct_in_window: list
    consistent: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "mu1": self.mu1,
                "mu2": self.mu2,
                "gap": self.gap,
                "refined_mu1": self.refined_mu1,
                "refined_mu2": self.refined_mu2,
                "refined_gap": self.refined_gap,
                "gap_relative_change": self.gap_relative_change,
                "sweep_mus": self.sweep_mus,
                "distinct_in_window": self.distinct_in_window,
                "consistent": self.consistent,
            },
            indent=2,
        )


def isolation_probe(
    ops,
    mu1_pair: NonlocalEigenPair,
    mu2_pair: NonlocalEigenPair,
    n_seeds=10,
    rng_seed=0,
    tol=1e-9,
    residual_cap=1e-6,
) -> GapReport:
    """Probe isolation of mu1: gap to the mu2 estimate, refinement stability
    and a multi-seed sweep recording every distinct converged value in
    [mu1, mu1 + gap/2].
    """
    for pair in (mu1_pair, mu2_pair):
        if pair.residual > residual_cap:
            raise ConvergenceError(
                "isolation probe requires converged inputs (residual {:.3e})".format(
                    pair.residual
                ),
                residual=pair.residual,
            )

    gap = mu2_pair.mu - mu1_pair.mu
    consistent = gap > 0

    mesh = ops.mesh
    fine_mesh = build_mesh(
        mesh.domain_kind, mesh.bounds, tuple(2 * r for r in mesh.resolution)
    )
    fine_ops = assemble_operators(fine_mesh)
    seed = fine_ops.field(np.ones(fine_ops.interior_count))
    fine1 = minimize_mu1(fine_ops, seed, tol=tol, seed_id="refinement")
    fine2 = estimate_mu2(fine_ops, tol=tol)
    refined_gap = fine2.mu - fine1.mu
    rel_change = abs(refined_gap - gap) / gap if gap > 0 else np.inf

    rng = np.random.default_rng(rng_seed)
    sweep = []
    m = ops.interior_count
    for k in range(n_seeds):
        if k % 2 == 0:
            vals = np.abs(rng.standard_normal(m)) + 0.1  # positive seed
        else:
            vals = rng.standard_normal(m)  # sign-changing seed
        pair = minimize_mu1(ops, ops.field(vals), tol=tol, seed_id="sweep-{}".format(k))
        sweep.append(pair.mu)

    window = [v for v in sweep if mu1_pair.mu - abs(mu1_pair.mu) * 1e-6 <= v <= mu1_pair.mu + gap / 2.0]
    distinct = []
    for v in sorted(window):
        if not distinct or abs(v - distinct[-1]) > 1e-6 * abs(v):
            distinct.append(v)

    return GapReport(
        mu1=mu1_pair.mu,
        mu2=mu2_pair.mu,
        gap=float(gap),
        refined_mu1=fine1.mu,
        refined_mu2=fine2.mu,
        refined_gap=float(refined_gap),
        gap_relative_change=float(rel_change),
        sweep_mus=[float(v) for v in sweep],
        distinct_in_window=[float(v) for v in distinct],
        consistent=bool(consistent),
    )
