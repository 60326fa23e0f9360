"""Residual, Jacobian and Newton solver for (a + b||u||^2)(-Lap u) = lambda f(u).

The Jacobian has the structure B + 2b (Ku)(Ku)^T with a banded base
B = (a + b u'Ku) K - lambda M diag(f'(u)); ``jacobian_solve`` exploits the
rank-one term via Sherman-Morrison on top of a sparse factorization of B.
A dense Jacobian assembly is kept only as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DivergenceError, SingularSystemError
from .grid import DiscreteOperators, FieldVector
from .nonlinearity import Nonlinearity

_SM_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Coefficients and discretization of the Kirchhoff problem."""

    a: float
    b: float
    ops: DiscreteOperators
    f: Nonlinearity

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")


@dataclass
class Solution:
    """A converged state at fixed lambda, with solver diagnostics."""

    u: FieldVector
    lam: float
    residual_norm: float
    newton_iters: int
    positive: bool


def residual(u: FieldVector, lam: float, params: ProblemParams) -> np.ndarray:
    """r = (a + b u'Ku) Ku - lambda M f(u), f applied nodewise."""
    ops = params.ops
    ops.check_field(u)
    ku = ops.stiffness @ u.values
    energy = u.values @ ku
    return (params.a + params.b * energy) * ku - lam * (ops.mass @ params.f(u.values))


def _base_matrix(u_vals, lam, params):
    ops = params.ops
    ku = ops.stiffness @ u_vals
    energy = u_vals @ ku
    coeff = params.a + params.b * energy
    B = coeff * ops.stiffness - lam * (ops.mass @ sp.diags_array(params.f.deriv(u_vals)))
    return B.tocsc(), ku


def jacobian_solve(u: FieldVector, lam: float, params: ProblemParams, rhs: np.ndarray) -> np.ndarray:
    """Solve J x = rhs with J = B + 2b (Ku)(Ku)^T by Sherman-Morrison.

    Raises SingularSystemError when the base factorization fails or the
    Sherman-Morrison denominator degenerates; both signal a fold or branch
    point to the continuation driver.
    """
    params.ops.check_field(u)
    rhs = np.asarray(rhs, dtype=float)
    B, ku = _base_matrix(u.values, lam, params)
    try:
        lu = splu(B)
        x0 = lu.solve(rhs)
        y = lu.solve(ku)
    except (RuntimeError, ValueError) as exc:
        raise SingularSystemError("base matrix factorization failed: {}".format(exc))
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(y))):
        raise SingularSystemError("base matrix is numerically singular")
    # cheap condition estimate from the solves at hand; only a base that is
    # singular essentially to machine precision is rejected (legitimate
    # near-singular bases occur along branches and are handled by the
    # rank-one update)
    bnorm = np.max(np.asarray(abs(B).sum(axis=0)))
    ratio = 0.0
    rhs_norm, ku_norm = np.linalg.norm(rhs), np.linalg.norm(ku)
    if rhs_norm > 0:
        ratio = max(ratio, np.linalg.norm(x0) / rhs_norm)
    if ku_norm > 0:
        ratio = max(ratio, np.linalg.norm(y) / ku_norm)
    if bnorm * ratio > 1e15:
        raise SingularSystemError("base matrix is numerically singular")

    denom = 1.0 + 2.0 * params.b * (ku @ y)
    if abs(denom) < _SM_DENOM_FLOOR:
        raise SingularSystemError("Sherman-Morrison denominator vanished (near-bifurcation)")
    return x0 - y * (2.0 * params.b * (ku @ x0) / denom)


def dense_jacobian(u: FieldVector, lam: float, params: ProblemParams) -> np.ndarray:
    """Explicit dense Jacobian; test oracle for ``jacobian_solve``."""
    B, ku = _base_matrix(u.values, lam, params)
    return B.toarray() + 2.0 * params.b * np.outer(ku, ku)


def _residual_scale(u_vals, params):
    ops = params.ops
    ku = ops.stiffness @ u_vals
    energy = u_vals @ ku
    return 1.0 + (params.a + params.b * energy) * np.linalg.norm(ku)


def newton_solve(u0: FieldVector, lam: float, params: ProblemParams, tol=1e-11, max_iters=50) -> Solution:
    """Damped Newton iteration at fixed lambda.

    Halves the step up to 10 times whenever the residual norm does not
    decrease; five consecutive iterations without decrease raise
    DivergenceError.
    """
    ops = params.ops
    ops.check_field(u0)
    u = u0.values.copy()
    r = residual(ops.field(u), lam, params)
    rnorm = np.linalg.norm(r)
    bad_steps = 0

    for it in range(1, max_iters + 1):
        if rnorm <= tol * _residual_scale(u, params):
            vec = ops.field(u)
            return Solution(vec, float(lam), float(rnorm), it - 1, bool(np.all(u > 0)))
        du = jacobian_solve(ops.field(u), lam, params, -r)
        step = 1.0
        accepted = False
        for _ in range(10):
            trial = u + step * du
            r_trial = residual(ops.field(trial), lam, params)
            n_trial = np.linalg.norm(r_trial)
            if n_trial < rnorm:
                u, r, rnorm = trial, r_trial, n_trial
                accepted = True
                break
            step *= 0.5
        if accepted:
            bad_steps = 0
        else:
            bad_steps += 1
            if bad_steps >= 5:
                raise DivergenceError("residual kept growing over 5 damped steps")
            u = u + step * du  # smallest damped step, then retry
            r = residual(ops.field(u), lam, params)
            rnorm = np.linalg.norm(r)

    if rnorm <= tol * _residual_scale(u, params):
        vec = ops.field(u)
        return Solution(vec, float(lam), float(rnorm), max_iters, bool(np.all(u > 0)))
    raise ConvergenceError(
        "Newton did not reach tolerance (residual {:.3e})".format(rnorm),
        residual=float(rnorm),
        iterate=ops.field(u),
    )


def solve_G(g: FieldVector, ops: DiscreteOperators) -> FieldVector:
    """Inverse Laplacian: solve K u = M g."""
    ops.check_field(g)
    lu = splu(ops.stiffness.tocsc())
    return ops.field(lu.solve(ops.mass @ g.values))


def solve_S(g: FieldVector, params: ProblemParams) -> FieldVector:
    """Inverse of the degree-3 homogeneous operator u -> b ||u||^2 (-Lap u).

    Closed form by homogeneity: u = w / (b w'Kw)^(1/3) with w = G(g).
    """
    ops = params.ops
    ops.check_field(g)
    if not np.any(g.values):
        return ops.field(np.zeros_like(g.values))
    w = solve_G(g, ops).values
    energy = w @ (ops.stiffness @ w)
    return ops.field(w / (params.b * energy) ** (1.0 / 3.0))


def monotonicity_gap(u: FieldVector, v: FieldVector, params: ProblemParams) -> float:
    """<L(u)-L(v), u-v> - b (||u||^2 - ||v||^2)^2 with L(w) = b (w'Kw) Kw.

    Nonnegative up to round-off: the discrete form of the strict
    monotonicity of the Kirchhoff-Laplace operator.
    """
    ops = params.ops
    ops.check_field(u)
    ops.check_field(v)
    K = ops.stiffness
    ku, kv = K @ u.values, K @ v.values
    eu, ev = u.values @ ku, v.values @ kv
    diff = u.values - v.values
    pairing = params.b * (eu * (ku @ diff) - ev * (kv @ diff))
    return float(pairing - params.b * (eu - ev) ** 2)


def solution_csv_row(sol: Solution, params: ProblemParams):
    """CSV fields: lambda, h1_norm, l2_norm, sup_norm, min_value, residual_norm, newton_iters, positive."""
    ops = params.ops
    vals = sol.u.values
    return [
        sol.lam,
        ops.h1_norm(vals),
        ops.l2_norm(vals),
        float(np.max(np.abs(vals))) if vals.size else 0.0,
        float(np.min(vals)) if vals.size else 0.0,
        sol.residual_norm,
        sol.newton_iters,
        sol.positive,
    ]
