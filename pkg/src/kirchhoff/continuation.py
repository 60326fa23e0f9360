"""Pseudo-arclength continuation of solution branches in (lambda, u) space.

Branches are traced with a tangent predictor and a bordered Newton
corrector.  The bordered linear system is solved in augmented sparse form
(an extra unknown absorbs the rank-one Kirchhoff term), which stays
well-posed where the plain base matrix of the Jacobian is singular --
notably along the exact eigenfunction branch of the pure-linear problem.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .core import ProblemParams, _base_matrix, _residual_scale, residual
from .errors import KirchhoffError
from .grid import FieldVector
from .spectra_linear import dirichlet_eigs


class NoPrimaryBifurcationError(KirchhoffError):
    """The trivial line has no bifurcation point with a positive direction."""


@dataclass
class Origin:
    """Primary bifurcation point on the trivial line."""

    lambda_star: float
    direction: FieldVector
    lambda1_disc: float


@dataclass
class BranchPoint:
    lam: float
    u: FieldVector
    h1_norm: float
    l2_norm: float
    sup_norm: float
    min_value: float
    arc_param: float
    newton_iters: int
    residual_norm: float
    positive: bool


@dataclass
class AsymptoteEstimate:
    lambda_inf: float
    uncertainty: float
    reliable: bool


@dataclass
class Branch:
    points: list
    origin: Origin
    termination: str  # max_norm_reached | max_steps | fold_limit | failure
    asymptote_estimate: AsymptoteEstimate | None = None
    notes: list = field(default_factory=list)


class _CorrectorFailure(Exception):
    pass


def detect_primary_bifurcation(params: ProblemParams, eig_tol=1e-10) -> Origin:
    """Smallest lambda at which the trivial-line linearization a K - lambda f'(0) M
    is singular, with the principal eigenfunction as branching direction.

    For a = 0 (with a nonlinearity that is asymptotically linear at zero)
    the bifurcation point degenerates to lambda = 0.
    """
    fp0 = float(params.f.deriv(0.0))
    if fp0 <= 0.0:
        raise NoPrimaryBifurcationError(
            "f'(0) = {} gives no bifurcation from the trivial line".format(fp0)
        )
    pair = dirichlet_eigs(params.ops, 1, tol=eig_tol)[0]
    lam_star = 0.0 if params.a == 0.0 else params.a * pair.lam / fp0
    return Origin(float(lam_star), pair.phi, pair.lam)


def _bordered_correct(params, u, lam, ref_u, ref_lam, t_u, t_lam, ds, tol, max_iters=15):
    """Newton on the residual plus arclength constraint.

    Constraint: t_u' K (u - ref_u) + t_lam (lam - ref_lam) = ds, with the
    tangent normalized in the (K, 1) product metric.
    """
    ops = params.ops
    K, M = ops.stiffness, ops.mass
    m = ops.interior_count
    c = K @ t_u

    for it in range(1, max_iters + 1):
        r = residual(ops.field(u), lam, params)
        n = t_u @ (K @ (u - ref_u)) + t_lam * (lam - ref_lam) - ds
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * _residual_scale(u, params) and abs(n) <= tol * (1.0 + abs(ds)):
            return u, lam, it, rnorm
        B, ku = _base_matrix(u, lam, params)
        r_lam = -(M @ params.f(u))
        # augmented form: s = 2b ku' du carries the rank-one Jacobian term
        A = sp.bmat(
            [
                [B, ku[:, None], r_lam[:, None]],
                [-2.0 * params.b * ku[None, :], sp.eye_array(1), None],
                [c[None, :], None, sp.coo_array([[t_lam]])],
            ],
            format="csc",
        )
        rhs = np.concatenate([-r, [0.0, -n]])
        try:
            sol = splu(A).solve(rhs)
        except (RuntimeError, ValueError):
            raise _CorrectorFailure("bordered factorization failed")
        if not np.all(np.isfinite(sol)):
            raise _CorrectorFailure("bordered solve produced non-finite step")
        u = u + sol[:m]
        lam = lam + sol[m + 1]
    raise _CorrectorFailure("corrector did not converge in {} iterations".format(max_iters))


def _point_from_state(params, u, lam, arc, iters, positive_cone):
    ops = params.ops
    r = residual(ops.field(u), lam, params)  # re-verified from scratch
    vals = u
    return BranchPoint(
        lam=float(lam),
        u=ops.field(vals.copy()),
        h1_norm=ops.h1_norm(vals),
        l2_norm=ops.l2_norm(vals),
        sup_norm=float(np.max(np.abs(vals))),
        min_value=float(np.min(vals)),
        arc_param=float(arc),
        newton_iters=int(iters),
        residual_norm=float(np.linalg.norm(r)),
        positive=bool(np.all(vals > 0.0)),
    )


def continue_branch(
    params: ProblemParams,
    origin: Origin,
    step_ds: float,
    max_steps: int,
    max_norm: float,
    tol: float = 1e-10,
    positive_cone: bool = True,
) -> Branch:
    """Trace the branch emanating from ``origin``.

    Corrector divergence is met with step halving; the branch terminates
    (reason "failure", not an exception) once the step underflows
    step_ds/64.  On positive-cone runs a point leaving the cone is
    recorded in the notes and ends the branch: by the theory the branch
    stays in the cone, so a sign loss flags a numerical artifact.
    """
    if step_ds <= 0:
        raise ValueError("step_ds must be positive")
    branch = Branch(points=[], origin=origin, termination="failure")
    if max_norm <= 0:
        branch.termination = "max_norm_reached"
        return branch

    ops = params.ops
    fp0 = float(params.f.deriv(0.0))
    phi = origin.direction.values
    phi_k = phi / ops.h1_norm(phi)

    # branch switching: inject the eigenfunction direction at small amplitude
    eps = 10.0 * step_ds
    u_prev = np.zeros_like(phi_k)
    lam_prev = origin.lambda_star
    t_u, t_lam = phi_k, 0.0

    first = None
    for _ in range(8):
        lam_pred = (params.a + params.b * eps**2) * origin.lambda1_disc / fp0
        try:
            u1, lam1, iters, _ = _bordered_correct(
                params, eps * phi_k, lam_pred, u_prev, lam_pred, t_u, t_lam, eps, tol
            )
            first = (u1, lam1, iters)
            break
        except _CorrectorFailure:
            eps *= 0.5
    if first is None:
        branch.notes.append("branch switching failed at the bifurcation point")
        return branch

    u, lam, iters = first
    point = _point_from_state(params, u, lam, 0.0, iters, positive_cone)
    if positive_cone and not point.positive:
        branch.notes.append("positivity_lost at the first branch point")
        return branch
    branch.points.append(point)
    if point.h1_norm >= max_norm:
        branch.termination = "max_norm_reached"
        return branch

    # secant tangent seeded from the trivial-line origin
    t_u, t_lam = _normalized_tangent(ops, u - u_prev, lam - origin.lambda_star)
    u_prev, lam_prev = u, lam

    ds = step_ds
    fast = 0
    while len(branch.points) < max_steps:
        try:
            u_new, lam_new, iters, _ = _bordered_correct(
                params,
                u_prev + ds * t_u,
                lam_prev + ds * t_lam,
                u_prev,
                lam_prev,
                t_u,
                t_lam,
                ds,
                tol,
            )
        except _CorrectorFailure:
            ds *= 0.5
            fast = 0
            if ds < step_ds / 64.0:
                branch.notes.append("corrector kept failing; step underflow")
                branch.termination = "failure"
                return branch
            continue

        arc = branch.points[-1].arc_param + ds
        point = _point_from_state(params, u_new, lam_new, arc, iters, positive_cone)
        if positive_cone and not point.positive:
            branch.notes.append(
                "positivity_lost at arc_param {:.6g} (lambda {:.6g})".format(arc, lam_new)
            )
            branch.termination = "failure"
            return branch
        branch.points.append(point)

        if point.h1_norm >= max_norm:
            branch.termination = "max_norm_reached"
            return branch

        t_new_u, t_new_lam = _normalized_tangent(ops, u_new - u_prev, lam_new - lam_prev)
        if t_new_u @ (ops.stiffness @ t_u) + t_new_lam * t_lam < 0:
            t_new_u, t_new_lam = -t_new_u, -t_new_lam
        t_u, t_lam = t_new_u, t_new_lam
        u_prev, lam_prev = u_new, lam_new

        if iters <= 3:
            fast += 1
            if fast >= 3:
                ds = min(2.0 * ds, 8.0 * step_ds)
                fast = 0
        else:
            fast = 0

    branch.termination = "max_steps"
    return branch


def _normalized_tangent(ops, du, dlam):
    norm = np.sqrt(max(du @ (ops.stiffness @ du), 0.0) + dlam * dlam)
    if norm == 0.0:
        raise _CorrectorFailure("degenerate tangent")
    return du / norm, dlam / norm


def estimate_asymptote(branch: Branch, tail_fraction: float = 0.3) -> AsymptoteEstimate:
    """Extrapolate the lambda limit of a norm-unbounded branch.

    Fits the model lambda = lambda_inf + c / h1_norm^2 over the top
    ``tail_fraction`` of points (the model is exact for the pure-cubic
    family).  A non-monotone tail flags the estimate as unreliable but the
    value is still returned.
    """
    pts = branch.points
    if len(pts) < 10:
        raise ValueError("asymptote estimation needs at least 10 branch points")
    k = max(3, int(np.ceil(tail_fraction * len(pts))))
    tail = pts[-k:]
    norms = np.array([p.h1_norm for p in tail])
    lams = np.array([p.lam for p in tail])
    reliable = bool(np.all(np.diff(norms) > 0))
    x = 1.0 / norms**2
    slope, intercept = np.polyfit(x, lams, 1)
    fit_res = lams - (intercept + slope * x)
    return AsymptoteEstimate(
        float(intercept), float(np.sqrt(np.mean(fit_res**2))), reliable
    )


@dataclass
class ContinuationSettings:
    step_ds: float
    max_steps: int
    max_norm: float
    tol: float = 1e-10


@dataclass
class SweepMember:
    n: int
    a: float
    origin_lambda: float
    origin_theory: float
    branch: Branch
    asymptote: AsymptoteEstimate | None
    failed: bool = False
    note: str = ""


@dataclass
class SweepReport:
    """Family of a_n = 1/n branches approaching the a = 0 problem."""

    members: list
    matched_norm_levels: list
    matched_norm_diffs: list  # max |lambda| difference between successive branches
    diffs_decreasing: bool
    limit_asymptote: AsymptoteEstimate | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "members": [
                    {
                        "n": m.n,
                        "a": m.a,
                        "origin_lambda": m.origin_lambda,
                        "origin_theory": m.origin_theory,
                        "points": len(m.branch.points) if m.branch else 0,
                        "termination": m.branch.termination if m.branch else "failed",
                        "asymptote": None if m.asymptote is None else m.asymptote.lambda_inf,
                        "failed": m.failed,
                        "note": m.note,
                    }
                    for m in self.members
                ],
                "matched_norm_levels": self.matched_norm_levels,
                "matched_norm_diffs": self.matched_norm_diffs,
                "diffs_decreasing": self.diffs_decreasing,
                "limit_asymptote": None
                if self.limit_asymptote is None
                else {
                    "lambda_inf": self.limit_asymptote.lambda_inf,
                    "uncertainty": self.limit_asymptote.uncertainty,
                    "reliable": self.limit_asymptote.reliable,
                },
            },
            indent=2,
        )


def vanishing_a_sweep(params_template: ProblemParams, n_list, settings: ContinuationSettings) -> SweepReport:
    """Run the a_n = 1/n family sharing the template's nonlinearity.

    Reports the origin sequence (theory: 1/(f0_tilde * n)), the
    matched-norm convergence of successive branches toward the a = 0 limit
    branch, and the shared large-norm asymptote.  The limit branch is
    represented by the largest-n member plus these diagnostics.
    """
    if params_template.a != 0.0:
        raise ValueError("sweep template must have a = 0")
    if list(n_list) != sorted(n_list) or any(n <= 0 for n in n_list):
        raise ValueError("n_list must be ascending positive integers")
    f = params_template.f
    if f.f0_tilde <= 0:
        raise ValueError("sweep needs a nonlinearity asymptotically linear at zero")

    members = []
    for n in n_list:
        params_n = ProblemParams(1.0 / n, params_template.b, params_template.ops, f)
        try:
            origin = detect_primary_bifurcation(params_n)
            branch = continue_branch(
                params_n,
                origin,
                settings.step_ds,
                settings.max_steps,
                settings.max_norm,
                tol=settings.tol,
            )
            asym = (
                estimate_asymptote(branch) if len(branch.points) >= 10 else None
            )
            members.append(
                SweepMember(
                    n=int(n),
                    a=1.0 / n,
                    origin_lambda=origin.lambda_star,
                    origin_theory=1.0 / (f.f0_tilde * n),
                    branch=branch,
                    asymptote=asym,
                )
            )
        except KirchhoffError as exc:
            members.append(
                SweepMember(
                    n=int(n),
                    a=1.0 / n,
                    origin_lambda=float("nan"),
                    origin_theory=1.0 / (f.f0_tilde * n),
                    branch=Branch([], None, "failure"),
                    asymptote=None,
                    failed=True,
                    note=str(exc),
                )
            )

    ok = [m for m in members if not m.failed and len(m.branch.points) >= 2]
    levels, diffs = [], []
    if len(ok) >= 2:
        lo = max(min(p.h1_norm for p in m.branch.points) for m in ok)
        hi = min(max(p.h1_norm for p in m.branch.points) for m in ok)
        if hi > lo > 0:
            levels = list(np.geomspace(lo * 1.05, hi * 0.95, 12))
            curves = []
            for m in ok:
                pts = sorted(m.branch.points, key=lambda p: p.h1_norm)
                h1 = np.array([p.h1_norm for p in pts])
                lam = np.array([p.lam for p in pts])
                curves.append(np.interp(levels, h1, lam))
            diffs = [
                float(np.max(np.abs(curves[i + 1] - curves[i])))
                for i in range(len(curves) - 1)
            ]

    decreasing = all(x > y for x, y in zip(diffs, diffs[1:])) if len(diffs) >= 2 else False
    limit = ok[-1].asymptote if ok else None
    return SweepReport(members, [float(v) for v in levels], diffs, decreasing, limit)


def write_branch_csv(path, branch: Branch):
    """One row per accepted point, 17 significant digits, '.' decimal."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "step",
                "arc_param",
                "lambda",
                "h1_norm",
                "l2_norm",
                "sup_norm",
                "min_value",
                "residual_norm",
                "newton_iters",
                "positive",
            ]
        )
        for i, p in enumerate(branch.points):
            writer.writerow(
                [
                    i,
                    format(p.arc_param, ".17g"),
                    format(p.lam, ".17g"),
                    format(p.h1_norm, ".17g"),
                    format(p.l2_norm, ".17g"),
                    format(p.sup_norm, ".17g"),
                    format(p.min_value, ".17g"),
                    format(p.residual_norm, ".17g"),
                    p.newton_iters,
                    p.positive,
                ]
            )
