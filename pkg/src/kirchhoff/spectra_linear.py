"""Lowest Dirichlet-Laplacian eigenpairs of the generalized problem K v = lambda M v.

Inverse power iteration on the factorized stiffness matrix with M-orthogonal
deflation; only the few smallest pairs are ever needed and the matrices are
banded, so a full dense decomposition would be wasted work.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import factorized

from .errors import ConvergenceError
from .grid import DiscreteOperators, FieldVector

_MAX_ITERS = 10_000


@dataclass
class EigenPair:
    """Eigenpair of K v = lambda M v with phi normalized to phi @ M @ phi = 1."""

    lam: float
    phi: FieldVector
    index: int  # 1-based rank
    residual: float  # ||K phi - lam M phi|| / ||K phi||


def dirichlet_eigs(ops: DiscreteOperators, count: int, tol: float = 1e-10):
    """Compute the ``count`` smallest eigenpairs, ascending.

    Raises ConvergenceError (carrying the last residual) if the relative
    eigen-residual does not reach ``tol`` within the iteration cap.
    """
    m = ops.interior_count
    if not 1 <= count <= m:
        raise ValueError("count must be between 1 and the interior node count")
    if tol <= 0:
        raise ValueError("tol must be positive")

    K, M = ops.stiffness, ops.mass
    solve = factorized(K.tocsc())
    rng = np.random.default_rng(1815)  # fixed seed: deterministic output
    pairs = []
    basis = []  # M-orthonormal converged eigenvectors

    for index in range(1, count + 1):
        x = rng.standard_normal(m)
        x = _deflate(x, basis, M)
        x /= ops.l2_norm(x)
        lam = x @ (K @ x)
        residual = np.inf
        for _ in range(_MAX_ITERS):
            y = solve(M @ x)
            y = _deflate(y, basis, M)
            norm = ops.l2_norm(y)
            if norm == 0.0:
                raise ConvergenceError("deflated iterate vanished", residual=residual)
            x = y / norm
            kx = K @ x
            lam = x @ kx
            residual = np.linalg.norm(kx - lam * (M @ x)) / np.linalg.norm(kx)
            if residual <= tol:
                break
        else:
            raise ConvergenceError(
                "eigenpair {} did not converge (residual {:.3e})".format(index, residual),
                residual=residual,
            )
        x = _fix_sign(x, principal=index == 1)
        basis.append(x)
        pairs.append(EigenPair(float(lam), ops.field(x), index, float(residual)))

    return pairs


def _deflate(x, basis, M):
    for phi in basis:
        x = x - phi * (phi @ (M @ x))
    return x


def _fix_sign(x, principal):
    if principal:
        return x if x.sum() >= 0 else -x
    # deterministic convention for non-principal modes
    k = int(np.argmax(np.abs(x)))
    return x if x[k] >= 0 else -x


def write_eigenpairs_csv(path, pairs, dump_phi=False):
    """Write (index, lambda, residual) rows; optionally append per-node values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["index", "lambda", "residual"]
        if dump_phi:
            header.append("phi")
        writer.writerow(header)
        for p in pairs:
            row = [p.index, format(p.lam, ".17g"), format(p.residual, ".17g")]
            if dump_phi:
                row.append(";".join(format(v, ".17g") for v in p.phi.values))
            writer.writerow(row)
