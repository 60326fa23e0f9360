"""Discretization, nonlocal eigenvalue solvers and bifurcation-branch
continuation for Kirchhoff-type elliptic problems
-(a + b int |grad u|^2) Lap u = lambda f(u) on intervals and rectangles."""

from .continuation import (
    Branch,
    BranchPoint,
    ContinuationSettings,
    Origin,
    continue_branch,
    detect_primary_bifurcation,
    estimate_asymptote,
    vanishing_a_sweep,
)
from .core import (
    ProblemParams,
    Solution,
    jacobian_solve,
    monotonicity_gap,
    newton_solve,
    residual,
    solve_G,
    solve_S,
)
from .grid import (
    DiscreteOperators,
    FieldVector,
    Mesh,
    assemble_operators,
    build_mesh,
    integrate_power,
    interpolate,
)
from .nonlinearity import Nonlinearity, make_nonlinearity, to_h_form, verify_asymptotics
from .spectra_linear import EigenPair, dirichlet_eigs
from .spectra_nonlocal import (
    NodalDecomposition,
    NonlocalEigenPair,
    estimate_mu2,
    isolation_probe,
    minimize_mu1,
    nodal_domains,
    nodewise_cubic_eigenpair,
    picone_defect,
)

__version__ = "0.1.0"
