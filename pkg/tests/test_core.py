import numpy as np
import pytest

import kirchhoff as kh
from kirchhoff.core import dense_jacobian
from kirchhoff.errors import SingularSystemError


@pytest.fixture(scope="module")
def setting(ops_unit_128, lam1_unit_128, nodewise_pair_128):
    f = kh.make_nonlinearity(
        "sum_linear_cubic",
        f0=2.0,
        f_inf=1.0,
        a=1.0,
        b=1.0,
        lambda1=lam1_unit_128,
        mu1=nodewise_pair_128.mu,
    )
    return kh.ProblemParams(1.0, 1.0, ops_unit_128, f)


def test_params_validation(ops_unit_128):
    f = kh.make_nonlinearity("pure_linear", lambda1=2.0)
    with pytest.raises(ValueError):
        kh.ProblemParams(1.0, 0.0, ops_unit_128, f)
    with pytest.raises(ValueError):
        kh.ProblemParams(-1.0, 1.0, ops_unit_128, f)


def test_residual_vanishes_on_exact_cubic_solution(ops_unit_128, nodewise_pair_128, lam1_unit_128):
    # for the cubic-only nonlinearity the scaled ground state solves the
    # problem in closed form: lambda = (a + b t^2 E) / (b f_inf t^2 E)
    f = kh.make_nonlinearity(
        "pure_cubic", f_inf=1.0, b=1.0, lambda1=lam1_unit_128, mu1=nodewise_pair_128.mu
    )
    params = kh.ProblemParams(1.0, 1.0, ops_unit_128, f)
    psi = nodewise_pair_128.psi.values
    energy = psi @ (ops_unit_128.stiffness @ psi)
    t = 2.0
    lam = (1.0 + t * t * energy) / (t * t * energy)
    r = kh.residual(ops_unit_128.field(t * psi), lam, params)
    scale = np.linalg.norm((1.0 + t * t * energy) * (ops_unit_128.stiffness @ (t * psi)))
    assert np.linalg.norm(r) / scale < 1e-10


def test_dense_jacobian_matches_finite_differences(setting):
    ops = setting.ops
    rng = np.random.default_rng(2)
    u = ops.field(rng.standard_normal(ops.interior_count))
    d = rng.standard_normal(ops.interior_count)
    d /= np.linalg.norm(d)
    eps = 1e-6 * (1.0 + np.linalg.norm(u.values))
    rp = kh.residual(ops.field(u.values + eps * d), 1.3, setting)
    rm = kh.residual(ops.field(u.values - eps * d), 1.3, setting)
    fd = (rp - rm) / (2 * eps)
    jd = dense_jacobian(u, 1.3, setting) @ d
    assert np.linalg.norm(fd - jd) / np.linalg.norm(jd) < 1e-6


def test_rank_one_solve_matches_dense():
    ops = kh.assemble_operators(kh.build_mesh("interval", (0.0, 1.0), 33))
    f = kh.make_nonlinearity("sum_linear_cubic", f0=2.0, f_inf=1.0, lambda1=2.0, mu1=3.0)
    params = kh.ProblemParams(1.0, 1.0, ops, f)
    rng = np.random.default_rng(4)
    for _ in range(5):
        u = ops.field(rng.standard_normal(ops.interior_count))
        rhs = rng.standard_normal(ops.interior_count)
        x = kh.jacobian_solve(u, 0.7, params, rhs)
        xd = np.linalg.solve(dense_jacobian(u, 0.7, params), rhs)
        assert np.linalg.norm(x - xd) / np.linalg.norm(xd) < 1e-10


def test_singular_base_at_trivial_bifurcation(ops_unit_128, lam1_unit_128):
    # at u = 0, lambda = a lambda1 the base matrix a K - lambda M is
    # exactly singular and the rank-one term vanishes
    f = kh.make_nonlinearity("pure_linear", a=1.0, b=1.0, lambda1=lam1_unit_128)
    params = kh.ProblemParams(1.0, 1.0, ops_unit_128, f)
    z = ops_unit_128.field(np.zeros(ops_unit_128.interior_count))
    with pytest.raises(SingularSystemError):
        kh.jacobian_solve(z, lam1_unit_128, params, np.ones(ops_unit_128.interior_count))


def test_newton_recovers_scaled_eigenfunction(ops_unit_128, lam1_unit_128):
    f = kh.make_nonlinearity("pure_linear", a=1.0, b=1.0, lambda1=lam1_unit_128)
    params = kh.ProblemParams(1.0, 1.0, ops_unit_128, f)
    phi = kh.dirichlet_eigs(ops_unit_128, 1)[0].phi.values
    lam = (1.0 + lam1_unit_128) * lam1_unit_128  # amplitude c = 1 in the M norm
    sol = kh.newton_solve(ops_unit_128.field(1.1 * phi), lam, params)
    assert sol.positive
    assert sol.newton_iters <= 10
    assert np.linalg.norm(sol.u.values - phi) / np.linalg.norm(phi) < 1e-8


def test_inverse_laplacian(ops_unit_128):
    rng = np.random.default_rng(9)
    g = ops_unit_128.field(rng.standard_normal(ops_unit_128.interior_count))
    u = kh.solve_G(g, ops_unit_128)
    lhs = ops_unit_128.stiffness @ u.values
    rhs = ops_unit_128.mass @ g.values
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-12


def test_degree_three_inverse(setting):
    ops = setting.ops
    rng = np.random.default_rng(10)
    g = ops.field(rng.standard_normal(ops.interior_count))
    u = kh.solve_S(g, setting)
    ku = ops.stiffness @ u.values
    lhs = setting.b * (u.values @ ku) * ku
    rhs = ops.mass @ g.values
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-12
    # degree-3 homogeneity: scaling g by 8 scales u by 2
    u8 = kh.solve_S(ops.field(8.0 * g.values), setting)
    assert np.allclose(u8.values, 2.0 * u.values, rtol=1e-12)
    # zero maps to zero
    z = kh.solve_S(ops.field(np.zeros(ops.interior_count)), setting)
    assert not np.any(z.values)


def test_operator_monotonicity(setting):
    ops = setting.ops
    rng = np.random.default_rng(12)
    for _ in range(50):
        u = ops.field(rng.standard_normal(ops.interior_count))
        v = ops.field(rng.standard_normal(ops.interior_count))
        scale = (ops.h1_norm(u.values) ** 2 + ops.h1_norm(v.values) ** 2) ** 2
        assert kh.monotonicity_gap(u, v, setting) >= -1e-12 * scale
    u = ops.field(rng.standard_normal(ops.interior_count))
    assert kh.monotonicity_gap(u, u, setting) == pytest.approx(0.0, abs=1e-12)
