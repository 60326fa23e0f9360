"""Configuration-driven command line front end.

Subcommands: eig-linear, eig-nonlocal, branch, sweep-a, properties.
A single flat JSON config describes the experiment; dotted-key overrides
(``--set continuation.max_norm=50``) adjust individual fields.  All file
writes are atomic (temp + rename) and all numeric CSV fields are printed
with 17 significant digits, so identical configs give byte-identical
artifacts.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import continuation as cont
from .core import (
    ProblemParams,
    dense_jacobian,
    jacobian_solve,
    monotonicity_gap,
    newton_solve,
    residual,
    solve_S,
)
from .errors import KirchhoffError
from .grid import assemble_operators, build_mesh, integrate_power
from .nonlinearity import make_nonlinearity
from .spectra_linear import dirichlet_eigs
from .spectra_nonlocal import (
    estimate_mu2,
    isolation_probe,
    minimize_mu1,
    nodewise_cubic_eigenpair,
    picone_defect,
)

SUBCOMMANDS = ("eig-linear", "eig-nonlocal", "branch", "sweep-a", "properties")


@dataclass
class DomainConfig:
    kind: str = "interval"
    bounds: list = field(default_factory=lambda: [0.0, 1.0])
    resolution: int = 256


@dataclass
class ProblemConfig:
    a: float = 1.0
    b: float = 1.0


@dataclass
class NonlinearityConfig:
    kind: str = "sum_linear_cubic"
    f0: float = 2.0
    f_inf: float = 1.0
    f0_tilde: float | None = None
    lambda1: float | None = None  # None: use the discrete first eigenvalue
    mu1: float | None = None  # None: use the discrete nonlocal eigenvalue


@dataclass
class SolverConfig:
    newton_tol: float = 1e-11
    max_iters: int = 50
    eig_count: int = 3
    eig_tol: float = 1e-10
    mu_tol: float = 1e-9


@dataclass
class ContinuationConfig:
    step_ds: float = 0.1
    max_steps: int = 500
    max_norm: float = 10.0


@dataclass
class SweepConfig:
    n_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16])


@dataclass
class OutputConfig:
    directory: str = "out"
    dump_fields: bool = False


@dataclass
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    nonlinearity: NonlinearityConfig = field(default_factory=NonlinearityConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    continuation: ContinuationConfig = field(default_factory=ContinuationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        cfg = ExperimentConfig()
        sections = {
            "domain": DomainConfig,
            "problem": ProblemConfig,
            "nonlinearity": NonlinearityConfig,
            "solver": SolverConfig,
            "continuation": ContinuationConfig,
            "sweep": SweepConfig,
            "outputs": OutputConfig,
        }
        for name, cls in sections.items():
            if name in data:
                section = cls()
                for key, value in data[name].items():
                    if not hasattr(section, key):
                        raise ValueError("unknown config key {}.{}".format(name, key))
                    setattr(section, key, value)
                setattr(cfg, name, section)
        if "seed" in data:
            cfg.seed = int(data["seed"])
        return cfg


class ConfigError(Exception):
    pass


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config {}: {}".format(path, exc))
    except json.JSONDecodeError as exc:
        raise ConfigError("config {} is not valid JSON: {}".format(path, exc))
    try:
        cfg = ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
    for item in overrides:
        _apply_override(cfg, item)
    return cfg


def _apply_override(cfg, item):
    if "=" not in item:
        raise ConfigError("override {!r} is not of the form key.sub=value".format(item))
    dotted, raw = item.split("=", 1)
    keys = dotted.strip().split(".")
    target = cfg
    for key in keys[:-1]:
        if not hasattr(target, key):
            raise ConfigError("unknown config section {!r}".format(key))
        target = getattr(target, key)
    leaf = keys[-1]
    if not hasattr(target, leaf):
        raise ConfigError("unknown config key {!r}".format(dotted))
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    setattr(target, leaf, value)


def _atomic_write(path, text):
    """Temp file + rename in the target directory; no partial artifacts."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return format(float(x), ".17g")


def _build_operators(cfg: ExperimentConfig):
    mesh = build_mesh(cfg.domain.kind, cfg.domain.bounds, cfg.domain.resolution)
    return assemble_operators(mesh)


def _build_nonlinearity(cfg: ExperimentConfig, ops):
    nl = cfg.nonlinearity
    lambda1 = nl.lambda1
    if lambda1 is None:
        lambda1 = dirichlet_eigs(ops, 1, tol=cfg.solver.eig_tol)[0].lam
    mu1 = nl.mu1
    needs_mu1 = nl.kind != "pure_linear" and nl.f_inf > 0
    if mu1 is None:
        mu1 = nodewise_cubic_eigenpair(ops).mu if needs_mu1 else 1.0
    return make_nonlinearity(
        nl.kind,
        f0=nl.f0,
        f_inf=nl.f_inf,
        f0_tilde=nl.f0_tilde,
        a=cfg.problem.a,
        b=cfg.problem.b,
        lambda1=lambda1,
        mu1=mu1,
    )


def _out_path(cfg, name):
    return os.path.join(cfg.outputs.directory, name)


def _run_eig_linear(cfg):
    ops = _build_operators(cfg)
    pairs = dirichlet_eigs(ops, cfg.solver.eig_count, tol=cfg.solver.eig_tol)
    buf = io.StringIO()
    buf.write("index,lambda,residual\n")
    for p in pairs:
        buf.write("{},{},{}\n".format(p.index, _fmt(p.lam), _fmt(p.residual)))
    _atomic_write(_out_path(cfg, "eigenpairs.csv"), buf.getvalue())
    if cfg.outputs.dump_fields:
        for p in pairs:
            text = "\n".join(_fmt(v) for v in p.phi.values) + "\n"
            _atomic_write(_out_path(cfg, "phi_{}.csv".format(p.index)), text)
    return 0


def _run_eig_nonlocal(cfg):
    ops = _build_operators(cfg)
    rng = np.random.default_rng(cfg.seed)
    seed_vals = np.abs(rng.standard_normal(ops.interior_count)) + 0.1
    pair1 = minimize_mu1(
        ops, ops.field(seed_vals), tol=cfg.solver.mu_tol, seed_id="config-seed-{}".format(cfg.seed)
    )
    pair2 = estimate_mu2(ops, tol=cfg.solver.mu_tol)
    report = isolation_probe(ops, pair1, pair2, rng_seed=cfg.seed, tol=cfg.solver.mu_tol)

    buf = io.StringIO()
    buf.write("mu,residual,iterations,seed_id\n")
    for p in (pair1, pair2):
        buf.write("{},{},{},{}\n".format(_fmt(p.mu), _fmt(p.residual), p.iterations, p.converged_from))
    _atomic_write(_out_path(cfg, "nonlocal.csv"), buf.getvalue())
    _atomic_write(_out_path(cfg, "gap_report.json"), report.to_json() + "\n")
    if cfg.outputs.dump_fields:
        for name, p in (("psi1", pair1), ("psi2", pair2)):
            text = "\n".join(_fmt(v) for v in p.psi.values) + "\n"
            _atomic_write(_out_path(cfg, "{}.csv".format(name)), text)
    return 0 if report.consistent else 1


def _branch_csv_text(branch):
    buf = io.StringIO()
    buf.write(
        "step,arc_param,lambda,h1_norm,l2_norm,sup_norm,min_value,"
        "residual_norm,newton_iters,positive\n"
    )
    for i, p in enumerate(branch.points):
        buf.write(
            "{},{},{},{},{},{},{},{},{},{}\n".format(
                i,
                _fmt(p.arc_param),
                _fmt(p.lam),
                _fmt(p.h1_norm),
                _fmt(p.l2_norm),
                _fmt(p.sup_norm),
                _fmt(p.min_value),
                _fmt(p.residual_norm),
                p.newton_iters,
                p.positive,
            )
        )
    return buf.getvalue()


def _run_branch(cfg):
    ops = _build_operators(cfg)
    f = _build_nonlinearity(cfg, ops)
    params = ProblemParams(cfg.problem.a, cfg.problem.b, ops, f)
    origin = cont.detect_primary_bifurcation(params, eig_tol=cfg.solver.eig_tol)
    branch = cont.continue_branch(
        params,
        origin,
        cfg.continuation.step_ds,
        cfg.continuation.max_steps,
        cfg.continuation.max_norm,
        tol=cfg.solver.newton_tol,
    )
    asym = cont.estimate_asymptote(branch) if len(branch.points) >= 10 else None
    branch.asymptote_estimate = asym
    _atomic_write(_out_path(cfg, "branch.csv"), _branch_csv_text(branch))
    _atomic_write(
        _out_path(cfg, "asymptote.json"),
        json.dumps(
            {
                "origin_lambda": origin.lambda_star,
                "lambda1_disc": origin.lambda1_disc,
                "termination": branch.termination,
                "notes": branch.notes,
                "points": len(branch.points),
                "asymptote": None
                if asym is None
                else {
                    "lambda_inf": asym.lambda_inf,
                    "uncertainty": asym.uncertainty,
                    "reliable": asym.reliable,
                },
            },
            indent=2,
        )
        + "\n",
    )
    return 0 if branch.termination in ("max_norm_reached", "max_steps") else 1


def _run_sweep_a(cfg):
    if cfg.problem.a != 0.0:
        print("sweep-a requires problem.a = 0", file=sys.stderr)
        return 1
    ops = _build_operators(cfg)
    f = _build_nonlinearity(cfg, ops)
    params = ProblemParams(0.0, cfg.problem.b, ops, f)
    settings = cont.ContinuationSettings(
        cfg.continuation.step_ds,
        cfg.continuation.max_steps,
        cfg.continuation.max_norm,
        tol=cfg.solver.newton_tol,
    )
    report = cont.vanishing_a_sweep(params, cfg.sweep.n_list, settings)
    _atomic_write(_out_path(cfg, "family_report.json"), report.to_json() + "\n")
    for m in report.members:
        if not m.failed:
            _atomic_write(
                _out_path(cfg, "branch_n{}.csv".format(m.n)), _branch_csv_text(m.branch)
            )
    any_failed = any(m.failed for m in report.members)
    return 1 if any_failed else 0


def _run_properties(cfg):
    ops = _build_operators(cfg)
    f = _build_nonlinearity(cfg, ops)
    params = ProblemParams(cfg.problem.a, cfg.problem.b, ops, f)
    rng = np.random.default_rng(cfg.seed)
    m = ops.interior_count
    checks = []

    # assembly positivity and quartic homogeneity
    worst = 0.0
    ok = True
    for _ in range(20):
        u = rng.standard_normal(m)
        e = u @ (ops.stiffness @ u)
        ok = ok and e > 0
        q1 = integrate_power(ops.field(3.0 * u), 4, ops)
        q0 = integrate_power(ops.field(u), 4, ops)
        worst = max(worst, abs(q1 - 81.0 * q0) / abs(q1))
    checks.append(("assembly_positivity_and_quartic_homogeneity", ok and worst < 1e-12, worst))

    # Picone nonnegativity on random pairs
    worst = 0.0
    for _ in range(50):
        u = ops.field(rng.standard_normal(m))
        v = ops.field(np.abs(rng.standard_normal(m)) + 0.5)
        scale = ops.h1_norm(u.values) ** 2 + ops.h1_norm(v.values) ** 2
        worst = min(worst, picone_defect(u, v, ops) / scale)
    checks.append(("picone_nonnegativity", worst >= -1e-10, worst))

    # monotonicity chain of the Kirchhoff-Laplace operator
    worst = 0.0
    for _ in range(100):
        u = ops.field(rng.standard_normal(m))
        v = ops.field(rng.standard_normal(m))
        scale = (ops.h1_norm(u.values) ** 2 + ops.h1_norm(v.values) ** 2) ** 2
        worst = min(worst, monotonicity_gap(u, v, params) / scale)
    checks.append(("kirchhoff_monotonicity", worst >= -1e-12, worst))

    # solve_S residual and degree-3 homogeneity
    worst_r, worst_h = 0.0, 0.0
    for _ in range(20):
        g = ops.field(rng.standard_normal(m))
        u = solve_S(g, params)
        ku = ops.stiffness @ u.values
        lhs = params.b * (u.values @ ku) * ku
        rhs = ops.mass @ g.values
        worst_r = max(worst_r, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
        u8 = solve_S(ops.field(8.0 * g.values), params)
        worst_h = max(
            worst_h,
            np.linalg.norm(u8.values - 2.0 * u.values) / np.linalg.norm(u.values),
        )
    checks.append(("solve_S_residual_and_homogeneity", max(worst_r, worst_h) < 1e-10, max(worst_r, worst_h)))

    # Jacobian against central finite differences
    worst = 0.0
    for _ in range(20):
        u = ops.field(rng.standard_normal(m))
        d = rng.standard_normal(m)
        d /= np.linalg.norm(d)
        eps = 1e-6 * (1.0 + np.linalg.norm(u.values))
        rp = residual(ops.field(u.values + eps * d), 1.3, params)
        rm = residual(ops.field(u.values - eps * d), 1.3, params)
        fd = (rp - rm) / (2.0 * eps)
        jd = dense_jacobian(u, 1.3, params) @ d
        worst = max(worst, np.linalg.norm(fd - jd) / np.linalg.norm(jd))
    checks.append(("jacobian_finite_difference", worst < 1e-6, worst))

    # Sherman-Morrison vs dense on a small mesh
    small_ops = assemble_operators(build_mesh("interval", (0.0, 1.0), 33))
    small_params = ProblemParams(cfg.problem.a, cfg.problem.b, small_ops, f)
    worst = 0.0
    for _ in range(10):
        u = small_ops.field(rng.standard_normal(small_ops.interior_count))
        rhs = rng.standard_normal(small_ops.interior_count)
        x = jacobian_solve(u, 0.7, small_params, rhs)
        xd = np.linalg.solve(dense_jacobian(u, 0.7, small_params), rhs)
        worst = max(worst, np.linalg.norm(x - xd) / np.linalg.norm(xd))
    checks.append(("sherman_morrison_vs_dense", worst < 1e-10, worst))

    # branch-law column check for a previously written pure_linear branch
    branch_csv = _out_path(cfg, "branch.csv")
    if cfg.nonlinearity.kind == "pure_linear" and os.path.exists(branch_csv):
        lam1 = dirichlet_eigs(ops, 1, tol=cfg.solver.eig_tol)[0].lam
        worst = 0.0
        with open(branch_csv) as fh:
            next(fh)
            for line in fh:
                fields = line.strip().split(",")
                lam, h1 = float(fields[2]), float(fields[3])
                law = lam1 * (cfg.problem.a + cfg.problem.b * h1**2)
                worst = max(worst, abs(lam - law) / abs(lam))
        checks.append(("example_branch_law", worst < 1e-6, worst))

    all_ok = all(ok for _, ok, _ in checks)
    for name, ok, value in checks:
        print("{:4s} {:45s} {:.3e}".format("PASS" if ok else "FAIL", name, value))
    return 0 if all_ok else 1


_RUNNERS = {
    "eig-linear": _run_eig_linear,
    "eig-nonlocal": _run_eig_nonlocal,
    "branch": _run_branch,
    "sweep-a": _run_sweep_a,
    "properties": _run_properties,
}


def run_command(subcommand, config_path, overrides=()) -> int:
    """Run one subcommand; returns the exit status (0 ok, 1 failure, 2 usage)."""
    if subcommand not in _RUNNERS:
        print("unknown subcommand {!r}".format(subcommand), file=sys.stderr)
        return 2
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    try:
        return _RUNNERS[subcommand](cfg)
    except KirchhoffError as exc:
        print("solver failure: {}".format(exc), file=sys.stderr)
        return 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kirchhoff",
        description="Eigenvalues and bifurcation branches of nonlocal Kirchhoff problems",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON experiment config")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY.SUB=VALUE",
        help="dotted-key config override (repeatable)",
    )
    args = parser.parse_args(argv)
    sys.exit(run_command(args.subcommand, args.config, args.overrides))


if __name__ == "__main__":
    main()
