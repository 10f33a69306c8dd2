"""Adaptive and uniform solve-estimate-(mark)-refine loops."""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import duality, estimator
from .bench.errors import error_F, error_Fstar, rhs_projection, rho_squared
from .fespace import i_av, prolongate_cr
from .mesh import doerfler_mark, red_refine, rgb_refine
from .solver import NewtonConfig, newton_solve


class SolverFailure(RuntimeError):
    def __init__(self, level, report):
        super().__init__(f"Newton did not converge on level {level} "
                         f"(final residual {report.final_residual:.3e})")
        self.level = level
        self.report = report


@dataclass(frozen=True)
class AfemConfig:
    """Loop parameters.

    ``problem`` is a manufactured case exposing ``f``, ``grad_u``, ``z`` and
    ``singular_point`` (see :mod:`crfem.bench.cases`).
    """

    params: object
    problem: object
    theta: float = 0.5
    max_levels: int = 20
    eps_stop: float = 0.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    warm_start: bool = True
    estimator_degree: int = 5
    keep_fields: bool = False

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.eps_stop < 0:
            raise ValueError("eps_stop must be >= 0")


@dataclass
class AfemRecord:
    level: int
    n_dofs: int
    n_elements: int
    h: float
    eta2: float
    eta2_A: float
    eta2_B: float
    rho2: float
    e_F: float
    e_Fstar: float
    eta2_F_grad: float
    eta2_F_flux: float
    osc: float
    primal: float
    dual: float
    newton_iterations: int
    newton_converged: bool
    newton_residual: float
    max_jump: float
    div_residual: float
    projection_residual: float
    eta_A_min: float
    eta_B_min: float
    n_marked: int = 0
    bulk_ratio: float = float("nan")
    wall_time: float = 0.0
    fields: dict = field(default=None, repr=False)

    @property
    def eta2_F(self):
        return self.eta2_F_grad + self.eta2_F_flux

    @property
    def gap(self):
        return self.primal - self.dual

    def to_dict(self):
        d = asdict(self)
        d.pop("fields")
        return d


def solve_level(config, mesh, level, u0=None):
    """Solve, reconstruct and estimate on one mesh.

    Returns ``(record, u, indicators)`` with the element indicators ``eta_T``.
    """
    t0 = time.perf_counter()
    params, case = config.params, config.problem
    f_h = rhs_projection(mesh, case)
    u, report = newton_solve(params, mesh, f_h, config.newton, u0)
    if not report.converged:
        raise SolverFailure(level, report)
    z = duality.marini_reconstruct(params, mesh, u, f_h)
    a, b = duality.marini_affine(params, mesh, u, f_h)
    jumps = duality.marini_jumps(params, mesh, u, f_h)
    opt = duality.check_optimality(params, mesh, u, z, f_h)
    v = i_av(u)
    est = estimator.eta_local(params, mesh, v, u, z, config.estimator_degree)
    gF, fF = estimator.eta_F(params, mesh, v, u, z, config.estimator_degree)
    osc_T = estimator.osc(params, mesh, v, case.f, f_h, config.estimator_degree,
                          singular_point=case.singular_point)
    zscale = max(float(np.max(np.linalg.norm(a + b[:, None] * mesh.x_T, axis=1))), 1e-300)
    rec = AfemRecord(
        level=level,
        n_dofs=mesh.n_interior_sides,
        n_elements=mesh.n_elements,
        h=mesh.mesh_size,
        eta2=est.total, eta2_A=est.total_A, eta2_B=est.total_B,
        rho2=rho_squared(params, mesh, v, case),
        e_F=error_F(params, mesh, u, case),
        e_Fstar=error_Fstar(params, mesh, z, case),
        eta2_F_grad=gF, eta2_F_flux=fF,
        osc=float(osc_T.sum()),
        primal=opt.energies.primal, dual=opt.energies.dual,
        newton_iterations=report.iterations,
        newton_converged=report.converged,
        newton_residual=report.final_residual,
        max_jump=float(np.max(np.abs(jumps))) / zscale if jumps.size else 0.0,
        div_residual=opt.div_residual,
        projection_residual=opt.projection_residual,
        eta_A_min=float(est.eta_A.min()),
        eta_B_min=float(est.eta_B.min()),
    )
    if config.keep_fields:
        rec.fields = {"mesh": mesh, "eta_A": est.eta_A, "eta_B": est.eta_B, "osc": osc_T}
    rec.wall_time = time.perf_counter() - t0
    return rec, u, est.eta


def run_afem(config, mesh=None):
    """Adaptive loop with Doerfler marking and red-green-blue refinement.

    Stops after ``max_levels`` levels or once ``eta^2 <= eps_stop``.
    """
    mesh = mesh if mesh is not None else config.problem.initial_mesh()
    records = []
    u = None
    for level in range(config.max_levels):
        u0 = prolongate_cr(u, mesh) if (config.warm_start and u is not None) else None
        rec, u, eta = solve_level(config, mesh, level, u0)
        records.append(rec)
        if rec.eta2 <= config.eps_stop or level == config.max_levels - 1:
            break
        marked = doerfler_mark(eta, config.theta)
        rec.n_marked = int(marked.size)
        rec.bulk_ratio = float(eta[marked].sum() / eta.sum())
        mesh = rgb_refine(mesh, marked)
    return records


def run_uniform(config, mesh=None, levels=5):
    """Same records under uniform red refinement for ``levels`` levels."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    mesh = mesh if mesh is not None else config.problem.initial_mesh()
    records = []
    u = None
    for level in range(levels):
        if level:
            mesh = red_refine(mesh)
        u0 = prolongate_cr(u, mesh) if (config.warm_start and u is not None) else None
        rec, u, _ = solve_level(config, mesh, level, u0)
        records.append(rec)
    return records
