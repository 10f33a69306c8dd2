"""Newton solver for the discrete p-Dirichlet problem.

Both the Crouzeix-Raviart and the conforming P1 discretizations reduce to a
residual ``R(u)`` and a symmetric Jacobian ``K(u)`` assembled from
element-wise constant gradients, so the element integrals are exact and
only the conforming right-hand side needs quadrature.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import nfun
from .fespace import CrFunction, S1Function, barycentric_coords, barycentric_grads, cr_basis_grads
from .mesh import DIRICHLET
from .quadrature import integrate


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping and line-search parameters.

    The iteration stops once ``|R| <= max(tau_abs, tau_rel * |R(u0)|)``.
    With ``polish`` set, up to ``polish_steps`` further full Newton steps are
    taken after that point (kept only while they reduce the residual), which
    drives the residual to roundoff.
    """

    tau_abs: float = 1e-8
    tau_rel: float = 1e-10
    max_iter: int = 100
    beta: float = 0.5
    max_backtracks: int = 30
    kappa: float = 1e-12
    polish: bool = True
    polish_steps: int = 2

    def __post_init__(self):
        if self.tau_abs <= 0 or self.tau_rel <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")


@dataclass
class NewtonReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    converged: bool = False
    polish_iterations: int = 0

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")


def _regularize(params, grads, kappa):
    if params.p < 2.0 and params.delta == 0.0 and kappa > 0:
        r = np.linalg.norm(grads, axis=1)
        small = r < kappa
        if np.any(small):
            grads = grads.copy()
            g = grads[small]
            rs = r[small]
            unit = np.where(rs[:, None] > 0, g / np.where(rs > 0, rs, 1.0)[:, None], np.array([1.0, 0.0]))
            grads[small] = kappa * unit
    return grads


def _assemble_matrix(mesh, dofs, G, D, n):
    """``sum_T |T| G_i^T D G_j`` scattered to the global ``(n, n)`` matrix."""
    local = mesh.area[:, None, None] * np.einsum("mid,mde,mje->mij", G, D, G)
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K


# -- Crouzeix-Raviart ----------------------------------------------------------

def assemble_residual_cr(params, mesh, u, f_h):
    """``(A(grad_h u), grad_h phi_S) - (f_h, Pi_h phi_S)`` for every side.

    Dirichlet components are set to zero.
    """
    G = cr_basis_grads(mesh)
    Au = nfun.op_A(params, u.grad())
    local = mesh.area[:, None] * (np.einsum("md,mid->mi", Au, G) - np.asarray(f_h)[:, None] / 3.0)
    r = np.bincount(mesh.elem_sides.ravel(), weights=local.ravel(), minlength=mesh.n_sides)
    r[mesh.side_label == DIRICHLET] = 0.0
    return r


def assemble_jacobian_cr(params, mesh, u, kappa=1e-12):
    """Sparse Jacobian ``sum_T |T| grad phi_j . DA(grad_h u) grad phi_i`` (all sides)."""
    G = cr_basis_grads(mesh)
    D = nfun.op_DA(params, _regularize(params, u.grad(), kappa))
    return _assemble_matrix(mesh, mesh.elem_sides, G, D, mesh.n_sides)


def energy_cr(params, mesh, u, f_h):
    """Discrete energy ``sum_T |T| (phi(|grad_h u|) - f_h Pi_h u)``."""
    g = np.linalg.norm(u.grad(), axis=1)
    return float(np.sum(mesh.area * (nfun.phi(params, g) - np.asarray(f_h) * u.mean())))


def newton_solve(params, mesh, f_h, config=None, u0=None):
    """Solve the CR problem; returns ``(CrFunction, NewtonReport)``."""
    config = config or NewtonConfig()
    f_h = np.asarray(f_h, dtype=float)
    if f_h.shape != (mesh.n_elements,):
        raise ValueError("f_h must hold one value per element")
    x0 = np.zeros(mesh.n_sides) if u0 is None else np.array(u0.values, dtype=float)
    free = np.flatnonzero(mesh.side_label != DIRICHLET)
    x0[mesh.side_label == DIRICHLET] = 0.0
    x, report = _newton(
        lambda x: assemble_residual_cr(params, mesh, CrFunction(mesh, x), f_h),
        lambda x: assemble_jacobian_cr(params, mesh, CrFunction(mesh, x), config.kappa),
        lambda x: energy_cr(params, mesh, CrFunction(mesh, x), f_h),
        x0, free, config)
    return CrFunction(mesh, x), report


# -- conforming P1 -----------------------------------------------------------

def load_vector_s1(mesh, f, degree=5, singular_point=None):
    """``(f, lambda_z)`` for every vertex ``z`` by quadrature."""
    def integrand(x, elems):
        return np.asarray(f(x))[..., None] * barycentric_coords(mesh, elems, x)

    local = integrate(mesh, integrand, degree, singular_point=singular_point)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def assemble_residual_s1(params, mesh, u, load):
    G = barycentric_grads(mesh)
    Au = nfun.op_A(params, u.grad())
    local = mesh.area[:, None] * np.einsum("md,mid->mi", Au, G)
    r = np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices) - load
    r[mesh.dirichlet_vertices] = 0.0
    return r


def assemble_jacobian_s1(params, mesh, u, kappa=1e-12):
    G = barycentric_grads(mesh)
    D = nfun.op_DA(params, _regularize(params, u.grad(), kappa))
    return _assemble_matrix(mesh, mesh.triangles, G, D, mesh.n_vertices)


def energy_s1(params, mesh, u, load):
    g = np.linalg.norm(u.grad(), axis=1)
    return float(np.sum(mesh.area * nfun.phi(params, g)) - load @ u.values)


def newton_solve_s1(params, mesh, f, config=None, u0=None, degree=5, singular_point=None):
    """Solve the conforming P1 problem with right-hand side ``(f, v)``.

    ``f`` is a callable on points ``(..., 2)``, or a precomputed load vector.
    """
    config = config or NewtonConfig()
    load = np.asarray(f, dtype=float) if not callable(f) else load_vector_s1(mesh, f, degree, singular_point)
    x0 = np.zeros(mesh.n_vertices) if u0 is None else np.array(u0.values, dtype=float)
    x0[mesh.dirichlet_vertices] = 0.0
    free = np.setdiff1d(np.arange(mesh.n_vertices), mesh.dirichlet_vertices)
    x, report = _newton(
        lambda x: assemble_residual_s1(params, mesh, S1Function(mesh, x), load),
        lambda x: assemble_jacobian_s1(params, mesh, S1Function(mesh, x), config.kappa),
        lambda x: energy_s1(params, mesh, S1Function(mesh, x), load),
        x0, free, config)
    return S1Function(mesh, x), report


# -- driver --------------------------------------------------------------------

def _newton(residual, jacobian, energy, x, free, config):
    """Damped Newton iteration on the free components.

    A trial step is accepted once both the residual norm decreases and the
    (convex) energy does not increase beyond roundoff; otherwise the step
    length is multiplied by ``beta``.
    """
    report = NewtonReport()
    r = residual(x)
    nr = float(np.linalg.norm(r[free]))
    E = energy(x)
    report.residuals.append(nr)
    report.energies.append(E)
    tol = max(config.tau_abs, config.tau_rel * nr)
    if nr <= tol:
        report.converged = True
    it = 0
    while not report.converged and it < config.max_iter:
        x, r, nr, E, ok = _step(residual, jacobian, energy, x, r, nr, E, free, config, report)
        it += 1
        report.iterations = it
        if nr <= tol:
            report.converged = True
        elif not ok:
            break
    if report.converged and config.polish and nr > 0:
        for _ in range(config.polish_steps):
            x_new, r_new, nr_new, E_new, ok = _step(residual, jacobian, energy, x, r, nr, E, free,
                                                    config, report, max_backtracks=0)
            if not ok:
                break
            x, r, nr, E = x_new, r_new, nr_new, E_new
            report.polish_iterations += 1
    return x, report


def _step(residual, jacobian, energy, x, r, nr, E, free, config, report, max_backtracks=None):
    nb = config.max_backtracks if max_backtracks is None else max_backtracks
    K = jacobian(x)
    Kff = K[free][:, free].tocsc()
    d = np.zeros_like(x)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            d[free] = spsolve(Kff, -r[free])
        except MatrixRankWarning as exc:
            raise np.linalg.LinAlgError(
                "singular Jacobian; with delta = 0 and p > 2 start from a nonzero guess") from exc
    if not np.all(np.isfinite(d)):
        raise np.linalg.LinAlgError("linear solve produced non-finite values")
    step = 1.0
    slack = 1e-12 * (1.0 + abs(E))
    for _ in range(nb + 1):
        xt = x + step * d
        rt = residual(xt)
        nrt = float(np.linalg.norm(rt[free]))
        Et = energy(xt)
        if nrt < nr and Et <= E + slack:
            report.residuals.append(nrt)
            report.steps.append(step)
            report.energies.append(Et)
            return xt, rt, nrt, Et, True
        step *= config.beta
    return x, r, nr, E, False
