"""Estimator-style facade over the solver, reconstruction and error estimator."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import duality, estimator
from .fespace import barycentric_coords, i_av
from .solver import NewtonConfig, newton_solve
from .quadrature import integrate
from .validation import check_element_data, check_mesh, check_params, check_points


def locate_points(mesh, X, tol=1e-12):
    """Index of an element containing each point, ``-1`` if outside.

    Brute force over all elements, chunked to bound memory.
    """
    X = np.asarray(X, dtype=float)
    chunk = max(1, 2_000_000 // mesh.n_elements)
    out = -np.ones(len(X), dtype=np.int64)
    elems = np.arange(mesh.n_elements)
    for s in range(0, len(X), chunk):
        pts = X[s:s + chunk]
        lam = barycentric_coords(mesh, elems, np.broadcast_to(pts, (mesh.n_elements,) + pts.shape))
        inside = np.all(lam >= -tol, axis=-1)  # (nt, m)
        hit = inside.any(axis=0)
        out[s:s + chunk] = np.where(hit, np.argmax(inside, axis=0), -1)
    return out


class PDirichletCR(BaseEstimator):
    """Crouzeix-Raviart solver for ``-div A(grad u) = f`` with zero Dirichlet data.

    Parameters
    ----------
    p : float
        Growth exponent, ``p > 1``.
    delta : float
        Shift, ``delta >= 0``.
    tau_abs, tau_rel : float
        Newton residual tolerances.
    max_iter : int
        Newton iteration cap.

    Attributes
    ----------
    u_ : CrFunction
    z_ : Rt0Function
        Reconstructed discrete flux.
    f_h_ : ndarray
        Element means of the right-hand side.
    newton_report_ : NewtonReport
    """

    def __init__(self, p=2.0, delta=0.0, tau_abs=1e-8, tau_rel=1e-10, max_iter=100):
        self.p = p
        self.delta = delta
        self.tau_abs = tau_abs
        self.tau_rel = tau_rel
        self.max_iter = max_iter

    def fit(self, mesh, f=None):
        """Solve on ``mesh``.

        ``f`` is a callable on points ``(..., 2)`` (projected with a degree-7
        rule), an array of element values, or ``None`` for ``f = 0``.
        """
        mesh = check_mesh(mesh)
        params = check_params(self.p, self.delta)
        if f is None:
            f_h = np.zeros(mesh.n_elements)
        elif callable(f):
            f_h = integrate(mesh, lambda x, e: f(x), 7) / mesh.area
        else:
            f_h = check_element_data(f, mesh, "f")
        cfg = NewtonConfig(tau_abs=self.tau_abs, tau_rel=self.tau_rel, max_iter=self.max_iter)
        u, report = newton_solve(params, mesh, f_h, cfg)
        if not report.converged:
            raise RuntimeError(f"Newton did not converge (residual {report.final_residual:.3e})")
        self.params_ = params
        self.mesh_ = mesh
        self.f_h_ = f_h
        self.u_ = u
        self.newton_report_ = report
        self.z_ = duality.marini_reconstruct(params, mesh, u, f_h)
        return self

    def predict(self, X):
        """Values of the discrete solution at points ``X`` of shape ``(n, 2)``.

        Points outside the mesh give ``nan``.
        """
        check_is_fitted(self, "u_")
        X = check_points(X)
        elems = locate_points(self.mesh_, X)
        out = np.full(len(X), np.nan)
        ok = elems >= 0
        if np.any(ok):
            lam = barycentric_coords(self.mesh_, elems[ok], X[ok][:, None, :])[:, 0, :]
            U = self.u_.local_values()[elems[ok]]
            out[ok] = np.sum(U * (1.0 - 2.0 * lam), axis=1)
        return out

    def transform(self, X):
        """Broken gradient of the solution at points ``X``; shape ``(n, 2)``."""
        check_is_fitted(self, "u_")
        X = check_points(X)
        elems = locate_points(self.mesh_, X)
        out = np.full((len(X), 2), np.nan)
        ok = elems >= 0
        out[ok] = self.u_.grad()[elems[ok]]
        return out

    def estimate(self):
        """Local primal-dual indicators for ``v = i_av(u)``."""
        check_is_fitted(self, "u_")
        v = i_av(self.u_)
        return estimator.eta_local(self.params_, self.mesh_, v, self.u_, self.z_)

    def energies(self):
        check_is_fitted(self, "u_")
        return duality.check_optimality(self.params_, self.mesh_, self.u_, self.z_, self.f_h_).energies
