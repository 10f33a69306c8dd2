"""Primal-dual a posteriori error estimator and data oscillation.

For a conforming ``v``, the CR solution ``u`` and its reconstructed flux
``z``, the local contributions are

* ``eta_A[T] = int_T phi(|grad v|) - (Pi_h z, grad v - grad_h u) - phi(|grad_h u|)``
* ``eta_B[T] = int_T phi*(|z|) - phi*(|Pi_h z|)``

The first is exact (all arguments constant on ``T``). The second is
evaluated as the integral of the Bregman divergence of ``phi*`` at
``Pi_h z``, which has the same value because ``z - Pi_h z`` has zero mean,
but avoids subtracting two nearly equal integrals.
"""

from dataclasses import dataclass

import numpy as np

from . import nfun
from .quadrature import integrate


@dataclass(frozen=True)
class EstimatorReport:
    eta_A: np.ndarray
    eta_B: np.ndarray

    @property
    def eta(self):
        return self.eta_A + self.eta_B

    @property
    def total(self):
        return float(self.eta.sum())

    @property
    def total_A(self):
        return float(self.eta_A.sum())

    @property
    def total_B(self):
        return float(self.eta_B.sum())


def eta_A_local(params, mesh, v, u, z):
    gv, gu, pz = v.grad(), u.grad(), z.mean()
    dens = (nfun.phi(params, np.linalg.norm(gv, axis=1)) - nfun.phi(params, np.linalg.norm(gu, axis=1))
            - np.sum(pz * (gv - gu), axis=1))
    return mesh.area * dens


def eta_B_local(params, mesh, z, degree=5):
    pz = z.mean()

    def integrand(x, elems):
        w = np.broadcast_to(pz[elems, None, :], x.shape)
        return nfun.bregman_phi_conj(params, z.eval(x, elems), w)

    return integrate(mesh, integrand, degree)


def eta_local(params, mesh, v, u, z, degree=5):
    """Local indicators; ``v`` is conforming (typically ``i_av(u)``)."""
    return EstimatorReport(eta_A_local(params, mesh, v, u, z), eta_B_local(params, mesh, z, degree))


def eta_F(params, mesh, v, u, z, degree=5):
    """``|F(grad v) - F(grad_h u)|^2 + |F*(z) - F*(Pi_h z)|^2``; returns both parts."""
    d = nfun.map_F(params, v.grad()) - nfun.map_F(params, u.grad())
    grad_part = float(np.sum(mesh.area * np.sum(d * d, axis=1)))
    Fpz = nfun.map_Fstar(params, z.mean())

    def integrand(x, elems):
        e = nfun.map_Fstar(params, z.eval(x, elems)) - Fpz[elems, None, :]
        return np.sum(e * e, axis=-1)

    flux_part = float(integrate(mesh, integrand, degree).sum())
    return grad_part, flux_part


def osc(params, mesh, v, f, f_h, degree=5, singular_point=None):
    """Element-wise ``int_T (phi_{|grad v|})*(h_T |f - f_h|)``.

    ``f`` is a callable on points ``(..., 2)``; ``f_h`` element-wise constants.
    """
    shift = np.linalg.norm(v.grad(), axis=1)
    f_h = np.asarray(f_h, dtype=float)

    def integrand(x, elems):
        s = mesh.h_T[elems, None] * np.abs(f(x) - f_h[elems, None])
        return nfun.phi_shifted_conj(params, np.broadcast_to(shift[elems, None], s.shape), s)

    return integrate(mesh, integrand, degree, singular_point=singular_point)
