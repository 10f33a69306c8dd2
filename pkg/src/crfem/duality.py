"""Discrete primal and dual energies and the Marini flux reconstruction."""

from dataclasses import dataclass

import numpy as np

from . import nfun
from .fespace import normal_jumps_affine, rt0_from_affine


class ConformityError(ValueError):
    """Reconstructed flux has normal jumps beyond tolerance."""


@dataclass(frozen=True)
class EnergyPair:
    primal: float
    dual: float

    @property
    def gap(self):
        return self.primal - self.dual


@dataclass(frozen=True)
class OptimalityReport:
    div_residual: float
    fenchel_young: float
    projection_residual: float
    gap: float
    energies: EnergyPair


def primal_energy(params, mesh, v, f_h):
    """``sum_T |T| (phi(|grad_h v|) - f_h Pi_h v)``; exact for CR ``v``."""
    g = np.linalg.norm(v.grad(), axis=1)
    return float(np.sum(mesh.area * (nfun.phi(params, g) - np.asarray(f_h) * v.mean())))


def dual_energy(params, mesh, y, f_h, rtol=1e-10):
    """``-sum_T |T| phi*(|Pi_h y|)`` when ``div y = -f_h``, else ``-inf``.

    The divergence constraint is checked element-wise relative to
    ``max(1, max |f_h|)``.
    """
    f_h = np.asarray(f_h, dtype=float)
    scale = max(1.0, float(np.max(np.abs(f_h))) if f_h.size else 1.0)
    if np.max(np.abs(y.div() + f_h)) > rtol * scale:
        return -np.inf
    s = np.linalg.norm(y.mean(), axis=1)
    return float(-np.sum(mesh.area * nfun.phi_conj(params, s)))


def marini_affine(params, mesh, u, f_h):
    """Element-wise data ``(a, b)`` of ``A(grad_h u) - f_h / 2 (x - x_T)``."""
    f_h = np.asarray(f_h, dtype=float)
    b = -0.5 * f_h
    a = nfun.op_A(params, u.grad()) + 0.5 * f_h[:, None] * mesh.x_T
    return a, b


def marini_jumps(params, mesh, u, f_h):
    """Normal jumps of the element-wise Marini field on interior sides."""
    a, b = marini_affine(params, mesh, u, f_h)
    return normal_jumps_affine(mesh, a, b)


def marini_reconstruct(params, mesh, u, f_h, tol=1e-6):
    """Discrete dual solution from the CR solution ``u``.

    The element-wise field is normal-continuous exactly when ``u`` solves the
    discrete problem. A relative normal jump above ``tol`` raises
    :class:`ConformityError`, which signals a non-converged ``u``.
    """
    a, b = marini_affine(params, mesh, u, f_h)
    jumps = normal_jumps_affine(mesh, a, b)
    if jumps.size:
        scale = max(float(np.max(np.abs(a + b[:, None] * mesh.x_T))), np.finfo(float).tiny)
        rel = float(np.max(np.abs(jumps))) / scale
        if rel > tol:
            raise ConformityError(f"normal jump {rel:.3e} exceeds {tol:.1e}; is u converged?")
    return rt0_from_affine(mesh, a, b)


def check_optimality(params, mesh, u, z, f_h):
    """Residuals of the discrete optimality relations and the duality gap.

    ``div_residual`` is ``max |div z + f_h|`` over ``max(1, max |f_h|)`` and
    ``projection_residual`` is ``max |Pi_h z - A(grad_h u)|`` over
    ``max(1, max |A(grad_h u)|)``, so both stay meaningful when the data
    blow up near a singularity.
    """
    f_h = np.asarray(f_h, dtype=float)
    gu = u.grad()
    pz = z.mean()
    Au = nfun.op_A(params, gu)
    fy = (np.sum(pz * gu, axis=1) - nfun.phi_conj(params, np.linalg.norm(pz, axis=1))
          - nfun.phi(params, np.linalg.norm(gu, axis=1)))
    primal = primal_energy(params, mesh, u, f_h)
    dual = dual_energy(params, mesh, z, f_h)
    return OptimalityReport(
        div_residual=float(np.max(np.abs(z.div() + f_h))) / max(1.0, float(np.max(np.abs(f_h)))),
        fenchel_young=float(np.max(np.abs(fy))),
        projection_residual=float(np.max(np.abs(pz - Au))) / max(1.0, float(np.max(np.abs(Au)))),
        gap=primal - dual,
        energies=EnergyPair(primal, dual),
    )

