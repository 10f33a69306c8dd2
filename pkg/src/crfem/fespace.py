"""Finite element spaces on a :class:`~crfem.mesh.Triangulation`.

Crouzeix-Raviart functions carry one value per side (the value at the side
midpoint), lowest-order Raviart-Thomas fields one normal flux per side
(relative to the global side normal ``mesh.n_S``), conforming P1 functions one
value per vertex. Element-wise constants are plain arrays of length
``n_elements``.

Coefficient vectors always have full length; entries on Dirichlet sides or
vertices (CR, P1) and on Neumann sides (RT0) are kept at zero.
"""

from dataclasses import dataclass

import numpy as np

from . import nfun
from .mesh import DIRICHLET, NEUMANN
from .quadrature import integrate


# -- element geometry --------------------------------------------------------

def barycentric_grads(mesh):
    """Gradients of the barycentric coordinates, shape ``(nt, 3, 2)``."""
    return -mesh.elem_side_lengths[..., None] * mesh.elem_normals / (2.0 * mesh.area[:, None, None])


def cr_basis_grads(mesh):
    """Gradients of the local CR basis ``1 - 2 lambda_i``, shape ``(nt, 3, 2)``."""
    return -2.0 * barycentric_grads(mesh)


def map_to_elements(mesh, bary, elems=None):
    """Physical points of barycentric coordinates ``(q, 3)``; shape ``(m, q, 2)``."""
    tri = mesh.triangles if elems is None else mesh.triangles[elems]
    return np.einsum("qk,mkd->mqd", bary, mesh.vertices[tri])


def barycentric_coords(mesh, elems, x):
    """Barycentric coordinates of points ``x`` (shape ``(m, q, 2)``) in ``elems``."""
    v = mesh.vertices[mesh.triangles[elems]]
    G = barycentric_grads(mesh)[elems]
    out = np.einsum("mqd,mkd->mqk", x - v[:, None, 0, :], G)
    out[..., 0] += 1.0
    return out


# -- function containers -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class CrFunction:
    """Crouzeix-Raviart function: one midpoint value per side."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_sides,):
            raise ValueError(f"expected {self.mesh.n_sides} side values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_sides))

    def local_values(self):
        return self.values[self.mesh.elem_sides]

    def grad(self):
        return cr_local_grad(self)

    def mean(self):
        """Element means, equal to the values at the barycenters."""
        return self.local_values().mean(axis=1)

    def vertex_traces(self):
        """Element-wise values at the three vertices, shape ``(nt, 3)``."""
        U = self.local_values()
        return U.sum(axis=1, keepdims=True) - 2.0 * U


@dataclass(frozen=True, eq=False)
class S1Function:
    """Continuous piecewise affine function: one value per vertex."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} vertex values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def grad(self):
        return np.einsum("mk,mkd->md", self.values[self.mesh.triangles], barycentric_grads(self.mesh))

    def mean(self):
        return self.values[self.mesh.triangles].mean(axis=1)

    def to_cr(self):
        """Exact injection into the CR space (midpoint values)."""
        return CrFunction(self.mesh, self.values[self.mesh.sides].mean(axis=1))


@dataclass(frozen=True, eq=False)
class Rt0Function:
    """Lowest-order Raviart-Thomas field: normal flux along ``n_S`` per side."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_sides,):
            raise ValueError(f"expected {self.mesh.n_sides} side fluxes, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def affine_coeffs(self):
        return rt0_affine_coeffs(self)

    def div(self):
        return rt0_div(self)

    def mean(self):
        a, b = self.affine_coeffs()
        return a + b[:, None] * self.mesh.x_T

    def eval(self, x, elems=None):
        a, b = self.affine_coeffs()
        if elems is not None:
            a, b = a[elems], b[elems]
        return a[:, None, :] + b[:, None, None] * x


# -- CR calculus ---------------------------------------------------------------

def cr_local_grad(v):
    """Broken gradient, constant per element; shape ``(nt, 2)``."""
    return np.einsum("mk,mkd->md", v.local_values(), cr_basis_grads(v.mesh))


def cr_local_eval(v, bary, elems=None):
    """Values at barycentric points ``bary`` ``(q, 3)`` on each element; ``(m, q)``."""
    U = v.local_values() if elems is None else v.local_values()[elems]
    return np.einsum("mk,qk->mq", U, 1.0 - 2.0 * np.asarray(bary))


def cr_interpolate(mesh, fn, zero_dirichlet=True):
    """CR function taking the values of ``fn`` at the side midpoints."""
    vals = np.asarray(fn(mesh.x_S), dtype=float)
    if zero_dirichlet:
        vals = np.where(mesh.side_label == DIRICHLET, 0.0, vals)
    return CrFunction(mesh, vals)


def s1_interpolate(mesh, fn, zero_dirichlet=True):
    vals = np.asarray(fn(mesh.vertices), dtype=float)
    if zero_dirichlet:
        vals = vals.copy()
        vals[mesh.dirichlet_vertices] = 0.0
    return S1Function(mesh, vals)


def pi_h(mesh, field, degree=5, singular_point=None):
    """Element means of ``field``.

    ``field`` is either a function object with a ``mean`` method (exact for
    the discrete spaces here) or a callable ``field(x)`` on points of shape
    ``(..., 2)`` integrated with a rule of the given degree.
    """
    if hasattr(field, "mean") and not callable(field):
        return field.mean()
    vals = integrate(mesh, lambda x, e: field(x), degree, singular_point=singular_point)
    return vals / (mesh.area if vals.ndim == 1 else mesh.area[:, None])


# -- RT0 calculus --------------------------------------------------------------

def rt0_affine_coeffs(y):
    """Local representation ``y|_T(x) = a_T + b_T x``; returns ``(a, b)``."""
    mesh = y.mesh
    c = y.values[mesh.elem_sides] * mesh.elem_sign * mesh.elem_side_lengths / (2.0 * mesh.area[:, None])
    b = c.sum(axis=1)
    a = -np.einsum("mk,mkd->md", c, mesh.vertices[mesh.triangles])
    return a, b


def rt0_eval(y, x, elems=None):
    """Evaluate at physical points ``x`` of shape ``(m, q, 2)`` inside ``elems``."""
    return y.eval(x, elems)


def rt0_div(y):
    """Element-wise divergence ``2 b_T``."""
    _, b = rt0_affine_coeffs(y)
    return 2.0 * b


def rt0_from_affine(mesh, a, b):
    """RT0 field from element-wise ``a_T + b_T x`` data assumed normal-continuous.

    Side fluxes are read off the first neighbour ``side_elems[:, 0]``, whose
    outward normal is the global side normal. Neumann fluxes are set to zero.
    """
    owner = mesh.side_elems[:, 0]
    flux = np.sum((a[owner] + b[owner, None] * mesh.x_S) * mesh.n_S, axis=1)
    flux[mesh.side_label == NEUMANN] = 0.0
    return Rt0Function(mesh, flux)


def normal_jumps_affine(mesh, a, b):
    """Normal jumps of element-wise ``a_T + b_T x`` on interior sides.

    The normal component of such a field is constant along each side; the
    jump is the difference of the values seen from the two neighbours.
    """
    inner = mesh.interior_sides
    lo, hi = mesh.side_elems[inner, 0], mesh.side_elems[inner, 1]
    xs, ns = mesh.x_S[inner], mesh.n_S[inner]
    return np.sum((a[lo] + b[lo, None] * xs - a[hi] - b[hi, None] * xs) * ns, axis=1)


# -- operators -----------------------------------------------------------------

def i_av(v):
    """Node-averaging: the S1 function whose vertex values are means of the
    adjacent element traces of ``v``, zero at Dirichlet vertices."""
    mesh = v.mesh
    traces = v.vertex_traces()
    idx = mesh.triangles.ravel()
    total = np.bincount(idx, weights=traces.ravel(), minlength=mesh.n_vertices)
    count = np.bincount(idx, minlength=mesh.n_vertices)
    vals = total / np.maximum(count, 1)
    vals[mesh.dirichlet_vertices] = 0.0
    return S1Function(mesh, vals)


def discrete_ibp_residual(v, y):
    """``(grad_h v, Pi_h y) + (Pi_h v, div y)``; vanishes for admissible pairs."""
    mesh = v.mesh
    return float(np.sum(mesh.area * (np.sum(v.grad() * y.mean(), axis=1) + v.mean() * y.div())))


def jump_norms(v, params):
    """Per interior side ``h_S * int_S |[F(grad_h v)]|^2 ds``.

    ``v`` is a CR or S1 function; see :func:`jump_norms_grad` for raw gradients.
    """
    return jump_norms_grad(v.mesh, v.grad(), params)


def jump_norms_grad(mesh, grads, params):
    inner = mesh.interior_sides
    F = nfun.map_F(params, grads)
    d = F[mesh.side_elems[inner, 0]] - F[mesh.side_elems[inner, 1]]
    return mesh.h_S[inner] ** 2 * np.sum(d * d, axis=1)


def prolongate_cr(u, fine_mesh):
    """Transfer ``u`` to a refinement of its mesh.

    Each fine side value is the parent's affine function at the side midpoint,
    averaged over the (one or two) adjacent fine elements.
    """
    coarse = u.mesh
    parent = fine_mesh.parent
    if parent is None:
        raise ValueError("fine mesh carries no parent map")
    g = u.grad()
    c = u.mean() - np.sum(g * coarse.x_T, axis=1)
    vals = np.zeros(fine_mesh.n_sides)
    cnt = np.zeros(fine_mesh.n_sides)
    for col in range(2):
        e = fine_mesh.side_elems[:, col]
        ok = e >= 0
        pe = parent[e[ok]]
        vals[ok] += c[pe] + np.sum(g[pe] * fine_mesh.x_S[ok], axis=1)
        cnt[ok] += 1.0
    vals /= cnt
    vals[fine_mesh.side_label == DIRICHLET] = 0.0
    return CrFunction(fine_mesh, vals)
