"""Quadrature rules on triangles in barycentric form.

A rule is a pair ``(bary, weights)`` with ``bary`` of shape ``(q, 3)`` and
weights summing to one, so that ``|T| * sum(w * f(x))`` approximates the
integral over ``T``.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _radon7():
    s15 = np.sqrt(15.0)
    a = (6.0 - s15) / 21.0
    b = (6.0 + s15) / 21.0
    wa = (155.0 - s15) / 1200.0
    wb = (155.0 + s15) / 1200.0
    bary = np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [a, a, 1 - 2 * a], [a, 1 - 2 * a, a], [1 - 2 * a, a, a],
        [b, b, 1 - 2 * b], [b, 1 - 2 * b, b], [1 - 2 * b, b, b],
    ])
    w = np.array([9 / 40, wa, wa, wa, wb, wb, wb])
    return bary, w


def _conical(degree):
    # Stroud conical product: Gauss-Jacobi (weight 1-u) x Gauss-Legendre
    n = (degree + 2) // 2
    xu, wu = roots_jacobi(n, 1.0, 0.0)
    xv, wv = roots_legendre(n)
    u = 0.5 * (1.0 + xu)
    v = 0.5 * (1.0 + xv)
    wu = wu / 4.0
    wv = wv / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, 2.0 * W.ravel()


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Return a rule exact for polynomials up to ``degree`` (all nodes interior)."""
    if degree <= 1:
        bary, w = np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    elif degree == 2:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1 / 3)
    elif degree <= 5:
        bary, w = _radon7()
    else:
        bary, w = _conical(degree)
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def _split(tri):
    # red split of a triangle given by 3 barycentric corner rows; corner 0 child first
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return [np.array([a, ab, ca]), np.array([ab, b, bc]), np.array([ca, bc, c]), np.array([bc, ca, ab])]


@lru_cache(maxsize=None)
def graded_rule(degree, levels, corner=0):
    """Composite rule refined ``levels`` times towards one corner of the triangle.

    Used for integrands with a point singularity at a vertex.
    """
    base_bary, base_w = triangle_rule(degree)
    corner_tri = np.roll(np.eye(3), -corner, axis=0)
    pieces = []
    area = 1.0
    for _ in range(levels):
        kids = _split(corner_tri)
        area /= 4.0
        pieces.extend((k, area) for k in kids[1:])
        corner_tri = kids[0]
    pieces.append((corner_tri, area))
    bary = np.vstack([base_bary @ tri for tri, _ in pieces])
    w = np.concatenate([base_w * a for _, a in pieces])
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def integrate(mesh, integrand, degree, singular_point=None, levels=8, elements=None):
    """Element-wise integrals of ``integrand``.

    ``integrand(x, elems)`` receives points of shape ``(m, q, 2)`` together with
    the element indices ``(m,)`` and returns values ``(m, q)`` or ``(m, q, k)``.
    Elements having a vertex at ``singular_point`` use a graded composite rule.
    """
    if elements is None:
        elements = np.arange(mesh.n_elements)
    elements = np.asarray(elements)
    bary, w = triangle_rule(degree)
    out = None
    groups = [(elements, bary, w)]
    if singular_point is not None:
        corner_hit = np.all(np.isclose(mesh.vertices[mesh.triangles[elements]],
                                       np.asarray(singular_point), atol=1e-14), axis=-1)
        special = corner_hit.any(axis=1)
        groups = [(elements[~special], bary, w)]
        for k in range(3):
            sel = special & corner_hit[:, k]
            if np.any(sel):
                gb, gw = graded_rule(degree, levels, k)
                groups.append((elements[sel], gb, gw))
    pos = {}
    results = []
    for elems, b, ww in groups:
        if len(elems) == 0:
            continue
        x = np.einsum("qk,mkd->mqd", b, mesh.vertices[mesh.triangles[elems]])
        vals = np.asarray(integrand(x, elems))
        res = np.einsum("q,mq...->m...", ww, vals) * mesh.area[elems].reshape((-1,) + (1,) * (vals.ndim - 2))
        results.append((elems, res))
    for elems, res in results:
        if out is None:
            out = np.zeros((len(elements),) + res.shape[1:])
            pos = np.empty(mesh.n_elements, dtype=int)
            pos[elements] = np.arange(len(elements))
        out[pos[elems]] = res
    return out
