"""Manufactured solutions with point singularities at the origin.

``square_alpha``: ``u = d(x) |x|^alpha`` on ``(-1, 1)^2`` with ``alpha = 1.01``.

``lshape_sigma``: ``u = d(x) r^sigma sin(2 theta / 3)`` on the L-shaped domain
``(-1, 1)^2 minus [0, 1] x [-1, 0]`` with ``sigma = 1.01 - 1/p``.

Both use the cut-off ``d(x) = (1 - x_1^2)(1 - x_2^2)`` so that ``u`` vanishes on
the outer boundary, and ``f = -div A(grad u)`` from analytic first and second
derivatives.
"""

from dataclasses import dataclass, field

import numpy as np

from ..mesh import build_lshape_mesh, build_square_mesh

ALPHA = 1.01
CASES = ("square_alpha", "lshape_sigma")


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    name: str
    params: object
    u: object
    grad_u: object
    hess_u: object
    initial_mesh: object
    singular_point: tuple = (0.0, 0.0)
    metadata: dict = field(default_factory=dict)

    def f(self, x):
        return rhs_from_derivatives(self.params, self.grad_u(x), self.hess_u(x))

    def z(self, x):
        """Exact flux ``A(grad u)``."""
        g = self.grad_u(x)
        r = np.linalg.norm(g, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(r > 0, (self.params.delta + r) ** (self.params.p - 2.0), 0.0)
        return w[..., None] * g


def rhs_from_derivatives(params, g, H):
    """``-div A(grad u)`` from ``g = grad u`` and ``H = hess u`` by the chain rule.

    Where ``|g| = 0`` the second term is dropped.
    """
    p, delta = params.p, params.delta
    r = np.linalg.norm(g, axis=-1)
    tr = H[..., 0, 0] + H[..., 1, 1]
    gHg = np.einsum("...i,...ij,...j->...", g, H, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = delta + r
        t1 = np.where(base > 0, base ** (p - 2.0), 0.0) * tr
        t2 = np.where(r > 0, (p - 2.0) * base ** (p - 3.0) * gHg / r, 0.0)
    return -(t1 + t2)


def _cutoff(x):
    X, Y = x[..., 0], x[..., 1]
    d = (1 - X ** 2) * (1 - Y ** 2)
    gd = np.stack([-2 * X * (1 - Y ** 2), -2 * Y * (1 - X ** 2)], axis=-1)
    Hd = np.empty(x.shape[:-1] + (2, 2))
    Hd[..., 0, 0] = -2 * (1 - Y ** 2)
    Hd[..., 1, 1] = -2 * (1 - X ** 2)
    Hd[..., 0, 1] = Hd[..., 1, 0] = 4 * X * Y
    return d, gd, Hd


def _product(x, w, gw, Hw):
    d, gd, Hd = _cutoff(x)
    g = d[..., None] * gw + w[..., None] * gd
    H = (d[..., None, None] * Hw + w[..., None, None] * Hd
         + gd[..., :, None] * gw[..., None, :] + gw[..., :, None] * gd[..., None, :])
    return d * w, g, H


def _radial_power(x, alpha):
    # s = |x|^alpha, with derivatives; the origin is assigned the limit values 0
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    rs = np.where(r > 0, r, 1.0)
    s = np.where(r > 0, rs ** alpha, 0.0)
    c1 = np.where(r > 0, alpha * rs ** (alpha - 2.0), 0.0)
    c2 = np.where(r > 0, alpha * (alpha - 2.0) * rs ** (alpha - 4.0), 0.0)
    gs = c1[..., None] * x
    Hs = c1[..., None, None] * np.eye(2) + c2[..., None, None] * x[..., :, None] * x[..., None, :]
    return s, gs, Hs


def _sector(x, sigma):
    # w = r^sigma sin(2 theta / 3) with theta in [0, 2 pi)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    th = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)
    S, C = np.sin(2 * th / 3), np.cos(2 * th / 3)
    rs = np.where(r > 0, r, 1.0)
    pos = r > 0
    w = np.where(pos, rs ** sigma * S, 0.0)
    w_r = sigma * rs ** (sigma - 1) * S
    w_t = (2 / 3) * rs ** sigma * C
    w_rr = sigma * (sigma - 1) * rs ** (sigma - 2) * S
    w_rt = (2 / 3) * sigma * rs ** (sigma - 1) * C
    w_tt = -(4 / 9) * rs ** sigma * S
    er = np.stack([np.cos(th), np.sin(th)], axis=-1)
    et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    gw = w_r[..., None] * er + (w_t / rs)[..., None] * et
    outer = lambda a, b: a[..., :, None] * b[..., None, :]  # noqa: E731
    Hw = (w_rr[..., None, None] * outer(er, er)
          + (w_r / rs + w_tt / rs ** 2)[..., None, None] * outer(et, et)
          + (w_rt / rs - w_t / rs ** 2)[..., None, None] * (outer(er, et) + outer(et, er)))
    gw = np.where(pos[..., None], gw, 0.0)
    Hw = np.where(pos[..., None, None], Hw, 0.0)
    return w, gw, Hw


def make_case(case_id, params):
    """Build a :class:`ManufacturedCase` by name."""
    if case_id == "square_alpha":
        def parts(x):
            return _product(x, *_radial_power(x, ALPHA))

        return ManufacturedCase(
            name=case_id, params=params,
            u=lambda x: parts(x)[0], grad_u=lambda x: parts(x)[1], hess_u=lambda x: parts(x)[2],
            initial_mesh=lambda: build_square_mesh(2),
            metadata={"alpha": ALPHA, "domain": "(-1,1)^2", "dirichlet": "whole boundary"},
        )
    if case_id == "lshape_sigma":
        sigma = 1.01 - 1.0 / params.p

        def parts(x):
            return _product(x, *_sector(x, sigma))

        return ManufacturedCase(
            name=case_id, params=params,
            u=lambda x: parts(x)[0], grad_u=lambda x: parts(x)[1], hess_u=lambda x: parts(x)[2],
            initial_mesh=build_lshape_mesh,
            metadata={"sigma": sigma, "domain": "(-1,1)^2 minus [0,1]x[-1,0]",
                      "dirichlet": "whole boundary",
                      "note": "F(grad u) has just below 1/2 fractional smoothness; uniform rate 1/2"},
        )
    raise ValueError(f"unknown case {case_id!r}; expected one of {CASES}")
