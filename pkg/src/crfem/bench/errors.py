"""Errors against a manufactured solution, by element-wise quadrature.

Elements with a vertex at the singular point of the case use a graded
composite rule.
"""

import numpy as np

from .. import nfun
from ..quadrature import integrate

ERROR_DEGREE = 7
GRADED_LEVELS = 8


def rhs_projection(mesh, case, degree=ERROR_DEGREE, levels=GRADED_LEVELS):
    """``f_h = Pi_h f`` (element means of the exact right-hand side)."""
    vals = integrate(mesh, lambda x, e: case.f(x), degree, singular_point=case.singular_point, levels=levels)
    return vals / mesh.area


def _sq_error(mesh, case, diff, degree, levels):
    return integrate(mesh, lambda x, e: np.sum(diff(x, e) ** 2, axis=-1), degree,
                     singular_point=case.singular_point, levels=levels)


def error_F_local(params, mesh, grads, case, degree=ERROR_DEGREE, levels=GRADED_LEVELS):
    """Element-wise ``|F(grads) - F(grad u)|^2`` for element-wise constant ``grads``."""
    Fh = nfun.map_F(params, grads)
    return _sq_error(mesh, case, lambda x, e: Fh[e, None, :] - nfun.map_F(params, case.grad_u(x)),
                     degree, levels)


def error_F(params, mesh, u_h, case, degree=ERROR_DEGREE, levels=GRADED_LEVELS):
    """``|| F(grad_h u_h) - F(grad u) ||``."""
    return float(np.sqrt(error_F_local(params, mesh, u_h.grad(), case, degree, levels).sum()))


def rho_squared(params, mesh, v, case, degree=ERROR_DEGREE, levels=GRADED_LEVELS):
    """``|| F(grad v) - F(grad u) ||^2`` for a conforming ``v``."""
    return float(error_F_local(params, mesh, v.grad(), case, degree, levels).sum())


def error_Fstar(params, mesh, z_h, case, degree=ERROR_DEGREE, levels=GRADED_LEVELS):
    """``|| F*(z_h) - F*(z) ||`` with ``z = A(grad u)``."""
    def diff(x, e):
        return nfun.map_Fstar(params, z_h.eval(x, e)) - nfun.map_Fstar(params, case.z(x))

    return float(np.sqrt(_sq_error(mesh, case, diff, degree, levels).sum()))
