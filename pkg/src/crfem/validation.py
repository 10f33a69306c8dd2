"""Input checks shared by the estimator facade and the drivers."""

import numpy as np
from sklearn.utils import check_array

from .mesh import Triangulation
from .nfun import PDelta


def check_params(p, delta):
    """Return a validated :class:`PDelta`."""
    return PDelta(float(p), float(delta))


def check_mesh(mesh):
    if not isinstance(mesh, Triangulation):
        raise TypeError(f"expected a Triangulation, got {type(mesh).__name__}")
    return mesh


def check_points(X):
    """``(n, 2)`` float array of finite points."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"points must have 2 columns, got {X.shape[1]}")
    return X


def check_theta(theta):
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    return theta


def check_element_data(values, mesh, name="values"):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_elements,):
        raise ValueError(f"{name} must have shape ({mesh.n_elements},), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be finite")
    return values
