"""Experimental orders of convergence and log-log slopes."""

import numpy as np


def eoc(errors, h):
    """``log(e_k / e_{k-1}) / log(h_k / h_{k-1})`` for ``k >= 1``.

    Entries involving a non-positive error are returned as ``nan``.
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    if e.shape != h.shape or e.size < 2:
        raise ValueError("need at least two errors with matching mesh sizes")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(e[1:] / e[:-1]) / np.log(h[1:] / h[:-1])
    bad = (e[1:] <= 0) | (e[:-1] <= 0)
    out[bad] = np.nan
    return out


def loglog_slope(n, values):
    """Least-squares slope of ``log(values)`` against ``log(n)``."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
