"""Scalar N-function calculus for the (p, delta)-structure.

All functions accept numpy arrays and broadcast. The shift ``delta`` may be an
array as well, which is how shifted N-functions are evaluated element-wise:
the shifted function ``phi_a`` of the (p, delta) family is the (p, delta + a)
member of the same family.
"""

from dataclasses import dataclass

import numpy as np

_SERIES_CUTOFF = 1e-3
_INV_MAXITER = 200


@dataclass(frozen=True)
class PDelta:
    """Exponent ``p > 1`` and shift ``delta >= 0``."""

    p: float
    delta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p <= 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)


def _check_nonneg(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError(f"{name} must be nonnegative")
    return x


# ---------------------------------------------------------------------------
# phi, phi', (phi')^{-1}, phi*
# ---------------------------------------------------------------------------

def _phi(p, delta, t):
    p = float(p)
    delta, t = np.broadcast_arrays(np.asarray(delta, dtype=float), np.asarray(t, dtype=float))
    out = np.empty(t.shape)
    zero_shift = delta == 0.0
    out[zero_shift] = t[zero_shift] ** p / p
    d = delta[~zero_shift]
    x = t[~zero_shift] / d
    # phi(t) = delta^p * g(t/delta) with g(x) = int_0^x (1+s)^{p-2} s ds
    g = np.empty(x.shape)
    small = x < _SERIES_CUTOFF
    xs = x[small]
    # sum_k binom(p-2, k) x^{k+2} / (k+2)
    term = np.ones_like(xs)
    acc = np.zeros_like(xs)
    for k in range(8):
        acc += term * xs ** (k + 2) / (k + 2)
        term = term * (p - 2 - k) / (k + 1)
    g[small] = acc
    xl = x[~small]
    L = np.log1p(xl)
    g[~small] = np.expm1(p * L) / p - np.expm1((p - 1) * L) / (p - 1)
    out[~zero_shift] = d ** p * g
    return out


def _phi_prime(p, delta, t):
    delta, t = np.broadcast_arrays(np.asarray(delta, dtype=float), np.asarray(t, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (delta + t) ** (p - 2.0) * t
    return np.where(t == 0.0, 0.0, out)


def _phi_prime_inv(p, delta, s):
    """Solve ``(delta + t)^(p-2) t = s`` for ``t >= 0``.

    Safeguarded Newton on ``log phi'(t) - log s``, which is increasing and
    smooth in ``t > 0``; bisection (in log space) whenever Newton leaves the
    bracket.
    """
    delta, s = np.broadcast_arrays(np.asarray(delta, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(s.shape)
    active = s > 0.0
    if not np.any(active):
        return out
    d = delta[active]
    sv = s[active]
    q = 1.0 / (p - 1.0)
    # exact for delta = 0 and a good starting point in general
    t = sv ** q
    lo = np.zeros_like(sv)
    hi = sv ** q + sv + 1.0
    grow = _phi_prime(p, d, hi) < sv
    while np.any(grow):
        hi[grow] *= 2.0
        grow = _phi_prime(p, d, hi) < sv
    if p >= 2.0:
        lo = np.maximum(sv ** q - d, 0.0)
        t = np.minimum(t, hi)
    else:
        lo = sv ** q
        t = np.clip(sv ** q + d, lo, hi)
    t = np.where((t <= lo) | (t >= hi), 0.5 * (lo + hi), t)
    logs = np.log(sv)
    for _ in range(_INV_MAXITER):
        g = (p - 2.0) * np.log(d + t) + np.log(t) - logs
        lo = np.where(g < 0, np.maximum(lo, t), lo)
        hi = np.where(g > 0, np.minimum(hi, t), hi)
        dg = (p - 2.0) / (d + t) + 1.0 / t
        t_new = t - g / dg
        bad = ~((t_new > lo) & (t_new < hi))
        if np.any(bad):
            lo_b = np.where(lo > 0, lo, 1e-300)
            t_new = np.where(bad, np.sqrt(lo_b * hi), t_new)
            t_new = np.where(bad & (lo == 0), 0.5 * hi, t_new)
        done = np.abs(t_new - t) <= 1e-14 * t_new
        t = t_new
        if np.all(done):
            break
    out[active] = t
    return out


def _phi_conj(p, delta, s):
    t = _phi_prime_inv(p, delta, s)
    return np.asarray(s, dtype=float) * t - _phi(p, delta, t)


def phi(params, t):
    """N-function ``phi(t) = int_0^t (delta + s)^(p-2) s ds``."""
    t = _check_nonneg(t, "t")
    return _phi(params.p, params.delta, t)


def phi_prime(params, t):
    t = _check_nonneg(t, "t")
    return _phi_prime(params.p, params.delta, t)


def phi_prime_inv(params, s):
    """Inverse of ``phi'`` on the nonnegative reals."""
    s = _check_nonneg(s, "s")
    return _phi_prime_inv(params.p, params.delta, s)


def phi_conj(params, s):
    """Fenchel conjugate ``phi*(s) = s t - phi(t)`` at ``t = (phi')^{-1}(s)``."""
    s = _check_nonneg(s, "s")
    return _phi_conj(params.p, params.delta, s)


def phi_shifted(params, a, t):
    a = _check_nonneg(a, "a")
    t = _check_nonneg(t, "t")
    return _phi(params.p, params.delta + a, t)


def phi_shifted_conj(params, a, s):
    """Conjugate of the shifted function, ``(phi_a)*``."""
    a = _check_nonneg(a, "a")
    s = _check_nonneg(s, "s")
    return _phi_conj(params.p, params.delta + a, s)


# Gauss-Legendre nodes on (0, 1) for the shifted conjugate below
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def conj_shifted(params, a, t):
    """Shift of the conjugate, ``(phi*)_a(t) = int_0^t (phi*)'(a+s) s/(a+s) ds``.

    No closed form exists; evaluated by Gauss-Legendre quadrature after the
    substitution ``s = t u^2`` that tames the root-type behaviour at ``s = 0``.
    """
    a = _check_nonneg(a, "a")
    t = _check_nonneg(t, "t")
    a, t = np.broadcast_arrays(a, t)
    u = _GL_X.reshape((-1,) + (1,) * t.ndim)
    w = _GL_W.reshape((-1,) + (1,) * t.ndim)
    s = t * u ** 2
    ds = 2.0 * t * u
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a + s > 0, s / (a + s), 0.0)
    integrand = _phi_prime_inv(params.p, params.delta, a + s) * ratio * ds
    return np.sum(w * integrand, axis=0)


# ---------------------------------------------------------------------------
# vector maps A, A^{-1}, DA, F, F*
# ---------------------------------------------------------------------------

def _norm(a):
    return np.sqrt(np.sum(a * a, axis=-1))


def op_A(params, a):
    """``A(a) = (delta + |a|)^(p-2) a``, vectorized over leading axes."""
    a = np.asarray(a, dtype=float)
    r = _norm(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (params.delta + r) ** (params.p - 2.0)
    w = np.where(r == 0.0, 0.0, w)
    return w[..., None] * a


def op_A_inv(params, z):
    z = np.asarray(z, dtype=float)
    rz = _norm(z)
    r = _phi_prime_inv(params.p, params.delta, rz)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rz > 0, r / rz, 0.0)
    return scale[..., None] * z


def op_DA(params, a):
    """Jacobian of ``A``; shape ``(..., 2, 2)``.

    Raises ``ZeroDivisionError`` at ``a = 0`` when ``p < 2`` and ``delta = 0``.
    """
    a = np.asarray(a, dtype=float)
    p, delta = params.p, params.delta
    r = _norm(a)
    if p < 2.0 and delta == 0.0 and np.any(r == 0.0):
        raise ZeroDivisionError("DA is singular at a = 0 for p < 2 and delta = 0")
    base = delta + r
    eye = np.broadcast_to(np.eye(2), a.shape[:-1] + (2, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        # 0 ** 0 = 1 keeps the identity at p = 2
        w0 = base ** (p - 2.0) if p >= 2.0 else np.where(base > 0, base ** (p - 2.0), 0.0)
        w1 = np.where(r > 0, (p - 2.0) * base ** (p - 3.0) / r, 0.0)
    outer = a[..., :, None] * a[..., None, :]
    return w0[..., None, None] * eye + w1[..., None, None] * outer


def map_F(params, a):
    a = np.asarray(a, dtype=float)
    r = _norm(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (params.delta + r) ** ((params.p - 2.0) / 2.0)
    w = np.where(r == 0.0, 0.0, w)
    return w[..., None] * a


def map_Fstar(params, z):
    z = np.asarray(z, dtype=float)
    r = _norm(z)
    pc = params.p_conj
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (params.delta ** (params.p - 1.0) + r) ** ((pc - 2.0) / 2.0)
    w = np.where(r == 0.0, 0.0, w)
    return w[..., None] * z


def bregman_phi(params, a, b):
    """Pointwise ``phi(|a|) - phi(|b|) - A(b).(a - b)`` (nonnegative)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (_phi(params.p, params.delta, _norm(a)) - _phi(params.p, params.delta, _norm(b))
            - np.sum(op_A(params, b) * (a - b), axis=-1))


def bregman_phi_conj(params, y, w):
    """Pointwise ``phi*(|y|) - phi*(|w|) - A^{-1}(w).(y - w)`` (nonnegative)."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    return (_phi_conj(params.p, params.delta, _norm(y)) - _phi_conj(params.p, params.delta, _norm(w))
            - np.sum(op_A_inv(params, w) * (y - w), axis=-1))
