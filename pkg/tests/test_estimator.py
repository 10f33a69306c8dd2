import numpy as np
import pytest

from crfem import nfun
from crfem.afem import AfemConfig, run_afem
from crfem.bench import make_case, rhs_projection
from crfem.duality import marini_reconstruct, primal_energy
from crfem.estimator import eta_F, eta_local, osc
from crfem.fespace import CrFunction, S1Function, i_av
from crfem.mesh import build_lshape_mesh, build_square_mesh, red_refine
from crfem.nfun import PDelta
from crfem.quadrature import integrate
from crfem.solver import newton_solve


def setup(p, delta=1e-4, refine=2, f=None):
    params = PDelta(p, delta)
    m = build_square_mesh(2)
    for _ in range(refine):
        m = red_refine(m)
    f_h = np.ones(m.n_elements) if f is None else f(m)
    u, _ = newton_solve(params, m, f_h)
    z = marini_reconstruct(params, m, u, f_h)
    return params, m, u, z, f_h


def test_p2_reduces_to_quadratic_forms():
    params, m, u, z, f_h = setup(2.0, delta=0.0, f=lambda m: 1 + m.x_T[:, 0] ** 2)
    v = i_av(u)
    rep = eta_local(params, m, v, u, z)
    d = v.grad() - u.grad()
    np.testing.assert_allclose(rep.eta_A, 0.5 * m.area * np.sum(d * d, axis=1), atol=1e-14)
    zz = integrate(m, lambda x, e: np.sum((z.eval(x, e) - z.mean()[e, None]) ** 2, axis=-1), 2)
    np.testing.assert_allclose(rep.eta_B, 0.5 * zz, atol=1e-14)
    g, fl = eta_F(params, m, v, u, z)
    assert g == pytest.approx(np.sum(m.area * np.sum(d * d, axis=1)), rel=1e-12)
    assert fl == pytest.approx(zz.sum(), rel=1e-12)


def test_affine_solution_has_zero_estimator():
    params = PDelta(3.0, 1e-4)
    m = red_refine(build_square_mesh(2))
    aff = lambda x: 0.4 * x[..., 0] - 0.7 * x[..., 1]  # noqa: E731
    # boundary values kept, so no Dirichlet truncation
    u = CrFunction(m, aff(m.x_S))
    v = S1Function(m, aff(m.vertices))
    z = marini_reconstruct(params, m, u, np.zeros(m.n_elements))
    rep = eta_local(params, m, v, u, z)
    assert np.max(np.abs(rep.eta)) < 1e-14
    assert max(eta_F(params, m, v, u, z)) < 1e-14


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_indicators_are_nonnegative(p):
    params, m, u, z, f_h = setup(p, f=lambda m: np.cos(3 * m.x_T[:, 0]) + 2)
    rep = eta_local(params, m, i_av(u), u, z)
    scale = rep.eta.max()
    assert rep.eta_A.min() >= -1e-12 * scale
    assert rep.eta_B.min() >= -1e-12 * scale
    np.testing.assert_allclose(rep.eta, rep.eta_A + rep.eta_B)
    assert rep.total == pytest.approx(rep.total_A + rep.total_B)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_estimator_is_energy_gap(p):
    # eta^2 equals I(v) - D(z) with the continuous dual energy -int phi*(|z|)
    params, m, u, z, f_h = setup(p, f=lambda m: 1 + m.x_T[:, 1])
    v = i_av(u)
    eta2 = eta_local(params, m, v, u, z, degree=10).total
    dual = -integrate(m, lambda x, e: nfun.phi_conj(params, np.linalg.norm(z.eval(x, e), axis=-1)), 10).sum()
    gap = primal_energy(params, m, v.to_cr(), f_h) - dual
    assert eta2 == pytest.approx(gap, rel=1e-8)


def test_lshape_level0_quadrature_oracle():
    params = PDelta(2.0, 1e-5)
    case = make_case("lshape_sigma", params)
    m = build_lshape_mesh()
    f_h = rhs_projection(m, case)
    u, _ = newton_solve(params, m, f_h)
    z = marini_reconstruct(params, m, u, f_h)
    v = i_av(u)
    e5 = eta_local(params, m, v, u, z, degree=5).total
    e7 = eta_local(params, m, v, u, z, degree=7).total
    assert e5 > 0
    assert e5 == pytest.approx(e7, rel=1e-8)


def test_eta_F_examples():
    params, m, u, z, f_h = setup(2.5, refine=1)
    v = i_av(u)
    g, fl = eta_F(params, m, v, u, z)
    assert g > 0 and fl > 0
    eta2 = eta_local(params, m, v, u, z).total
    print(f"eta^2 / eta_F^2 = {eta2 / (g + fl):.3f}")
    assert eta2 <= 20 * (g + fl)


def test_osc_examples():
    params, m, u, z, f_h = setup(3.0, refine=1)
    v = i_av(u)
    np.testing.assert_allclose(osc(params, m, v, lambda x: np.ones(x.shape[:-1]), f_h), 0.0, atol=1e-30)
    p2 = PDelta(2.0, 0.0)
    f = lambda x: np.sin(2 * x[..., 0]) + x[..., 1] ** 2  # noqa: E731
    fh = integrate(m, lambda x, e: f(x), 7) / m.area
    ref = integrate(m, lambda x, e: 0.5 * m.h_T[e, None] ** 2 * (f(x) - fh[e, None]) ** 2, 5)
    np.testing.assert_allclose(osc(p2, m, v, f, fh), ref, rtol=1e-12)


def test_osc_decay_on_square_case():
    params = PDelta(3.0, 1e-4)
    case = make_case("square_alpha", params)
    m = case.initial_mesh()
    for _ in range(2):
        m = red_refine(m)
    vals = []
    for _ in range(2):
        f_h = rhs_projection(m, case)
        u, _ = newton_solve(params, m, f_h)
        o = osc(params, m, i_av(u), case.f, f_h, singular_point=case.singular_point)
        touch = np.any(np.linalg.norm(m.vertices[m.triangles], axis=2) < 1e-14, axis=1)
        vals.append((o.sum(), o[touch].sum(), o[~touch].sum()))
        m = red_refine(m)
    (t0, s0, r0), (t1, s1, r1) = vals
    print(f"osc ratios: total {t0 / t1:.2f}, origin elements {s0 / s1:.2f}, remainder {r0 / r1:.2f}")
    # elements at the singularity decay like h^2, the smooth remainder like h^4
    assert s0 / s1 == pytest.approx(4.0, rel=0.25)
    assert r0 / r1 > 8.0
    assert 4.0 <= t0 / t1 <= 16.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_reliability_and_efficiency_constants(p):
    params = PDelta(p, 1e-5)
    recs = run_afem(AfemConfig(params=params, problem=make_case("lshape_sigma", params), max_levels=4))
    rel = max(r.rho2 / r.eta2 for r in recs)
    eff = max(r.eta2_F / (r.rho2 + r.osc) for r in recs)
    dom = max(r.eta2 / r.eta2_F for r in recs)
    print(f"p={p}: rho2/eta2 <= {rel:.3f}, eta_F2/(rho2+osc) <= {eff:.3f}, eta2/eta_F2 <= {dom:.3f}")
    assert rel <= 20 and eff <= 20 and dom <= 20
