import numpy as np
import pytest

from crfem import nfun
from crfem.bench import make_case, rhs_projection
from crfem.duality import (ConformityError, check_optimality, dual_energy, marini_affine, marini_jumps,
                           marini_reconstruct, primal_energy)
from crfem.fespace import CrFunction, Rt0Function, rt0_from_affine
from crfem.mesh import build_lshape_mesh, build_square_mesh, red_refine
from crfem.nfun import PDelta
from crfem.solver import NewtonConfig, newton_solve


def solved(p, delta=1e-4, refine=1, f_h=None):
    params = PDelta(p, delta)
    m = build_square_mesh(2)
    for _ in range(refine):
        m = red_refine(m)
    f_h = np.ones(m.n_elements) if f_h is None else f_h(m)
    u, rep = newton_solve(params, m, f_h)
    assert rep.converged
    return params, m, u, f_h


def test_primal_energy_of_zero_is_zero():
    m = build_square_mesh(2)
    assert primal_energy(PDelta(3.0), m, CrFunction.zeros(m), np.ones(m.n_elements)) == 0.0


def test_primal_energy_p2_by_hand():
    m = build_square_mesh(1)
    v = CrFunction(m, m.x_S[:, 0])  # grad = (1, 0), mean of x over each triangle
    f_h = np.array([2.0, -1.0])
    expected = np.sum(m.area * (0.5 - f_h * m.x_T[:, 0]))
    assert primal_energy(PDelta(2.0), m, v, f_h) == pytest.approx(expected, rel=1e-14)


def test_dual_energy_sentinel():
    m = build_square_mesh(2)
    y = Rt0Function(m, np.zeros(m.n_sides))
    assert dual_energy(PDelta(2.0), m, y, np.ones(m.n_elements)) == -np.inf
    assert dual_energy(PDelta(2.0), m, y, np.zeros(m.n_elements)) == 0.0
    # y = -x/2 has divergence -1 and mean -x_T/2
    y = rt0_from_affine(m, np.zeros((m.n_elements, 2)), -0.5 * np.ones(m.n_elements))
    expected = -np.sum(m.area * 0.5 * np.sum((0.5 * m.x_T) ** 2, axis=1))
    assert dual_energy(PDelta(2.0), m, y, np.ones(m.n_elements)) == pytest.approx(expected, rel=1e-13)


def test_marini_divergence_and_projection():
    params, m, u, f_h = solved(3.0)
    z = marini_reconstruct(params, m, u, f_h)
    np.testing.assert_allclose(z.div(), -1.0, atol=1e-10)
    np.testing.assert_allclose(z.mean(), nfun.op_A(params, u.grad()), atol=1e-10)
    a, b = marini_affine(params, m, u, f_h)
    np.testing.assert_allclose(b, -0.5)
    assert np.max(np.abs(marini_jumps(params, m, u, f_h))) < 1e-10


def test_marini_rejects_unconverged_u():
    params, m, u, f_h = solved(3.0)
    bad = CrFunction(m, u.values + 0.05 * (m.side_label == 0) * np.sin(7 * m.x_S[:, 0]))
    with pytest.raises(ConformityError):
        marini_reconstruct(params, m, bad, f_h)
    rough, _ = newton_solve(params, m, f_h, NewtonConfig(max_iter=1, polish=False))
    with pytest.raises(ConformityError):
        marini_reconstruct(params, m, rough, f_h)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_strong_duality(p):
    params, m, u, f_h = solved(p, refine=2, f_h=lambda m: 1.0 + m.x_T[:, 0] * m.x_T[:, 1])
    z = marini_reconstruct(params, m, u, f_h)
    rep = check_optimality(params, m, u, z, f_h)
    e = rep.energies
    assert e.dual <= e.primal + 1e-12 * abs(e.primal)
    assert abs(e.gap) <= 1e-10 * max(1.0, abs(e.primal))
    assert rep.fenchel_young < 1e-10
    assert rep.div_residual < 1e-10
    assert rep.projection_residual < 1e-10


def test_weak_duality_for_competitors():
    params, m, u, f_h = solved(2.5, refine=2)
    z = marini_reconstruct(params, m, u, f_h)
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = CrFunction(m, u.values + 0.1 * rng.normal(size=m.n_sides) * (m.side_label == 0))
        assert primal_energy(params, m, w, f_h) > primal_energy(params, m, u, f_h)
        assert primal_energy(params, m, w, f_h) >= dual_energy(params, m, z, f_h)
        # Fenchel-Young slack is positive away from the solution
        assert check_optimality(params, m, w, z, f_h).fenchel_young > 1e-6


def test_manufactured_lshape_gap():
    params = PDelta(1.5, 1e-5)
    case = make_case("lshape_sigma", params)
    m = build_lshape_mesh()
    f_h = rhs_projection(m, case)
    u, _ = newton_solve(params, m, f_h)
    z = marini_reconstruct(params, m, u, f_h)
    rep = check_optimality(params, m, u, z, f_h)
    print(f"L-shape level 0 p=1.5: gap {rep.gap:.2e}, primal {rep.energies.primal:.6f}")
    assert abs(rep.gap) <= 1e-10 * max(1.0, abs(rep.energies.primal))
