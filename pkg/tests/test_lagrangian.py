import numpy as np
import pytest

from afields import autodiff as ad
from afields.algebroid import MorphismData, SectionField, exterior_differential_1, levi_civita
from afields.errors import BoundaryNode, DimensionError, SingularHessian
from afields.grid import sample_field
from afields.lagrangian import (LagrangianSystem, cartan_sections, energy, energy_differential,
                                euler_lagrange_residual, euler_lagrange_residual_exact, euler_lagrange_residuals,
                                geometric_equation_residual, hessian, solve_sopde_coefficients, sopde_section)
from afields.models import (SO3_INERTIA, SYMPLECTIC_2D, convex_lagrangian, euler_poincare_lagrangian,
                            harmonic_map_lagrangian, lie_poisson_so3_bivector, poisson_sigma_lagrangian,
                            so3_algebroid, standard_algebroid, wave_lagrangian, zoo_lagrangians)
from afields.prolongation import Side, WhitneyPoint, prolong, random_whitney_points, sopde_check


def free(alg, k):
    return LagrangianSystem(alg, k, lambda q, y: 0.5 * np.sum(y * y))


# energy ------------------------------------------------------------------------

def test_energy_examples():
    rng = np.random.default_rng(0)
    sys = free(standard_algebroid(2), 2)
    for b in random_whitney_points(sys.alg, 2, 5, rng):
        assert energy(sys, b) == pytest.approx(sys(b))
    linear = LagrangianSystem(standard_algebroid(1), 1, lambda q, y: y[0, 0] + 3.0)
    assert energy(linear, WhitneyPoint(np.array([0.2]), np.array([[1.7]]))) == pytest.approx(-3.0)
    harm = harmonic_map_lagrangian()
    for b in random_whitney_points(harm.alg, 2, 5, rng):
        assert energy(harm, b) == pytest.approx(harm(b))


# Cartan sections --------------------------------------------------------------------

def test_cartan_standard_free_field():
    sys = free(standard_algebroid(2), 2)
    b = random_whitney_points(sys.alg, 2, 1, 1)[0]
    cart = cartan_sections(sys, b)
    m = 2
    for A in range(2):
        assert np.all(cart.omega[A, :m, :m] == 0)
        expected = np.zeros((m, m * 2))
        for a in range(m):
            expected[a, a * 2 + A] = 1.0
        np.testing.assert_array_equal(cart.omega[A, :m, m:], expected)
        np.testing.assert_array_equal(cart.theta[A], b.y[:, A])


def test_cartan_lie_algebra_xx_block():
    sys = euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=2)
    b = random_whitney_points(sys.alg, 2, 1, 2)[0]
    cart = cartan_sections(sys, b)
    mom = np.diag(SO3_INERTIA) @ b.y
    for A in range(2):
        np.testing.assert_allclose(cart.omega[A, :3, :3], np.einsum("gab,g->ab", levi_civita(), mom[:, A]))


@pytest.mark.parametrize("name", ["convex lie-poisson k=2", "convex atiyah k=1", "euler-poincare so(3) k=2"])
def test_omega_is_minus_differential_of_theta(name):
    sys = zoo_lagrangians()[name]
    alg, k = sys.alg, sys.k
    n, m = alg.base_dim, alg.rank
    pro = prolong(alg, k, Side.LAGRANGIAN).algebroid
    grad = ad.jacobian_field(sys.flat_function)
    rng = np.random.default_rng(3)
    for A in range(k):
        def theta(x, A=A):
            g = np.asarray(grad(x), dtype=object)
            mom = g[n:].reshape(m, k)[:, A]
            return np.concatenate([mom, np.zeros(m * k, dtype=object)])
        for _ in range(3):
            b = random_whitney_points(alg, k, 1, rng)[0]
            s, t = rng.normal(size=pro.rank), rng.normal(size=pro.rank)
            d_theta = exterior_differential_1(pro, SectionField(theta), SectionField.constant(s),
                                              SectionField.constant(t), b.flat())
            omega = cartan_sections(sys, b).omega[A]
            assert -d_theta == pytest.approx(s @ omega @ t, abs=1e-9)


# Hessian ---------------------------------------------------------------------------

def test_hessian_examples():
    w, reg = hessian(free(so3_algebroid(), 2), random_whitney_points(so3_algebroid(), 2, 1, 0)[0])
    np.testing.assert_array_equal(w, np.eye(6))
    assert reg
    sigma = poisson_sigma_lagrangian(SYMPLECTIC_2D)
    w, reg = hessian(sigma, random_whitney_points(sigma.alg, 2, 1, 0)[0])
    blocks = w.reshape(2, 2, 2, 2)               # [a, A, b, B]
    assert np.all(blocks[:, 0, :, 0] == 0) and np.all(blocks[:, 1, :, 1] == 0)
    np.testing.assert_array_equal(blocks[:, 0, :, 1], -0.5 * SYMPLECTIC_2D)
    assert reg
    odd = poisson_sigma_lagrangian(lie_poisson_so3_bivector())
    assert not hessian(odd, random_whitney_points(odd.alg, 2, 1, 0)[0])[1]
    linear = LagrangianSystem(standard_algebroid(1), 1, lambda q, y: y[0, 0] + 0.0)
    w, reg = hessian(linear, WhitneyPoint(np.zeros(1), np.ones((1, 1))))
    assert np.all(w == 0) and not reg


# SOPDE coefficients ---------------------------------------------------------------------

def test_sopde_k1_free_particle():
    sys = free(standard_algebroid(1), 1)
    sol = solve_sopde_coefficients(sys, WhitneyPoint(np.array([0.3]), np.array([[2.0]])))
    np.testing.assert_array_equal(sol.v, np.zeros((1, 1, 1)))
    np.testing.assert_array_equal(sol.x, [[2.0]])


def test_sopde_wave_minimum_norm():
    sys = wave_lagrangian(1)
    rng = np.random.default_rng(4)
    b = WhitneyPoint(np.array([0.1]), np.array([[0.7, -0.2]]))
    sol = solve_sopde_coefficients(sys, b)
    assert sol.residual == 0.0
    np.testing.assert_array_equal(sol.v, np.zeros((2, 1, 2)))
    # feasible set: (xi_1)^1_1 - (xi_2)^1_2 = 0; every other feasible point has larger norm
    for _ in range(10):
        v = rng.normal(size=(2, 1, 2))
        v[1, 0, 1] = v[0, 0, 0]
        assert np.linalg.norm(v) >= np.linalg.norm(sol.v)


def test_sopde_homogeneous_point_gives_zero():
    sys = euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=2)
    sol = solve_sopde_coefficients(sys, WhitneyPoint(np.zeros(0), np.zeros((3, 2))))
    assert np.all(sol.v == 0)


def test_sopde_singular_hessian_reports_condition():
    sys = poisson_sigma_lagrangian(lie_poisson_so3_bivector())
    with pytest.raises(SingularHessian) as info:
        solve_sopde_coefficients(sys, random_whitney_points(sys.alg, 2, 1, 0)[0])
    assert info.value.condition > 1e10


@pytest.mark.parametrize("name", list(zoo_lagrangians()))
def test_solved_sections_are_sopdes(name):
    sys = zoo_lagrangians()[name]
    pts = [b for b in random_whitney_points(sys.alg, sys.k, 20, 5) if hessian(sys, b)[1]]
    assert sopde_check(sopde_section(sys), pts)


# geometric equation --------------------------------------------------------------------------

def test_zero_section_gives_minus_energy_differential():
    from afields.prolongation import ProlongedElement
    sys = convex_lagrangian(standard_algebroid(2), 2)
    b = random_whitney_points(sys.alg, 2, 1, 6)[0]
    zero = [ProlongedElement(b, np.zeros(2), np.zeros((2, 2))) for _ in range(2)]
    np.testing.assert_allclose(geometric_equation_residual(sys, zero, b), -energy_differential(sys, b))
    with pytest.raises(DimensionError):
        geometric_equation_residual(sys, zero[:1], b)


def test_residual_slope_is_a_hessian_entry():
    from afields.prolongation import ProlongedElement
    sys = convex_lagrangian(so3_algebroid(), 2)
    b = random_whitney_points(sys.alg, 2, 1, 7)[0]
    sol = solve_sopde_coefficients(sys, b)
    w, _ = hessian(sys, b)
    A, beta, B = 1, 2, 0
    eps = 1e-3

    def residual(v):
        return geometric_equation_residual(sys, [ProlongedElement(b, sol.x[:, C], v[C]) for C in range(2)], b)
    v = sol.v.copy()
    v[A, beta, B] += eps
    slope = (residual(v) - residual(sol.v))[:3] / eps
    np.testing.assert_allclose(slope, w[:, beta * 2 + B].reshape(3, 2)[:, A], rtol=1e-8, atol=1e-10)


# grid residuals -------------------------------------------------------------------------------

def quadratic_wave_field():
    return sample_field((7, 7), (0.1, 0.1), lambda t: [t[0] ** 2 + t[1] ** 2],
                        lambda t: [[2 * t[0], 2 * t[1]]], Side.LAGRANGIAN)


def test_wave_quadratic_is_exact():
    res = euler_lagrange_residuals(wave_lagrangian(1), quadratic_wave_field())
    assert res.norms()["linf"] < 1e-12 and res.norms()["anchor_linf"] < 1e-12
    assert res.norms()["interior_nodes"] == 25


def test_harmonic_parallel_constant_columns_vanish():
    c = np.array([0.5, -1.0, 2.0])
    field = sample_field((4, 4), (0.5, 0.5), lambda t: [], lambda t: [[c[a], 3 * c[a]] for a in range(3)],
                         Side.LAGRANGIAN)
    res = euler_lagrange_residuals(harmonic_map_lagrangian(), field)
    assert np.all(res.primary == 0) and np.all(res.morphism_res == 0)


def test_zero_field_zero_residuals():
    sys = convex_lagrangian(standard_algebroid(2), 2)
    field = sample_field((4, 5), (0.1, 0.2), lambda t: [0.0, 0.0], lambda t: [[0.0, 0.0], [0.0, 0.0]],
                         Side.LAGRANGIAN)
    res = euler_lagrange_residuals(sys, field)
    assert np.all(res.primary == 0) and np.all(res.anchor_res == 0) and np.all(res.morphism_res == 0)


def test_nodewise_matches_vectorized_and_rejects_boundary():
    sys = convex_lagrangian(so3_algebroid(), 2)
    rng = np.random.default_rng(8)
    coef = rng.normal(size=(3, 2, 3))
    field = sample_field((5, 6), (0.1, 0.15), lambda t: [],
                         lambda t: [[coef[a, A, 0] + np.sin(coef[a, A, 1] * t[0] + coef[a, A, 2] * t[1])
                                     for A in range(2)] for a in range(3)], Side.LAGRANGIAN)
    res = euler_lagrange_residuals(sys, field)
    for i, node in enumerate(res.nodes):
        single = euler_lagrange_residual(sys, field, node)
        np.testing.assert_allclose(single.el_res, res.primary[i], atol=1e-12)
        np.testing.assert_allclose(single.morphism_res, res.morphism_res[i], atol=1e-12)
        assert single.momentum_scale > 0 and single.to_dict()["norms"]["el_res"] >= 0
    with pytest.raises(BoundaryNode):
        euler_lagrange_residual(sys, field, (0, 2))
    with pytest.raises(DimensionError):
        euler_lagrange_residual(sys, field, (1,))


def test_rigid_body_k1_reduction():
    inertia = np.diag(SO3_INERTIA)
    sys = euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=1)
    w = np.array([1.1, -0.4, 0.9])

    def y(t):
        return np.array([np.sin(w[0] * t[0]), np.cos(w[1] * t[0]), t[0] * t[0]], dtype=object)
    phi = MorphismData(lambda t: [], lambda t: y(t).reshape(3, 1), 1)
    for t in (0.2, 1.3):
        yv = np.array([np.sin(w[0] * t), np.cos(w[1] * t), t * t])
        ydot = np.array([w[0] * np.cos(w[0] * t), -w[1] * np.sin(w[1] * t), 2 * t])
        r = euler_lagrange_residual_exact(sys, phi, [t])
        np.testing.assert_allclose(r.el_res, inertia @ ydot + np.cross(yv, inertia @ yv), atol=1e-12)


@pytest.mark.parametrize("name", ["convex lie-poisson k=2", "convex atiyah k=1", "harmonic"])
def test_ad_derivatives_match_finite_differences(name):
    sys = zoo_lagrangians()[name]
    rng = np.random.default_rng(9)
    for b in random_whitney_points(sys.alg, sys.k, 3, rng):
        x = b.flat()
        d = ad.derivatives(sys.flat_function, x, order=2)
        fd = ad.finite_differences(lambda v: float(sys.flat_function(v)), x, step=1e-5)
        np.testing.assert_allclose(d.grad, fd.grad, rtol=1e-6, atol=1e-8)
        fd2 = ad.finite_differences(lambda v: ad.derivatives(sys.flat_function, v).grad, x, step=1e-5)
        np.testing.assert_allclose(d.hess, fd2.grad, rtol=1e-6, atol=1e-8)
