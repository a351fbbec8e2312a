from dataclasses import dataclass, replace

import numpy as np
import pytest

from afields import autodiff as ad
from afields.algebroid import levi_civita
from afields.errors import NoConvergence, SingularHessian
from afields.grid import sample_field
from afields.lagrangian import LagrangianSystem
from afields.legendre import (LegendreMap, induced_hamiltonian, legendre_field, legendre_forward, legendre_invert,
                              legendre_prolonged, pullback_check, round_trip_error, solution_transport,
                              transport_trajectory)
from afields.models import (SO3_INERTIA, SYMPLECTIC_2D, convex_lagrangian, euler_poincare_lagrangian,
                            harmonic_map_lagrangian, lie_poisson_so3_bivector, poisson_sigma_lagrangian,
                            so3_algebroid, standard_algebroid, wave_lagrangian, zoo_lagrangians)
from afields.prolongation import (CoWhitneyPoint, ProlongedElement, Side, WhitneyPoint, random_elements,
                                  random_whitney_points)


def free(alg, k):
    return LagrangianSystem(alg, k, lambda q, y: 0.5 * np.sum(y * y))


# forward map ------------------------------------------------------------------------

def test_forward_examples():
    b = WhitneyPoint(np.array([0.1, 0.2]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(legendre_forward(LegendreMap(free(standard_algebroid(2), 2)), b).p, b.y.T)
    h = WhitneyPoint(np.zeros(0), np.arange(6.0).reshape(3, 2))
    np.testing.assert_array_equal(legendre_forward(LegendreMap(harmonic_map_lagrangian()), h).p, 2 * h.y.T)
    sigma = LegendreMap(poisson_sigma_lagrangian(SYMPLECTIC_2D))
    p = legendre_forward(sigma, b).p
    # each slot's momentum is built from the other slot's velocity
    np.testing.assert_allclose(p[0], -0.5 * SYMPLECTIC_2D @ b.y[:, 1])
    np.testing.assert_allclose(p[1], -0.5 * b.y[:, 0] @ SYMPLECTIC_2D)


def test_prolonged_map_for_free_lagrangian_transposes():
    leg = LegendreMap(free(so3_algebroid(), 2))
    b = random_whitney_points(so3_algebroid(), 2, 1, 0)[0]
    for Z in random_elements(b, 3, 2, 5, 1):
        img = legendre_prolonged(leg, Z)
        np.testing.assert_array_equal(img.z, Z.z)
        np.testing.assert_array_equal(img.w, Z.w.T)
        np.testing.assert_array_equal(img.base.p, b.y.T)


# inversion -----------------------------------------------------------------------

@pytest.mark.parametrize("name", ["convex standard(2) k=2", "convex lie-poisson k=2", "convex atiyah k=1",
                                  "euler-poincare so(3) k=2", "sigma symplectic R^2"])
def test_round_trip(name):
    leg = LegendreMap(zoo_lagrangians()[name])
    pts = random_whitney_points(leg.sys.alg, leg.sys.k, 20, 2)
    assert round_trip_error(leg, pts) < 1e-10


def test_invert_with_guess():
    leg = LegendreMap(convex_lagrangian(standard_algebroid(2), 2))
    b = random_whitney_points(leg.sys.alg, 2, 1, 3)[0]
    back = legendre_invert(leg, legendre_forward(leg, b), guess=b)
    np.testing.assert_allclose(back.y, b.y, atol=1e-12)


def test_singular_inversion_raises():
    with pytest.raises(SingularHessian):
        legendre_invert(LegendreMap(poisson_sigma_lagrangian(lie_poisson_so3_bivector())),
                        CoWhitneyPoint(np.array([0.1, 0.2, 0.3]), np.ones((2, 3))))
    linear = LagrangianSystem(standard_algebroid(1), 1, lambda q, y: y[0, 0] + 0.0)
    with pytest.raises(SingularHessian):
        legendre_invert(LegendreMap(linear), CoWhitneyPoint(np.zeros(1), np.array([[2.0]])))


def test_iteration_cap_raises():
    leg = LegendreMap(convex_lagrangian(standard_algebroid(2), 2), max_iter=1)
    with pytest.raises(NoConvergence) as info:
        legendre_invert(leg, CoWhitneyPoint(np.array([0.5, -0.5]), 50 * np.ones((2, 2))))
    assert info.value.iterations == 1


# induced Hamiltonian --------------------------------------------------------------

def test_induced_hamiltonian_of_free_lagrangian():
    ham = induced_hamiltonian(LegendreMap(free(standard_algebroid(2), 2)))
    rng = np.random.default_rng(4)
    for _ in range(5):
        p = CoWhitneyPoint(rng.normal(size=2), rng.normal(size=(2, 2)))
        assert ham(p) == pytest.approx(0.5 * np.sum(p.p ** 2), abs=1e-12)
        np.testing.assert_allclose(ham.derivatives(p).dp, p.p, atol=1e-12)


@pytest.mark.parametrize("name", ["convex lie-poisson k=2", "convex atiyah k=1"])
def test_induced_gradient_matches_finite_differences(name):
    leg = LegendreMap(zoo_lagrangians()[name])
    ham = induced_hamiltonian(leg)
    for b in random_whitney_points(leg.sys.alg, leg.sys.k, 3, 5):
        x = legendre_forward(leg, b).flat()
        d = ham.derivatives(x)
        fd = ad.finite_differences(lambda v: ham.flat_function(v), x, step=1e-5)
        np.testing.assert_allclose(np.concatenate([d.dq, d.dp.ravel()]), fd.grad, rtol=1e-6, atol=1e-8)


# pullback -----------------------------------------------------------------------------

def test_pullback_with_zero_element():
    leg = LegendreMap(zoo_lagrangians()["convex lie-poisson k=2"])
    b = random_whitney_points(leg.sys.alg, 2, 1, 6)[0]
    zero = ProlongedElement(b, np.zeros(3), np.zeros((3, 2)))
    Z = next(random_elements(b, 3, 2, 1, 7))
    r = pullback_check(leg, b, zero, Z)
    assert r.theta_error == 0.0 and r.omega_error == 0.0 and r.theta_ok and r.omega_ok


@pytest.mark.parametrize("name", list(zoo_lagrangians()))
def test_pullback_holds_across_zoo(name):
    leg = LegendreMap(zoo_lagrangians()[name])
    alg, k = leg.sys.alg, leg.sys.k
    rng = np.random.default_rng(8)
    for b in random_whitney_points(alg, k, 3, rng):
        Z1, Z2 = random_elements(b, alg.rank, k, 2, rng)
        r = pullback_check(leg, b, Z1, Z2)
        assert r.theta_ok and r.omega_ok, r


@dataclass(frozen=True)
class CorruptedHessian(LegendreMap):
    def derivatives(self, points, order=2):
        d = super().derivatives(points, order)
        if order < 2:
            return d
        return replace(d, dyy=d.dyy * 1.1)


def test_corrupted_hessian_breaks_only_the_two_form():
    leg = CorruptedHessian(convex_lagrangian(so3_algebroid(), 2))
    b = random_whitney_points(leg.sys.alg, 2, 1, 9)[0]
    Z1, Z2 = random_elements(b, 3, 2, 2, 10)
    r = pullback_check(leg, b, Z1, Z2)
    assert r.theta_ok and r.theta_error < 1e-12
    assert not r.omega_ok and r.omega_error > 1e-3


# transport -------------------------------------------------------------------------------

def test_transport_of_constant_field_is_exact():
    leg = LegendreMap(wave_lagrangian(1))
    eta = sample_field((4, 4), (0.1, 0.1), lambda t: [0.7], lambda t: [[0.0, 0.0]], Side.LAGRANGIAN)
    psi, rep = solution_transport(leg, eta)
    assert psi.side is Side.HAMILTONIAN and np.all(psi.fiber == 0)
    assert rep.el_res_max == 0.0 and rep.ham_res_max == 0.0
    assert len(rep.nodes) == 4 and all(n["regular"] for n in rep.nodes)
    assert "nodes" not in rep.to_dict(include_nodes=False)


def test_transport_of_aligned_lie_algebra_field():
    leg = LegendreMap(convex_lagrangian(so3_algebroid(), 2))
    # columns along a single axis: every bracket term vanishes
    eta = sample_field((3, 3), (0.5, 0.5), lambda t: [], lambda t: [[0.4, -1.2], [0.0, 0.0], [0.0, 0.0]],
                       Side.LAGRANGIAN)
    psi, rep = solution_transport(leg, eta)
    assert rep.el_res_max == 0.0 and rep.ham_res_max < 1e-12
    np.testing.assert_allclose(psi.fiber[1, 1], legendre_forward(leg, eta.point((1, 1))).p)


def test_transport_requires_a_lagrangian_field():
    leg = LegendreMap(wave_lagrangian(1))
    eta = sample_field((3, 3), (0.1, 0.1), lambda t: [0.0], lambda t: [[0.0, 0.0]], Side.LAGRANGIAN)
    psi = legendre_field(leg, eta)
    with pytest.raises(ValueError):
        solution_transport(leg, psi)


def test_trajectory_momenta_for_rigid_body():
    leg = LegendreMap(euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=1))
    y = np.random.default_rng(11).normal(size=(5, 3))
    np.testing.assert_allclose(transport_trajectory(leg, np.zeros((5, 0)), y), y * np.array(SO3_INERTIA))
