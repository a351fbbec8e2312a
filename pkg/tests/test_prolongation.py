import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afields.algebroid import levi_civita, sample_box, validate_structure_equations
from afields.hamiltonian import HamiltonSection, solve_hamilton_section
from afields.models import (lie_poisson_so3_bivector, poisson_cotangent_algebroid, quadratic_hamiltonian,
                            so3_algebroid, standard_algebroid, zoo_algebroids)
from afields.prolongation import (CoWhitneyPoint, ProlongedElement, Side, SopdeSection, WhitneyPoint,
                                  associated_k_vector, element_from_vector, liouville_section, prolong,
                                  random_elements, random_whitney_points, sopde_check, sopde_check_endomorphism,
                                  sopde_violation, vertical_endomorphism, vertical_lift)

SO3 = so3_algebroid()


def test_standard_prolongation_is_the_identity_anchor():
    pro = prolong(standard_algebroid(1), 2)
    assert pro.total_dim == 3 and pro.rank == 3
    x = np.array([0.4, -1.0, 2.0])
    np.testing.assert_array_equal(pro.algebroid.anchor_at(x), np.eye(3))
    np.testing.assert_array_equal(pro.algebroid.structure_at(x), np.zeros((3, 3, 3)))


@pytest.mark.parametrize("side", list(Side))
def test_brackets_with_vertical_elements_vanish(side):
    alg = poisson_cotangent_algebroid(lie_poisson_so3_bivector())
    pro = prolong(alg, 2, side).algebroid
    c = pro.structure_at(np.random.default_rng(0).uniform(-1, 1, pro.base_dim))
    m = alg.rank
    assert np.all(c[:, m:, :] == 0) and np.all(c[:, :, m:] == 0) and np.all(c[m:] == 0)


def test_so3_prolonged_bracket_on_x_block():
    pro = prolong(SO3, 2).algebroid
    c = pro.structure_at(np.zeros(pro.base_dim))
    np.testing.assert_array_equal(c[:3, :3, :3], levi_civita())
    rep = validate_structure_equations(pro, sample_box(pro.base_dim, 50, 0), 1e-8)
    assert rep.passed


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("side", list(Side))
def test_prolonged_zoo_passes_validator(k, side):
    for alg in zoo_algebroids().values():
        pro = prolong(alg, k, side).algebroid
        assert validate_structure_equations(pro, sample_box(pro.base_dim, 20, k), 1e-8).passed


def test_closure_prolongation_matches_jet_derivatives():
    from afields.algebroid import LieAlgebroid
    alg = zoo_algebroids()["atiyah R^2 x SO(3)"]
    pro = prolong(alg, 2).algebroid
    x = np.random.default_rng(1).uniform(-1, 1, (4, pro.base_dim))
    plain = LieAlgebroid(pro.base_dim, pro.rank, pro.anchor, pro.structure)
    for fast, slow in ((pro.anchor_derivatives(x), plain.anchor_derivatives(x)),
                       (pro.structure_derivatives(x), plain.structure_derivatives(x))):
        np.testing.assert_allclose(fast.value, slow.value, atol=1e-14)
        np.testing.assert_allclose(fast.grad, slow.grad, atol=1e-14)


def test_prolong_rejects_bad_k():
    with pytest.raises(ValueError):
        prolong(SO3, 0)


def test_point_round_trip():
    pro = prolong(SO3, 2, Side.HAMILTONIAN)
    x = np.arange(6.0)
    p = pro.point(x)
    assert isinstance(p, CoWhitneyPoint) and p.p.shape == (2, 3)
    np.testing.assert_array_equal(p.flat(), x)
    b = prolong(SO3, 2).point(x)
    assert isinstance(b, WhitneyPoint) and b.y.shape == (3, 2)


# vertical lift, Liouville section, vertical endomorphism --------------------------------

def test_vertical_lift_examples():
    b = WhitneyPoint(np.zeros(0), np.zeros((3, 2)))
    lift = vertical_lift(SO3, 2, [1, 0, 0], b, 1)
    np.testing.assert_array_equal(lift.w, [[0, 1], [0, 0], [0, 0]])
    assert np.all(lift.z == 0)
    assert vertical_lift(SO3, 2, np.zeros(3), b, 0).is_zero()
    with pytest.raises(IndexError):
        vertical_lift(SO3, 2, [1, 0, 0], b, 2)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.integers(0, 2))
def test_vertical_lift_is_linear(e, f, A):
    b = WhitneyPoint(np.zeros(0), np.ones((3, 3)))
    e, f = np.array(e), np.array(f)
    lhs = vertical_lift(SO3, 3, 2 * e + f, b, A)
    rhs = 2.0 * vertical_lift(SO3, 3, e, b, A) + vertical_lift(SO3, 3, f, b, A)
    np.testing.assert_allclose(lhs.vector(), rhs.vector(), atol=1e-12)


def test_liouville_examples():
    alg = standard_algebroid(2)
    b = WhitneyPoint(np.zeros(2), np.array([[1.0, 2.0], [3.0, 4.0]]))
    d = liouville_section(alg, 2, 0, b)
    np.testing.assert_array_equal(d.w, [[1, 0], [3, 0]])
    assert liouville_section(alg, 2, 1, WhitneyPoint(np.zeros(2), np.zeros((2, 2)))).is_zero()
    for b in random_whitney_points(alg, 2, 5, 0):
        for A in range(2):
            np.testing.assert_array_equal(liouville_section(alg, 2, A, b).vector(),
                                          vertical_lift(alg, 2, b.y[:, A], b, A).vector())
    with pytest.raises(IndexError):
        liouville_section(alg, 2, -1, b)


def test_vertical_endomorphism_examples():
    b = random_whitney_points(SO3, 2, 1, 0)[0]
    for a in range(3):
        x = ProlongedElement(b, np.eye(3)[a], np.zeros((3, 2)))
        out = vertical_endomorphism(SO3, 2, 1, x)
        np.testing.assert_array_equal(out.vector(), vertical_lift(SO3, 2, np.eye(3)[a], b, 1).vector())
    v = ProlongedElement(b, np.zeros(3), np.ones((3, 2)))
    assert vertical_endomorphism(SO3, 2, 0, v).is_zero()
    with pytest.raises(IndexError):
        vertical_endomorphism(SO3, 2, 5, v)


def test_vertical_endomorphism_squares_to_zero():
    rng = np.random.default_rng(4)
    for k in (1, 2, 3):
        b = random_whitney_points(SO3, k, 1, rng)[0]
        for Z in random_elements(b, 3, k, 10, rng):
            for A in range(k):
                for B in range(k):
                    assert vertical_endomorphism(SO3, k, A, vertical_endomorphism(SO3, k, B, Z)).is_zero()


def test_k1_specialization_has_single_column():
    b = random_whitney_points(SO3, 1, 1, 0)[0]
    assert liouville_section(SO3, 1, 0, b).w.shape == (3, 1)
    Z = next(random_elements(b, 3, 1, 1, 0))
    np.testing.assert_array_equal(vertical_endomorphism(SO3, 1, 0, Z).w[:, 0], Z.z)


def test_element_from_vector_sides():
    b = WhitneyPoint(np.zeros(0), np.zeros((3, 2)))
    p = CoWhitneyPoint(np.zeros(0), np.zeros((2, 3)))
    vec = np.arange(9.0)
    assert element_from_vector(b, vec, 3, 2).w.shape == (3, 2)
    assert element_from_vector(p, vec, 3, 2).w.shape == (2, 3)


# SOPDE ---------------------------------------------------------------------------------------

def test_sopde_check_examples():
    rng = np.random.default_rng(5)
    pts = random_whitney_points(SO3, 2, 10, rng)
    v = rng.normal(size=(2, 3, 2))
    good = SopdeSection(SO3, 2, lambda b: (b.y, v))
    bad = SopdeSection(SO3, 2, lambda b: (np.zeros_like(b.y), v))
    assert sopde_check(good, pts) and sopde_check_endomorphism(good, pts)
    assert not sopde_check(bad, pts) and not sopde_check_endomorphism(bad, pts)
    assert sopde_violation(bad, pts[0]) == pytest.approx(np.max(np.abs(pts[0].y)))
    with pytest.raises(ValueError):
        sopde_check(good, [])


def test_sopde_criteria_agree_on_random_sections():
    rng = np.random.default_rng(6)
    pts = random_whitney_points(SO3, 2, 5, rng)
    for i in range(100):
        shift = 0.0 if i % 2 else 10 ** rng.uniform(-6, 0)
        v = rng.normal(size=(2, 3, 2))
        xi = SopdeSection(SO3, 2, lambda b, s=shift, v=v: (b.y + s, v))
        assert sopde_check(xi, pts) == sopde_check_endomorphism(xi, pts)


def test_associated_k_vector_examples():
    alg = standard_algebroid(2)
    b = WhitneyPoint(np.array([0.1, 0.2]), np.array([[1.0, 2.0], [3.0, 4.0]]))
    v = np.arange(8.0).reshape(2, 2, 2)
    xi = SopdeSection(alg, 2, lambda b: (b.y, v))
    vec = associated_k_vector(xi, b)
    for A in range(2):
        np.testing.assert_array_equal(vec[A], np.concatenate([b.y[:, A], v[A].ravel()]))
    b0 = WhitneyPoint(np.zeros(0), np.ones((3, 2)))
    vec = associated_k_vector(SopdeSection(SO3, 2, lambda b: (b.y, np.zeros((2, 3, 2)))), b0)
    assert vec.shape == (2, 6)


def test_associated_k_vector_of_hamiltonian_section():
    ham = quadratic_hamiltonian(SO3, 2)
    p = CoWhitneyPoint(np.zeros(0), np.array([[0.1, 0.2, 0.3], [0.0, -1.0, 0.5]]))
    sec = solve_hamilton_section(ham, p)
    assert isinstance(sec, HamiltonSection)
    assert associated_k_vector(sec, p).shape == (2, 6)
