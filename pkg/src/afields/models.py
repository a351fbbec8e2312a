"""Model zoo: concrete algebroids, Lagrangians and Hamiltonians.

Every algebroid constructor checks the structure equations on 100 random
points of ``[-1, 1]^n`` before returning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import autodiff as ad
from .algebroid import LieAlgebroid, levi_civita, validate_structure_equations
from .errors import JacobiViolation
from .hamiltonian import HamiltonianSystem
from .lagrangian import LagrangianSystem
from .polynomial import PolyArray

VALIDATION_POINTS = 100


def _validated(alg: LieAlgebroid, what: str, validate: bool = True) -> LieAlgebroid:
    if validate:
        pts = np.random.default_rng(12345).uniform(-1, 1, (VALIDATION_POINTS, alg.base_dim))
        rep = validate_structure_equations(alg, pts)
        if not rep.passed:
            raise JacobiViolation(
                f"{what}: structure equations fail (jacobi {rep.max_violation_jacobi:.3e}, "
                f"anchor {rep.max_violation_anchor:.3e}, antisymmetry {rep.max_violation_antisymmetry:.3e})")
    return alg


def standard_algebroid(n: int) -> LieAlgebroid:
    """Tangent bundle of R^n: identity anchor, vanishing structure functions."""
    if n < 1:
        raise ValueError("standard algebroid needs n >= 1")
    return LieAlgebroid.from_arrays(np.eye(n), np.zeros((n, n, n)), chart_label=f"standard({n})")


def lie_algebra_algebroid(structure_constants, label: str = "lie algebra",
                          validate: bool = True) -> LieAlgebroid:
    """A Lie algebra as an algebroid over a point; constants indexed ``[gamma, alpha, beta]``."""
    c = np.asarray(structure_constants, float)
    m = c.shape[0]
    if c.shape != (m, m, m):
        raise ValueError(f"structure constants must have shape (m, m, m), got {c.shape}")
    alg = LieAlgebroid.from_arrays(np.zeros((0, m)), c, chart_label=label, base_dim=0)
    return _validated(alg, label, validate)


def so3_algebroid() -> LieAlgebroid:
    return lie_algebra_algebroid(levi_civita(), "so(3)")


def _matrix_field(table, n: int) -> Callable:
    if isinstance(table, PolyArray) or callable(table):
        return table
    return PolyArray.constant(np.asarray(table, float), n)


def poisson_cotangent_algebroid(bivector, n: int | None = None, validate: bool = True) -> LieAlgebroid:
    """Cotangent algebroid of a Poisson bivector ``Lambda^{ij}(q)``.

    Anchor ``rho(dq^i) = Lambda^{ij} d/dq^j`` and ``[dq^i, dq^j] = d Lambda^{ij}/dq^k dq^k``.
    ``bivector`` is a constant array, a :class:`PolyArray` or a callable of q.
    """
    if n is None:
        n = bivector.shape[0] if isinstance(bivector, PolyArray) else np.asarray(bivector).shape[0]
    lam = _matrix_field(bivector, n)
    if isinstance(lam, PolyArray):
        anchor_terms = {(j, i): ms for (i, j), ms in lam.terms.items()}
        anchor = PolyArray((n, n), n, anchor_terms)
        dl = lam.derivative()                                  # [i, j, k] = d_k Lambda^{ij}
        struct_terms = {(kk, i, j): ms for (i, j, kk), ms in dl.terms.items()}
        structure = PolyArray((n, n, n), n, struct_terms)
    else:
        def lam_flat(q):
            return np.asarray(lam(q), dtype=object).reshape(n * n)

        jac = ad.jacobian_field(lam_flat)

        def anchor(q):
            return np.asarray(lam(q), dtype=object).reshape(n, n).T

        def structure(q):
            d = np.asarray(jac(q), dtype=object).reshape(n, n, n)   # [i, j, k]
            return np.transpose(d, (2, 0, 1))

    alg = LieAlgebroid(n, n, anchor, structure, chart_label="Poisson cotangent")
    return _validated(alg, "Poisson bivector", validate)


def lie_poisson_so3_bivector() -> PolyArray:
    """``Lambda^{ij} = eps_{ijk} q^k`` on so(3)*."""
    terms = {}
    for i, j, kk in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        e = [0, 0, 0]
        e[kk] = 1
        terms[(i, j)] = ((1.0, tuple(e)),)
        terms[(j, i)] = ((-1.0, tuple(e)),)
    return PolyArray((3, 3), 3, terms)


def atiyah_trivial(n: int, group_structure, connection, validate: bool = True,
                   derivative_order: str = "ij") -> LieAlgebroid:
    """Atiyah algebroid of the trivial bundle ``R^n x G`` with connection ``A^a_i(q)``.

    Basis ``e_i`` (i < n) and ``e_a``.  Brackets: ``[e_i, e_j] = -B^c_ij e_c``,
    ``[e_i, e_a] = C^c_ab A^b_i e_c``, ``[e_a, e_b] = C^c_ab e_c``; anchor
    ``e_i -> d/dq^i``, ``e_a -> 0``.  ``connection`` has shape (dim g, n).

    With ``derivative_order="ij"`` the curvature is
    ``B^c_ij = d_i A^c_j - d_j A^c_i - C^c_ab A^a_i A^b_j``, which satisfies the
    Jacobi identity.  ``"ji"`` swaps the two derivative terms; that table
    fails Jacobi for non-abelian G with a non-closed connection and is kept
    only as a negative control.
    """
    cg = np.asarray(group_structure, float)
    d = cg.shape[0]
    if validate:
        lie_algebra_algebroid(cg, "group structure constants")
    if derivative_order not in ("ij", "ji"):
        raise ValueError("derivative_order must be 'ij' or 'ji'")
    if n == 0:
        return LieAlgebroid.from_arrays(np.zeros((0, d)), cg, chart_label="atiyah (trivial)", base_dim=0)
    conn = _matrix_field(connection, n)
    m = n + d

    def conn_flat(q):
        return np.asarray(conn(q), dtype=object).reshape(d * n)

    jac = ad.jacobian_field(conn_flat)
    sign = 1.0 if derivative_order == "ij" else -1.0

    def anchor(q):
        out = np.zeros((n, m), dtype=object)
        out[:, :n] = np.eye(n)
        return out

    def structure(q):
        a = np.asarray(conn(q), dtype=object).reshape(d, n)        # A^a_i
        da = np.asarray(jac(q), dtype=object).reshape(d, n, n)     # [c, j, i] = d_i A^c_j
        out = np.zeros((m, m, m), dtype=object)
        for c in range(d):
            for i in range(n):
                for j in range(n):
                    curv = sign * (da[c, j, i] - da[c, i, j])
                    for x in range(d):
                        for y in range(d):
                            if cg[c, x, y]:
                                curv = curv - cg[c, x, y] * a[x, i] * a[y, j]
                    out[n + c, i, j] = -curv
                for x in range(d):
                    s = 0.0
                    for y in range(d):
                        if cg[c, x, y]:
                            s = s + cg[c, x, y] * a[y, i]
                    out[n + c, i, n + x] = s
                    out[n + c, n + x, i] = -s
            out[n + c, n:, n:] = cg[c]
        return out

    alg = LieAlgebroid(n, m, anchor, structure, chart_label="atiyah (trivial)")
    return _validated(alg, "Atiyah algebroid", validate)


# Lagrangians and Hamiltonians ------------------------------------------------

def wave_lagrangian(n: int = 1) -> LagrangianSystem:
    """``L = 1/2 (|y_1|^2 - |y_2|^2)`` on the standard algebroid, k = 2."""

    def L(q, y):
        return 0.5 * (np.sum(y[:, 0] * y[:, 0]) - np.sum(y[:, 1] * y[:, 1]))

    return LagrangianSystem(standard_algebroid(n), 2, L, "wave")


def harmonic_map_lagrangian() -> LagrangianSystem:
    """``l = sum_a (y^a_1)^2 + (y^a_2)^2`` on so(3), k = 2 (no 1/2 factor)."""

    def L(q, y):
        return np.sum(y * y)

    return LagrangianSystem(so3_algebroid(), 2, L, "harmonic")


def poisson_sigma_lagrangian(bivector, n: int | None = None, validate: bool = True) -> LagrangianSystem:
    """``L = -1/2 Lambda^{ij}(q) p1_i p2_j`` on the doubled cotangent algebroid (k = 2)."""
    alg = poisson_cotangent_algebroid(bivector, n, validate)
    n = alg.base_dim
    lam = _matrix_field(bivector, n)

    def L(q, y):
        mat = np.asarray(lam(q), dtype=object).reshape(n, n)
        return -0.5 * (y[:, 0] @ mat @ y[:, 1])

    return LagrangianSystem(alg, 2, L, "poisson-sigma")


def poisson_sigma_hamiltonian(bivector, n: int | None = None) -> HamiltonianSystem:
    """Test Hamiltonian ``1/2 sum (p^A_i)^2`` on the doubled dual of the cotangent algebroid."""
    alg = poisson_cotangent_algebroid(bivector, n)

    def H(q, p):
        return 0.5 * np.sum(p * p)

    return HamiltonianSystem(alg, 2, H, "poisson-sigma quadratic")


def _inertia_matrix(inertia, m: int) -> np.ndarray:
    a = np.asarray(inertia, float)
    return np.diag(a) if a.ndim == 1 else a.reshape(m, m)


def euler_poincare_lagrangian(group_structure, inertia, k: int = 1, signature=None,
                              validate: bool = True) -> LagrangianSystem:
    """``L = 1/2 sum_A s_A y_A^T I y_A`` on a Lie algebra; ``s`` defaults to all +1."""
    alg = lie_algebra_algebroid(group_structure, "euler-poincare algebra", validate)
    m = alg.rank
    inertia_m = _inertia_matrix(inertia, m)
    sig = np.ones(k) if signature is None else np.asarray(signature, float)
    if sig.shape != (k,):
        raise ValueError("signature needs one sign per slot")

    def L(q, y):
        total = 0.0
        for A in range(k):
            total = total + 0.5 * sig[A] * (y[:, A] @ inertia_m @ y[:, A])
        return total

    return LagrangianSystem(alg, k, L, "euler-poincare")


def lie_poisson_hamiltonian(group_structure, inertia) -> HamiltonianSystem:
    """Reduced rigid-body Hamiltonian ``1/2 p^T I^{-1} p`` (k = 1)."""
    alg = lie_algebra_algebroid(group_structure, "lie-poisson algebra")
    inv = np.linalg.inv(_inertia_matrix(inertia, alg.rank))

    def H(q, p):
        return 0.5 * (p[0] @ inv @ p[0])

    return HamiltonianSystem(alg, 1, H, "lie-poisson")


def convex_lagrangian(alg: LieAlgebroid, k: int) -> LagrangianSystem:
    """Strictly convex test Lagrangian with position dependence.

    ``L = (1 + |q|^2/2) sum(y^4/4 + y^2/2) + sum_A g(q).y_A - |q|^2/2``,
    ``g_a(q) = 0.3 q_{a mod n}`` (absent when n = 0).
    """
    n = alg.base_dim

    def L(q, y):
        qq = sum((qi * qi for qi in q), 0.0)
        kin = 0.0
        for e in y.ravel():
            e2 = e * e
            kin = kin + 0.25 * e2 * e2 + 0.5 * e2
        total = (1.0 + 0.5 * qq) * kin - 0.5 * qq
        if n:
            for a in range(y.shape[0]):
                for A in range(k):
                    total = total + 0.3 * q[a % n] * y[a, A]
        return total

    return LagrangianSystem(alg, k, L, "convex")


def quadratic_hamiltonian(alg: LieAlgebroid, k: int) -> HamiltonianSystem:
    """Test Hamiltonian with position dependence:
    ``H = (1 + |q|^2/2)|p|^2/2 + sum_A g(q).p_A + |q|^4/4``."""
    n = alg.base_dim

    def H(q, p):
        qq = sum((qi * qi for qi in q), 0.0)
        total = 0.5 * (1.0 + 0.5 * qq) * np.sum(p * p) + 0.25 * qq * qq
        if n:
            for A in range(k):
                for a in range(p.shape[1]):
                    total = total + 0.3 * q[a % n] * p[A, a]
        return total

    return HamiltonianSystem(alg, k, H, "quadratic")


# descriptors and registry ------------------------------------------------------

@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    parameters: dict[str, Any]
    algebroid: LieAlgebroid
    lagrangian: LagrangianSystem | None = None
    hamiltonian: HamiltonianSystem | None = None
    evolution: str | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def k(self) -> int | None:
        sys = self.lagrangian or self.hamiltonian
        return sys.k if sys else None


SO3_INERTIA = (1.0, 2.0, 3.0)
SO3_CONNECTION = PolyArray.from_json(
    [[[[1.0, [1, 0]], [0.5, [0, 2]]], [[0.3, [1, 1]]]],
     [[[-0.7, [0, 1]]], [[1.0, [2, 0]], [0.2, [0, 0]]]],
     [[[0.4, [1, 1]]], [[-0.5, [1, 0]], [0.6, [0, 1]]]]], 2)
SYMPLECTIC_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _structure_from(data: Any) -> np.ndarray:
    if isinstance(data, str):
        if data == "builtin:so3":
            return levi_civita()
        raise ValueError(f"unknown structure {data!r}")
    return np.asarray(data, float)


def _table(data: Any, n: int):
    if isinstance(data, str):
        if data == "builtin:lie-poisson-so3":
            return lie_poisson_so3_bivector()
        if data == "builtin:symplectic":
            return PolyArray.constant(SYMPLECTIC_2D, 2)
        raise ValueError(f"unknown table {data!r}")
    return PolyArray.from_json(data, n)


def load_model(name: str) -> ModelDescriptor:
    """Resolve a registry name such as ``standard:2``, ``so3`` or ``sigma:lambda.json``."""
    kind, _, arg = name.partition(":")
    if kind == "wave":
        sys = wave_lagrangian(1)
        return ModelDescriptor("wave", {"n": 1}, sys.alg, sys, evolution="wave")
    if kind == "standard":
        n = int(arg or 1)
        sys = wave_lagrangian(n)
        return ModelDescriptor(f"standard:{n}", {"n": n}, sys.alg, sys, evolution="wave")
    if kind == "so3":
        lag = euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=1)
        ham = lie_poisson_hamiltonian(levi_civita(), SO3_INERTIA)
        return ModelDescriptor("so3", {"inertia": list(SO3_INERTIA)}, lag.alg, lag, ham)
    if kind == "harmonic":
        sys = harmonic_map_lagrangian()
        return ModelDescriptor("harmonic", {}, sys.alg, sys)
    if kind == "lie":
        data = _load_json(arg)
        alg = lie_algebra_algebroid(_structure_from(data["structure"]), data.get("chart_label", "lie"))
        return ModelDescriptor(name, data, alg)
    if kind == "poisson":
        data = _load_json(arg)
        n = int(data["dim"])
        alg = poisson_cotangent_algebroid(_table(data["bivector"], n), n)
        return ModelDescriptor(name, data, alg)
    if kind == "sigma":
        data = _load_json(arg)
        n = int(data["dim"])
        lam = _table(data["bivector"], n)
        lag = poisson_sigma_lagrangian(lam, n)
        ham = poisson_sigma_hamiltonian(lam, n)
        return ModelDescriptor(name, data, lag.alg, lag, ham, evolution="sigma")
    if kind == "atiyah":
        data = _load_json(arg)
        n = int(data["base_dim"])
        alg = atiyah_trivial(n, _structure_from(data["group_structure"]), _table(data["connection"], n))
        return ModelDescriptor(name, data, alg)
    if kind == "euler-poincare":
        data = _load_json(arg)
        k = int(data.get("k", 1))
        sig = data.get("signature")
        lag = euler_poincare_lagrangian(_structure_from(data["structure"]), data["inertia"], k, sig)
        evo = "euler-poincare" if k >= 2 and sig is not None and min(sig[1:]) < 0 < sig[0] else None
        return ModelDescriptor(name, data, lag.alg, lag, evolution=evo)
    raise ValueError(f"unknown model {name!r}")


def zoo_algebroids() -> dict[str, LieAlgebroid]:
    """The built-in algebroids used by the structure-equation suite."""
    return {
        "standard(1)": standard_algebroid(1),
        "standard(2)": standard_algebroid(2),
        "standard(3)": standard_algebroid(3),
        "so(3)": so3_algebroid(),
        "lie-poisson so(3)*": poisson_cotangent_algebroid(lie_poisson_so3_bivector()),
        "symplectic R^2": poisson_cotangent_algebroid(SYMPLECTIC_2D),
        "atiyah R^2 x SO(3)": atiyah_trivial(2, levi_civita(), SO3_CONNECTION),
    }


def zoo_lagrangians() -> dict[str, LagrangianSystem]:
    """Regular Lagrangians across the zoo (used for closure and pullback suites)."""
    algs = zoo_algebroids()
    return {
        "wave": wave_lagrangian(1),
        "harmonic": harmonic_map_lagrangian(),
        "euler-poincare so(3)": euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=1),
        "euler-poincare so(3) k=2": euler_poincare_lagrangian(levi_civita(), SO3_INERTIA, k=2),
        "sigma symplectic R^2": poisson_sigma_lagrangian(SYMPLECTIC_2D),
        "convex standard(2) k=2": convex_lagrangian(algs["standard(2)"], 2),
        "convex lie-poisson k=2": convex_lagrangian(algs["lie-poisson so(3)*"], 2),
        "convex atiyah k=1": convex_lagrangian(algs["atiyah R^2 x SO(3)"], 1),
        "convex so(3) k=3": convex_lagrangian(algs["so(3)"], 3),
    }


def zoo_hamiltonians() -> dict[str, HamiltonianSystem]:
    algs = zoo_algebroids()
    return {
        "lie-poisson rigid body": lie_poisson_hamiltonian(levi_civita(), SO3_INERTIA),
        "sigma quadratic": poisson_sigma_hamiltonian(SYMPLECTIC_2D),
        "quadratic standard(2) k=2": quadratic_hamiltonian(algs["standard(2)"], 2),
        "quadratic lie-poisson k=2": quadratic_hamiltonian(algs["lie-poisson so(3)*"], 2),
        "quadratic atiyah k=3": quadratic_hamiltonian(algs["atiyah R^2 x SO(3)"], 3),
        "quadratic so(3) k=2": quadratic_hamiltonian(algs["so(3)"], 2),
    }
