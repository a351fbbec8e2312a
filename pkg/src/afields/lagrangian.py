"""Lagrangian k-symplectic formalism on a Lie algebroid.

The Lagrangian is a callable ``L(q, y)`` with ``q`` of length n and ``y`` of
shape (m, k), written with ordinary arithmetic so it can be fed jets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .algebroid import LieAlgebroid, MorphismData, morphism_residual_from_jet
from .errors import BoundaryNode, DimensionError, SingularHessian
from .grid import GridField, central_difference, node_difference
from .prolongation import ProlongedElement, SopdeSection, WhitneyPoint

REGULARITY_TOL = 1e-10


@dataclass(frozen=True)
class LagrangianSystem:
    alg: LieAlgebroid
    k: int
    L: Callable
    name: str = ""

    @property
    def dim(self) -> int:
        return self.alg.base_dim + self.alg.rank * self.k

    def flat_function(self, x):
        n, m, k = self.alg.base_dim, self.alg.rank, self.k
        return self.L(x[:n], np.asarray(x[n:], dtype=object).reshape(m, k))

    def __call__(self, b: WhitneyPoint) -> float:
        return float(self.L(b.q, b.y))

    def derivatives(self, points, order: int = 2) -> "LagrangianDerivatives":
        """Derivative blocks at a WhitneyPoint or a batch of flattened points."""
        x = points.flat() if isinstance(points, WhitneyPoint) else np.asarray(points, float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"point has {x.shape[-1]} coordinates, expected {self.dim}")
        d = ad.derivatives(self.flat_function, x, order=order)
        return LagrangianDerivatives.split(d, self.alg.base_dim, self.alg.rank, self.k)


@dataclass(frozen=True)
class LagrangianDerivatives:
    value: np.ndarray
    dq: np.ndarray               # (..., n)
    dy: np.ndarray               # (..., m, k)
    dqq: np.ndarray | None       # (..., n, n)
    dqy: np.ndarray | None       # (..., n, m, k)
    dyy: np.ndarray | None       # (..., m, k, m, k)
    source: str

    @classmethod
    def split(cls, d: ad.Derivatives, n: int, m: int, k: int) -> "LagrangianDerivatives":
        batch = d.value.shape
        g = d.grad
        dq, dy = g[..., :n], g[..., n:].reshape(batch + (m, k))
        if d.hess is None:
            return cls(d.value, dq, dy, None, None, None, d.source)
        h = d.hess
        dqq = h[..., :n, :n]
        dqy = h[..., :n, n:].reshape(batch + (n, m, k))
        dyy = h[..., n:, n:].reshape(batch + (m, k, m, k))
        return cls(d.value, dq, dy, dqq, dqy, dyy, d.source)


@dataclass(frozen=True)
class CartanData:
    """``theta[A]`` (length m) and ``omega[A]``, the matrix ``Omega^A(e_a, e_c)``
    on the prolonged basis ``{X_a, V^B_b}`` (size m + m k)."""

    theta: np.ndarray
    omega: np.ndarray

    def theta_covector(self, A: int) -> np.ndarray:
        m = self.theta.shape[1]
        full = np.zeros(self.omega.shape[-1])
        full[:m] = self.theta[A]
        return full


def energy(sys: LagrangianSystem, b: WhitneyPoint) -> float:
    d = sys.derivatives(b, order=1)
    return float(np.sum(b.y * d.dy) - d.value)


def energy_differential(sys: LagrangianSystem, b: WhitneyPoint,
                        d: LagrangianDerivatives | None = None) -> np.ndarray:
    """Prolonged differential of the energy: ``(rho^T dE/dq, dE/dy)``."""
    d = d or sys.derivatives(b, order=2)
    de_dq = np.einsum("iaA,aA->i", d.dqy, b.y) - d.dq
    de_dy = np.einsum("aAbB,aA->bB", d.dyy, b.y)
    rho = sys.alg.anchor_at(b.q)
    return np.concatenate([rho.T @ de_dq, de_dy.ravel()])


def omega_blocks(rho: np.ndarray, c: np.ndarray, y_momentum: np.ndarray, dqy: np.ndarray,
                 dyy: np.ndarray) -> np.ndarray:
    """Full antisymmetric tables of the Lagrangian 2-sections, shape (k, D, D)."""
    m, k = y_momentum.shape
    size = m + m * k
    # mixed[a, b, A] = rho^i_b d2L/dq^i dy^a_A
    mixed = np.einsum("ib,iaA->abA", rho, dqy)
    out = np.zeros((k, size, size))
    for A in range(k):
        xx = mixed[:, :, A] - mixed[:, :, A].T + np.einsum("gab,g->ab", c, y_momentum[:, A])
        xv = dyy[:, A, :, :].reshape(m, m * k)   # row a, column (b, B)
        out[A, :m, :m] = xx
        out[A, :m, m:] = xv
        out[A, m:, :m] = -xv.T
    return out


def cartan_sections(sys: LagrangianSystem, b: WhitneyPoint) -> CartanData:
    d = sys.derivatives(b, order=2)
    rho = sys.alg.anchor_at(b.q)
    c = sys.alg.structure_at(b.q)
    return CartanData(d.dy.T.copy(), omega_blocks(rho, c, d.dy, d.dqy, d.dyy))


def hessian(sys: LagrangianSystem, b: WhitneyPoint, tol: float = REGULARITY_TOL
            ) -> tuple[np.ndarray, bool]:
    """Fiber Hessian with rows/columns ordered ``a*k + A``, plus the regularity verdict."""
    d = sys.derivatives(b, order=2)
    mk = sys.alg.rank * sys.k
    w = d.dyy.reshape(mk, mk)
    return w, is_regular(w, tol)


def singular_values(w: np.ndarray) -> np.ndarray:
    return np.linalg.svd(w, compute_uv=False)


def is_regular(w: np.ndarray, tol: float = REGULARITY_TOL) -> bool:
    s = singular_values(w)
    return bool(s.size and s[-1] > tol * s[0])


def condition_number(w: np.ndarray) -> float:
    s = singular_values(w)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


@dataclass(frozen=True)
class SopdeCoefficients:
    x: np.ndarray            # (m, k), equal to y
    v: np.ndarray            # (k, m, k): v[A, b, B] = (xi_A)^b_B
    residual: float
    condition: float


def sopde_system(sys: LagrangianSystem, b: WhitneyPoint, d: LagrangianDerivatives | None = None
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Matrix (m x m k^2, unknowns ordered (A, b, B)) and right-hand side of the SOPDE system."""
    d = d or sys.derivatives(b, order=2)
    m, k = sys.alg.rank, sys.k
    rho = sys.alg.anchor_at(b.q)
    c = sys.alg.structure_at(b.q)
    rhs = (rho.T @ d.dq + np.einsum("bA,gba,gA->a", b.y, c, d.dy)
           - np.einsum("bA,ib,iaA->a", b.y, rho, d.dqy))
    mat = d.dyy.reshape(m, k * m * k)
    return mat, rhs


def solve_sopde_coefficients(sys: LagrangianSystem, b: WhitneyPoint) -> SopdeCoefficients:
    """Minimum-norm solution of the SOPDE system at a regular point."""
    d = sys.derivatives(b, order=2)
    m, k = sys.alg.rank, sys.k
    w = d.dyy.reshape(m * k, m * k)
    cond = condition_number(w)
    if not is_regular(w):
        raise SingularHessian(f"Lagrangian is not regular at this point (condition {cond:.3e})", cond)
    mat, rhs = sopde_system(sys, b, d)
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    res = float(np.max(np.abs(mat @ sol - rhs), initial=0.0))
    return SopdeCoefficients(b.y.copy(), sol.reshape(k, m, k), res, cond)


def sopde_section(sys: LagrangianSystem) -> SopdeSection:
    def coeffs(b):
        s = solve_sopde_coefficients(sys, b)
        return s.x, s.v

    return SopdeSection(sys.alg, sys.k, coeffs)


def geometric_equation_residual(sys: LagrangianSystem, xi: SopdeSection | Sequence[ProlongedElement],
                                b: WhitneyPoint) -> np.ndarray:
    """``sum_A i_{xi_A} Omega_L^A - d E_L`` on the basis ``{X^a, V^a_A}``."""
    elements = xi.elements(b) if isinstance(xi, SopdeSection) else list(xi)
    if len(elements) != sys.k:
        raise DimensionError(f"need {sys.k} sections, got {len(elements)}")
    d = sys.derivatives(b, order=2)
    rho = sys.alg.anchor_at(b.q)
    c = sys.alg.structure_at(b.q)
    omega = omega_blocks(rho, c, d.dy, d.dqy, d.dyy)
    total = sum(omega[A].T @ el.vector() for A, el in enumerate(elements))
    return total - energy_differential(sys, b, d)


@dataclass(frozen=True)
class ELResidual:
    node: tuple[int, ...]
    el_res: np.ndarray
    anchor_res: np.ndarray
    morphism_res: np.ndarray
    momentum_scale: float

    @property
    def el_res_relative(self) -> np.ndarray:
        return self.el_res / max(self.momentum_scale, np.finfo(float).tiny)

    def norms(self) -> dict:
        def mx(a):
            return float(np.max(np.abs(a), initial=0.0))

        return {"el_res": mx(self.el_res), "el_res_relative": mx(self.el_res_relative),
                "anchor_res": mx(self.anchor_res), "morphism_res": mx(self.morphism_res),
                "momentum_scale": self.momentum_scale}

    def to_dict(self) -> dict:
        return {"node": list(self.node), "el_res": self.el_res.tolist(),
                "anchor_res": self.anchor_res.tolist(), "morphism_res": self.morphism_res.tolist(),
                "norms": self.norms()}


def _el_rhs(rho, c, y, dq, dy):
    """``rho^T dL/dq + y^b_C C^g_{ba} dL/dy^g_C`` (batched on leading axes)."""
    return (np.einsum("...ia,...i->...a", rho, dq)
            + np.einsum("...bC,...gba,...gC->...a", y, c, dy))


def euler_lagrange_residual(sys: LagrangianSystem, field: GridField, node: Sequence[int]) -> ELResidual:
    """Residuals of the field equations at an interior node (central differences)."""
    node = tuple(int(i) for i in node)
    if len(node) != field.k or field.k != sys.k:
        raise DimensionError("node/grid dimension does not match k")
    for axis in range(field.k):
        if not field.is_interior(node, axis):
            raise BoundaryNode(f"node {node} is on the boundary of axis {axis}")
    flat = field.flat_points()
    pts = [node]
    for axis in range(field.k):
        for s in (1, -1):
            nb = list(node)
            nb[axis] = (nb[axis] + s) % field.shape[axis]
            pts.append(tuple(nb))
    d = sys.derivatives(np.stack([flat[p] for p in pts]), order=1)
    momenta = d.dy                               # (1 + 2k, m, k)
    div = sum((momenta[1 + 2 * A][:, A] - momenta[2 + 2 * A][:, A]) / (2 * field.spacing[A])
              for A in range(field.k))
    b = field.point(node)
    rhs = _el_rhs(sys.alg.anchor_at(b.q), sys.alg.structure_at(b.q), b.y, d.dq[0], momenta[0])
    dq = np.stack([node_difference(field.q, node, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    dy = np.stack([node_difference(field.fiber, node, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    mr = morphism_residual_from_jet(sys.alg, b.q, b.y, dq, dy)
    scale = float(np.max(np.abs(momenta), initial=0.0))
    return ELResidual(node, div - rhs, mr.anchor_res, mr.bracket_res, scale)


@dataclass(frozen=True)
class GridResiduals:
    """Residual arrays at every interior node (leading axis enumerates nodes)."""

    nodes: np.ndarray
    primary: np.ndarray      # el_res or p_res
    anchor_res: np.ndarray
    morphism_res: np.ndarray
    scale: np.ndarray

    def norms(self) -> dict:
        def linf(a):
            return float(np.max(np.abs(a), initial=0.0))

        def l2(a):
            return float(np.sqrt(np.mean(np.square(a)))) if a.size else 0.0

        return {"linf": linf(self.primary), "l2": l2(self.primary),
                "anchor_linf": linf(self.anchor_res), "morphism_linf": linf(self.morphism_res),
                "relative_linf": linf(self.primary / np.maximum(self.scale, np.finfo(float).tiny)
                                      .reshape((-1,) + (1,) * (self.primary.ndim - 1))),
                "interior_nodes": int(self.nodes.shape[0])}


def grid_jets(field: GridField) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference jets at all nodes: ``dq`` grid+(n,k), ``dfiber`` grid+fiber+(k,)."""
    dq = np.stack([central_difference(field.q, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    df = np.stack([central_difference(field.fiber, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    return dq, df


def euler_lagrange_residuals(sys: LagrangianSystem, field: GridField) -> GridResiduals:
    """Vectorized residuals at all interior nodes."""
    if field.k != sys.k:
        raise DimensionError("grid dimension does not match k")
    d = sys.derivatives(field.flat_points(), order=1)
    momenta = d.dy                                            # grid + (m, k)
    div = sum(central_difference(momenta[..., A], A, field.spacing[A], field.periodic[A])
              for A in range(field.k))
    rho = sys.alg.anchor_at(field.q)
    c = sys.alg.structure_at(field.q)
    el = div - _el_rhs(rho, c, field.fiber, d.dq, momenta)
    dq, dy = grid_jets(field)
    anchor_res = dq - np.einsum("...ia,...aA->...iA", rho, field.fiber)
    bracket_res = dy - np.swapaxes(dy, -1, -2) + np.einsum("...abg,...bB,...gA->...aAB", c,
                                                            field.fiber, field.fiber)
    mask = field.interior_mask()
    nodes = np.argwhere(mask)
    scale = _stencil_scale(np.abs(momenta).reshape(field.shape + (-1,)).max(axis=-1), field)
    return GridResiduals(nodes, el[mask], anchor_res[mask], bracket_res[mask], scale[mask])


def _stencil_scale(node_scale: np.ndarray, field: GridField) -> np.ndarray:
    out = node_scale.copy()
    for A in range(field.k):
        out = np.maximum(out, np.maximum(np.roll(node_scale, 1, A), np.roll(node_scale, -1, A)))
    return out


def euler_lagrange_residual_exact(sys: LagrangianSystem, phi: MorphismData, t) -> ELResidual:
    """Residuals of an analytic field ``phi`` using exact derivatives in t."""
    n, m, k = sys.alg.base_dim, sys.alg.rank, sys.k
    t = np.asarray(t, float).reshape(-1)

    def joint(x):
        out = np.empty(n + m * k, dtype=object)
        out[:n] = np.asarray(phi.base_map(x), dtype=object).reshape(n)
        out[n:] = np.asarray(phi.fiber_map(x), dtype=object).reshape(m * k)
        return out

    jt = ad.derivatives(joint, t, order=1)
    b = WhitneyPoint(jt.value[:n], jt.value[n:].reshape(m, k))
    dq = jt.grad[:n]                                 # (n, k)
    dy = jt.grad[n:].reshape(m, k, k)                # [a, A, B]
    d = sys.derivatives(b, order=2)
    # d/dt^A of dL/dy^a_A along phi, summed over A
    div = (np.einsum("iaA,iA->a", d.dqy, dq) + np.einsum("aAbB,bBA->a", d.dyy, dy))
    rhs = _el_rhs(sys.alg.anchor_at(b.q), sys.alg.structure_at(b.q), b.y, d.dq, d.dy)
    mr = morphism_residual_from_jet(sys.alg, b.q, b.y, dq, dy)
    return ELResidual((), div - rhs, mr.anchor_res, mr.bracket_res,
                      float(np.max(np.abs(d.dy), initial=0.0)))
