"""Hamiltonian k-symplectic formalism on the dual Whitney sum.

The Hamiltonian is a callable ``H(q, p)`` with ``p`` of shape (k, m): row ``A``
is the covector of slot ``A``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .algebroid import LieAlgebroid
from .errors import BoundaryNode, DimensionError
from .grid import GridField, central_difference, node_difference
from .lagrangian import GridResiduals
from .prolongation import CoWhitneyPoint, ProlongedElement, Side


@dataclass(frozen=True)
class HamiltonianSystem:
    alg: LieAlgebroid
    k: int
    H: Callable
    name: str = ""
    gradient: Callable | None = None

    @property
    def dim(self) -> int:
        return self.alg.base_dim + self.alg.rank * self.k

    def flat_function(self, x):
        n, m, k = self.alg.base_dim, self.alg.rank, self.k
        return self.H(x[:n], np.asarray(x[n:], dtype=object).reshape(k, m))

    def __call__(self, p: CoWhitneyPoint) -> float:
        return float(self.H(p.q, p.p))

    def derivatives(self, points) -> "HamiltonianDerivatives":
        """Value and first derivatives at a point or a batch of flattened points.

        If ``gradient`` is set it must map a batch of flattened points to
        ``(value, grad)``; otherwise forward-mode jets are used.
        """
        x = points.flat() if isinstance(points, CoWhitneyPoint) else np.asarray(points, float)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"point has {x.shape[-1]} coordinates, expected {self.dim}")
        n, m, k = self.alg.base_dim, self.alg.rank, self.k
        if self.gradient is not None:
            value, grad = self.gradient(x)
            source = "implicit"
        else:
            d = ad.derivatives(self.flat_function, x, order=1)
            value, grad, source = d.value, d.grad, d.source
        batch = np.shape(value)
        return HamiltonianDerivatives(np.asarray(value), grad[..., :n],
                                      grad[..., n:].reshape(batch + (k, m)), source)


@dataclass(frozen=True)
class HamiltonianDerivatives:
    value: np.ndarray
    dq: np.ndarray     # (..., n)
    dp: np.ndarray     # (..., k, m)
    source: str


@dataclass(frozen=True)
class LiouvilleData:
    theta: np.ndarray   # (k, m)
    omega: np.ndarray   # (k, D, D) on the basis {X_a, V_B^b}


def liouville_sections(alg: LieAlgebroid, k: int, p: CoWhitneyPoint) -> LiouvilleData:
    """Canonical 1- and 2-sections of the dual prolongation at ``p``."""
    m = alg.rank
    if p.p.shape != (k, m):
        raise DimensionError(f"momentum has shape {p.p.shape}, expected {(k, m)}")
    c = alg.structure_at(p.q)
    size = m + m * k
    omega = np.zeros((k, size, size))
    for A in range(k):
        omega[A, :m, :m] = np.einsum("dbg,d->bg", c, p.p[A])
        cols = m + A * m + np.arange(m)
        omega[A, np.arange(m), cols] = 1.0
        omega[A, cols, np.arange(m)] = -1.0
    return LiouvilleData(p.p.copy(), omega)


@dataclass(frozen=True)
class HamiltonSection:
    """k sections of the dual prolongation; ``v[A, B, a] = (xi_A)^B_a``."""

    alg: LieAlgebroid
    k: int
    x: np.ndarray        # (m, k): x[a, B] = xi^a_B
    v: np.ndarray        # (k, k, m)
    base: CoWhitneyPoint

    def elements(self, p: CoWhitneyPoint | None = None) -> list[ProlongedElement]:
        return [ProlongedElement(self.base, self.x[:, A], self.v[A]) for A in range(self.k)]


def trace_rhs(alg: LieAlgebroid, p: CoWhitneyPoint, d: HamiltonianDerivatives) -> np.ndarray:
    """``-(C^d_{ab} p^C_d dH/dp^C_b + rho^i_a dH/dq^i)``."""
    c = alg.structure_at(p.q)
    rho = alg.anchor_at(p.q)
    return -(np.einsum("dab,Cd,Cb->a", c, p.p, d.dp) + rho.T @ d.dq)


def solve_hamilton_section(sys: HamiltonianSystem, p: CoWhitneyPoint) -> HamiltonSection:
    """Section coefficients in the diagonal gauge ``(xi_A)^B_a = delta^B_A rhs_a / k``."""
    d = sys.derivatives(p)
    k, m = sys.k, sys.alg.rank
    rhs = trace_rhs(sys.alg, p, d)
    v = np.zeros((k, k, m))
    for A in range(k):
        v[A, A] = rhs / k
    return HamiltonSection(sys.alg, k, d.dp.T.copy(), v, p)


class HamiltonSectionField:
    """Section field ``p -> solve_hamilton_section(sys, p)`` (usable by associated_k_vector)."""

    def __init__(self, sys: HamiltonianSystem):
        self.sys = sys
        self.alg = sys.alg
        self.k = sys.k

    def elements(self, p: CoWhitneyPoint) -> list[ProlongedElement]:
        return solve_hamilton_section(self.sys, p).elements()


def hamilton_differential(sys: HamiltonianSystem, p: CoWhitneyPoint,
                          d: HamiltonianDerivatives | None = None) -> np.ndarray:
    d = d or sys.derivatives(p)
    rho = sys.alg.anchor_at(p.q)
    return np.concatenate([rho.T @ d.dq, d.dp.ravel()])


def hamilton_geometric_residual(sys: HamiltonianSystem, xi: HamiltonSection | Sequence[ProlongedElement],
                                p: CoWhitneyPoint) -> np.ndarray:
    """``sum_A i_{xi_A} Omega^A - dH`` on the prolonged basis."""
    elements = xi.elements() if isinstance(xi, HamiltonSection) else list(xi)
    lv = liouville_sections(sys.alg, sys.k, p)
    total = sum(lv.omega[A].T @ el.vector() for A, el in enumerate(elements))
    return total - hamilton_differential(sys, p)


@dataclass(frozen=True)
class HamResidual:
    node: tuple[int, ...]
    q_res: np.ndarray   # (n, k)
    p_res: np.ndarray   # (m,)

    def to_dict(self) -> dict:
        return {"node": list(self.node), "q_res": self.q_res.tolist(), "p_res": self.p_res.tolist(),
                "norms": {"q_res": float(np.max(np.abs(self.q_res), initial=0.0)),
                          "p_res": float(np.max(np.abs(self.p_res), initial=0.0))}}


def _p_rhs(rho, c, p, dq, dp):
    return (np.einsum("...dab,...Bd,...Bb->...a", c, p, dp)
            + np.einsum("...ia,...i->...a", rho, dq))


def hamilton_residual(sys: HamiltonianSystem, field: GridField, node: Sequence[int]) -> HamResidual:
    """Hamilton field-equation residuals at an interior node (central differences)."""
    node = tuple(int(i) for i in node)
    if field.side is not Side.HAMILTONIAN:
        raise ValueError("hamilton_residual needs a field on the dual Whitney sum")
    if len(node) != field.k or field.k != sys.k:
        raise DimensionError("node/grid dimension does not match k")
    for axis in range(field.k):
        if not field.is_interior(node, axis):
            raise BoundaryNode(f"node {node} is on the boundary of axis {axis}")
    p = field.point(node)
    d = sys.derivatives(p)
    rho = sys.alg.anchor_at(p.q)
    c = sys.alg.structure_at(p.q)
    dq = np.stack([node_difference(field.q, node, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    div = sum(node_difference(field.fiber, node, A, field.spacing[A], field.periodic[A])[A]
              for A in range(field.k))
    q_res = dq - rho @ d.dp.T
    p_res = div + _p_rhs(rho, c, p.p, d.dq, d.dp)
    return HamResidual(node, q_res, p_res)


def hamilton_residuals(sys: HamiltonianSystem, field: GridField) -> GridResiduals:
    """Vectorized Hamilton residuals at all interior nodes (``primary`` = p_res)."""
    if field.side is not Side.HAMILTONIAN:
        raise ValueError("hamilton_residuals needs a field on the dual Whitney sum")
    d = sys.derivatives(field.flat_points())
    rho = sys.alg.anchor_at(field.q)
    c = sys.alg.structure_at(field.q)
    dq = np.stack([central_difference(field.q, A, field.spacing[A], field.periodic[A])
                   for A in range(field.k)], axis=-1)
    div = sum(central_difference(field.fiber[..., A, :], A, field.spacing[A], field.periodic[A])
              for A in range(field.k))
    q_res = dq - np.einsum("...ia,...Aa->...iA", rho, d.dp)
    p_res = div + _p_rhs(rho, c, field.fiber, d.dq, d.dp)
    mask = field.interior_mask()
    scale = np.abs(field.fiber).reshape(field.shape + (-1,)).max(axis=-1)
    return GridResiduals(np.argwhere(mask), p_res[mask], q_res[mask],
                         np.zeros((int(mask.sum()), 0)), scale[mask])


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    q: np.ndarray   # (N+1, n)
    p: np.ndarray   # (N+1, m)

    def to_csv(self, path: str | Path | None = None) -> str:
        n, m = self.q.shape[1], self.p.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{a + 1}" for a in range(m)])
        for row in np.column_stack([self.t, self.q, self.p]):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def hamilton_vector_field(sys: HamiltonianSystem, q: np.ndarray, p: np.ndarray):
    """Right-hand side of the k = 1 Hamilton equations: ``(dq/dt, dp/dt)``."""
    pt = CoWhitneyPoint(q, p.reshape(1, -1))
    d = sys.derivatives(pt)
    rho = sys.alg.anchor_at(q)
    c = sys.alg.structure_at(q)
    qdot = rho @ d.dp[0]
    pdot = -(np.einsum("dab,d,b->a", c, p, d.dp[0]) + rho.T @ d.dq)
    return qdot, pdot


def integrate_hamilton_k1(sys: HamiltonianSystem, p0: CoWhitneyPoint, t_end: float, steps: int
                          ) -> Trajectory:
    """Classical fourth-order Runge-Kutta integration for k = 1."""
    if sys.k != 1:
        raise ValueError(f"integrate_hamilton_k1 needs k = 1, got k = {sys.k}")
    if steps < 1:
        raise ValueError("steps must be positive")
    h = t_end / steps
    n, m = sys.alg.base_dim, sys.alg.rank
    qs = np.empty((steps + 1, n))
    ps = np.empty((steps + 1, m))
    q, p = p0.q.copy(), p0.p.reshape(-1).copy()
    qs[0], ps[0] = q, p
    f = lambda qq, pp: hamilton_vector_field(sys, qq, pp)  # noqa: E731
    for s in range(steps):
        k1q, k1p = f(q, p)
        k2q, k2p = f(q + 0.5 * h * k1q, p + 0.5 * h * k1p)
        k3q, k3p = f(q + 0.5 * h * k2q, p + 0.5 * h * k2p)
        k4q, k4p = f(q + h * k3q, p + h * k3p)
        q = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        qs[s + 1], ps[s + 1] = q, p
    return Trajectory(np.linspace(0.0, t_end, steps + 1), qs, ps)
