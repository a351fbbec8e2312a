"""Marching schemes, manufactured solutions and convergence studies on grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InstabilityDetected, NotEvolutionary
from .grid import GridField, central_difference, sample_field
from .lagrangian import GridResiduals, LagrangianSystem
from .prolongation import Side

EVOLUTION_TAGS = ("wave", "euler-poincare", "sigma")
GROWTH_LIMIT = 1e6
EXACT_THRESHOLD = 1e-13


# convergence -------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    spacings: list[float]
    linf: list[float]
    l2: list[float]
    order_linf: float | None
    order_l2: float | None
    exact: bool

    @property
    def order(self) -> float | None:
        """Fitted order of the L2 norms."""
        return self.order_l2

    def certifies_second_order(self, norm: str = "linf") -> bool:
        o = self.order_linf if norm == "linf" else self.order_l2
        return self.exact or (o is not None and 1.7 <= o <= 2.3)

    def to_dict(self) -> dict:
        return {"spacings": self.spacings, "linf": self.linf, "l2": self.l2,
                "order_linf": self.order_linf, "order_l2": self.order_l2, "exact": self.exact,
                "second_order": self.certifies_second_order()}


def fitted_order(spacings: Sequence[float], norms: Sequence[float]) -> float | None:
    """Least-squares slope of log(norm) against log(h); None if any norm is zero."""
    h = np.asarray(spacings, float)
    e = np.asarray(norms, float)
    if np.any(e <= 0):
        return None
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def _norms(res) -> tuple[float, float]:
    if isinstance(res, GridResiduals):
        a = res.primary
    else:
        a = np.asarray(res, float)
    if a.size == 0:
        return 0.0, 0.0
    return float(np.max(np.abs(a))), float(np.sqrt(np.mean(np.square(a))))


def convergence_study(residual_op: Callable, family: Callable[[float], object] | Mapping[float, object],
                      spacings: Iterable[float]) -> ConvergenceReport:
    """Evaluate ``residual_op(field)`` on a family of fields and fit the decay order.

    ``residual_op`` returns a :class:`GridResiduals` or an array of nodal
    residuals; L-infinity is the max, L2 the root mean square over nodes.
    """
    hs = [float(h) for h in spacings]
    if len(hs) < 3:
        raise ValueError("convergence_study needs at least 3 spacings")
    linf, l2 = [], []
    for h in hs:
        fld = family[h] if isinstance(family, Mapping) else family(h)
        a, b = _norms(residual_op(fld))
        linf.append(a)
        l2.append(b)
    exact = max(linf) <= EXACT_THRESHOLD
    return ConvergenceReport(hs, linf, l2, None if exact else fitted_order(hs, linf),
                             None if exact else fitted_order(hs, l2), exact)


# marching ------------------------------------------------------------------------

def _bracket_term(c, u, v):
    """``C^a_{bg} u^b v^g`` batched over slice nodes."""
    return np.einsum("...abg,...b,...g->...a", c, u, v)


def _evolution_rhs(sys: LagrangianSystem, tag: str, q: np.ndarray, y: np.ndarray,
                   spacing: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives ``(d q/dt1, d y/dt1)`` on a slice (slice axes periodic)."""
    k = sys.k
    rho = sys.alg.anchor_at(q)
    c = sys.alg.structure_at(q)
    y0 = y[..., 0]
    dq = np.einsum("...ia,...a->...i", rho, y0)
    dy = np.zeros_like(y)
    for B in range(1, k):
        d_b_y0 = central_difference(y0, B - 1, spacing[B], True)
        dy[..., B] = d_b_y0 + _bracket_term(c, y[..., B], y0)
    if tag == "sigma":
        return dq, dy      # gauge: the first momentum slot is frozen in t1
    flat = np.concatenate([q, y.reshape(q.shape[:-1] + (-1,))], axis=-1)
    d = sys.derivatives(flat, order=2)
    mom = d.dy
    div = sum(central_difference(mom[..., B], B - 1, spacing[B], True) for B in range(1, k))
    rhs = (np.einsum("...ia,...i->...a", rho, d.dq)
           + np.einsum("...bC,...gba,...gC->...a", y, c, mom) - div)
    known = np.einsum("...ia,...i->...a", d.dqy[..., :, :, 0], dq)
    for B in range(1, k):
        known = known + np.einsum("...ab,...b->...a", d.dyy[..., :, 0, :, B], dy[..., B])
    w00 = d.dyy[..., :, 0, :, 0]
    dy[..., 0] = np.linalg.solve(w00, (rhs - known)[..., None])[..., 0]
    return dq, dy


def _check_evolutionary(sys: LagrangianSystem, tag: str, q0: np.ndarray, y0: np.ndarray) -> None:
    if tag not in EVOLUTION_TAGS:
        raise NotEvolutionary(f"model tag {tag!r} is not evolutionary; choose one of {EVOLUTION_TAGS}")
    if sys.k < 2:
        raise NotEvolutionary("marching needs k >= 2 (t1 plus at least one periodic axis)")
    if tag == "sigma":
        c = sys.alg.structure_at(q0)
        if np.max(np.abs(c), initial=0.0) > 0.0:
            raise NotEvolutionary("sigma marching needs a constant bivector (vanishing structure functions)")
        return
    flat = np.concatenate([q0, y0.reshape(q0.shape[:-1] + (-1,))], axis=-1)
    w00 = sys.derivatives(flat, order=2).dyy[..., :, 0, :, 0]
    s = np.linalg.svd(w00, compute_uv=False)
    if np.any(s[..., -1] <= 1e-10 * s[..., 0]):
        raise NotEvolutionary("t1 is not a regular evolution direction (singular first Hessian block)")


def march_evolutionary(sys: LagrangianSystem, tag: str, q0, y0, spacing: Sequence[float], steps: int,
                       origin: Sequence[float] = ()) -> GridField:
    """March initial data on the slice ``t1 = origin[0]`` forward ``steps`` times.

    Leapfrog in t1 with a second-order (midpoint) start; remaining axes are
    periodic with central differences.  ``q0`` has shape ``slice + (n,)`` and
    ``y0`` shape ``slice + (m, k)``.  The morphism condition is not enforced.
    """
    q0 = np.asarray(q0, float)
    y0 = np.asarray(y0, float)
    k = sys.k
    if len(spacing) != k or q0.ndim != k or y0.ndim != k + 1:
        raise ValueError("initial slice must have k - 1 grid axes and spacing one entry per axis")
    _check_evolutionary(sys, tag, q0, y0)
    h = float(spacing[0])
    ref = max(1.0, float(np.max(np.abs(y0), initial=0.0)), float(np.max(np.abs(q0), initial=0.0)))
    qs = [q0]
    ys = [y0]

    def f(q, y):
        return _evolution_rhs(sys, tag, q, y, spacing)

    if steps >= 1:
        dq, dy = f(q0, y0)
        qm, ym = q0 + 0.5 * h * dq, y0 + 0.5 * h * dy
        dq, dy = f(qm, ym)
        qs.append(q0 + h * dq)
        ys.append(y0 + h * dy)
    for s in range(1, steps):
        dq, dy = f(qs[-1], ys[-1])
        qs.append(qs[-2] + 2 * h * dq)
        ys.append(ys[-2] + 2 * h * dy)
        growth = max(float(np.max(np.abs(qs[-1]), initial=0.0)), float(np.max(np.abs(ys[-1]))))
        if not np.isfinite(growth) or growth > GROWTH_LIMIT * ref:
            raise InstabilityDetected(f"marching unstable at step {s + 1}: norm grew to {growth:.3e}",
                                      s + 1, growth / ref)
    origin = tuple(origin) or (0.0,) * k
    periodic = (False,) + (True,) * (k - 1)
    return GridField(tuple(float(x) for x in spacing), np.stack(qs), np.stack(ys), Side.LAGRANGIAN,
                     origin, periodic)


# manufactured solutions ------------------------------------------------------------

TWO_PI = 2.0 * math.pi


def wave_solution(t1, t2):
    """``f(t1 + t2) + g(t1 - t2)`` with period-1 profiles and its derivatives."""
    s, d = TWO_PI * (t1 + t2), TWO_PI * (t1 - t2)
    phi = np.sin(s) + 0.5 * np.cos(d) + 0.25 * np.sin(2 * d)
    fp = TWO_PI * np.cos(s)
    gp = TWO_PI * (-0.5 * np.sin(d) + 0.5 * np.cos(2 * d))
    return phi, fp + gp, fp - gp


def wave_field(h: float, t_extent: float = 1.0, t2_ratio: float = 0.5, periodic_t2: bool = True
               ) -> GridField:
    """Exact wave solution sampled with spacing ``h`` in t1 and ``t2_ratio * h`` in t2.

    With equal spacing the central-difference errors of the two second
    derivatives cancel exactly for ``f(t1 +- t2)``; unequal spacing keeps the
    discretization error visible.
    """
    h2 = t2_ratio * h
    n1 = int(round(t_extent / h)) + 1
    n2 = int(round(1.0 / h2)) + (0 if periodic_t2 else 1)

    def q_fn(t):
        return [wave_solution(t[0], t[1])[0]]

    def y_fn(t):
        _, a, b = wave_solution(t[0], t[1])
        return [[a, b]]

    return sample_field((n1, n2), (h, h2), q_fn, y_fn, Side.LAGRANGIAN, (0.0, 0.0), (False, periodic_t2))


def wave_initial_slice(h2: float):
    n2 = int(round(1.0 / h2))
    t2 = h2 * np.arange(n2)
    phi, a, b = wave_solution(0.0 * t2, t2)
    return phi[:, None], np.stack([a, b], axis=-1)[:, None, :]


def abelian_transport_solution(t1, t2, m: int):
    """``y_1 = f(t1+t2) + g(t1-t2)``, ``y_2 = f(t1+t2) - g(t1-t2)`` per component."""
    ys1, ys2 = [], []
    for a in range(m):
        f = np.sin(TWO_PI * (t1 + t2) + a)
        g = 0.5 * np.cos(TWO_PI * (t1 - t2) + 2 * a)
        ys1.append(f + g)
        ys2.append(f - g)
    return np.array(ys1), np.array(ys2)


def march_error(field: GridField, exact: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
                ) -> float:
    """Max deviation of a marched field from an exact solution ``(q, fiber)`` at all nodes."""
    t = np.meshgrid(*field.axes(), indexing="ij")
    q, f = exact(*t)
    return float(max(np.max(np.abs(field.q - q), initial=0.0), np.max(np.abs(field.fiber - f))))


@dataclass(frozen=True)
class ManufacturedSlice:
    """Initial data on ``t1 = 0`` plus the exact solution when one is known."""

    q0: np.ndarray
    y0: np.ndarray
    exact: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None


def _wave_exact(n: int):
    def exact(t1, t2):
        comps = [wave_solution(t1, t2 + 0.1 * i) for i in range(n)]
        q = np.stack([c[0] for c in comps], axis=-1)
        y = np.stack([np.stack([c[1], c[2]], axis=-1) for c in comps], axis=-2)
        return q, y
    return exact


def manufactured_slice(sys: LagrangianSystem, tag: str, h: float) -> ManufacturedSlice:
    """Default periodic initial data with slice spacing ``h`` for an evolution tag (k = 2)."""
    if sys.k != 2:
        raise NotEvolutionary("manufactured initial data is provided for k = 2 only")
    n, m = sys.alg.base_dim, sys.alg.rank
    t2 = h * np.arange(int(round(1.0 / h)))
    zeros = np.zeros_like(t2)
    if tag == "wave":
        exact = _wave_exact(n)
        q0, y0 = exact(zeros, t2)
        return ManufacturedSlice(q0, y0, exact)
    if tag == "euler-poincare":
        c = sys.alg.structure_at(np.zeros((1, n)))
        flat = np.zeros((1, n + 2 * m))
        w = sys.derivatives(flat, order=2).dyy[0]
        lorentz = np.allclose(w[:, 0, :, 0], -w[:, 1, :, 1]) and np.allclose(w[:, 0, :, 1], 0.0)
        if not np.any(c) and lorentz:
            def exact(t1, t2):
                y1, y2 = abelian_transport_solution(t1, t2, m)
                return np.zeros(np.shape(t1) + (0,)), np.stack([np.moveaxis(y1, 0, -1),
                                                                 np.moveaxis(y2, 0, -1)], axis=-1)
            q0, y0 = exact(zeros, t2)
            return ManufacturedSlice(q0, y0, exact)
        y0 = np.stack([np.stack([0.1 * np.sin(TWO_PI * t2 + a + 2 * A) for A in range(2)], axis=-1)
                       for a in range(m)], axis=-2)
        return ManufacturedSlice(np.zeros(t2.shape + (0,)), y0, None)
    if tag == "sigma":
        base = 0.1 * np.arange(1, n + 1)
        rho = sys.alg.anchor_at(base)
        amp = 0.5 + 0.25 * np.arange(m)

        def exact(t1, t2):
            t1, t2 = np.asarray(t1, float), np.asarray(t2, float)
            p1 = amp * (1.0 + np.sin(TWO_PI * t2)[..., None])
            dp1 = amp * TWO_PI * np.cos(TWO_PI * t2)[..., None]
            p2 = t1[..., None] * dp1
            q = base + t1[..., None] * np.einsum("ia,...a->...i", rho, p1)
            return q, np.stack([p1, p2], axis=-1)

        q0, y0 = exact(zeros, t2)
        return ManufacturedSlice(q0, y0, exact)
    raise NotEvolutionary(f"no manufactured initial data for tag {tag!r}")
