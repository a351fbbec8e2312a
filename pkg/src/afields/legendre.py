"""Legendre transformation between the Whitney sum and its dual."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoConvergence, SingularHessian
from .grid import GridField
from .hamiltonian import HamiltonianSystem, hamilton_residuals, liouville_sections
from .lagrangian import (REGULARITY_TOL, LagrangianDerivatives, LagrangianSystem, cartan_sections,
                         euler_lagrange_residuals)
from .prolongation import CoWhitneyPoint, ProlongedElement, Side, WhitneyPoint


@dataclass(frozen=True)
class LegendreMap:
    sys: LagrangianSystem
    max_iter: int = 50
    tol: float = 1e-12
    damping: bool = True

    def derivatives(self, points, order: int = 2) -> LagrangianDerivatives:
        """Derivatives of L used by every map below (override to inject faults)."""
        return self.sys.derivatives(points, order=order)


def legendre_forward(leg: LegendreMap, b: WhitneyPoint) -> CoWhitneyPoint:
    d = leg.derivatives(b, order=1)
    return CoWhitneyPoint(b.q, d.dy.T)


def legendre_prolonged(leg: LegendreMap, Z: ProlongedElement) -> ProlongedElement:
    """Image of ``Z`` under the prolonged Legendre map; ``z`` is unchanged."""
    b = Z.base
    d = leg.derivatives(b, order=2)
    rho = leg.sys.alg.anchor_at(b.q)
    w = (np.einsum("a,ia,igC->Cg", Z.z, rho, d.dqy)
         + np.einsum("bB,gCbB->Cg", Z.w, d.dyy))
    return ProlongedElement(CoWhitneyPoint(b.q, d.dy.T), Z.z.copy(), w)


@dataclass(frozen=True)
class InversionResult:
    y: np.ndarray            # (B, m, k)
    iterations: np.ndarray   # (B,)
    residual: np.ndarray     # (B,)


def invert_batch(leg: LegendreMap, q: np.ndarray, p: np.ndarray, guess: np.ndarray | None = None
                 ) -> InversionResult:
    """Damped Newton solve of ``dL/dy(q, y) = p^T`` for a batch of points.

    ``q`` is (B, n), ``p`` is (B, k, m) and ``guess`` (B, m, k).
    """
    sys = leg.sys
    n, m, k = sys.alg.base_dim, sys.alg.rank, sys.k
    p = np.asarray(p, float).reshape(-1, k, m)
    q = np.asarray(q, float).reshape(p.shape[0], n)
    target = np.swapaxes(p, 1, 2)
    y = target.copy() if guess is None else np.asarray(guess, float).reshape(-1, m, k).copy()
    count = q.shape[0]
    tol = leg.tol * (np.abs(p).reshape(count, -1).max(axis=1, initial=0.0) + 1.0)
    iters = np.zeros(count, dtype=int)

    def evaluate(yy, order):
        x = np.concatenate([q, yy.reshape(count, -1)], axis=1)
        return leg.derivatives(x, order=order)

    d = evaluate(y, 2)
    res = d.dy - target
    norm = np.abs(res).reshape(count, -1).max(axis=1)
    active = norm > tol
    for it in range(leg.max_iter):
        if not active.any():
            break
        w = d.dyy.reshape(count, m * k, m * k)
        s = np.linalg.svd(w[active], compute_uv=False)
        bad = s[:, -1] <= REGULARITY_TOL * s[:, 0]
        if bad.any():
            cond = float(np.max(s[bad, 0] / np.maximum(s[bad, -1], np.finfo(float).tiny)))
            raise SingularHessian(f"singular Hessian during Legendre inversion (condition {cond:.3e})",
                                  cond)
        step = np.zeros_like(y)
        step[active] = -np.linalg.solve(w[active], res[active].reshape(-1, m * k, 1)).reshape(-1, m, k)
        scale = np.ones(count)
        trial = y + step
        dt = evaluate(trial, 2)
        tnorm = np.abs(dt.dy - target).reshape(count, -1).max(axis=1)
        if leg.damping:
            for _ in range(30):
                worse = active & (tnorm > norm) & (tnorm > tol)
                if not worse.any():
                    break
                scale[worse] *= 0.5
                trial = y + scale[:, None, None] * step
                dt = evaluate(trial, 2)
                tnorm = np.abs(dt.dy - target).reshape(count, -1).max(axis=1)
        y = np.where(active[:, None, None], trial, y)
        iters[active] += 1
        d = dt if active.all() else evaluate(y, 2)
        res = d.dy - target
        norm = np.abs(res).reshape(count, -1).max(axis=1)
        active = norm > tol
    if active.any():
        worst = int(np.argmax(np.where(active, norm, -1.0)))
        raise NoConvergence(f"Legendre inversion did not converge in {leg.max_iter} iterations "
                            f"(residual {norm[worst]:.3e})", int(iters[worst]), float(norm[worst]))
    return InversionResult(y, iters, norm)


def legendre_invert(leg: LegendreMap, p: CoWhitneyPoint, guess: WhitneyPoint | None = None
                    ) -> WhitneyPoint:
    g = None if guess is None else guess.y[None]
    r = invert_batch(leg, p.q[None], p.p[None], g)
    return WhitneyPoint(p.q, r.y[0])


@dataclass(frozen=True)
class InducedDerivatives:
    value: np.ndarray
    grad: np.ndarray
    iterations: np.ndarray


def induced_derivatives(leg: LegendreMap, x: np.ndarray) -> InducedDerivatives:
    """``H = E_L o Leg^{-1}`` and its gradient by implicit differentiation."""
    sys = leg.sys
    n, m, k = sys.alg.base_dim, sys.alg.rank, sys.k
    x = np.asarray(x, float)
    batch = x.shape[:-1]
    flat = x.reshape(-1, n + m * k)
    q, p = flat[:, :n], flat[:, n:].reshape(-1, k, m)
    inv = invert_batch(leg, q, p)
    y = inv.y
    d = leg.derivatives(np.concatenate([q, y.reshape(len(q), -1)], axis=1), order=2)
    count, mk = len(q), m * k
    w = d.dyy.reshape(count, mk, mk)
    lyq = np.swapaxes(d.dqy.reshape(count, n, mk), 1, 2)                  # (B, mk, n)
    # energy gradient in (q, y) coordinates
    de_dy = np.einsum("Bu,Buv->Bv", y.reshape(count, mk), w)
    de_dq = np.einsum("Bu,Bqu->Bq", y.reshape(count, mk), d.dqy.reshape(count, n, mk)) - d.dq
    # implicit function: dy/dp = W^{-1}, dy/dq = -W^{-1} L_yq
    dh_dp_flat = np.linalg.solve(np.swapaxes(w, 1, 2), de_dy[..., None])[..., 0]   # W^{-T} dE/dy
    dh_dq = de_dq - np.einsum("Bv,Bvq->Bq", dh_dp_flat, lyq)
    # dh_dp_flat is indexed (a, A); reorder to the dual layout (A, a)
    dh_dp = np.swapaxes(dh_dp_flat.reshape(count, m, k), 1, 2).reshape(count, -1)
    energy = np.einsum("Bu,Bu->B", y.reshape(count, mk), d.dy.reshape(count, mk)) - d.value
    grad = np.concatenate([dh_dq, dh_dp], axis=1)
    return InducedDerivatives(energy.reshape(batch), grad.reshape(batch + (n + m * k,)),
                              inv.iterations.reshape(batch))


def induced_hamiltonian(leg: LegendreMap) -> HamiltonianSystem:
    """Hamiltonian ``E_L o Leg^{-1}``; each evaluation verifies invertibility by Newton."""
    sys = leg.sys

    def H(q, p):
        x = np.concatenate([np.asarray(q, float).ravel(), np.asarray(p, float).ravel()])
        return float(induced_derivatives(leg, x).value)

    def gradient(x):
        r = induced_derivatives(leg, x)
        return r.value, r.grad

    return HamiltonianSystem(sys.alg, sys.k, H, name=f"induced from {sys.name or 'L'}", gradient=gradient)


@dataclass(frozen=True)
class PullbackResult:
    theta_ok: bool
    omega_ok: bool
    theta_error: float
    omega_error: float


def pullback_check(leg: LegendreMap, b: WhitneyPoint, Z1: ProlongedElement, Z2: ProlongedElement,
                   tol: float = 1e-8) -> PullbackResult:
    """Compare the pulled-back dual Liouville sections with the Lagrangian ones."""
    k = leg.sys.k
    d = leg.derivatives(b, order=2)
    p = CoWhitneyPoint(b.q, d.dy.T)
    lv = liouville_sections(leg.sys.alg, k, p)
    cart = cartan_sections(leg.sys, b)
    L1, L2 = legendre_prolonged(leg, Z1), legendre_prolonged(leg, Z2)
    terr = oerr = 0.0
    for A in range(k):
        hamiltonian_theta = lv.theta[A] @ L1.z
        lagrangian_theta = cart.theta_covector(A) @ Z1.vector()
        terr = max(terr, abs(hamiltonian_theta - lagrangian_theta))
        hamiltonian_omega = L1.vector() @ lv.omega[A] @ L2.vector()
        lagrangian_omega = Z1.vector() @ cart.omega[A] @ Z2.vector()
        oerr = max(oerr, abs(hamiltonian_omega - lagrangian_omega))
    return PullbackResult(terr <= tol, oerr <= tol, float(terr), float(oerr))


@dataclass(frozen=True)
class TransportReport:
    el_res_max: float
    ham_res_max: float
    nodes: list[dict] = field(default_factory=list)

    def to_dict(self, include_nodes: bool = True) -> dict:
        out = {"el_res_max": self.el_res_max, "ham_res_max": self.ham_res_max}
        if include_nodes:
            out["nodes"] = self.nodes
        return out


def legendre_field(leg: LegendreMap, eta: GridField) -> GridField:
    d = leg.derivatives(eta.flat_points(), order=1)
    return eta.with_fiber(eta.q.copy(), np.swapaxes(d.dy, -1, -2).copy(), Side.HAMILTONIAN)


def solution_transport(leg: LegendreMap, eta: GridField,
                       hamiltonian: HamiltonianSystem | None = None) -> tuple[GridField, TransportReport]:
    """Map a Lagrangian grid field through Leg and compare both residuals nodewise.

    Each side's norm covers its field equation and its anchor rows
    (``dq - rho y`` resp. ``dq - rho dH/dp``).
    """
    if eta.side is not Side.LAGRANGIAN:
        raise ValueError("solution_transport needs a field on the Whitney sum")
    psi = legendre_field(leg, eta)
    ham = hamiltonian or induced_hamiltonian(leg)
    el = euler_lagrange_residuals(leg.sys, eta)
    hr = hamilton_residuals(ham, psi)
    m, k = leg.sys.alg.rank, leg.sys.k
    dyy = leg.derivatives(eta.flat_points(), order=2).dyy
    w = dyy.reshape(eta.shape + (m * k, m * k))
    sv = np.linalg.svd(w, compute_uv=False)
    regular = sv[..., -1] > REGULARITY_TOL * sv[..., 0]
    iters = induced_derivatives(leg, psi.flat_points()).iterations
    records = []
    for i, node in enumerate(map(tuple, el.nodes)):
        el_norm = float(max(np.max(np.abs(el.primary[i]), initial=0.0),
                            np.max(np.abs(el.anchor_res[i]), initial=0.0)))
        ham_norm = float(max(np.max(np.abs(hr.primary[i]), initial=0.0),
                             np.max(np.abs(hr.anchor_res[i]), initial=0.0)))
        records.append({"node": [int(j) for j in node], "el_res_norm": el_norm, "ham_res_norm": ham_norm,
                        "invert_iters": int(iters[node]), "regular": bool(regular[node])})
    report = TransportReport(
        el_res_max=float(max(np.max(np.abs(el.primary), initial=0.0),
                             np.max(np.abs(el.anchor_res), initial=0.0))),
        ham_res_max=float(max(np.max(np.abs(hr.primary), initial=0.0),
                              np.max(np.abs(hr.anchor_res), initial=0.0))),
        nodes=records,
    )
    return psi, report


def transport_trajectory(leg: LegendreMap, q: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Momenta ``dL/dy`` along a k = 1 trajectory given as arrays (N, n), (N, m)."""
    x = np.concatenate([np.asarray(q, float), np.asarray(y, float)], axis=1)
    return leg.derivatives(x, order=1).dy[..., 0]


def round_trip_error(leg: LegendreMap, points: Sequence[WhitneyPoint]) -> float:
    worst = 0.0
    for b in points:
        back = legendre_invert(leg, legendre_forward(leg, b))
        worst = max(worst, float(np.max(np.abs(back.y - b.y))))
    return worst
