"""Prolongation of an algebroid over its k-fold Whitney sum (or the dual sum).

Slots ``A`` are 0-based throughout.  Flattened coordinates of the total space:

* Lagrangian side ``(q, y)`` with ``y`` of shape ``(m, k)``; entry ``y[a, A]``
  sits at ``n + a*k + A``.  The vertical basis element ``V^A_a`` has index
  ``m + a*k + A`` in the prolonged fiber.
* Hamiltonian side ``(q, p)`` with ``p`` of shape ``(k, m)``; entry ``p[A, a]``
  sits at ``n + A*m + a`` and ``V_A^a`` has index ``m + A*m + a``.

In this basis the prolonged anchor is ``diag(rho, identity)`` and the only
non-zero brackets are ``[X_a, X_b] = C^g_ab X_g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .algebroid import LieAlgebroid
from .errors import DimensionError
from .polynomial import PolyArray


class Side(str, Enum):
    LAGRANGIAN = "lagrangian"
    HAMILTONIAN = "hamiltonian"


@dataclass(frozen=True)
class WhitneyPoint:
    """Point of the k-fold Whitney sum: ``q`` (n,) and ``y`` (m, k)."""

    q: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, float).reshape(-1))
        y = np.asarray(self.y, float)
        object.__setattr__(self, "y", y.reshape(y.shape[0], -1) if y.ndim < 2 else y)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.y))):
            raise ValueError("WhitneyPoint entries must be finite")

    @property
    def k(self) -> int:
        return self.y.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.q, self.y.ravel()])

    @classmethod
    def from_flat(cls, x, n: int, m: int, k: int) -> "WhitneyPoint":
        x = np.asarray(x, float)
        return cls(x[:n], x[n:].reshape(m, k))


@dataclass(frozen=True)
class CoWhitneyPoint:
    """Point of the k-fold sum of the dual: ``q`` (n,) and ``p`` (k, m)."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, float).reshape(-1))
        p = np.asarray(self.p, float)
        object.__setattr__(self, "p", p.reshape(1, -1) if p.ndim < 2 else p)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("CoWhitneyPoint entries must be finite")

    @property
    def k(self) -> int:
        return self.p.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.q, self.p.ravel()])

    @classmethod
    def from_flat(cls, x, n: int, m: int, k: int) -> "CoWhitneyPoint":
        x = np.asarray(x, float)
        return cls(x[:n], x[n:].reshape(k, m))


@dataclass(frozen=True)
class ProlongedElement:
    """Element ``z^a X_a + w V`` of the prolonged algebroid at ``base``.

    ``w`` has shape (m, k) on the Lagrangian side and (k, m) on the Hamiltonian side.
    """

    base: WhitneyPoint | CoWhitneyPoint
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, float).reshape(-1))
        object.__setattr__(self, "w", np.asarray(self.w, float))

    def vector(self) -> np.ndarray:
        """Coefficients on the prolonged basis ``{X_a, V}``."""
        return np.concatenate([self.z, self.w.ravel()])

    def __add__(self, other: "ProlongedElement") -> "ProlongedElement":
        return ProlongedElement(self.base, self.z + other.z, self.w + other.w)

    def __rmul__(self, s: float) -> "ProlongedElement":
        return ProlongedElement(self.base, s * self.z, s * self.w)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.vector()) <= tol))


def element_from_vector(base, vec, m: int, k: int) -> ProlongedElement:
    vec = np.asarray(vec, float)
    shape = (m, k) if isinstance(base, WhitneyPoint) else (k, m)
    return ProlongedElement(base, vec[:m], vec[m:].reshape(shape))


@dataclass(frozen=True)
class ProlongedAlgebroid:
    parent: LieAlgebroid
    k: int
    side: Side
    algebroid: LieAlgebroid

    @property
    def total_dim(self) -> int:
        return self.algebroid.base_dim

    @property
    def rank(self) -> int:
        return self.algebroid.rank

    def point(self, x) -> WhitneyPoint | CoWhitneyPoint:
        cls = WhitneyPoint if self.side is Side.LAGRANGIAN else CoWhitneyPoint
        return cls.from_flat(x, self.parent.base_dim, self.parent.rank, self.k)

    def tangent(self, element: ProlongedElement) -> np.ndarray:
        """Anchor image ``(rho z, w)`` in flattened total-space coordinates."""
        rho = self.parent.anchor_at(element.base.q)
        return np.concatenate([rho @ element.z, element.w.ravel()])


def _block_tables(parent: LieAlgebroid, k: int):
    n, m = parent.base_dim, parent.rank
    big_n, big_m = n + m * k, m + m * k
    anchor = parent.anchor.padded(m * k)
    terms = dict(anchor.terms)
    for j in range(m * k):
        terms[(n + j, m + j)] = ((1.0, (0,) * big_n),)
    anchor = PolyArray((big_n, big_m), big_n, terms)
    struct = parent.structure.padded(m * k)
    struct = PolyArray((big_m, big_m, big_m), big_n, dict(struct.terms))
    return anchor, struct


def prolong(alg: LieAlgebroid, k: int, side: Side | str = Side.LAGRANGIAN) -> ProlongedAlgebroid:
    """The prolonged algebroid as a standalone :class:`LieAlgebroid` instance."""
    side = Side(side)
    if k < 1:
        raise ValueError("k must be a positive integer")
    n, m = alg.base_dim, alg.rank
    big_n, big_m = n + m * k, m + m * k
    label = f"{alg.chart_label or 'E'} prolonged ({side.value}, k={k})"
    if isinstance(alg.anchor, PolyArray) and isinstance(alg.structure, PolyArray):
        anchor, struct = _block_tables(alg, k)
        return ProlongedAlgebroid(alg, k, side, LieAlgebroid(big_n, big_m, anchor, struct, label))

    def anchor_fn(x):
        out = np.zeros((big_n, big_m), dtype=object)
        out[:n, :m] = alg.anchor_obj(x[:n])
        out[n:, m:] = np.eye(m * k)
        return out

    def struct_fn(x):
        out = np.zeros((big_m, big_m, big_m), dtype=object)
        out[:m, :m, :m] = alg.structure_obj(x[:n])
        return out

    big = _EmbeddedAlgebroid(big_n, big_m, anchor_fn, struct_fn, label, parent=alg)
    return ProlongedAlgebroid(alg, k, side, big)


@dataclass(frozen=True)
class _EmbeddedAlgebroid(LieAlgebroid):
    """Prolongation of a closure-based algebroid.

    Its tables depend on the base coordinates only, so derivatives are the
    parent's derivatives embedded in the larger blocks (no jets over the fiber).
    """

    parent: LieAlgebroid | None = None

    def anchor_derivatives(self, q) -> ad.Derivatives:
        q = np.asarray(q, float)
        n, m = self.parent.base_dim, self.parent.rank
        d = self.parent.anchor_derivatives(q[..., :n])
        batch = q.shape[:-1]
        value = np.zeros(batch + (self.base_dim, self.rank))
        value[..., :n, :m] = d.value
        value[..., n:, m:] = np.eye(self.rank - m)
        grad = np.zeros(batch + (self.base_dim, self.rank, self.base_dim))
        grad[..., :n, :m, :n] = d.grad
        return ad.Derivatives(value, grad, None, d.source)

    def structure_derivatives(self, q) -> ad.Derivatives:
        q = np.asarray(q, float)
        n, m = self.parent.base_dim, self.parent.rank
        d = self.parent.structure_derivatives(q[..., :n])
        batch = q.shape[:-1]
        big = self.rank
        value = np.zeros(batch + (big, big, big))
        value[..., :m, :m, :m] = d.value
        grad = np.zeros(batch + (big, big, big, self.base_dim))
        grad[..., :m, :m, :m, :n] = d.grad
        return ad.Derivatives(value, grad, None, d.source)


def _slot(A: int, k: int) -> None:
    if not 0 <= A < k:
        raise IndexError(f"slot index {A} outside 0..{k - 1}")


def vertical_lift(alg: LieAlgebroid, k: int, e, b: WhitneyPoint, A: int) -> ProlongedElement:
    """Vertical lift of ``e`` into slot ``A`` at ``b``: ``z = 0``, ``w[:, A] = e``."""
    _slot(A, k)
    e = np.asarray(e, float).reshape(-1)
    if e.size != alg.rank:
        raise DimensionError(f"fiber element has length {e.size}, expected {alg.rank}")
    w = np.zeros((alg.rank, k))
    w[:, A] = e
    return ProlongedElement(b, np.zeros(alg.rank), w)


def liouville_section(alg: LieAlgebroid, k: int, A: int, b: WhitneyPoint) -> ProlongedElement:
    """Liouville section of slot ``A``: the vertical lift of ``y[:, A]`` into slot ``A``."""
    _slot(A, k)
    w = np.zeros((alg.rank, k))
    w[:, A] = b.y[:, A]
    return ProlongedElement(b, np.zeros(alg.rank), w)


def vertical_endomorphism(alg: LieAlgebroid, k: int, A: int, Z: ProlongedElement) -> ProlongedElement:
    """Move the X-part of ``Z`` into the vertical slot ``A``; drop the V-part."""
    _slot(A, k)
    w = np.zeros((alg.rank, k))
    w[:, A] = Z.z
    return ProlongedElement(Z.base, np.zeros(alg.rank), w)


@dataclass(frozen=True)
class SopdeSection:
    """k sections ``xi_A`` of the Lagrangian prolongation.

    ``coefficients(b)`` returns ``(x, v)``: ``x[a, A] = xi^a_A`` and
    ``v[A, a, B] = (xi_A)^a_B``.
    """

    alg: LieAlgebroid
    k: int
    coefficients: Callable[[WhitneyPoint], tuple[np.ndarray, np.ndarray]]

    def elements(self, b: WhitneyPoint) -> list[ProlongedElement]:
        x, v = self.coefficients(b)
        x, v = np.asarray(x, float), np.asarray(v, float)
        return [ProlongedElement(b, x[:, A], v[A]) for A in range(self.k)]


def sopde_violation(xi: SopdeSection, b: WhitneyPoint) -> float:
    x, _ = xi.coefficients(b)
    return float(np.max(np.abs(np.asarray(x, float) - b.y), initial=0.0))


def sopde_check(xi: SopdeSection, samples: Sequence[WhitneyPoint], tol: float = 1e-8) -> bool:
    """True iff ``xi^a_A = y^a_A`` at every sample, within ``tol``."""
    if not samples:
        raise ValueError("samples must be non-empty")
    return max(sopde_violation(xi, b) for b in samples) <= tol


def sopde_check_endomorphism(xi: SopdeSection, samples: Sequence[WhitneyPoint], tol: float = 1e-8) -> bool:
    """Same verdict reached through ``J^A(xi_A) = Delta_A`` for every slot."""
    if not samples:
        raise ValueError("samples must be non-empty")
    worst = 0.0
    for b in samples:
        for A, el in enumerate(xi.elements(b)):
            lhs = vertical_endomorphism(xi.alg, xi.k, A, el)
            rhs = liouville_section(xi.alg, xi.k, A, b)
            worst = max(worst, float(np.max(np.abs(lhs.vector() - rhs.vector()), initial=0.0)))
    return worst <= tol


def associated_k_vector(xi, b) -> np.ndarray:
    """Tangent vectors ``(rho z_A, w_A)`` of the k sections, shape ``(k, n + m k)``.

    ``xi`` is any object with ``alg`` and ``elements(b)`` (a :class:`SopdeSection`
    or a Hamiltonian-side section).
    """
    rho = xi.alg.anchor_at(b.q)
    return np.stack([np.concatenate([rho @ el.z, el.w.ravel()]) for el in xi.elements(b)])


def random_whitney_points(alg: LieAlgebroid, k: int, count: int, rng=None, radius: float = 1.0
                          ) -> list[WhitneyPoint]:
    rng = np.random.default_rng(rng)
    return [WhitneyPoint(rng.uniform(-radius, radius, alg.base_dim),
                         rng.uniform(-radius, radius, (alg.rank, k))) for _ in range(count)]


def random_cowhitney_points(alg: LieAlgebroid, k: int, count: int, rng=None, radius: float = 1.0
                            ) -> list[CoWhitneyPoint]:
    rng = np.random.default_rng(rng)
    return [CoWhitneyPoint(rng.uniform(-radius, radius, alg.base_dim),
                           rng.uniform(-radius, radius, (k, alg.rank))) for _ in range(count)]


def random_elements(base, m: int, k: int, count: int, rng=None) -> Iterable[ProlongedElement]:
    rng = np.random.default_rng(rng)
    for _ in range(count):
        yield element_from_vector(base, rng.standard_normal(m + m * k), m, k)
