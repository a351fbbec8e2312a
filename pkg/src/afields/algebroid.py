"""Lie algebroids in a local chart: anchor, bracket, structure equations, d^E.

Conventions
-----------
* ``anchor(q)`` is an ``(n, m)`` array: column ``alpha`` is the tangent vector
  of the basis section ``e_alpha``.
* ``structure(q)`` is an ``(m, m, m)`` array indexed ``[gamma, alpha, beta]``
  so that ``[e_alpha, e_beta] = C[gamma, alpha, beta] e_gamma``.

Both fields are callables accepting a length-``n`` sequence of floats or jets
(see :mod:`afields.autodiff`), or :class:`~afields.polynomial.PolyArray` tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, UnsupportedDegree
from .polynomial import PolyArray

AD_TOL = 1e-8
FD_TOL = 1e-4

Field = Callable[[Any], Any]


def default_tol(source: str) -> float:
    return AD_TOL if source == "ad" else FD_TOL


@dataclass(frozen=True)
class LieAlgebroid:
    base_dim: int
    rank: int
    anchor: Field
    structure: Field
    chart_label: str = ""

    def __post_init__(self):
        if self.base_dim < 0 or self.rank < 1:
            raise DimensionError(f"need base_dim >= 0 and rank >= 1, got {self.base_dim}, {self.rank}")

    @classmethod
    def from_arrays(cls, anchor, structure, chart_label: str = "", base_dim: int | None = None
                    ) -> "LieAlgebroid":
        """Algebroid with constant (or polynomial) anchor and structure tables."""
        c = structure if isinstance(structure, PolyArray) else np.asarray(structure, float)
        m = c.shape[0]
        if isinstance(anchor, PolyArray):
            n = anchor.shape[0]
        else:
            a = np.asarray(anchor, float)
            n = a.shape[0] if base_dim is None else base_dim
            anchor = PolyArray.constant(a.reshape(n, m), n)
        if not isinstance(c, PolyArray):
            c = PolyArray.constant(c, n)
        return cls(n, m, anchor, c, chart_label)

    def _check(self, q) -> None:
        if len(q) != self.base_dim:
            raise DimensionError(f"base point has {len(q)} coordinates, expected {self.base_dim}")

    def anchor_at(self, q) -> np.ndarray:
        """Anchor matrix at ``q`` (or at a batch ``(..., n)`` of points)."""
        q = np.asarray(q, float)
        if q.shape[-1] != self.base_dim:
            raise DimensionError(f"base point has {q.shape[-1]} coordinates, expected {self.base_dim}")
        return ad.evaluate(self.anchor_obj, q).reshape(q.shape[:-1] + (self.base_dim, self.rank))

    def structure_at(self, q) -> np.ndarray:
        q = np.asarray(q, float)
        if q.shape[-1] != self.base_dim:
            raise DimensionError(f"base point has {q.shape[-1]} coordinates, expected {self.base_dim}")
        m = self.rank
        return ad.evaluate(self.structure_obj, q).reshape(q.shape[:-1] + (m, m, m))

    # callables that always return correctly shaped object arrays
    def anchor_obj(self, q):
        out = np.empty((self.base_dim, self.rank), dtype=object)
        out[...] = np.asarray(self.anchor(q), dtype=object).reshape(self.base_dim, self.rank)
        return out

    def structure_obj(self, q):
        m = self.rank
        out = np.empty((m, m, m), dtype=object)
        out[...] = np.asarray(self.structure(q), dtype=object).reshape(m, m, m)
        return out

    def anchor_derivatives(self, q) -> ad.Derivatives:
        """Anchor value and gradient; ``grad[..., i, alpha, j] = d rho^i_alpha / d q^j``."""
        return ad.derivatives(self.anchor_obj, np.asarray(q, float), order=1)

    def structure_derivatives(self, q) -> ad.Derivatives:
        return ad.derivatives(self.structure_obj, np.asarray(q, float), order=1)

    def to_json(self) -> dict:
        if not (isinstance(self.anchor, PolyArray) and isinstance(self.structure, PolyArray)):
            raise TypeError("only polynomial-table algebroids can be serialized")
        return {
            "base_dim": self.base_dim,
            "rank": self.rank,
            "anchor": self.anchor.to_json(),
            "structure": self.structure.to_json(),
            "chart_label": self.chart_label,
        }


def _builtin_anchor(name: str, n: int, m: int) -> PolyArray:
    if name == "identity":
        if n != m:
            raise DimensionError("builtin:identity anchor needs base_dim == rank")
        return PolyArray.constant(np.eye(n), n)
    if name == "zero":
        return PolyArray.constant(np.zeros((n, m)), n)
    raise ValueError(f"unknown builtin anchor {name!r}")


def _builtin_structure(name: str, n: int, m: int) -> PolyArray:
    if name == "zero":
        return PolyArray.constant(np.zeros((m, m, m)), n)
    if name == "so3":
        if m != 3:
            raise DimensionError("builtin:so3 structure needs rank 3")
        return PolyArray.constant(levi_civita(), n)
    raise ValueError(f"unknown builtin structure {name!r}")


def levi_civita() -> np.ndarray:
    """``eps[gamma, alpha, beta]``, i.e. so(3) structure constants with [e1, e2] = e3."""
    eps = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[c, a, b] = 1.0
        eps[c, b, a] = -1.0
    return eps


def algebroid_from_json(data: dict | str | Path) -> LieAlgebroid:
    """Build an algebroid from the JSON descriptor (dict, JSON text or file path)."""
    if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
        data = json.loads(Path(data).read_text())
    elif isinstance(data, str):
        data = json.loads(data)
    n, m = int(data["base_dim"]), int(data["rank"])
    a, c = data["anchor"], data["structure"]
    anchor = _builtin_anchor(a.split(":", 1)[1], n, m) if isinstance(a, str) else PolyArray.from_json(a, n)
    structure = (_builtin_structure(c.split(":", 1)[1], n, m) if isinstance(c, str)
                 else PolyArray.from_json(c, n))
    if n == 0 and isinstance(a, list):
        anchor = PolyArray.constant(np.zeros((0, m)), 0)
    if anchor.shape != (n, m) or structure.shape != (m, m, m):
        raise DimensionError(f"table shapes {anchor.shape}, {structure.shape} do not match n={n}, m={m}")
    return LieAlgebroid(n, m, anchor, structure, data.get("chart_label", ""))


@dataclass(frozen=True)
class SectionField:
    """Coefficients ``q -> sigma^alpha(q)`` of a section of E (or of E*)."""

    coefficients: Field

    @classmethod
    def constant(cls, values) -> "SectionField":
        v = np.asarray(values, float)
        return cls(lambda q: v.astype(object))

    def value(self, q) -> np.ndarray:
        return np.asarray(self.coefficients(np.asarray(q, float)), float)

    def derivatives(self, q) -> ad.Derivatives:
        return ad.derivatives(lambda x: np.asarray(self.coefficients(x), dtype=object),
                              np.asarray(q, float), order=1)


@dataclass(frozen=True)
class MorphismData:
    """A map from R^k: ``base_map(t) -> phi^i`` and ``fiber_map(t) -> phi^alpha_A`` (m x k)."""

    base_map: Field
    fiber_map: Field
    k: int


def _vec(x, size: int, what: str) -> np.ndarray:
    a = np.asarray(x, float).reshape(-1)
    if a.size != size:
        raise DimensionError(f"{what} has length {a.size}, expected {size}")
    return a


def anchor_apply(alg: LieAlgebroid, q, e) -> np.ndarray:
    """Tangent vector ``rho^i_alpha(q) e^alpha``."""
    q = _vec(q, alg.base_dim, "base point")
    e = _vec(e, alg.rank, "fiber element")
    return alg.anchor_at(q) @ e


def bracket_from_jets(rho, c, s_val, s_grad, t_val, t_grad) -> np.ndarray:
    """Bracket coefficients from values and gradients (``grad[gamma, i]``)."""
    return (np.einsum("gab,a,b->g", c, s_val, t_val)
            + t_grad @ (rho @ s_val) - s_grad @ (rho @ t_val))


def bracket(alg: LieAlgebroid, sigma: SectionField, tau: SectionField, q) -> np.ndarray:
    q = _vec(q, alg.base_dim, "base point")
    ds, dt = sigma.derivatives(q), tau.derivatives(q)
    return bracket_from_jets(alg.anchor_at(q), alg.structure_at(q), ds.value, ds.grad, dt.value, dt.grad)


def exterior_differential(alg: LieAlgebroid, form: Callable, q, *sections: SectionField,
                          degree: int = 0):
    """Exterior differential of E at degree 0 or 1.

    Degree 0: ``form`` is a scalar function of q; returns ``rho^i_alpha df/dq^i``.
    Degree 1: ``form`` is a section of E* (callable or :class:`SectionField`),
    two sections are required and the scalar ``d mu(sigma, tau)`` is returned.
    """
    if degree == 0:
        if sections:
            raise TypeError("degree-0 differential takes no sections")
        q = _vec(q, alg.base_dim, "base point")
        d = ad.derivatives(form, q, order=1)
        return alg.anchor_at(q).T @ d.grad
    if degree == 1:
        if len(sections) != 2:
            raise TypeError("degree-1 differential needs exactly two sections")
        mu = form if isinstance(form, SectionField) else SectionField(form)
        return exterior_differential_1(alg, mu, sections[0], sections[1], q)
    raise UnsupportedDegree(f"exterior differential of degree {degree} is not supported (only 0 and 1)")


def exterior_differential_1(alg: LieAlgebroid, mu: SectionField, sigma: SectionField,
                            tau: SectionField, q) -> float:
    """``rho(sigma) mu(tau) - rho(tau) mu(sigma) - mu([sigma, tau])``."""
    q = _vec(q, alg.base_dim, "base point")
    dm, ds, dt = mu.derivatives(q), sigma.derivatives(q), tau.derivatives(q)
    rho = alg.anchor_at(q)
    # gradient of the pairing mu(tau) is dmu^T tau + dtau^T mu
    grad_mu_tau = dm.grad.T @ dt.value + dt.grad.T @ dm.value
    grad_mu_sigma = dm.grad.T @ ds.value + ds.grad.T @ dm.value
    br = bracket_from_jets(rho, alg.structure_at(q), ds.value, ds.grad, dt.value, dt.grad)
    return float((rho @ ds.value) @ grad_mu_tau - (rho @ dt.value) @ grad_mu_sigma - dm.value @ br)


def differential_section(alg: LieAlgebroid, f: Callable) -> SectionField:
    """``d^E f`` as a section of E* that can itself be differentiated exactly."""
    grad = ad.gradient_field(f)

    def coeffs(q):
        g = np.asarray(grad(q), dtype=object)
        rho = alg.anchor_obj(q)
        return rho.T @ g if alg.base_dim else np.zeros(alg.rank, dtype=object)

    return SectionField(coeffs)


@dataclass(frozen=True)
class StructureReport:
    max_violation_jacobi: float
    max_violation_anchor: float
    max_violation_antisymmetry: float
    passed: bool
    tol: float
    derivative_source: str
    worst_point: list[float] = field(default_factory=list)
    worst_identity: str = ""

    def to_dict(self) -> dict:
        return {
            "max_violation_jacobi": self.max_violation_jacobi,
            "max_violation_anchor": self.max_violation_anchor,
            "max_violation_antisymmetry": self.max_violation_antisymmetry,
            "pass": self.passed,
            "tol": self.tol,
            "derivative_source": self.derivative_source,
            "worst_point": self.worst_point,
            "worst_identity": self.worst_identity,
        }


def as_points(samples, dim: int) -> np.ndarray:
    """Samples as a ``(count, dim)`` array; a single flat point is promoted."""
    qs = np.asarray(samples, float)
    if qs.ndim == 1:
        qs = qs[None, :]
    if qs.shape[-1] != dim:
        raise DimensionError(f"sample points have {qs.shape[-1]} coordinates, expected {dim}")
    return qs.reshape(int(np.prod(qs.shape[:-1])), dim)


def structure_violations(alg: LieAlgebroid, samples) -> dict[str, np.ndarray]:
    """Per-sample max violations of antisymmetry and both structure equations."""
    qs = as_points(samples, alg.base_dim)
    da = alg.anchor_derivatives(qs)
    dc = alg.structure_derivatives(qs)
    rho, drho = da.value, da.grad          # (B,n,m), (B,n,m,n)
    c, dcq = dc.value, dc.grad             # (B,m,m,m), (B,m,m,m,n)
    count, n, m = qs.shape[0], alg.base_dim, alg.rank
    # S[nu,a,b,g] = rho^i_a d_i C^nu_{bg} + C^nu_{a mu} C^mu_{bg}, contracted with matmul
    s = np.moveaxis((dcq.reshape(count, m ** 3, n) @ rho).reshape(count, m, m, m, m), -1, 2)
    s = s + (c.reshape(count, m * m, m) @ c.reshape(count, m, m * m)).reshape(count, m, m, m, m)
    jac = s + np.einsum("Bnbca->Bnabc", s) + np.einsum("Bncab->Bnabc", s)
    # drho[i, b, j] rho[j, a] -> t[i, b, a]
    t = (drho.reshape(count, n * m, n) @ rho).reshape(count, n, m, m)
    anc = (np.swapaxes(t, -1, -2) - t
           - (rho @ c.reshape(count, m, m * m)).reshape(count, n, m, m))
    anti = c + np.swapaxes(c, -1, -2)

    def worst(x):
        return np.abs(x).reshape(x.shape[0], -1).max(axis=1) if x[0].size else np.zeros(x.shape[0])

    return {"jacobi": worst(jac), "anchor": worst(anc), "antisymmetry": worst(anti),
            "source": "ad" if da.source == dc.source == "ad" else "fd"}


def validate_structure_equations(alg: LieAlgebroid, samples: Sequence, tol: float | None = None
                                 ) -> StructureReport:
    qs = as_points(samples, alg.base_dim)
    if qs.shape[0] == 0:
        raise ValueError("samples must be non-empty")
    v = structure_violations(alg, qs)
    tol = default_tol(v["source"]) if tol is None else tol
    combined = np.maximum(np.maximum(v["jacobi"], v["anchor"]), v["antisymmetry"])
    i = int(np.argmax(combined))
    which = max(("jacobi", "anchor", "antisymmetry"), key=lambda key: v[key][i])
    return StructureReport(
        max_violation_jacobi=float(v["jacobi"].max()),
        max_violation_anchor=float(v["anchor"].max()),
        max_violation_antisymmetry=float(v["antisymmetry"].max()),
        passed=bool(combined.max() <= tol),
        tol=tol,
        derivative_source=v["source"],
        worst_point=qs[i].tolist(),
        worst_identity=which,
    )


def sample_box(dim: int, count: int, rng: np.random.Generator | int | None = None,
               radius: float = 1.0) -> np.ndarray:
    """Uniform random points of the box ``[-radius, radius]^dim``."""
    rng = np.random.default_rng(rng)
    return rng.uniform(-radius, radius, size=(count, dim))


@dataclass(frozen=True)
class MorphismResidual:
    anchor_res: np.ndarray    # (n, k)
    bracket_res: np.ndarray   # (m, k, k)


def morphism_residual_from_jet(alg: LieAlgebroid, q, y, dq, dy) -> MorphismResidual:
    """Residuals from a jet: ``dq[i, A] = d phi^i/dt^A``, ``dy[alpha, A, B] = d phi^alpha_A / dt^B``."""
    q = np.asarray(q, float)
    y = np.asarray(y, float)
    rho = alg.anchor_at(q)
    c = alg.structure_at(q)
    anchor_res = np.asarray(dq, float) - rho @ y
    bracket_res = (np.asarray(dy, float) - np.swapaxes(dy, 1, 2)
                   + np.einsum("abg,bB,gA->aAB", c, y, y))
    return MorphismResidual(anchor_res, bracket_res)


def morphism_residual(alg: LieAlgebroid, phi: MorphismData, t) -> MorphismResidual:
    """Morphism-condition residuals of ``phi`` at ``t`` using exact derivatives in t."""
    t = _vec(t, phi.k, "parameter point")
    n, m, k = alg.base_dim, alg.rank, phi.k

    def base(x):
        out = np.empty(n, dtype=object)
        out[...] = np.asarray(phi.base_map(x), dtype=object).reshape(n)
        return out

    def fiber(x):
        out = np.empty((m, k), dtype=object)
        out[...] = np.asarray(phi.fiber_map(x), dtype=object).reshape(m, k)
        return out

    db, df = ad.derivatives(base, t), ad.derivatives(fiber, t)
    return morphism_residual_from_jet(alg, db.value, df.value, db.grad, df.grad)
