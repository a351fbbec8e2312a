"""Dense arrays of polynomials in the base coordinates.

JSON layout: a nested list whose leaves are either numbers (constants) or
lists of monomials ``[coefficient, [p_1, ..., p_n]]`` meaning
``coefficient * q_1**p_1 * ... * q_n**p_n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

Monomial = tuple[float, tuple[int, ...]]


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_leaf(node: Any) -> bool:
    """True for a non-empty monomial list ``[[coef, [powers...]], ...]``."""
    return (isinstance(node, list) and bool(node) and all(
        isinstance(t, list) and len(t) == 2 and _is_number(t[0]) and isinstance(t[1], list)
        and all(isinstance(p, int) for p in t[1]) for t in node))


@dataclass(frozen=True)
class PolyArray:
    """An array of polynomials in ``nvars`` variables.

    ``terms`` maps an index tuple to its monomials; missing entries are zero.
    """

    shape: tuple[int, ...]
    nvars: int
    terms: Mapping[tuple[int, ...], tuple[Monomial, ...]]

    @classmethod
    def constant(cls, array, nvars: int) -> "PolyArray":
        a = np.asarray(array, dtype=float)
        terms = {idx: ((float(c), (0,) * nvars),) for idx, c in np.ndenumerate(a) if c != 0.0}
        return cls(a.shape, nvars, terms)

    @classmethod
    def from_json(cls, data: Any, nvars: int) -> "PolyArray":
        terms: dict[tuple[int, ...], tuple[Monomial, ...]] = {}

        def walk(node, idx):
            if _is_number(node):
                if node != 0:
                    terms[idx] = ((float(node), (0,) * nvars),)
                return None
            if _is_leaf(node):
                monos = []
                for coef, powers in node:
                    if len(powers) != nvars:
                        raise ValueError(f"monomial {powers} at {idx} needs {nvars} exponents")
                    monos.append((float(coef), tuple(int(p) for p in powers)))
                terms[idx] = tuple(monos)
                return None
            shapes = [walk(child, idx + (i,)) for i, child in enumerate(node)]
            return shapes

        def shape_of(node):
            if _is_number(node):
                return ()
            if _is_leaf(node):
                return ()
            if not isinstance(node, list):
                raise ValueError(f"bad coefficient table entry: {node!r}")
            inner = {shape_of(c) for c in node}
            if len(inner) > 1:
                raise ValueError("ragged coefficient table")
            return (len(node),) + (inner.pop() if inner else ())

        shape = shape_of(data)
        walk(data, ())
        return cls(shape, nvars, terms)

    def to_json(self) -> Any:
        def build(idx):
            if len(idx) == len(self.shape):
                monos = self.terms.get(idx, ())
                if not monos:
                    return 0.0
                if len(monos) == 1 and not any(monos[0][1]):
                    return monos[0][0]
                return [[c, list(p)] for c, p in monos]
            return [build(idx + (i,)) for i in range(self.shape[len(idx)])]

        return build(())

    def padded(self, extra: int) -> "PolyArray":
        """Same polynomials viewed as functions of ``nvars + extra`` variables."""
        z = (0,) * extra
        terms = {i: tuple((c, p + z) for c, p in ms) for i, ms in self.terms.items()}
        return PolyArray(self.shape, self.nvars + extra, terms)

    def derivative(self) -> "PolyArray":
        """Array of shape ``shape + (nvars,)`` holding the partial derivatives."""
        terms: dict[tuple[int, ...], tuple[Monomial, ...]] = {}
        for idx, monos in self.terms.items():
            for var in range(self.nvars):
                out = []
                for c, p in monos:
                    if p[var]:
                        q = list(p)
                        q[var] -= 1
                        out.append((c * p[var], tuple(q)))
                if out:
                    terms[idx + (var,)] = tuple(out)
        return PolyArray(self.shape + (self.nvars,), self.nvars, terms)

    def __call__(self, q):
        """Evaluate at ``q`` (floats, float arrays or jets); returns an object array."""
        if len(q) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {len(q)}")
        cache: dict[tuple[int, ...], Any] = {}

        def mono(p):
            if p not in cache:
                val = 1.0
                for var, e in enumerate(p):
                    if e:
                        val = val * q[var] ** e if e > 1 else val * q[var]
                cache[p] = val
            return cache[p]

        out = np.zeros(self.shape, dtype=object)
        for idx, monos in self.terms.items():
            acc = 0.0
            for c, p in monos:
                acc = acc + c * mono(p)
            out[idx] = acc
        return out

    def is_constant(self) -> bool:
        return all(not any(p) for ms in self.terms.values() for _, p in ms)
