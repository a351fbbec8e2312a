"""Uniform grids over R^k carrying discrete fields, with central-difference jets."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .algebroid import LieAlgebroid
from .errors import BoundaryNode, DimensionError
from .prolongation import CoWhitneyPoint, Side, WhitneyPoint


@dataclass(frozen=True)
class GridField:
    """Values of a map from a uniform grid in R^k to the Whitney sum (or its dual).

    ``q`` has shape ``grid + (n,)``; ``fiber`` has shape ``grid + (m, k)`` on the
    Lagrangian side and ``grid + (k, m)`` on the Hamiltonian side.
    """

    spacing: tuple[float, ...]
    q: np.ndarray
    fiber: np.ndarray
    side: Side = Side.LAGRANGIAN
    origin: tuple[float, ...] = ()
    periodic: tuple[bool, ...] = ()

    def __post_init__(self):
        k = len(self.spacing)
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "side", Side(self.side))
        object.__setattr__(self, "q", np.asarray(self.q, float))
        object.__setattr__(self, "fiber", np.asarray(self.fiber, float))
        if not self.origin:
            object.__setattr__(self, "origin", (0.0,) * k)
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * k)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
        if any(h <= 0 for h in self.spacing):
            raise ValueError("grid spacing must be positive")
        if len(self.origin) != k or len(self.periodic) != k:
            raise DimensionError("origin/periodic flags must have one entry per axis")
        if self.q.ndim != k + 1 or self.fiber.ndim != k + 2:
            raise DimensionError("field arrays must have shape grid + (n,) and grid + fiber shape")
        if self.q.shape[:k] != self.fiber.shape[:k]:
            raise DimensionError("q and fiber grids differ")
        fk = self.fiber.shape[-1] if self.side is Side.LAGRANGIAN else self.fiber.shape[-2]
        if fk != k:
            raise DimensionError(f"fiber has {fk} slots but the grid has {k} axes")

    @property
    def k(self) -> int:
        return len(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.q.shape[: self.k]

    @property
    def base_dim(self) -> int:
        return self.q.shape[-1]

    @property
    def rank(self) -> int:
        return self.fiber.shape[-2] if self.side is Side.LAGRANGIAN else self.fiber.shape[-1]

    def coords(self, node: Sequence[int]) -> np.ndarray:
        return np.array([o + i * h for o, i, h in zip(self.origin, node, self.spacing)])

    def axes(self) -> list[np.ndarray]:
        return [o + h * np.arange(N) for o, h, N in zip(self.origin, self.spacing, self.shape)]

    def point(self, node: Sequence[int]) -> WhitneyPoint | CoWhitneyPoint:
        node = tuple(node)
        cls = WhitneyPoint if self.side is Side.LAGRANGIAN else CoWhitneyPoint
        return cls(self.q[node], self.fiber[node])

    def flat_points(self) -> np.ndarray:
        """All nodes as flattened total-space coordinates, shape ``grid + (n + m k,)``."""
        return np.concatenate([self.q, self.fiber.reshape(self.shape + (-1,))], axis=-1)

    def is_interior(self, node: Sequence[int], axis: int | None = None) -> bool:
        axes = range(self.k) if axis is None else [axis]
        return all(self.periodic[a] or 0 < node[a] < self.shape[a] - 1 for a in axes)

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.k):
            if not self.periodic[a]:
                idx = [slice(None)] * self.k
                idx[a] = 0
                mask[tuple(idx)] = False
                idx[a] = -1
                mask[tuple(idx)] = False
        return mask

    def interior_nodes(self) -> Iterator[tuple[int, ...]]:
        for node in zip(*np.nonzero(self.interior_mask())):
            yield tuple(int(i) for i in node)

    def with_fiber(self, q, fiber, side: Side) -> "GridField":
        return replace(self, q=q, fiber=fiber, side=side)


def central_difference(values: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second-order central difference along grid ``axis``; NaN on non-periodic ends."""
    fwd = np.roll(values, -1, axis=axis)
    bwd = np.roll(values, 1, axis=axis)
    d = (fwd - bwd) / (2.0 * h)
    if not periodic:
        idx = [slice(None)] * values.ndim
        for end in (0, -1):
            idx[axis] = end
            d[tuple(idx)] = np.nan
    return d


def one_sided_ends(values: np.ndarray, d: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Fill the end nodes of ``d`` with second-order one-sided differences."""
    v = np.moveaxis(values, axis, 0)
    out = np.moveaxis(d.copy(), axis, 0)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def node_difference(values: np.ndarray, node: Sequence[int], axis: int, h: float,
                    periodic: bool) -> np.ndarray:
    """Central difference of grid-valued ``values`` at a single node."""
    node = list(node)
    size = values.shape[axis]
    if not periodic and not 0 < node[axis] < size - 1:
        raise BoundaryNode(f"node {tuple(node)} is on the boundary of axis {axis}")
    up, down = list(node), list(node)
    up[axis] = (node[axis] + 1) % size
    down[axis] = (node[axis] - 1) % size
    return (values[tuple(up)] - values[tuple(down)]) / (2.0 * h)


def fd_jet(field: GridField, node: Sequence[int], axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference derivatives ``(dq, dfiber)`` along ``axis`` at ``node``."""
    if not 0 <= axis < field.k:
        raise IndexError(f"axis {axis} outside 0..{field.k - 1}")
    h, per = field.spacing[axis], field.periodic[axis]
    return (node_difference(field.q, node, axis, h, per),
            node_difference(field.fiber, node, axis, h, per))


def _is_standard(alg: LieAlgebroid, rng: np.random.Generator) -> bool:
    if alg.base_dim != alg.rank:
        return False
    qs = rng.uniform(-1, 1, (5, alg.base_dim))
    rho = alg.anchor_at(qs)
    c = alg.structure_at(qs)
    return bool(np.allclose(rho, np.eye(alg.base_dim)) and np.allclose(c, 0.0))


def first_prolongation(alg: LieAlgebroid, q_values, spacing: Sequence[float],
                       origin: Sequence[float] = (), periodic: Sequence[bool] = ()) -> GridField:
    """Grid field ``(q, dq/dt)`` on the standard algebroid.

    Interior and periodic nodes use central differences; ends of non-periodic
    axes use second-order one-sided differences so every node is populated.
    """
    if not _is_standard(alg, np.random.default_rng(0)):
        raise ValueError("first prolongation needs the standard algebroid (identity anchor, C = 0)")
    q = np.asarray(q_values, float)
    k = len(spacing)
    periodic = tuple(periodic) or (False,) * k
    if q.ndim != k + 1 or q.shape[-1] != alg.base_dim:
        raise DimensionError("q_values must have shape grid + (n,)")
    y = np.empty(q.shape + (k,))
    for a in range(k):
        d = central_difference(q, a, spacing[a], periodic[a])
        if not periodic[a]:
            if q.shape[a] < 3:
                raise ValueError("need at least 3 nodes per non-periodic axis")
            d = one_sided_ends(q, d, a, spacing[a])
        y[..., a] = d
    return GridField(tuple(spacing), q, y, Side.LAGRANGIAN, tuple(origin), periodic)


def sample_field(k_shape: Sequence[int], spacing: Sequence[float], q_fn: Callable,
                 fiber_fn: Callable, side: Side | str = Side.LAGRANGIAN,
                 origin: Sequence[float] = (), periodic: Sequence[bool] = ()) -> GridField:
    """Sample analytic maps on a grid.

    ``q_fn(t)`` and ``fiber_fn(t)`` receive ``t``, a list of k coordinate
    arrays (meshgrid, ``ij`` indexing), and return nested lists of shape
    ``(n,)`` resp. the fiber shape whose entries broadcast to the grid.
    """
    k = len(spacing)
    origin = tuple(origin) or (0.0,) * k
    axes = [o + h * np.arange(N) for o, h, N in zip(origin, spacing, k_shape)]
    t = np.meshgrid(*axes, indexing="ij")
    grid = tuple(k_shape)

    def stack(vals):
        # lists/tuples are containers, anything else is a leaf broadcast to the grid
        def shape_of(v):
            return (len(v),) + (shape_of(v[0]) if len(v) else ()) if isinstance(v, (list, tuple)) else ()

        def leaves(v, idx=()):
            if isinstance(v, (list, tuple)):
                for i, e in enumerate(v):
                    yield from leaves(e, idx + (i,))
            else:
                yield idx, v

        arr = np.empty(shape_of(vals) + grid)
        for idx, e in leaves(vals):
            arr[idx] = np.broadcast_to(np.asarray(e, float), grid)
        return arr

    q = stack(q_fn(t))
    f = stack(fiber_fn(t))
    q = np.moveaxis(q, 0, -1) if q.ndim > k else q.reshape(grid + (0,))
    f = np.moveaxis(np.moveaxis(f, 0, -1), 0, -1)
    return GridField(tuple(spacing), q, f, Side(side), origin, tuple(periodic))


def fiber_column_names(side: Side, m: int, k: int) -> list[str]:
    if side is Side.LAGRANGIAN:
        return [f"y_{a + 1}_{A + 1}" for a in range(m) for A in range(k)]
    return [f"p_{A + 1}_{a + 1}" for A in range(k) for a in range(m)]


def field_to_csv(field: GridField, path: str | Path | None = None) -> str:
    """Write the CSV form (one row per node, row-major); returns the text."""
    k, n, m = field.k, field.base_dim, field.rank
    header = ([f"t{A + 1}" for A in range(k)] + [f"q{i + 1}" for i in range(n)]
              + fiber_column_names(field.side, m, k))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for node in np.ndindex(field.shape):
        t = field.coords(node)
        w.writerow([repr(float(x)) for x in np.concatenate([t, field.q[node], field.fiber[node].ravel()])])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def field_from_csv(source: str | Path, periodic: Sequence[bool] = ()) -> GridField:
    """Read a grid field written by :func:`field_to_csv` (path or CSV text)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    header, data = rows[0], np.array([[float(x) for x in r] for r in rows[1:] if r])
    tcols = [c for c in header if c.startswith("t")]
    qcols = [c for c in header if c.startswith("q")]
    ycols = [c for c in header if c.startswith("y_")]
    pcols = [c for c in header if c.startswith("p_")]
    if ycols and pcols:
        raise ValueError("CSV mixes y_ and p_ columns")
    k, n = len(tcols), len(qcols)
    side = Side.LAGRANGIAN if ycols or not pcols else Side.HAMILTONIAN
    fcols = ycols or pcols
    m = len(fcols) // k if k else 0
    if header[: k + n] != tcols + qcols or header[k + n:] != fiber_column_names(side, m, k):
        raise ValueError("unexpected CSV column layout")
    tvals = data[:, :k]
    axes = [np.unique(tvals[:, a]) for a in range(k)]
    shape = tuple(len(ax) for ax in axes)
    if int(np.prod(shape)) != data.shape[0]:
        raise ValueError("CSV rows do not form a full rectangular grid")
    spacing = tuple(float(ax[1] - ax[0]) if len(ax) > 1 else 1.0 for ax in axes)
    for ax, h in zip(axes, spacing):
        if len(ax) > 1 and not np.allclose(np.diff(ax), h, rtol=1e-9, atol=1e-12):
            raise ValueError("grid spacing is not uniform")
    q = data[:, k:k + n].reshape(shape + (n,))
    fshape = (m, k) if side is Side.LAGRANGIAN else (k, m)
    fiber = data[:, k + n:].reshape(shape + fshape)
    origin = tuple(float(ax[0]) for ax in axes)
    return GridField(spacing, q, fiber, side, origin, tuple(periodic) or (False,) * k)
