"""Forward-mode jets (value, gradient, Hessian) with a finite-difference fallback.

A :class:`Jet` carries a value ``v``, a gradient ``g`` with respect to ``N``
seeded inputs and optionally a Hessian ``h``.  Values may be numpy arrays, in
which case a single evaluation differentiates a whole batch of points; the
gradient then has shape ``v.shape + (N,)`` (or broadcasts to it).

User callbacks only need ordinary arithmetic and numpy ufuncs such as
``np.sin``; object arrays of jets work with ``@``, ``np.sum`` and friends.
Callbacks that coerce to ``float`` (``math.sin`` and the like) raise
``TypeError`` on jets and are differentiated by central differences instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

FD_STEP = 1e-6
FD_STEP_SECOND = 1e-4


def _col(v):
    return v[..., None] if isinstance(v, np.ndarray) else v


def _mat(v):
    return v[..., None, None] if isinstance(v, np.ndarray) else v


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Jet:
    """Truncated Taylor expansion of a scalar: value, gradient, Hessian.

    ``h is None`` marks a first-order jet.  Mixing orders drops to order one.
    """

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    def __repr__(self) -> str:
        return f"Jet({self.v!r}, g={self.g!r}{'' if self.h is None else ', h=...'})"

    @property
    def order(self) -> int:
        return 1 if self.h is None else 2

    def _unary(self, f0, f1, f2):
        g = _col(f1) * self.g
        h = None if self.h is None else _mat(f1) * self.h + _mat(f2) * _outer(self.g, self.g)
        return Jet(f0, g, h)

    # arithmetic -------------------------------------------------------
    def __add__(self, o):
        if isinstance(o, Jet):
            h = None if self.h is None or o.h is None else self.h + o.h
            return Jet(self.v + o.v, self.g + o.g, h)
        if isinstance(o, np.ndarray) and o.dtype == object:
            return NotImplemented
        return Jet(self.v + o, self.g, self.h)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __pos__(self):
        return self

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            g = _col(self.v) * o.g + _col(o.v) * self.g
            if self.h is None or o.h is None:
                h = None
            else:
                h = (_mat(self.v) * o.h + _mat(o.v) * self.h
                     + _outer(self.g, o.g) + _outer(o.g, self.g))
            return Jet(self.v * o.v, g, h)
        if isinstance(o, np.ndarray) and o.dtype == object:
            return NotImplemented
        return Jet(self.v * o, self.g * _col(o), None if self.h is None else self.h * _mat(o))

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.v
        return self._unary(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.reciprocal()
        if isinstance(o, np.ndarray) and o.dtype == object:
            return NotImplemented
        return self * (1.0 / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, p):
        if isinstance(p, Jet):
            return (p * self.log()).exp()
        if isinstance(p, np.ndarray) and p.dtype == object:
            return NotImplemented
        v = self.v
        if float(p).is_integer():
            p = int(p)
            if p == 0:
                return Jet(v**0 * 1.0, self.g * 0.0, None if self.h is None else self.h * 0.0)
            d1 = p * v ** (p - 1)
            d2 = p * (p - 1) * v ** (p - 2) if p != 1 else 0.0 * v
            return self._unary(v**p, d1, d2)
        return self._unary(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __rpow__(self, base):
        return (self * np.log(base)).exp()

    # comparisons act on values so that simple branches still work ----
    def __lt__(self, o):
        return self.v < (o.v if isinstance(o, Jet) else o)

    def __le__(self, o):
        return self.v <= (o.v if isinstance(o, Jet) else o)

    def __gt__(self, o):
        return self.v > (o.v if isinstance(o, Jet) else o)

    def __ge__(self, o):
        return self.v >= (o.v if isinstance(o, Jet) else o)

    def __abs__(self):
        s = np.sign(self.v)
        return self._unary(np.abs(self.v), s, 0.0 * s)

    # elementary functions (numpy ufuncs dispatch here on object input) --
    def sqrt(self):
        r = np.sqrt(self.v)
        return self._unary(r, 0.5 / r, -0.25 / r**3)

    def exp(self):
        e = np.exp(self.v)
        return self._unary(e, e, e)

    def log(self):
        v = self.v
        return self._unary(np.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self._unary(s, c, -s)

    def cos(self):
        s, c = np.sin(self.v), np.cos(self.v)
        return self._unary(c, -s, -c)

    def tan(self):
        t = np.tan(self.v)
        d = 1.0 + t * t
        return self._unary(t, d, 2.0 * t * d)

    def tanh(self):
        t = np.tanh(self.v)
        d = 1.0 - t * t
        return self._unary(t, d, -2.0 * t * d)

    def sinh(self):
        s, c = np.sinh(self.v), np.cosh(self.v)
        return self._unary(s, c, s)

    def cosh(self):
        s, c = np.sinh(self.v), np.cosh(self.v)
        return self._unary(c, s, c)

    def arctan(self):
        v = self.v
        d = 1.0 / (1.0 + v * v)
        return self._unary(np.arctan(v), d, -2.0 * v * d * d)

    def square(self):
        return self * self


def is_jet_array(x) -> bool:
    if isinstance(x, Jet):
        return True
    if isinstance(x, np.ndarray) and x.dtype == object:
        return any(isinstance(e, Jet) for e in x.flat)
    return False


def seed(x, order: int = 1) -> np.ndarray:
    """Object array of jets seeded on the last axis of ``x``.

    ``x`` of shape ``batch + (N,)`` yields ``N`` jets whose values have shape
    ``batch``.  ``order=0`` returns plain float components (values only).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.empty(n, dtype=object)
    if order == 0:
        for i in range(n):
            out[i] = x[..., i] if x.ndim > 1 else float(x[i])
        return out
    eye = np.eye(n)
    h0 = 0.0 if order >= 2 else None
    for i in range(n):
        v = x[..., i] if x.ndim > 1 else float(x[i])
        out[i] = Jet(v, eye[i], h0)
    return out


@dataclass(frozen=True)
class Derivatives:
    """Value, gradient and Hessian of a (possibly array-valued) function.

    Shapes: ``value`` is ``batch + out``; ``grad`` appends ``(N,)``; ``hess``
    appends ``(N, N)`` or is ``None`` when only first order was requested.
    ``source`` is ``"ad"`` or ``"fd"``.
    """

    value: np.ndarray
    grad: np.ndarray | None
    hess: np.ndarray | None
    source: str


def _unpack(result, batch: tuple, n: int, order: int) -> Derivatives:
    res = np.asarray(result, dtype=object) if not isinstance(result, Jet) else None
    out_shape = () if res is None else res.shape
    value = np.zeros(batch + out_shape)
    grad = np.zeros(batch + out_shape + (n,)) if order >= 1 else None
    hess = np.zeros(batch + out_shape + (n, n)) if order >= 2 else None
    items = [((), result)] if res is None else list(np.ndenumerate(res))
    lead = (slice(None),) * len(batch)
    for idx, e in items:
        key = lead + idx
        if isinstance(e, Jet):
            value[key] = e.v
            if grad is not None:
                grad[key] = np.broadcast_to(e.g, batch + (n,))
            if hess is not None:
                if e.h is None:
                    raise TypeError("second-order jet requested but callback dropped to first order")
                hess[key] = np.broadcast_to(e.h, batch + (n, n))
        else:
            value[key] = np.asarray(e, dtype=float)
    return Derivatives(value, grad, hess, "ad")


def _fd_point(func: Callable, x: np.ndarray, order: int, step: float | None):
    n = x.size
    f0 = np.asarray(func(x.copy()), dtype=float)
    h1 = FD_STEP if step is None else step
    grad = np.zeros(f0.shape + (n,))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h1
        grad[..., i] = (np.asarray(func(x + e), float) - np.asarray(func(x - e), float)) / (2 * h1)
    hess = None
    if order >= 2:
        h2 = FD_STEP_SECOND if step is None else step
        hess = np.zeros(f0.shape + (n, n))
        for i in range(n):
            for j in range(i, n):
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = h2
                ej[j] = h2
                val = (np.asarray(func(x + ei + ej), float) - np.asarray(func(x + ei - ej), float)
                       - np.asarray(func(x - ei + ej), float) + np.asarray(func(x - ei - ej), float))
                hess[..., i, j] = hess[..., j, i] = val / (4 * h2 * h2)
    return f0, grad, hess


def finite_differences(func: Callable, x, order: int = 1, step: float | None = None) -> Derivatives:
    """Central-difference derivatives of ``func`` (called on float vectors)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        v, g, h = _fd_point(func, x, order, step)
        return Derivatives(v, g, h, "fd")
    flat = x.reshape(-1, x.shape[-1])
    parts = [_fd_point(func, row, order, step) for row in flat]
    batch = x.shape[:-1]
    value = np.stack([p[0] for p in parts]).reshape(batch + parts[0][0].shape)
    grad = np.stack([p[1] for p in parts]).reshape(batch + parts[0][1].shape)
    hess = None
    if order >= 2:
        hess = np.stack([p[2] for p in parts]).reshape(batch + parts[0][2].shape)
    return Derivatives(value, grad, hess, "fd")


def derivatives(func: Callable, x, order: int = 1, allow_fd: bool = True) -> Derivatives:
    """Differentiate ``func`` at ``x`` (shape ``batch + (N,)``) by forward-mode AD.

    ``func`` receives an object array of ``N`` jets.  If it refuses jets with
    ``TypeError`` and ``allow_fd`` is set, central differences are used.
    """
    x = np.asarray(x, dtype=float)
    batch = x.shape[:-1]
    try:
        result = func(seed(x, max(order, 1)))
        return _unpack(result, batch, x.shape[-1], order)
    except TypeError:
        if not allow_fd:
            raise
    return finite_differences(func, x, order)


def evaluate(func: Callable, x) -> np.ndarray:
    """Plain values of ``func`` at ``x`` (batched on the last axis)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.asarray(func(x), dtype=float)
    batch = x.shape[:-1]
    try:
        res = func(seed(x, 0))
        if (isinstance(res, np.ndarray) and res.dtype != object and res.shape == batch
                and np.ndim(func(x.reshape(-1, x.shape[-1])[0])) == 0):
            return res   # scalar function, already batched
        return _unpack(res, batch, x.shape[-1], 0).value
    except TypeError:
        flat = x.reshape(-1, x.shape[-1])
        vals = np.stack([np.asarray(func(r), float) for r in flat])
        return vals.reshape(x.shape[:-1] + vals.shape[1:])


def _batch_shape(xin) -> tuple:
    for e in xin:
        if isinstance(e, Jet):
            return np.shape(e.v)
        if isinstance(e, np.ndarray) and e.ndim:
            return e.shape
    return ()


def plain_values(x) -> np.ndarray:
    """Values of a sequence of jets/floats, stacked on the last axis."""
    xin = list(np.asarray(x, dtype=object).ravel())
    batch = _batch_shape(xin)
    cols = [np.broadcast_to(e.v if isinstance(e, Jet) else np.asarray(e, float), batch) for e in xin]
    return np.stack(cols, axis=-1) if cols else np.zeros(batch + (0,))


def lift(value: np.ndarray, jac: np.ndarray, x):
    """Attach first-order jets to ``value`` via the chain rule through inputs ``x``.

    ``value`` has shape ``batch + out`` and ``jac`` shape ``batch + out + (N_in,)``,
    both evaluated at the plain values of ``x``.  Returns an object array of
    order-1 jets of shape ``out``.
    """
    xin = list(np.asarray(x, dtype=object).ravel())
    batch = _batch_shape(xin)
    ref = next(e for e in xin if isinstance(e, Jet))
    n_out = np.shape(ref.g)[-1]
    tang = np.stack([np.broadcast_to(e.g, batch + (n_out,)) if isinstance(e, Jet)
                     else np.zeros(batch + (n_out,)) for e in xin], axis=-2)   # batch + (N_in, n_out)
    value = np.asarray(value, float)
    out_shape = value.shape[len(batch):]
    lead = (slice(None),) * len(batch)
    out = np.empty(out_shape, dtype=object)
    for idx in np.ndindex(out_shape):
        j = jac[lead + idx]
        g = np.einsum("...i,...io->...o", j, tang)
        v = value[lead + idx]
        out[idx] = Jet(v if batch else float(v), g, None)
    return out[()] if out_shape == () else out


def jacobian_field(func: Callable) -> Callable:
    """Return ``x -> d func/dx`` that also accepts first-order jet inputs.

    On jets, the second derivatives of ``func`` are used to propagate the
    input tangents, so compositions such as ``d(d f)`` stay exact.
    """

    def jac(x):
        if is_jet_array(x):
            x0 = plain_values(x)
            d = derivatives(func, x0, order=2)
            return lift(d.grad, d.hess, x)
        return derivatives(func, np.asarray(x, float), order=1).grad

    return jac


gradient_field = jacobian_field


def as_object_array(result: Any) -> np.ndarray:
    return np.asarray(result, dtype=object)
