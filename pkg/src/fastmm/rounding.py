"""Simulated p-bit rounded arithmetic.

Every operation computes the binary64 result and rounds it once more to a
``p``-bit significand with round-to-nearest-even, so the result equals
``exact * (1 + theta)`` with ``|theta| <= 2**-p``.  For ``p <= 25`` the
binary64 intermediate is provably harmless (53 >= 2p + 2); for
``26 <= p <= 52`` the exact rounding error of the binary64 operation is
recovered with error-free transformations and used to break ties; ``p = 53``
is native binary64.

Overflow, underflow and subnormals are not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RoundingContext",
    "RoundedScalar",
    "round_to_bits",
    "with_rounding",
]

_SPLITTER = 134217729.0  # 2**27 + 1


def round_to_bits(x, p: int):
    """Round binary64 values to a ``p``-bit significand, ties to even."""
    if p >= 53:
        return x
    m, e = np.frexp(x)
    return np.ldexp(np.rint(np.ldexp(m, p)), e - p)


def _round_with_tail(s, t, p: int):
    # s = fl53(v) and t has the sign of v - s (or is 0).  Only at a p-bit
    # midpoint can s and v round differently, and then the tail decides.
    m, e = np.frexp(s)
    scaled = np.ldexp(m, p)
    low = np.floor(scaled)
    r = np.rint(scaled)
    tie = (scaled - low) == 0.5
    r = np.where(tie & (t > 0), low + 1.0, r)
    r = np.where(tie & (t < 0), low, r)
    return np.ldexp(r, e - p)


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    prod = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return prod, ((ah * bh - prod) + ah * bl + al * bh) + al * bl


@dataclass(frozen=True)
class RoundingContext:
    """Round-to-nearest-even arithmetic with a ``p``-bit significand."""

    p: int

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or not 2 <= self.p <= 53:
            raise ValueError(f"significand bits must be an integer in [2, 53], got {self.p!r}")

    @property
    def epsilon(self) -> float:
        """Unit roundoff ``2**-p``."""
        return 2.0 ** -self.p

    @property
    def native(self) -> bool:
        return self.p == 53

    def round(self, x):
        """Round values (real or complex, scalar or array) into the context."""
        if np.iscomplexobj(x):
            return self._real_round(np.real(x)) + 1j * self._real_round(np.imag(x))
        return self._real_round(x)

    def _real_round(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = round_to_bits(x, self.p)
        return out if out.ndim else float(out)

    # real kernels -------------------------------------------------------

    def _radd(self, a, b):
        p = self.p
        if p >= 53:
            return a + b
        if p <= 25:
            return round_to_bits(a + b, p)
        s, t = _two_sum(a, b)
        return _round_with_tail(s, t, p)

    def _rsub(self, a, b):
        return self._radd(a, -b)

    def _rmul(self, a, b):
        p = self.p
        if p >= 53:
            return a * b
        if p <= 25:
            return round_to_bits(a * b, p)
        s, t = _two_prod(a, b)
        return _round_with_tail(s, t, p)

    def _rdiv(self, a, b):
        p = self.p
        if p >= 53:
            return a / b
        if p <= 25:
            return round_to_bits(a / b, p)
        q = a / b
        ph, pl = _two_prod(q, b)
        rem = (a - ph) - pl
        return _round_with_tail(q, rem * np.sign(b), p)

    # public operations (complex-aware) ----------------------------------

    def add(self, a, b):
        if np.iscomplexobj(a) or np.iscomplexobj(b):
            a, b = np.asarray(a, complex), np.asarray(b, complex)
            return self._radd(a.real, b.real) + 1j * self._radd(a.imag, b.imag)
        return self._radd(np.asarray(a, np.float64), np.asarray(b, np.float64))

    def sub(self, a, b):
        if np.iscomplexobj(a) or np.iscomplexobj(b):
            a, b = np.asarray(a, complex), np.asarray(b, complex)
            return self._rsub(a.real, b.real) + 1j * self._rsub(a.imag, b.imag)
        return self._rsub(np.asarray(a, np.float64), np.asarray(b, np.float64))

    def mul(self, a, b):
        if np.iscomplexobj(a) or np.iscomplexobj(b):
            a, b = np.asarray(a, complex), np.asarray(b, complex)
            m = self._rmul
            re = self._rsub(m(a.real, b.real), m(a.imag, b.imag))
            im = self._radd(m(a.real, b.imag), m(a.imag, b.real))
            return re + 1j * im
        return self._rmul(np.asarray(a, np.float64), np.asarray(b, np.float64))

    def div(self, a, b):
        """Rounded division; only the derived linear algebra uses it."""
        if np.iscomplexobj(a) or np.iscomplexobj(b):
            a, b = np.asarray(a, complex), np.asarray(b, complex)
            m, s = self._rmul, self._rsub
            den = self._radd(m(b.real, b.real), m(b.imag, b.imag))
            re = self._radd(m(a.real, b.real), m(a.imag, b.imag))
            im = s(m(a.imag, b.real), m(a.real, b.imag))
            return self._rdiv(re, den) + 1j * self._rdiv(im, den)
        return self._rdiv(np.asarray(a, np.float64), np.asarray(b, np.float64))


class RoundedScalar:
    """A float bound to a context; ``+``, ``-``, ``*`` and ``/`` round once."""

    __slots__ = ("value", "ctx")

    def __init__(self, value, ctx: RoundingContext):
        self.value = ctx.round(value)
        self.ctx = ctx

    def _lift(self, other):
        if isinstance(other, RoundedScalar):
            return other.value
        return self.ctx.round(other)

    def _wrap(self, v):
        out = RoundedScalar.__new__(RoundedScalar)
        out.value = v.item() if isinstance(v, np.ndarray) else v
        out.ctx = self.ctx
        return out

    def __add__(self, other):
        return self._wrap(self.ctx.add(self.value, self._lift(other)))

    def __radd__(self, other):
        return self._wrap(self.ctx.add(self._lift(other), self.value))

    def __sub__(self, other):
        return self._wrap(self.ctx.sub(self.value, self._lift(other)))

    def __rsub__(self, other):
        return self._wrap(self.ctx.sub(self._lift(other), self.value))

    def __mul__(self, other):
        return self._wrap(self.ctx.mul(self.value, self._lift(other)))

    def __rmul__(self, other):
        return self._wrap(self.ctx.mul(self._lift(other), self.value))

    def __truediv__(self, other):
        return self._wrap(self.ctx.div(self.value, self._lift(other)))

    def __neg__(self):
        return self._wrap(-self.value)

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return f"RoundedScalar({self.value!r}, p={self.ctx.p})"


def with_rounding(ctx: RoundingContext, computation, *args):
    """Run ``computation`` on ``args`` lifted into ``ctx``.

    Arguments are rounded into the context first; every arithmetic operation
    the computation performs on them is then rounded once.

    >>> with_rounding(RoundingContext(53), lambda x, y: x + y, 0.1, 0.2)
    0.30000000000000004
    """
    lifted = [RoundedScalar(a, ctx) for a in args]
    result = computation(*lifted)
    if isinstance(result, RoundedScalar):
        return result.value
    if isinstance(result, (tuple, list)):
        return type(result)(r.value if isinstance(r, RoundedScalar) else r for r in result)
    return result
