"""Array arithmetic for each scalar regime.

The recursive engines work on raw n-d arrays (batches of blocks) through one
of the ``*Ops`` objects below, so the same code path runs exactly, in native
binary64, or under simulated rounding.  Exact rationals are stored as a
:class:`QArray`: an integer numerator array with one common denominator.
Numerators stay in ``int64`` while a magnitude bound proves that safe and
fall back to Python integers otherwise.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce

import numpy as np

from .rounding import RoundingContext

_INT_LIMIT = 2**62


def _maxabs(num: np.ndarray) -> int:
    if num.size == 0:
        return 0
    return max(int(num.max()), -int(num.min()))


def _fits(bound: int) -> bool:
    return bound < _INT_LIMIT


def _as_object(num: np.ndarray) -> np.ndarray:
    return num if num.dtype == object else num.astype(object)


def _shrink(num: np.ndarray) -> np.ndarray:
    if num.dtype == object and _fits(_maxabs(num)):
        return num.astype(np.int64)
    return num


class QArray:
    """Exact rational n-d array ``num / den`` with a shared denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den: int = 1):
        num = np.asarray(num)
        if num.dtype != object and num.dtype != np.int64:
            num = num.astype(np.int64)
        if den <= 0:
            raise ValueError("denominator must be positive")
        self.num = num
        self.den = int(den)

    @classmethod
    def from_values(cls, values) -> QArray:
        arr = np.asarray(values, dtype=object)
        fr = np.empty(arr.shape, dtype=object)
        flat = [Fraction(v) for v in arr.flat]
        den = reduce(math.lcm, (f.denominator for f in flat), 1)
        fr.flat[:] = [f.numerator * (den // f.denominator) for f in flat] if flat else []
        return cls(_shrink(fr), den).normalized()

    @classmethod
    def zeros(cls, shape) -> QArray:
        return cls(np.zeros(shape, dtype=np.int64), 1)

    def normalized(self) -> QArray:
        if self.den == 1:
            return self
        g = int(np.gcd.reduce(self.num, axis=None)) if self.num.size else 0
        if g == 0:
            return QArray(np.zeros(self.num.shape, dtype=np.int64), 1)
        g = math.gcd(g, self.den)
        if g == 1:
            return self
        return QArray(self.num // g, self.den // g)

    def to_fractions(self) -> np.ndarray:
        out = np.empty(self.num.shape, dtype=object)
        d = self.den
        out.flat[:] = [Fraction(int(v), d) for v in self.num.flat] if self.num.size else []
        return out

    def to_float(self) -> np.ndarray:
        """Correctly rounded binary64 values."""
        if self.num.dtype != object and _maxabs(self.num) < 2**53 and self.den < 2**53:
            return self.num.astype(np.float64) / float(self.den)
        out = np.zeros(self.num.shape)
        out.flat[:] = [float(f) for f in self.to_fractions().flat]
        return out

    # shape plumbing -------------------------------------------------------

    @property
    def shape(self):
        return self.num.shape

    @property
    def ndim(self):
        return self.num.ndim

    def reshape(self, *shape) -> QArray:
        return QArray(self.num.reshape(*shape), self.den)

    def transpose(self, *axes) -> QArray:
        return QArray(self.num.transpose(*axes), self.den)

    def swapaxes(self, a, b) -> QArray:
        return QArray(self.num.swapaxes(a, b), self.den)

    def __getitem__(self, idx) -> QArray:
        return QArray(self.num[idx], self.den)

    def copy(self) -> QArray:
        return QArray(self.num.copy(), self.den)

    def __repr__(self):
        return f"QArray(shape={self.shape}, den={self.den})"


def _combine(a: QArray, b: QArray, sign: int) -> QArray:
    den = math.lcm(a.den, b.den)
    fa, fb = den // a.den, den // b.den
    bound = _maxabs(a.num) * fa + _maxabs(b.num) * fb
    an, bn = a.num, b.num
    if not _fits(bound) or not _fits(max(fa, fb)) or an.dtype == object or bn.dtype == object:
        an, bn = _as_object(an), _as_object(bn)
    num = an * fa + bn * fb if sign > 0 else an * fa - bn * fb
    out = QArray(_shrink(num), den)
    # a shared denominator introduces no new common factor worth a full gcd pass
    return out if a.den == b.den else out.normalized()


class RationalOps:
    """Exact arithmetic on :class:`QArray` values."""

    regime = "rational"
    epsilon = 0.0

    def asarray(self, values) -> QArray:
        return values if isinstance(values, QArray) else QArray.from_values(values)

    def zeros(self, shape) -> QArray:
        return QArray.zeros(shape)

    def add(self, a: QArray, b: QArray) -> QArray:
        return _combine(a, b, 1)

    def sub(self, a: QArray, b: QArray) -> QArray:
        return _combine(a, b, -1)

    def neg(self, a: QArray) -> QArray:
        return QArray(-a.num, a.den)

    def scale(self, a: QArray, c) -> QArray:
        c = Fraction(c)
        if c == 1:
            return a
        if c == -1:
            return self.neg(a)
        p, q = c.numerator, c.denominator
        num = a.num
        if num.dtype == object or not _fits(_maxabs(num) * abs(p)) or not _fits(abs(p)):
            num = _as_object(num)
        return QArray(_shrink(num * p), a.den * q).normalized()

    def mul(self, a: QArray, b: QArray) -> QArray:
        an, bn = a.num, b.num
        if an.dtype == object or bn.dtype == object or not _fits(_maxabs(an) * _maxabs(bn)):
            an, bn = _as_object(an), _as_object(bn)
        return QArray(_shrink(an * bn), a.den * b.den).normalized()

    def matmul(self, a: QArray, b: QArray) -> QArray:
        inner = a.shape[-1]
        an, bn = a.num, b.num
        if an.dtype == object or bn.dtype == object or not _fits(inner * _maxabs(an) * _maxabs(bn)):
            an, bn = _as_object(an), _as_object(bn)
        if inner == 0:
            shape = a.shape[:-1] + b.shape[-1:]
            return QArray.zeros(shape)
        return QArray(_shrink(np.matmul(an, bn)), a.den * b.den).normalized()

    def stack(self, arrays, axis: int = 0) -> QArray:
        arrays = list(arrays)
        if arrays and len({q.den for q in arrays}) == 1 and len({q.num.dtype for q in arrays}) == 1:
            return QArray(np.stack([q.num for q in arrays], axis=axis), arrays[0].den)
        den = reduce(math.lcm, (q.den for q in arrays), 1)
        bound = max((_maxabs(q.num) * (den // q.den) for q in arrays), default=0)
        use_obj = (not _fits(bound) or any(q.num.dtype == object for q in arrays)
                   or not _fits(max((den // q.den for q in arrays), default=1)))
        parts = []
        for q in arrays:
            n = _as_object(q.num) if use_obj else q.num
            parts.append(n * (den // q.den))
        return QArray(_shrink(np.stack(parts, axis=axis)), den).normalized()

    def concatenate(self, arrays, axis: int = 0) -> QArray:
        arrays = list(arrays)
        if arrays and len({q.den for q in arrays}) == 1 and len({q.num.dtype for q in arrays}) == 1:
            return QArray(np.concatenate([q.num for q in arrays], axis=axis), arrays[0].den)
        den = reduce(math.lcm, (q.den for q in arrays), 1)
        bound = max((_maxabs(q.num) * (den // q.den) for q in arrays), default=0)
        use_obj = (not _fits(bound) or any(q.num.dtype == object for q in arrays)
                   or not _fits(max((den // q.den for q in arrays), default=1)))
        parts = [(_as_object(q.num) if use_obj else q.num) * (den // q.den) for q in arrays]
        return QArray(_shrink(np.concatenate(parts, axis=axis)), den).normalized()

    def to_fractions(self, a: QArray) -> np.ndarray:
        return a.to_fractions()

    def equal(self, a: QArray, b: QArray) -> bool:
        a, b = a.normalized(), b.normalized()
        return a.den == b.den and a.shape == b.shape and bool(np.all(a.num == b.num))


def _left_to_right_matmul(a, b, mul, add):
    # C[..., i, j] = (((a_i0 b_0j) + a_i1 b_1j) + ...): one rounding per op.
    inner = a.shape[-1]
    if inner == 0:
        return np.zeros(a.shape[:-1] + b.shape[-1:], dtype=np.result_type(a, b))
    acc = mul(a[..., :, 0:1], b[..., 0:1, :])
    for l in range(1, inner):
        acc = add(acc, mul(a[..., :, l:l + 1], b[..., l:l + 1, :]))
    return acc


class NativeOps:
    """Binary64 real or complex arithmetic (IEEE-754 rounding per op)."""

    epsilon = 2.0 ** -53

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.regime = "complex" if self.dtype.kind == "c" else "float"

    def asarray(self, values):
        return np.asarray(values, dtype=self.dtype)

    def zeros(self, shape):
        return np.zeros(shape, dtype=self.dtype)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def scale(self, a, c):
        c = Fraction(c)
        if c == 1:
            return a
        if c == -1:
            return -a
        return a * float(c)

    def mul(self, a, b):
        return a * b

    def div(self, a, b):
        return a / b

    def matmul(self, a, b):
        return _left_to_right_matmul(a, b, np.multiply, np.add)

    def stack(self, arrays, axis=0):
        return np.stack(arrays, axis=axis)

    def concatenate(self, arrays, axis=0):
        return np.concatenate(arrays, axis=axis)

    def equal(self, a, b) -> bool:
        return a.shape == b.shape and bool(np.array_equal(a, b))


class RoundedOps:
    """Arithmetic under a :class:`RoundingContext`; arrays are float or complex."""

    regime = "rounded"

    def __init__(self, ctx: RoundingContext, dtype=np.float64):
        self.ctx = ctx
        self.dtype = np.dtype(dtype)

    @property
    def epsilon(self):
        return self.ctx.epsilon

    def asarray(self, values):
        return self.ctx.round(np.asarray(values, dtype=self.dtype))

    def zeros(self, shape):
        return np.zeros(shape, dtype=self.dtype)

    def add(self, a, b):
        return self.ctx.add(a, b)

    def sub(self, a, b):
        return self.ctx.sub(a, b)

    def neg(self, a):
        return -a

    def scale(self, a, c):
        c = Fraction(c)
        if c == 1:
            return a
        if c == -1:
            return -a
        return self.ctx.mul(a, self.ctx.round(float(c)))

    def mul(self, a, b):
        return self.ctx.mul(a, b)

    def div(self, a, b):
        return self.ctx.div(a, b)

    def matmul(self, a, b):
        return _left_to_right_matmul(a, b, self.ctx.mul, self.ctx.add)

    def stack(self, arrays, axis=0):
        return np.stack(arrays, axis=axis)

    def concatenate(self, arrays, axis=0):
        return np.concatenate(arrays, axis=axis)

    def equal(self, a, b) -> bool:
        return a.shape == b.shape and bool(np.array_equal(a, b))
