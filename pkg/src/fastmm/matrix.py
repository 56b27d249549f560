"""Dense matrices over four scalar regimes, norms, padding and blocking.

Regimes never mix: ``rational`` (exact, arbitrary precision), ``float``
(binary64), ``complex`` (pairs of binary64) and ``rounded`` (binary64 storage
with every operation rounded to a ``p``-bit significand).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arith import NativeOps, QArray, RationalOps, RoundedOps
from .errors import DimensionError, RegimeError, SpecError
from .rounding import RoundingContext

__all__ = [
    "Matrix",
    "NormKind",
    "PartitionReport",
    "assemble",
    "check_partition_condition",
    "format_matrix",
    "multiply_classical",
    "norm",
    "pad_to_power",
    "parse_matrix",
    "partition",
    "random_matrix",
    "read_matrix",
    "write_matrix",
]

REGIMES = ("rational", "float", "complex", "rounded")

_RATIONAL = RationalOps()
_FLOAT = NativeOps(np.float64)
_COMPLEX = NativeOps(np.complex128)


def make_ops(regime: str, p: int | None = None, complex_values: bool = False):
    """Return the arithmetic object for a regime."""
    if regime == "rational":
        return _RATIONAL
    if regime == "float":
        return _FLOAT
    if regime == "complex":
        return _COMPLEX
    if regime == "rounded":
        if p is None:
            raise ValueError("rounded regime needs significand bits p")
        return RoundedOps(RoundingContext(p), np.complex128 if complex_values else np.float64)
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


class NormKind(str, enum.Enum):
    MAX_ENTRY = "max-entry"
    FROBENIUS = "frobenius"
    OPERATOR_2 = "operator-2-estimate"


class Matrix:
    """Immutable dense matrix tagged with its scalar regime."""

    __slots__ = ("_raw", "_ops")

    def __init__(self, raw, ops):
        if raw.ndim != 2:
            raise DimensionError(f"matrix data must be 2-d, got shape {raw.shape}")
        if raw.shape[0] < 1 or raw.shape[1] < 1:
            raise DimensionError(f"matrix sides must be positive, got {raw.shape}")
        self._raw = raw
        self._ops = ops

    # construction -----------------------------------------------------------

    @classmethod
    def from_rows(cls, rows, regime: str = "rational", p: int | None = None) -> Matrix:
        rows = [list(r) for r in rows]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("rows must be non-empty and of equal length")
        if regime == "rational":
            values = [[_to_fraction(v) for v in r] for r in rows]
            return cls(QArray.from_values(values), _RATIONAL)
        if regime == "rounded":
            cplx = any(isinstance(v, complex) for r in rows for v in r)
            ops = make_ops(regime, p, cplx)
        else:
            ops = make_ops(regime)
        return cls(ops.asarray([[_to_number(v) for v in r] for r in rows]), ops)

    @classmethod
    def from_array(cls, array, regime: str | None = None, p: int | None = None) -> Matrix:
        """Wrap a numpy array; regime defaults to float or complex by dtype."""
        array = np.asarray(array)
        if regime is None:
            regime = "complex" if np.iscomplexobj(array) else "float"
        if regime == "rational":
            return cls(QArray.from_values(array), _RATIONAL)
        ops = make_ops(regime, p, np.iscomplexobj(array))
        return cls(ops.asarray(array), ops)

    @classmethod
    def zeros(cls, rows: int, cols: int, regime: str = "rational", p: int | None = None) -> Matrix:
        ops = make_ops(regime, p)
        return cls(ops.zeros((rows, cols)), ops)

    @classmethod
    def identity(cls, n: int, regime: str = "rational", p: int | None = None) -> Matrix:
        ops = make_ops(regime, p)
        if regime == "rational":
            return cls(QArray(np.eye(n, dtype=np.int64)), ops)
        return cls(ops.asarray(np.eye(n)), ops)

    def _wrap(self, raw) -> Matrix:
        return Matrix(raw, self._ops)

    # basic properties -------------------------------------------------------

    @property
    def raw(self):
        """Underlying array (``QArray`` for rationals, ndarray otherwise)."""
        return self._raw

    @property
    def ops(self):
        return self._ops

    @property
    def regime(self) -> str:
        return self._ops.regime

    @property
    def ctx(self) -> RoundingContext | None:
        return getattr(self._ops, "ctx", None)

    @property
    def shape(self) -> tuple[int, int]:
        return self._raw.shape

    @property
    def rows(self) -> int:
        return self._raw.shape[0]

    @property
    def cols(self) -> int:
        return self._raw.shape[1]

    @property
    def is_complex(self) -> bool:
        return self.regime != "rational" and np.iscomplexobj(self._raw)

    def entries(self) -> list:
        """Row-major list of scalars."""
        if self.regime == "rational":
            return list(self._raw.to_fractions().flat)
        return [v.item() for v in self._raw.flat]

    def __getitem__(self, idx):
        i, j = idx
        if isinstance(i, slice) or isinstance(j, slice):
            i = i if isinstance(i, slice) else slice(i, i + 1)
            j = j if isinstance(j, slice) else slice(j, j + 1)
            return self._wrap(self._raw[i, j])
        if self.regime == "rational":
            return Fraction(int(self._raw.num[i, j]), self._raw.den)
        return self._raw[i, j].item()

    def to_fractions(self) -> np.ndarray:
        """Exact values as an object array of ``Fraction`` (real regimes only)."""
        if self.regime == "rational":
            return self._raw.to_fractions()
        if self.is_complex:
            raise RegimeError("complex values have no exact rational form")
        out = np.empty(self.shape, dtype=object)
        out.flat[:] = [Fraction(float(v)) for v in self._raw.flat]
        return out

    def to_numpy(self) -> np.ndarray:
        """Values as float64/complex128 (rationals rounded once)."""
        if self.regime == "rational":
            return self._raw.to_float()
        return np.array(self._raw)

    # regime conversions -----------------------------------------------------

    def to_rational(self) -> Matrix:
        if self.regime == "rational":
            return self
        return Matrix(QArray.from_values(self.to_fractions()), _RATIONAL)

    def to_float(self) -> Matrix:
        if self.is_complex:
            raise RegimeError("cannot convert complex values to the float regime")
        return Matrix(self.to_numpy().astype(np.float64), _FLOAT)

    def to_complex(self) -> Matrix:
        return Matrix(self.to_numpy().astype(np.complex128), _COMPLEX)

    def to_rounded(self, p: int) -> Matrix:
        """Round every entry to ``p`` bits and tag the result as rounded."""
        values = self.to_numpy()
        ops = make_ops("rounded", p, np.iscomplexobj(values))
        return Matrix(ops.asarray(values), ops)

    def astype(self, regime: str, p: int | None = None) -> Matrix:
        if regime == "rational":
            return self.to_rational()
        if regime == "float":
            return self.to_float()
        if regime == "complex":
            return self.to_complex()
        if regime == "rounded":
            return self.to_rounded(p)
        raise ValueError(f"unknown regime {regime!r}")

    # arithmetic -------------------------------------------------------------

    def _check_same(self, other: Matrix, what: str):
        if not isinstance(other, Matrix):
            raise TypeError(f"cannot {what} Matrix and {type(other).__name__}")
        if self.regime != other.regime or _ctx_p(self) != _ctx_p(other):
            raise RegimeError(f"cannot {what} {self.regime} and {other.regime} matrices")

    def _elementwise_ops(self, other: Matrix):
        if self.regime == "rounded" and (self.is_complex or other.is_complex):
            return make_ops("rounded", self.ctx.p, True)
        return self._ops

    def __add__(self, other: Matrix) -> Matrix:
        self._check_same(other, "add")
        if self.shape != other.shape:
            raise DimensionError(f"cannot add {self.shape} and {other.shape}")
        ops = self._elementwise_ops(other)
        return Matrix(ops.add(self._raw, other._raw), ops)

    def __sub__(self, other: Matrix) -> Matrix:
        self._check_same(other, "subtract")
        if self.shape != other.shape:
            raise DimensionError(f"cannot subtract {other.shape} from {self.shape}")
        ops = self._elementwise_ops(other)
        return Matrix(ops.sub(self._raw, other._raw), ops)

    def __neg__(self) -> Matrix:
        return self._wrap(self._ops.neg(self._raw))

    def scale(self, c) -> Matrix:
        """Multiply by an exact rational constant."""
        return self._wrap(self._ops.scale(self._raw, c))

    def __matmul__(self, other: Matrix) -> Matrix:
        return multiply_classical(self, other)

    def transpose(self) -> Matrix:
        if self.regime == "rational":
            return self._wrap(QArray(self._raw.num.T.copy(), self._raw.den))
        return self._wrap(np.ascontiguousarray(self._raw.T))

    T = property(transpose)

    def conj_transpose(self) -> Matrix:
        if self.is_complex:
            return self._wrap(np.ascontiguousarray(self._raw.conj().T))
        return self.transpose()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        if self.regime != other.regime or self.shape != other.shape:
            return False
        return self._ops.equal(self._raw, other._raw)

    __hash__ = None

    def __repr__(self):
        tag = self.regime if self.regime != "rounded" else f"rounded:{self.ctx.p}"
        return f"Matrix({self.rows}x{self.cols}, {tag})"

    def __str__(self):
        return format_matrix(self)


def _ctx_p(m: Matrix):
    ctx = m.ctx
    return ctx.p if ctx is not None else None


def _to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, complex):
        raise RegimeError("complex value in the rational regime")
    if isinstance(v, (float, np.floating)):
        return Fraction(float(v))
    return Fraction(int(v)) if isinstance(v, (int, np.integer)) else Fraction(v)


def _to_number(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, str):
        return _parse_number(v)
    return v


def _parse_number(token: str):
    t = token.strip()
    if t.endswith("i") or t.endswith("j"):
        return complex(t[:-1] + "j")
    if "/" in t:
        return float(Fraction(t))
    return float(t)


# core operations -------------------------------------------------------------


def multiply_classical(A: Matrix, B: Matrix) -> Matrix:
    """Textbook product; each entry is summed left to right over the inner index."""
    if not isinstance(A, Matrix) or not isinstance(B, Matrix):
        raise TypeError("multiply_classical expects Matrix operands")
    if A.regime != B.regime or _ctx_p(A) != _ctx_p(B):
        raise RegimeError(f"regime mismatch: {A.regime} vs {B.regime}")
    if A.cols != B.rows:
        raise DimensionError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")
    ops = A._elementwise_ops(B)
    return Matrix(ops.matmul(A.raw, B.raw), ops)


def norm(A: Matrix, kind: NormKind | str = NormKind.FROBENIUS) -> float:
    """Max-entry, Frobenius, or power-iteration estimate of the 2-norm."""
    kind = NormKind(kind)
    if A.regime == "rational":
        q = A.raw
        if kind is NormKind.MAX_ENTRY:
            return float(Fraction(int(np.abs(q.num).max()), q.den))
        if kind is NormKind.FROBENIUS:
            num = q.num.astype(object)
            return math.sqrt(Fraction(int((num * num).sum()), q.den * q.den))
        values = q.to_float()
    else:
        values = np.asarray(A.raw)
    if kind is NormKind.MAX_ENTRY:
        return float(np.abs(values).max())
    if kind is NormKind.FROBENIUS:
        return float(np.linalg.norm(values))
    return _power_iteration_norm(values)


OPERATOR_2_TOL = 1e-10
OPERATOR_2_MAXITER = 200


def _power_iteration_norm(values: np.ndarray, tol: float = OPERATOR_2_TOL,
                          maxiter: int = OPERATOR_2_MAXITER, seed: int = 0) -> float:
    if not np.any(values):
        return 0.0
    n = values.shape[1]
    dtype = np.complex128 if np.iscomplexobj(values) else np.float64
    starts = [np.ones(n, dtype=dtype) / math.sqrt(n)]
    rng = np.random.default_rng(seed)
    for attempt in range(4):
        v = starts[0] if attempt == 0 else rng.standard_normal(n).astype(dtype)
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(maxiter):
            w = values.conj().T @ (values @ v)
            wn = np.linalg.norm(w)
            if wn == 0.0:
                break  # stagnation: start vector in the null space
            new_lam = float(np.real(np.vdot(v, w)))
            v = w / wn
            if abs(new_lam - lam) <= tol * abs(new_lam):
                lam = new_lam
                break
            lam = new_lam
        if lam > 0.0:
            return math.sqrt(lam)
    return 0.0


@dataclass(frozen=True)
class PartitionReport:
    lower_ok: bool
    upper_ok: bool
    whole: float
    blocks: tuple[float, ...]


def _tolerance(kind: NormKind) -> float:
    # power iteration only resolves the 2-norm to its own stopping tolerance
    return OPERATOR_2_TOL if kind is NormKind.OPERATOR_2 else 1e-12


def check_partition_condition(kind: NormKind | str, M: Matrix, grid) -> PartitionReport:
    """Check ``max_s |M_s| <= |M| <= sum_s |M_s|`` for a block grid.

    ``grid`` is ``(row_sizes, col_sizes)``; block sizes must tile ``M``.
    """
    kind = NormKind(kind)
    row_sizes, col_sizes = (tuple(int(s) for s in part) for part in grid)
    if (sum(row_sizes) != M.rows or sum(col_sizes) != M.cols
            or min(row_sizes, default=0) < 1 or min(col_sizes, default=0) < 1):
        raise DimensionError(
            f"partition {row_sizes} x {col_sizes} does not tile a {M.rows}x{M.cols} matrix")
    whole = norm(M, kind)
    blocks = []
    r0 = 0
    for rs in row_sizes:
        c0 = 0
        for cs in col_sizes:
            blocks.append(norm(M[r0:r0 + rs, c0:c0 + cs], kind))
            c0 += cs
        r0 += rs
    tol = _tolerance(kind)
    lower = max(blocks) <= whole * (1 + tol) + 0.0
    upper = whole <= sum(blocks) * (1 + tol)
    return PartitionReport(lower, upper, whole, tuple(blocks))


def _ceil_log(value: int, k: int) -> int:
    e, m = 0, 1
    while m < value:
        m *= k
        e += 1
    return e


def pad_to_power(A: Matrix, k: int, minimum: int = 1) -> Matrix:
    """Zero-pad ``A`` into the top-left of an ``m x m`` matrix, ``m`` a power of ``k``."""
    if k < 2:
        raise ValueError("base k must be at least 2")
    m = k ** _ceil_log(max(A.rows, A.cols, minimum), k)
    return pad(A, m, m)


def pad(A: Matrix, rows: int, cols: int) -> Matrix:
    """Zero-pad ``A`` to ``rows x cols``."""
    if (rows, cols) == A.shape:
        return A
    if rows < A.rows or cols < A.cols:
        raise DimensionError(f"cannot pad {A.shape} down to {(rows, cols)}")
    if A.regime == "rational":
        num = np.zeros((rows, cols), dtype=A.raw.num.dtype)
        num[:A.rows, :A.cols] = A.raw.num
        return A._wrap(QArray(num, A.raw.den))
    out = np.zeros((rows, cols), dtype=A.raw.dtype)
    out[:A.rows, :A.cols] = A.raw
    return A._wrap(out)


def partition(A: Matrix, k: int) -> list[list[Matrix]]:
    """Split a square matrix into a ``k x k`` grid of equal square blocks."""
    if A.rows != A.cols:
        raise DimensionError(f"partition needs a square matrix, got {A.shape}")
    if k < 1 or A.rows % k:
        raise DimensionError(f"side {A.rows} is not divisible by {k}")
    b = A.rows // k
    return [[A[i * b:(i + 1) * b, j * b:(j + 1) * b] for j in range(k)] for i in range(k)]


def assemble(grid) -> Matrix:
    """Inverse of :func:`partition` (any block grid with consistent sides)."""
    grid = [list(row) for row in grid]
    first = grid[0][0]
    ops = first.ops
    for row in grid:
        h = row[0].rows
        for blk in row:
            if blk.regime != first.regime:
                raise RegimeError("blocks from different regimes")
            if blk.rows != h:
                raise DimensionError("blocks in a grid row must share their height")
    widths = [blk.cols for blk in grid[0]]
    if any([blk.cols for blk in row] != widths for row in grid):
        raise DimensionError("blocks in a grid column must share their width")
    rows = [ops.concatenate([blk.raw for blk in row], axis=1) for row in grid]
    return Matrix(ops.concatenate(rows, axis=0), ops)


# text format -----------------------------------------------------------------


def _regime_token(A: Matrix) -> str:
    return f"rounded:{A.ctx.p}" if A.regime == "rounded" else A.regime


def _format_entry(v, regime: str) -> str:
    if regime == "rational":
        return str(v)
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}i"
    return f"{v:.17g}"


def format_matrix(A: Matrix) -> str:
    """Serialize: header ``rows cols regime`` then one matrix row per line."""
    vals = A.entries()
    lines = [f"{A.rows} {A.cols} {_regime_token(A)}"]
    for i in range(A.rows):
        row = vals[i * A.cols:(i + 1) * A.cols]
        lines.append(" ".join(_format_entry(v, A.regime) for v in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> Matrix:
    tokens = text.split()
    if len(tokens) < 3:
        raise SpecError("matrix text needs a 'rows cols regime' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise SpecError(f"bad matrix header {tokens[:3]}") from exc
    regime, p = tokens[2], None
    if regime.startswith("rounded:"):
        regime, p = "rounded", int(regime.split(":", 1)[1])
    if regime not in REGIMES:
        raise SpecError(f"unknown regime {tokens[2]!r}")
    body = tokens[3:]
    if rows < 1 or cols < 1 or len(body) != rows * cols:
        raise SpecError(f"expected {rows}x{cols}={rows * cols} entries, found {len(body)}")
    try:
        if regime == "rational":
            values = [Fraction(t) for t in body]
        else:
            values = [_parse_number(t) for t in body]
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"bad matrix entry: {exc}") from exc
    grid = [values[i * cols:(i + 1) * cols] for i in range(rows)]
    if regime == "rounded":
        return Matrix.from_rows(grid, "rounded", p)
    if regime == "float" and any(isinstance(v, complex) for v in values):
        raise SpecError("complex entry in a float matrix")
    return Matrix.from_rows(grid, regime)


def read_matrix(path) -> Matrix:
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())


def write_matrix(A: Matrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(A))


# random instances ------------------------------------------------------------


def random_matrix(rng: np.random.Generator, rows: int, cols: int | None = None,
                  regime: str = "rational", *, bound: int = 9, max_den: int = 8,
                  p: int | None = None) -> Matrix:
    """Random test matrix.

    Rational entries are ``a/b`` with ``|a| <= bound`` and ``1 <= b <= max_den``;
    float entries are uniform on [-1, 1]; complex entries standard Gaussian.
    """
    cols = rows if cols is None else cols
    if regime == "rational":
        num = rng.integers(-bound, bound + 1, size=(rows, cols))
        den = rng.integers(1, max_den + 1, size=(rows, cols))
        common = math.lcm(*range(1, max_den + 1))
        return Matrix(QArray(num * (common // den), common).normalized(), _RATIONAL)
    if regime == "complex":
        z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        return Matrix(z, _COMPLEX)
    x = rng.uniform(-1.0, 1.0, size=(rows, cols))
    if regime == "float":
        return Matrix(x, _FLOAT)
    if regime == "rounded":
        return Matrix.from_array(x, "rounded", p)
    raise ValueError(f"unknown regime {regime!r}")
