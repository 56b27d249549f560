"""Bilinear matrix-multiplication algorithms and their recursive execution.

An algorithm with block size ``k`` and ``t`` products is given by three
``k^2 x t`` rational matrices.  With blocks of ``A`` numbered column-wise
(``i = q*k + p`` for block ``A[p][q]``), blocks of ``B`` likewise
(``j = l*k + m`` for ``B[m][l]``) and blocks of ``C`` row-wise
(``r = h*k + l`` for ``C[h][l]``)::

    P_s    = (sum_i U[i,s] A_i) (sum_j V[j,s] B_j)
    C_r    = sum_s W[r,s] P_s

The engine works breadth-first: all block products of one recursion level
are stacked into a single batch array, so a depth-``d`` recursion makes ``d``
passes over numpy arrays instead of ``t**d`` Python calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arith import NativeOps, QArray
from .errors import DimensionError, InvalidAlgorithmError, RegimeError, SpecError
from .matrix import Matrix, pad

__all__ = [
    "BilinearAlgorithm",
    "OpCounter",
    "RecursionSchedule",
    "SparsityProfile",
    "classical_algorithm",
    "count_multiplications",
    "emit_spec",
    "multiply_batch",
    "multiply_nonstationary",
    "multiply_stationary",
    "parse_spec",
    "read_spec",
    "strassen",
    "validate",
]

DEFAULT_CUTOFF = 64


def _clog2(x: int) -> int:
    return (x - 1).bit_length() if x > 0 else 0


@dataclass(frozen=True)
class SparsityProfile:
    """Nonzero counts of the columns of U, V and the rows of W."""

    a: tuple[int, ...]
    b: tuple[int, ...]
    c: tuple[int, ...]

    @property
    def alpha(self) -> tuple[int, ...]:
        return tuple(_clog2(x) for x in self.a)

    @property
    def beta(self) -> tuple[int, ...]:
        return tuple(_clog2(x) for x in self.b)

    @property
    def gamma(self) -> tuple[int, ...]:
        return tuple(_clog2(x) for x in self.c)

    @property
    def depth_constant(self) -> int:
        """``max over r, s of alpha_s + beta_s + gamma_r + 3``."""
        ab = max(x + y for x, y in zip(self.alpha, self.beta))
        return ab + max(self.gamma) + 3

    @property
    def theta0(self) -> int:
        """Conservative integer sparsity constant ``max(a_s + b_s) + max(c_r)``."""
        return max(x + y for x, y in zip(self.a, self.b)) + max(self.c)


def _frac_matrix(rows, name: str, k2: int, t: int) -> tuple[tuple[Fraction, ...], ...]:
    rows = tuple(tuple(Fraction(v) for v in row) for row in rows)
    if len(rows) != k2 or any(len(r) != t for r in rows):
        raise DimensionError(f"{name} must be {k2}x{t}")
    return rows


@dataclass(frozen=True)
class BilinearAlgorithm:
    k: int
    t: int
    U: tuple
    V: tuple
    W: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.k < 1 or self.t < 1:
            raise DimensionError("k and t must be positive")
        if self.t < self.k ** 2:
            raise InvalidAlgorithmError(
                f"t={self.t} < k^2={self.k ** 2}: no bilinear algorithm computes "
                f"{self.k ** 2} independent entries with fewer products (rank lower bound)")
        k2 = self.k * self.k
        for name in "UVW":
            object.__setattr__(self, name, _frac_matrix(getattr(self, name), name, k2, self.t))

    @property
    def profile(self) -> SparsityProfile:
        k2, t = self.k * self.k, self.t
        a = tuple(sum(1 for i in range(k2) if self.U[i][s]) for s in range(t))
        b = tuple(sum(1 for j in range(k2) if self.V[j][s]) for s in range(t))
        c = tuple(sum(1 for s in range(t) if self.W[r][s]) for r in range(k2))
        return SparsityProfile(a, b, c)

    def coefficient_norms(self) -> tuple[float, float, float]:
        """Max-entry norms of U, V and W."""
        return tuple(float(max(abs(v) for row in M for v in row)) for M in (self.U, self.V, self.W))

    def _terms(self):
        # sparse columns of U, V and rows of W, nonzero coefficients in ascending index order
        k2, t = self.k * self.k, self.t
        u = [[(i, self.U[i][s]) for i in range(k2) if self.U[i][s]] for s in range(t)]
        v = [[(j, self.V[j][s]) for j in range(k2) if self.V[j][s]] for s in range(t)]
        w = [[(s, self.W[r][s]) for s in range(t) if self.W[r][s]] for r in range(k2)]
        return u, v, w


def strassen() -> BilinearAlgorithm:
    """Seven-product 2x2 scheme.

    M1 = (A11+A22)(B11+B22), M2 = (A21+A22)B11, M3 = A11(B12-B22),
    M4 = A22(B21-B11), M5 = (A11+A12)B22, M6 = (A21-A11)(B11+B12),
    M7 = (A12-A22)(B21+B22); C11 = M1+M4-M5+M7, C12 = M3+M5,
    C21 = M2+M4, C22 = M1-M2+M3+M6.
    """
    # block indices: A11=0, A21=1, A12=2, A22=3 (column-wise); same for B
    u_cols = [{0: 1, 3: 1}, {1: 1, 3: 1}, {0: 1}, {3: 1}, {0: 1, 2: 1}, {1: 1, 0: -1}, {2: 1, 3: -1}]
    v_cols = [{0: 1, 3: 1}, {0: 1}, {2: 1, 3: -1}, {1: 1, 0: -1}, {3: 1}, {0: 1, 2: 1}, {1: 1, 3: 1}]
    # C blocks row-wise: C11=0, C12=1, C21=2, C22=3
    w_rows = [{0: 1, 3: 1, 4: -1, 6: 1}, {2: 1, 4: 1}, {1: 1, 3: 1}, {0: 1, 1: -1, 2: 1, 5: 1}]
    U = [[u_cols[s].get(i, 0) for s in range(7)] for i in range(4)]
    V = [[v_cols[s].get(j, 0) for s in range(7)] for j in range(4)]
    W = [[w_rows[r].get(s, 0) for s in range(7)] for r in range(4)]
    return BilinearAlgorithm(2, 7, U, V, W, name="strassen")


def classical_algorithm(k: int) -> BilinearAlgorithm:
    """The definitional ``k^3``-product algorithm as 0/1 indicator matrices."""
    t = k ** 3
    k2 = k * k
    U = [[0] * t for _ in range(k2)]
    V = [[0] * t for _ in range(k2)]
    W = [[0] * t for _ in range(k2)]
    for h in range(k):
        for q in range(k):
            for l in range(k):
                s = (h * k + q) * k + l
                U[q * k + h][s] = 1   # A[h][q]
                V[l * k + q][s] = 1   # B[q][l]
                W[h * k + l][s] = 1   # C[h][l]
    return BilinearAlgorithm(k, t, U, V, W, name=f"classical-{k}")


# validation ------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    witness: tuple[int, int, int, int] | None = None
    expected: int | None = None
    found: Fraction | None = None

    def __bool__(self):
        return self.ok


def validate(alg: BilinearAlgorithm) -> ValidationResult:
    """Exhaustively check the tensor identity; 0-based witness ``(h, l, i, j)`` on failure."""
    k, t = alg.k, alg.t
    U, V, W = alg.U, alg.V, alg.W
    for h in range(k):
        for l in range(k):
            w = W[h * k + l]
            for i in range(k * k):
                p, q = i % k, i // k
                ui = U[i]
                for j in range(k * k):
                    m, lp = j % k, j // k
                    vj = V[j]
                    total = sum((ui[s] * vj[s] * w[s] for s in range(t) if ui[s] and w[s]),
                                Fraction(0))
                    want = 1 if (p == h and q == m and lp == l) else 0
                    if total != want:
                        return ValidationResult(False, (h, l, i, j), want, total)
    return ValidationResult(True)


# text format -----------------------------------------------------------------


def emit_spec(alg: BilinearAlgorithm) -> str:
    lines = [f"{alg.k} {alg.t}"]
    for name in "UVW":
        lines.append(name)
        lines.extend(" ".join(str(v) for v in row) for row in getattr(alg, name))
    return "\n".join(lines) + "\n"


def parse_spec(text: str, name: str = "") -> BilinearAlgorithm:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise SpecError("empty algorithm text; expected header 'k t'")
    head = lines[0].split()
    try:
        k, t = (int(x) for x in head)
    except ValueError:
        raise SpecError(f"malformed header {lines[0]!r}; expected 'k t'") from None
    if k < 1 or t < 1:
        raise SpecError(f"header values must be positive, got k={k} t={t}")
    if t < k * k:
        raise SpecError(
            f"t={t} < k^2={k * k}: at least k^2 products are needed to produce "
            f"k^2 independent block entries (rank lower bound)")
    k2 = k * k
    pos = 1
    mats = {}
    for section in "UVW":
        if pos >= len(lines):
            raise SpecError(f"truncated algorithm text: section {section} is missing")
        if lines[pos] != section:
            raise SpecError(f"expected section header {section!r}, found {lines[pos]!r}")
        pos += 1
        rows = []
        for r in range(k2):
            if pos >= len(lines) or lines[pos] in "UVW":
                raise SpecError(f"truncated algorithm text: section {section} has {r} of {k2} rows")
            toks = lines[pos].split()
            if len(toks) != t:
                raise SpecError(f"section {section} row {r}: expected {t} entries, found {len(toks)}")
            try:
                rows.append([Fraction(x) for x in toks])
            except (ValueError, ZeroDivisionError):
                raise SpecError(f"section {section} row {r}: non-rational entry in {toks}") from None
            pos += 1
        mats[section] = rows
    if pos != len(lines):
        raise SpecError(f"unexpected trailing content: {lines[pos]!r}")
    return BilinearAlgorithm(k, t, mats["U"], mats["V"], mats["W"], name=name)


def read_spec(path) -> BilinearAlgorithm:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stem = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_spec(text, name=stem)


# execution -------------------------------------------------------------------


class OpCounter:
    """Counts scalar multiplications performed at the recursion leaves."""

    def __init__(self):
        self.multiplications = 0

    def add(self, n: int):
        self.multiplications += n


@dataclass(frozen=True)
class RecursionSchedule:
    """Level ``j`` uses ``levels[j]``; the last algorithm repeats until the side reaches ``cutoff``."""

    levels: tuple
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("a schedule needs at least one level")
        if self.cutoff < 1:
            raise ValueError("cutoff must be at least 1")

    def algorithm_at(self, depth: int) -> BilinearAlgorithm:
        return self.levels[min(depth, len(self.levels) - 1)]

    def compatible(self, m: int) -> bool:
        side, depth = m, 0
        while side > self.cutoff:
            k = self.algorithm_at(depth).k
            if k == 1 or side % k:
                return False
            side //= k
            depth += 1
        return True

    def padded_size(self, n: int) -> int:
        """Least side ``>= n`` that the schedule divides cleanly down to the cutoff."""
        m = max(n, 1)
        while not self.compatible(m):
            m += 1
        return m


def _combine(ops, terms, blocks):
    """Balanced pairwise sum of ``coef * blocks[idx]`` over ``terms`` (ascending index)."""
    if not terms:
        return None
    vals = [ops.scale(blocks[idx], c) for idx, c in terms]

    def tree(lo, hi):
        if hi - lo == 1:
            return vals[lo]
        mid = lo + (hi - lo + 1) // 2
        return ops.add(tree(lo, mid), tree(mid, hi))

    return tree(0, len(vals))


def _blocks(x, k):
    # x has shape (T, m, m); returns the k^2 blocks in column-wise order
    T, m = x.shape[0], x.shape[1]
    b = m // k
    y = x.reshape(T, k, b, k, b)
    return [y[:, i % k, :, i // k, :] for i in range(k * k)]


def _recurse(ops, schedule_at, cutoff, a, b, depth, counter):
    m = a.shape[-1]
    T = a.shape[0]
    if m <= cutoff:
        if counter is not None:
            counter.add(T * m ** 3)
        return ops.matmul(a, b)
    alg = schedule_at(depth)
    k, t = alg.k, alg.t
    bs = m // k
    u_terms, v_terms, w_terms = alg._terms()
    a_blk = _blocks(a, k)
    b_blk = _blocks(b, k)
    zero = ops.zeros((T, bs, bs))
    left = [_combine(ops, u_terms[s], a_blk) for s in range(t)]
    right = [_combine(ops, v_terms[s], b_blk) for s in range(t)]
    left = [zero if x is None else x for x in left]
    right = [zero if x is None else x for x in right]
    sa = ops.stack(left, axis=0).reshape(t * T, bs, bs)
    sb = ops.stack(right, axis=0).reshape(t * T, bs, bs)
    prod = _recurse(ops, schedule_at, cutoff, sa, sb, depth + 1, counter)
    prod = prod.reshape(t, T, bs, bs)
    p_list = [prod[s] for s in range(t)]
    c_blk = [_combine(ops, w_terms[r], p_list) for r in range(k * k)]
    c_blk = [zero if x is None else x for x in c_blk]
    # c_blk[r] is C[h][l] with r = h*k + l
    grid = ops.stack(c_blk, axis=0).reshape(k, k, T, bs, bs)
    return grid.transpose(2, 0, 3, 1, 4).reshape(T, m, m)


def _check_operands(A: Matrix, B: Matrix):
    if not isinstance(A, Matrix) or not isinstance(B, Matrix):
        raise TypeError("expected Matrix operands")
    if A.regime != B.regime or A.ctx != B.ctx:
        raise RegimeError(f"regime mismatch: {A.regime} vs {B.regime}")
    if A.cols != B.rows:
        raise DimensionError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")


def _run(schedule: RecursionSchedule, A: Matrix, B: Matrix, m: int, counter):
    ops = A._elementwise_ops(B)
    a = pad(A, m, m).raw.reshape(1, m, m)
    b = pad(B, m, m).raw.reshape(1, m, m)
    den = None
    if A.regime == "rational":
        # recurse on integer numerators; the common denominators factor out
        den = a.den * b.den
        a, b = QArray(a.num), QArray(b.num)
    c = _recurse(ops, schedule.algorithm_at, schedule.cutoff, a, b, 0, counter)
    c = c.reshape(m, m)
    if den is not None:
        c = QArray(c.num, c.den * den).normalized()
    out = Matrix(c, ops)
    if (A.rows, B.cols) != (m, m):
        out = out[0:A.rows, 0:B.cols]
    return out


def _check_valid(alg: BilinearAlgorithm, checked: bool):
    if checked:
        res = validate(alg)
        if not res:
            raise InvalidAlgorithmError(
                f"algorithm {alg.name or '(unnamed)'} fails the tensor identity at (h,l,i,j)={res.witness}")


def multiply_stationary(alg: BilinearAlgorithm, A: Matrix, B: Matrix,
                        cutoff: int = DEFAULT_CUTOFF, *, counter: OpCounter | None = None,
                        check: bool = True) -> Matrix:
    """Recursive product with one algorithm at every level.

    Operands are zero-padded to the least power of ``k`` covering all their
    sides and the result is cropped back.  Sides ``<= cutoff`` use the
    classical product.
    """
    _check_valid(alg, check)
    _check_operands(A, B)
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    if alg.k == 1:
        raise InvalidAlgorithmError("block size k=1 does not shrink the problem")
    side = max(A.rows, A.cols, B.cols)
    m = alg.k ** _ceil_log(side, alg.k)
    return _run(RecursionSchedule((alg,), cutoff), A, B, m, counter)


def multiply_nonstationary(schedule: RecursionSchedule, A: Matrix, B: Matrix, *,
                           counter: OpCounter | None = None, check: bool = True) -> Matrix:
    """Recursive product with a level-dependent algorithm.

    Operands are padded once, up front, to the least side the schedule
    splits evenly all the way down to its cutoff.
    """
    for alg in schedule.levels:
        _check_valid(alg, check)
        if alg.k == 1:
            raise InvalidAlgorithmError("block size k=1 does not shrink the problem")
    _check_operands(A, B)
    m = schedule.padded_size(max(A.rows, A.cols, B.cols))
    return _run(schedule, A, B, m, counter)


def multiply_batch(alg: BilinearAlgorithm, a, b, cutoff: int = 1, ops=None):
    """Stationary recursion on stacks of square float/complex arrays of shape ``(T, m, m)``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 3 or a.shape != b.shape or a.shape[1] != a.shape[2]:
        raise DimensionError(f"need equal stacks of square blocks, got {a.shape} and {b.shape}")
    if ops is None:
        ops = NativeOps(np.result_type(a, b))
    T, m = a.shape[0], a.shape[1]
    mp = alg.k ** _ceil_log(m, alg.k)
    if mp != m:
        a = np.pad(a, ((0, 0), (0, mp - m), (0, mp - m)))
        b = np.pad(b, ((0, 0), (0, mp - m), (0, mp - m)))
    c = _recurse(ops, RecursionSchedule((alg,), cutoff).algorithm_at, cutoff,
                 ops.asarray(a), ops.asarray(b), 0, None)
    return c[:, :m, :m]


def _ceil_log(value: int, k: int) -> int:
    e, m = 0, 1
    while m < value:
        m *= k
        e += 1
    return e


def count_multiplications(alg: BilinearAlgorithm, n: int, cutoff: int = 1) -> int:
    """Scalar multiplications of the stationary recursion on an ``n x n`` product."""
    if n < 1 or alg.k ** _ceil_log(n, alg.k) != n:
        raise DimensionError(f"n={n} is not a power of k={alg.k}")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    levels = 0
    while n > cutoff:
        n //= alg.k
        levels += 1
    return alg.t ** levels * n ** 3


def recursion_depth(k: int, n: int) -> int:
    """``log_k n`` for an exact power."""
    d = _ceil_log(n, k)
    if k ** d != n:
        raise DimensionError(f"n={n} is not a power of k={k}")
    return d


def shipped_algorithms() -> dict[str, BilinearAlgorithm]:
    return {"strassen": strassen(), "classical-2": classical_algorithm(2),
            "classical-3": classical_algorithm(3)}


def get_algorithm(selector: str) -> BilinearAlgorithm:
    """Resolve ``strassen``, ``classical-<k>`` or ``spec:<path>`` (bare paths allowed)."""
    if selector == "strassen":
        return strassen()
    if selector.startswith("classical-"):
        try:
            k = int(selector.split("-", 1)[1])
        except ValueError:
            raise SpecError(f"bad classical block size in {selector!r}") from None
        if k < 2:
            raise SpecError("classical-<k> needs k >= 2")
        return classical_algorithm(k)
    path = selector[5:] if selector.startswith("spec:") else selector
    try:
        return read_spec(path)
    except OSError as exc:
        raise SpecError(f"cannot read algorithm file {path!r}: {exc.strerror}") from None


def product_rank_bound(alg: BilinearAlgorithm) -> float:
    """Exponent ``log_k t`` achieved by stationary recursion."""
    return math.log(alg.t) / math.log(alg.k)
