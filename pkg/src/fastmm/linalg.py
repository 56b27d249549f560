"""Inversion, LUP factorization, determinants and solves built on a pluggable multiplier.

Every block product goes through ``mult(A, B)``, so swapping the classical
product for a recursive bilinear one changes the cost of the reductions but
(in exact arithmetic) not their results.  Base cases use dense Gaussian
elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .arith import QArray
from .bilinear import DEFAULT_CUTOFF, get_algorithm, multiply_stationary
from .errors import DimensionError, SingularMatrixError
from .matrix import Matrix, assemble, multiply_classical, norm, pad

__all__ = [
    "LUPResult",
    "determinant",
    "get_multiplier",
    "invert",
    "lu_decompose",
    "solve",
    "verify_3block_identity",
]

Multiplier = Callable[[Matrix, Matrix], Matrix]

LINALG_CUTOFF = 16
SINGULARITY_FACTOR = 1e3


def get_multiplier(selector: str = "classical", cutoff: int = DEFAULT_CUTOFF) -> Multiplier:
    """``classical``, ``strassen``, ``classical-<k>``, ``stpp`` or ``spec:<file>``."""
    if selector == "classical":
        return multiply_classical
    if selector == "stpp":
        from .stpp import fixture_family, multiply_stpp

        family = fixture_family()
        return square_padded(lambda A, B: multiply_stpp(family, A, B))
    alg = get_algorithm(selector)
    return lambda A, B: multiply_stationary(alg, A, B, cutoff)


def square_padded(mult: Multiplier) -> Multiplier:
    """Adapt a square-only multiplier to rectangular operands by zero padding."""

    def run(A: Matrix, B: Matrix) -> Matrix:
        if A.cols != B.rows:
            raise DimensionError(f"cannot multiply {A.rows}x{A.cols} by {B.rows}x{B.cols}")
        m = max(A.rows, A.cols, B.cols)
        if A.shape == (m, m) and B.shape == (m, m):
            return mult(A, B)
        return mult(pad(A, m, m), pad(B, m, m))[0:A.rows, 0:B.cols]

    return run


# scalar kits for the elimination base cases ---------------------------------------


class _Kit:
    """Entry arrays and elementwise arithmetic for one regime."""

    def __init__(self, like: Matrix):
        self.like = like
        self.regime = like.regime
        self.ctx = like.ctx
        self.exact = like.regime == "rational"
        self.eps = 0.0 if self.exact else (self.ctx.epsilon if self.ctx else 2.0 ** -53)
        self.zero = Fraction(0) if self.exact else 0.0
        self.one = Fraction(1) if self.exact else 1.0

    def array(self, M: Matrix) -> np.ndarray:
        return M.to_fractions() if self.exact else np.array(M.raw)

    def matrix(self, arr: np.ndarray) -> Matrix:
        if self.exact:
            return Matrix(QArray.from_values(arr), self.like.ops)
        if self.regime == "rounded":
            return Matrix.from_array(arr, "rounded", self.ctx.p)
        return Matrix.from_array(arr, self.regime)

    def identity(self, n: int) -> np.ndarray:
        if self.exact:
            out = np.full((n, n), Fraction(0), dtype=object)
            for i in range(n):
                out[i, i] = Fraction(1)
            return out
        return np.eye(n, dtype=self.like.raw.dtype)

    def sub(self, a, b):
        return self.ctx.sub(a, b) if self.ctx else a - b

    def mul(self, a, b):
        return self.ctx.mul(a, b) if self.ctx else a * b

    def div(self, a, b):
        return self.ctx.div(a, b) if self.ctx else a / b

    def is_zero(self, pivot, threshold: float) -> bool:
        return pivot == 0 if self.exact else abs(pivot) <= threshold


def _threshold(kit: _Kit, M: Matrix) -> float:
    return SINGULARITY_FACTOR * kit.eps * norm(M, "frobenius")


def _gauss_jordan_inverse(M: Matrix, kit: _Kit, threshold: float, where: str) -> Matrix:
    n = M.rows
    a = kit.array(M)
    inv = kit.identity(n)
    for col in range(n):
        piv = col + int(np.argmax([abs(a[r, col]) for r in range(col, n)]))
        if kit.is_zero(a[piv, col], threshold):
            raise SingularMatrixError(
                f"{where}: pivot {a[piv, col]!s} in column {col} is below the singularity "
                f"threshold {threshold:.3e} (1e3 * eps * |M|_F)")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            inv[[col, piv]] = inv[[piv, col]]
        p = a[col, col]
        a[col] = kit.div(a[col], p)
        inv[col] = kit.div(inv[col], p)
        for r in range(n):
            if r != col and a[r, col] != 0:
                f = a[r, col]
                a[r] = kit.sub(a[r], kit.mul(f, a[col]))
                inv[r] = kit.sub(inv[r], kit.mul(f, inv[col]))
    return kit.matrix(inv)


# inversion ----------------------------------------------------------------------


def _hermitian_inverse(M: Matrix, mult: Multiplier, kit: _Kit, threshold: float, cutoff: int,
                       level: int) -> Matrix:
    m = M.rows
    if m <= cutoff:
        return _gauss_jordan_inverse(M, kit, threshold, f"base elimination at recursion level {level}")
    h = (m + 1) // 2
    A11 = M[0:h, 0:h]
    C = M[h:m, 0:h]
    D = M[h:m, h:m]
    A_inv = _hermitian_inverse(A11, mult, kit, threshold, cutoff, level + 1)
    T = mult(C, A_inv)                        # C A^-1
    S = D - mult(T, C.conj_transpose())       # D - C A^-1 B with B = C*
    try:
        S_inv = _hermitian_inverse(S, mult, kit, threshold, cutoff, level + 1)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"Schur complement breakdown at recursion level {level}: {exc}") from None
    U = mult(S_inv, T)                        # S^-1 C A^-1
    top_left = A_inv + mult(T.conj_transpose(), U)
    top_right = -U.conj_transpose()
    return assemble([[top_left, top_right], [-U, S_inv]])


def invert(A: Matrix, mult: Multiplier = multiply_classical, cutoff: int = LINALG_CUTOFF) -> Matrix:
    """``A^-1 = A* (A A*)^-1``; the Hermitian inverse recurses on 2x2 blocks via the Schur complement."""
    if A.rows != A.cols:
        raise DimensionError(f"cannot invert a {A.rows}x{A.cols} matrix")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    kit = _Kit(A)
    Astar = A.conj_transpose()
    M = mult(A, Astar)
    threshold = _threshold(kit, M)
    return mult(Astar, _hermitian_inverse(M, mult, kit, threshold, cutoff, 0))


def verify_3block_identity(A: Matrix, B: Matrix, mult: Multiplier = multiply_classical,
                           cutoff: int = LINALG_CUTOFF, tol: float = 1e-9) -> bool:
    """Invert ``[[I, A, 0], [0, I, B], [0, 0, I]]`` and compare with ``[[I, -A, AB], [0, I, -B], [0, 0, I]]``.

    Exact comparison in the rational regime, else max-entry difference within
    ``tol`` relative to the expected matrix.
    """
    n = A.rows
    if A.shape != (n, n) or B.shape != (n, n):
        raise DimensionError("A and B must be square of equal side")
    I, Z = _identity(n, A), _zeros(n, n, A)
    big = assemble([[I, A, Z], [Z, I, B], [Z, Z, I]])
    expected = assemble([[I, -A, mult(A, B)], [Z, I, -B], [Z, Z, I]])
    inv = invert(big, mult, cutoff)
    if A.regime == "rational":
        return inv == expected
    diff = norm(inv - expected, "max-entry")
    return diff <= tol * max(1.0, norm(expected, "max-entry"))


def _zeros(rows: int, cols: int, like: Matrix) -> Matrix:
    return Matrix(like.ops.zeros((rows, cols)), like.ops)


def _identity(n: int, like: Matrix) -> Matrix:
    if like.regime == "rational":
        return Matrix.identity(n)
    return Matrix(like.ops.asarray(np.eye(n)), like.ops)


# LUP ----------------------------------------------------------------------------


@dataclass(frozen=True)
class LUPResult:
    """``A = L U P`` with ``P = I[perm, :]``, i.e. ``A[:, perm] = L U``."""

    L: Matrix
    U: Matrix
    perm: tuple[int, ...]

    @property
    def P(self) -> Matrix:
        return _permute_rows(_identity(len(self.perm), self.L), self.perm)

    @property
    def sign(self) -> int:
        seen, sign = set(), 1
        for s in range(len(self.perm)):
            if s in seen:
                continue
            length, j = 0, s
            while j not in seen:
                seen.add(j)
                j = self.perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
        return sign


def _permute_cols(M: Matrix, perm) -> Matrix:
    perm = list(perm)
    if M.regime == "rational":
        return Matrix(QArray(M.raw.num[:, perm], M.raw.den), M.ops)
    return Matrix(np.ascontiguousarray(M.raw[:, perm]), M.ops)


def _permute_rows(M: Matrix, perm) -> Matrix:
    perm = list(perm)
    if M.regime == "rational":
        return Matrix(QArray(M.raw.num[perm], M.raw.den), M.ops)
    return Matrix(np.ascontiguousarray(M.raw[perm]), M.ops)


def _lup_base(A: Matrix, kit: _Kit, threshold: float, offset: int):
    m, n = A.shape
    a = kit.array(A)
    L = kit.identity(m)
    perm = list(range(n))
    for i in range(m):
        j = i + int(np.argmax([abs(a[i, c]) for c in range(i, n)]))
        if kit.is_zero(a[i, j], threshold):
            raise SingularMatrixError(
                f"rank deficiency: row {offset + i} has no usable pivot during column search "
                f"(threshold {threshold:.3e})")
        if j != i:
            a[:, [i, j]] = a[:, [j, i]]
            perm[i], perm[j] = perm[j], perm[i]
        for r in range(i + 1, m):
            if a[r, i] != 0:
                f = kit.div(a[r, i], a[i, i])
                L[r, i] = f
                a[r] = kit.sub(a[r], kit.mul(f, a[i]))
                a[r, i] = kit.zero
    return kit.matrix(L), kit.matrix(a), perm


def _upper_inverse(T: Matrix, mult: Multiplier, kit: _Kit, threshold: float, cutoff: int) -> Matrix:
    m = T.rows
    if m <= cutoff:
        return _gauss_jordan_inverse(T, kit, threshold, "triangular block inversion")
    h = (m + 1) // 2
    T11_inv = _upper_inverse(T[0:h, 0:h], mult, kit, threshold, cutoff)
    T22_inv = _upper_inverse(T[h:m, h:m], mult, kit, threshold, cutoff)
    T12 = -mult(mult(T11_inv, T[0:h, h:m]), T22_inv)
    return assemble([[T11_inv, T12], [_zeros(m - h, h, T), T22_inv]])


def _lup(A: Matrix, mult: Multiplier, kit: _Kit, threshold: float, cutoff: int, offset: int):
    m, n = A.shape
    if m <= cutoff:
        return _lup_base(A, kit, threshold, offset)
    h = (m + 1) // 2
    L1, U1, p1 = _lup(A[0:h, 0:n], mult, kit, threshold, cutoff, offset)
    D = _permute_cols(A[h:m, 0:n], p1)
    E_inv = _upper_inverse(U1[0:h, 0:h], mult, kit, threshold, cutoff)
    FE = mult(D[0:m - h, 0:h], E_inv)
    G = D - mult(FE, U1)
    L2, U2, p2 = _lup(G[0:m - h, h:n], mult, kit, threshold, cutoff, offset + h)
    q = list(range(h)) + [h + x for x in p2]
    perm = [p1[x] for x in q]
    H = _permute_cols(U1, q)
    L = assemble([[L1, _zeros(h, m - h, A)], [FE, L2]])
    U = assemble([[H], [assemble([[_zeros(m - h, h, A), U2]])]])
    return L, U, perm


def lu_decompose(A: Matrix, mult: Multiplier = multiply_classical,
                 cutoff: int = LINALG_CUTOFF) -> LUPResult:
    """Recursive LUP of an ``m x n`` matrix of full row rank (``m <= n``).

    Rows are split in half; the top half is factored, the bottom half is
    eliminated against it using the inverse of the leading triangular block,
    and the Schur complement is factored recursively.
    """
    m, n = A.shape
    if m > n:
        raise DimensionError(f"need m <= n for a full-row-rank LUP, got {m}x{n}")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    kit = _Kit(A)
    L, U, perm = _lup(A, mult, kit, _threshold(kit, A), cutoff, 0)
    return LUPResult(L, U, tuple(perm))


def determinant(A: Matrix, mult: Multiplier = multiply_classical, cutoff: int = LINALG_CUTOFF):
    """``sign(P) prod diag(U)``; a singular matrix gives zero."""
    if A.rows != A.cols:
        raise DimensionError(f"determinant needs a square matrix, got {A.rows}x{A.cols}")
    try:
        res = lu_decompose(A, mult, cutoff)
    except SingularMatrixError:
        return Fraction(0) if A.regime == "rational" else 0 * A[0, 0]
    kit = _Kit(A)
    d = kit.one * res.sign
    for i in range(A.rows):
        d = kit.mul(d, res.U[i, i])
    return d if kit.exact else np.asarray(d).item()


def solve(A: Matrix, b, mult: Multiplier = multiply_classical, cutoff: int = LINALG_CUTOFF) -> Matrix:
    """Solve ``A x = b`` by LUP and forward/back substitution; ``b`` may hold several columns."""
    if A.rows != A.cols:
        raise DimensionError(f"solve needs a square matrix, got {A.rows}x{A.cols}")
    if not isinstance(b, Matrix):
        b = Matrix.from_rows([[v] for v in b], A.regime, A.ctx.p if A.ctx else None)
    if b.rows != A.rows:
        raise DimensionError(f"right-hand side has {b.rows} rows, expected {A.rows}")
    res = lu_decompose(A, mult, cutoff)
    kit = _Kit(A)
    L, U = kit.array(res.L), kit.array(res.U)
    y = kit.array(b.astype(A.regime, A.ctx.p if A.ctx else None))
    n = A.rows
    for i in range(n):                         # L y = b, unit diagonal
        for j in range(i):
            if L[i, j] != 0:
                y[i] = kit.sub(y[i], kit.mul(L[i, j], y[j]))
    for i in reversed(range(n)):               # U w = y
        for j in range(i + 1, n):
            if U[i, j] != 0:
                y[i] = kit.sub(y[i], kit.mul(U[i, j], y[j]))
        y[i] = kit.div(y[i], U[i, i])
    x = np.empty_like(y)
    x[list(res.perm)] = y                      # x[perm[k]] = w[k]
    return kit.matrix(x)
