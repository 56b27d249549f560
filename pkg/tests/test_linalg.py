from fractions import Fraction

import numpy as np
import pytest
import sympy

from fastmm.errors import DimensionError, SingularMatrixError
from fastmm.linalg import (determinant, get_multiplier, invert, lu_decompose, solve,
                           verify_3block_identity)
from fastmm.matrix import Matrix, norm, random_matrix

STRASSEN = get_multiplier("strassen", 1)


def cofactor_det(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = Fraction(0)
    for j, a in enumerate(rows[0]):
        if a:
            minor = [r[:j] + r[j + 1:] for r in rows[1:]]
            total += (-1) ** j * a * cofactor_det(minor)
    return total


def well_conditioned(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Matrix.from_array(q @ np.diag(rng.uniform(1, 4, n)) @ q.T + 0.1 * rng.standard_normal((n, n)))


def check_lup(A, res):
    L, U, P = res.L, res.U, res.P
    m, n = A.shape
    Lf, Uf = L.to_fractions(), U.to_fractions()
    assert all(Lf[i][i] == 1 for i in range(m))
    assert all(Lf[i][j] == 0 for i in range(m) for j in range(i + 1, m))
    assert all(Uf[i][j] == 0 for i in range(m) for j in range(min(i, n)))
    assert sorted(res.perm) == list(range(n))
    assert L @ U @ P == A


class TestInvert:
    def test_identity(self):
        assert invert(Matrix.identity(5)) == Matrix.identity(5)

    def test_diagonal(self):
        assert invert(Matrix.from_rows([[2, 0], [0, 4]])) == Matrix.from_rows([["1/2", 0], [0, "1/4"]])

    @pytest.mark.parametrize("cutoff", [1, 2, 3, 16])
    def test_rational_exact(self, rng, cutoff):
        for n in (1, 3, 6, 7):
            A = random_matrix(rng, n)
            assert A @ invert(A, cutoff=cutoff) == Matrix.identity(n)

    @pytest.mark.parametrize("cutoff", [4, 16])
    def test_float_residual(self, rng, cutoff):
        for _ in range(5):
            A = well_conditioned(rng, 32)
            R = A @ invert(A, cutoff=cutoff) - Matrix.identity(32, "float")
            assert norm(R, "frobenius") <= 1e-10

    def test_complex(self, rng):
        z = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9)) + 6 * np.eye(9)
        A = Matrix.from_array(z)
        np.testing.assert_allclose((A @ invert(A, cutoff=2)).to_numpy(), np.eye(9), atol=1e-11)

    def test_involution(self, rng):
        A = well_conditioned(rng, 12)
        back = invert(invert(A, cutoff=4), cutoff=4)
        assert norm(back - A, "frobenius") <= 2e-10 * norm(A, "frobenius")

    def test_strassen_multiplier_exact(self, rng):
        A = random_matrix(rng, 8)
        assert invert(A, STRASSEN, cutoff=2) == invert(A, cutoff=2)

    def test_singular_rational(self):
        with pytest.raises(SingularMatrixError, match="level"):
            invert(Matrix.from_rows([[1, 2], [2, 4]]))

    def test_singular_float(self):
        A = Matrix.from_array(np.outer([1.0, 2, 3, 4], [1.0, -1, 2, 0.5]))
        with pytest.raises(SingularMatrixError, match="threshold"):
            invert(A, cutoff=2)

    def test_not_square(self):
        with pytest.raises(DimensionError):
            invert(Matrix.zeros(2, 3))


class TestThreeBlock:
    def test_zero(self):
        assert verify_3block_identity(Matrix.zeros(3, 3), Matrix.zeros(3, 3))

    def test_scalar(self):
        assert verify_3block_identity(Matrix.from_rows([[2]]), Matrix.from_rows([[3]]))

    @pytest.mark.parametrize("cutoff", [1, 4, 16])
    def test_random_rational(self, rng, cutoff):
        A, B = random_matrix(rng, 4), random_matrix(rng, 4)
        assert verify_3block_identity(A, B, STRASSEN, cutoff)

    def test_float(self, rng):
        A = Matrix.from_array(rng.uniform(-1, 1, (4, 4)))
        B = Matrix.from_array(rng.uniform(-1, 1, (4, 4)))
        assert verify_3block_identity(A, B)


class TestLUP:
    def test_identity(self):
        res = lu_decompose(Matrix.identity(4))
        assert res.L == Matrix.identity(4) and res.U == Matrix.identity(4)
        assert res.P == Matrix.identity(4)

    def test_swap(self):
        A = Matrix.from_rows([[0, 1], [1, 0]])
        check_lup(A, lu_decompose(A))

    @pytest.mark.parametrize("cutoff", [1, 2, 16])
    def test_random_rectangular(self, rng, cutoff):
        for _ in range(10):
            m = int(rng.integers(1, 10))
            n = int(rng.integers(m, 14))
            A = random_matrix(rng, m, n)
            check_lup(A, lu_decompose(A, cutoff=cutoff))

    def test_needs_pivoting(self, rng):
        A = random_matrix(rng, 6, 9)
        rows = A.to_fractions()
        rows[:, :3] = 0            # first columns vanish: pivots must come from later columns
        A = Matrix.from_rows(rows.tolist())
        check_lup(A, lu_decompose(A, cutoff=1))

    def test_strassen_multiplier(self, rng):
        A = random_matrix(rng, 16, 24)
        res = lu_decompose(A, STRASSEN, cutoff=2)
        check_lup(A, res)
        ref = lu_decompose(A, cutoff=2)
        assert (res.L, res.U, res.perm) == (ref.L, ref.U, ref.perm)

    def test_float_reconstruction(self, rng):
        A = Matrix.from_array(rng.standard_normal((7, 11)))
        res = lu_decompose(A, cutoff=2)
        np.testing.assert_allclose((res.L @ res.U @ res.P).to_numpy(), A.to_numpy(), atol=1e-12)

    def test_rank_deficient(self):
        A = Matrix.from_rows([[1, 2, 3], [2, 4, 6]])
        with pytest.raises(SingularMatrixError, match="row 1"):
            lu_decompose(A, cutoff=1)

    def test_tall(self):
        with pytest.raises(DimensionError):
            lu_decompose(Matrix.zeros(3, 2))


class TestDeterminant:
    def test_diagonal(self):
        assert determinant(Matrix.from_rows([[1, 0, 0], [0, 2, 0], [0, 0, 3]])) == 6

    def test_rank_one(self):
        v = Matrix.from_rows([[1, -2, 3, 5]])
        assert determinant(v.transpose() @ v) == 0

    @pytest.mark.parametrize("n", range(1, 9))
    def test_cofactor(self, rng, n):
        A = random_matrix(rng, n)
        assert determinant(A, cutoff=2) == cofactor_det(A.to_fractions().tolist())

    def test_multiplicative(self, rng):
        for _ in range(5):
            A, B = random_matrix(rng, 6), random_matrix(rng, 6)
            assert determinant(A @ B) == determinant(A) * determinant(B)

    def test_sympy(self, rng):
        A = random_matrix(rng, 5)
        want = sympy.Matrix(A.to_fractions().tolist()).det()
        assert determinant(A) == Fraction(int(want.p), int(want.q))

    def test_float(self, rng):
        x = rng.standard_normal((7, 7))
        assert determinant(Matrix.from_array(x), cutoff=2) == pytest.approx(np.linalg.det(x), rel=1e-10)


class TestSolve:
    def test_rational(self, rng):
        A, b = random_matrix(rng, 7), random_matrix(rng, 7, 2)
        x = solve(A, b, cutoff=2)
        assert A @ x == b

    def test_vector_input(self):
        A = Matrix.from_rows([[0, 2], [3, 1]])
        x = solve(A, [4, 5])
        assert x == Matrix.from_rows([[1], [2]])

    def test_float(self, rng):
        A = well_conditioned(rng, 10)
        b = Matrix.from_array(rng.standard_normal((10, 1)))
        np.testing.assert_allclose((A @ solve(A, b)).to_numpy(), b.to_numpy(), atol=1e-12)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            solve(Matrix.from_rows([[1, 1], [1, 1]]), [1, 2])
