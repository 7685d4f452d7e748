"""
Unit tests for core_linalg.py.
Rank, bases, subspace comparison, matrix functions, eigenstructure and
least squares, with sympy as an exact oracle where one exists.
"""

import pytest
import numpy as np
import sympy
import sys
import os
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

# Add project root and the tests directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import core_linalg as la
from obsvkit_errors import (
    InvalidBasis,
    InvalidExponent,
    InvalidMatrix,
    NumericalInconsistency,
    RankDeficientRegressor,
)
from strategies import PROPERTY_SETTINGS, integer_matrices, seeds, square_matrices


class TestRank:
    """Test singular-value rank decisions."""

    @pytest.mark.unit
    def test_rank_of_identity(self):
        """Identity has full rank and reports its singular values."""
        result = la.rank_of(np.eye(4))
        assert result.rank == 4
        assert result.singular_values == (1.0, 1.0, 1.0, 1.0)
        pytest.assert_valid_rank_result(result.to_dict())

    @pytest.mark.unit
    def test_rank_of_zero_matrix(self):
        """Zero matrix has rank 0 with a positive threshold."""
        result = la.rank_of(np.zeros((3, 3)))
        assert result.rank == 0
        assert result.tolerance_used > 0

    @pytest.mark.unit
    def test_rank_of_tiny_singular_value(self):
        """Singular values below max(m,n)*eps*sigma_max are dropped."""
        assert la.rank_of(np.diag([1.0, 1e-20])).rank == 1
        assert la.rank_of(np.diag([1.0, 1e-6])).rank == 2

    @pytest.mark.unit
    def test_rank_of_absolute_tolerance(self):
        """An explicit tol is used verbatim."""
        result = la.rank_of(np.diag([1.0, 1e-3]), tol=1e-2)
        assert result.rank == 1
        assert result.tolerance_used == 1e-2

    @pytest.mark.unit
    def test_rank_of_env_override(self, monkeypatch):
        """OBSVKIT_TOL sets the relative threshold."""
        monkeypatch.setenv("OBSVKIT_TOL", "1e-2")
        result = la.rank_of(np.diag([2.0, 1e-3]))
        assert result.rank == 1
        assert result.tolerance_used == pytest.approx(2e-2)

    @pytest.mark.unit
    def test_rank_of_invalid_env_override_ignored(self, monkeypatch):
        """A non-numeric OBSVKIT_TOL falls back to the default."""
        monkeypatch.setenv("OBSVKIT_TOL", "not-a-number")
        assert la.rank_of(np.diag([1.0, 1e-6])).rank == 2

    @pytest.mark.unit
    def test_rank_of_rejects_nan(self):
        """Non-finite entries are rejected."""
        with pytest.raises(InvalidMatrix):
            la.rank_of([[1.0, np.nan], [0.0, 1.0]])

    @pytest.mark.unit
    def test_rank_of_rejects_non_numeric(self):
        """String entries are rejected."""
        with pytest.raises(InvalidMatrix):
            la.rank_of([["a", "b"]])

    @pytest.mark.unit
    def test_rank_of_empty(self):
        """A 0 x n matrix has rank 0."""
        assert la.rank_of(np.zeros((0, 3))).rank == 0

    @pytest.mark.unit
    @pytest.mark.property
    @PROPERTY_SETTINGS
    @given(data=st.data())
    def test_rank_matches_sympy_on_integer_products(self, data):
        """SVD rank agrees with exact rational rank on low-rank integer matrices."""
        r = data.draw(st.integers(min_value=1, max_value=3))
        left = data.draw(arrays(np.int64, (6, r), elements=st.integers(min_value=-5, max_value=5)))
        right = data.draw(arrays(np.int64, (r, 5), elements=st.integers(min_value=-5, max_value=5)))
        M = left @ right
        exact = sympy.Matrix(M.tolist()).rank()
        assert la.rank_of(M).rank == exact

    @pytest.mark.unit
    @pytest.mark.property
    @PROPERTY_SETTINGS
    @given(M=integer_matrices())
    def test_rank_of_transpose(self, M):
        assert la.rank_of(M).rank == la.rank_of(M.T).rank


class TestBases:
    """Test orthonormal bases and subspace comparison."""

    @pytest.mark.unit
    def test_orthonormal_bases_split(self):
        """Row and null bases are orthonormal and complementary."""
        M = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
        rank, row, null = la.orthonormal_bases(M)
        assert rank.rank == 2
        assert row.shape == (3, 2)
        assert null.shape == (3, 1)
        assert np.allclose(row.T @ row, np.eye(2))
        assert np.allclose(M @ null, 0.0)
        assert abs(abs(null[2, 0]) - 1.0) < 1e-12

    @pytest.mark.unit
    def test_null_space_basis_full_rank(self):
        """A full-column-rank matrix has an empty null basis."""
        assert la.null_space_basis(np.eye(3)).shape == (3, 0)

    @pytest.mark.unit
    def test_orthonormal_bases_empty_rows(self):
        """A 0 x n matrix has the whole space as null space."""
        rank, row, null = la.orthonormal_bases(np.zeros((0, 3)))
        assert rank.rank == 0
        assert row.shape == (3, 0)
        assert np.allclose(null, np.eye(3))

    @pytest.mark.unit
    def test_subspaces_equal_different_bases(self):
        """Two bases of the same plane compare equal."""
        B1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        c, s = np.cos(0.3), np.sin(0.3)
        B2 = B1 @ np.array([[c, -s], [s, c]])
        assert la.subspaces_equal(B1, B2)

    @pytest.mark.unit
    def test_subspaces_equal_different_planes(self):
        """Different planes of the same dimension are not equal."""
        B1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        B2 = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        assert not la.subspaces_equal(B1, B2)

    @pytest.mark.unit
    def test_subspaces_equal_dimension_mismatch(self):
        """Subspaces of different dimension are not equal."""
        assert not la.subspaces_equal(np.eye(3)[:, :2], np.eye(3)[:, :1])

    @pytest.mark.unit
    def test_subspaces_equal_empty(self):
        """Two zero-dimensional subspaces are equal."""
        assert la.subspaces_equal(np.zeros((3, 0)), np.zeros((3, 0)))

    @pytest.mark.unit
    def test_subspaces_equal_rejects_non_orthonormal(self):
        """Non-orthonormal columns raise InvalidBasis."""
        with pytest.raises(InvalidBasis):
            la.subspaces_equal(np.array([[2.0], [0.0]]), np.array([[1.0], [0.0]]))

    @pytest.mark.unit
    def test_subspaces_equal_rejects_row_mismatch(self):
        with pytest.raises(InvalidMatrix):
            la.subspaces_equal(np.eye(2), np.eye(3))


class TestMatrixFunctions:
    """Test integer powers and the matrix exponential."""

    @pytest.mark.unit
    def test_matrix_power_zero_is_identity(self):
        A = np.array([[2.0, 1.0], [0.0, 3.0]])
        assert np.array_equal(la.matrix_power(A, 0), np.eye(2))

    @pytest.mark.unit
    def test_matrix_power_matches_repeated_product(self):
        A = np.array([[1.0, 1.0], [-1.0, 1.0]])
        assert np.allclose(la.matrix_power(A, 5), A @ A @ A @ A @ A)

    @pytest.mark.unit
    def test_matrix_power_accepts_integral_float(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.allclose(la.matrix_power(A, 3.0), A)

    @pytest.mark.unit
    @pytest.mark.parametrize("exponent", [-1, 2.5, True, "two", float("nan")])
    def test_matrix_power_rejects_bad_exponents(self, exponent):
        """Negative, fractional, boolean and non-numeric exponents are rejected."""
        with pytest.raises(InvalidExponent):
            la.matrix_power(np.eye(2), exponent)

    @pytest.mark.unit
    @pytest.mark.property
    @PROPERTY_SETTINGS
    @given(A=square_matrices(max_n=4, bound=1.0), s=st.floats(min_value=0.0, max_value=1.0),
           t=st.floats(min_value=0.0, max_value=1.0))
    def test_exponential_semigroup(self, A, s, t):
        """e^{A(s+t)} = e^{As} e^{At}."""
        joint = la.matrix_exponential(A, s + t)
        split = la.matrix_exponential(A, s) @ la.matrix_exponential(A, t)
        assert np.linalg.norm(joint - split) <= 1e-9 * max(1.0, np.linalg.norm(joint))

    @pytest.mark.unit
    @pytest.mark.property
    @PROPERTY_SETTINGS
    @given(data=st.data(), a=st.integers(min_value=0, max_value=6), b=st.integers(min_value=0, max_value=6))
    def test_matrix_power_adds_exponents(self, data, a, b):
        """Integer matrices stay exact, so A^(a+b) = A^a A^b holds bit for bit."""
        n = data.draw(st.integers(min_value=1, max_value=4))
        A = data.draw(arrays(np.int64, (n, n), elements=st.integers(min_value=-2, max_value=2)))
        assert np.array_equal(la.matrix_power(A, a + b), la.matrix_power(A, a) @ la.matrix_power(A, b))

    @pytest.mark.unit
    def test_matrix_power_rejects_non_square(self):
        with pytest.raises(InvalidMatrix):
            la.matrix_power(np.ones((2, 3)), 2)

    @pytest.mark.unit
    def test_matrix_exponential_rotation(self):
        """e^{At} of the oscillator generator is a rotation."""
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        t = 0.7
        expected = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
        assert np.allclose(la.matrix_exponential(A, t), expected, atol=1e-12)

    @pytest.mark.unit
    def test_matrix_exponential_zero_time(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.allclose(la.matrix_exponential(A, 0.0), np.eye(2))

    @pytest.mark.unit
    def test_matrix_exponential_nilpotent_matches_sympy(self):
        """Exact exponential of a nilpotent block."""
        A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        exact = sympy.Matrix(A.astype(int).tolist()).exp()
        assert np.allclose(la.matrix_exponential(A, 1.0), np.array(exact.evalf(), dtype=float))

    @pytest.mark.unit
    def test_matrix_exponential_rejects_infinite_time(self):
        with pytest.raises(InvalidMatrix):
            la.matrix_exponential(np.eye(2), float("inf"))


class TestEigenstructure:
    """Test eigenvalue clustering, multiplicities and indices."""

    @pytest.mark.unit
    def test_jordan_block_index(self):
        """A 2x2 Jordan block has index 2 and geometric multiplicity 1."""
        A = np.array([[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]])
        es = la.eigenstructure(A)
        assert [lam.real for lam in es.distinct_eigenvalues] == pytest.approx([3.0, 2.0])
        assert es.algebraic_multiplicities == (1, 2)
        assert es.geometric_multiplicities == (1, 1)
        assert es.indices == (1, 2)
        assert es.v == 2
        assert es.d == 3

    @pytest.mark.unit
    def test_semisimple_repeated_eigenvalue(self):
        """2I has one eigenvalue with geometric multiplicity 2 and index 1."""
        es = la.eigenstructure(2.0 * np.eye(2))
        assert es.algebraic_multiplicities == (2,)
        assert es.geometric_multiplicities == (2,)
        assert es.indices == (1,)

    @pytest.mark.unit
    def test_conjugate_pair_ordering(self):
        """Negative-imaginary member of a pair comes first."""
        es = la.eigenstructure(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert len(es.distinct_eigenvalues) == 2
        assert es.distinct_eigenvalues[0].imag < 0 < es.distinct_eigenvalues[1].imag

    @pytest.mark.unit
    def test_descending_real_part(self):
        es = la.eigenstructure(np.diag([-1.0, 5.0, 0.5]))
        assert [lam.real for lam in es.distinct_eigenvalues] == pytest.approx([5.0, 0.5, -1.0])

    @pytest.mark.unit
    def test_ambiguous_spectrum_warning(self):
        """Clusters closer than 2*cluster_tol but not merged carry a warning."""
        es = la.eigenstructure(np.diag([1.0, 1.0 + 1.5e-6]), cluster_tol=1e-6)
        assert es.v == 2
        assert any(w.startswith("AmbiguousSpectrum") for w in es.warnings)

    @pytest.mark.unit
    def test_nilpotent_index(self):
        """Shift matrix of size 3 has eigenvalue 0 with index 3."""
        N = np.eye(3, k=1)
        es = la.eigenstructure(N)
        assert es.v == 1
        assert abs(es.distinct_eigenvalues[0]) < 1e-8
        assert es.indices == (3,)

    @pytest.mark.unit
    def test_multiplicities_match_sympy(self):
        """Algebraic multiplicities agree with sympy's exact eigenvalues."""
        A = np.array([[2, 1, 0, 0], [0, 2, 0, 0], [0, 0, 2, 0], [0, 0, 0, -1]])
        exact = sympy.Matrix(A.tolist()).eigenvals()
        es = la.eigenstructure(A.astype(float))
        found = {round(lam.real): m for lam, m in zip(es.distinct_eigenvalues, es.algebraic_multiplicities)}
        assert found == {int(k): v for k, v in exact.items()}
        assert es.geometric_multiplicities == (2, 1)
        assert es.indices == (2, 1)


class TestLeastSquares:
    """Test the QR least-squares solver."""

    @pytest.mark.unit
    def test_exact_solution(self):
        Phi = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        x = np.array([3.0, -1.0])
        assert np.allclose(la.solve_least_squares(Phi, Phi @ x), x)

    @pytest.mark.unit
    def test_matches_lstsq_on_noisy_data(self):
        rng = np.random.default_rng(42)
        Phi = rng.standard_normal((10, 3))
        Y = rng.standard_normal(10)
        expected = np.linalg.lstsq(Phi, Y, rcond=None)[0]
        assert np.allclose(la.solve_least_squares(Phi, Y), expected)

    @pytest.mark.unit
    @pytest.mark.property
    @PROPERTY_SETTINGS
    @given(cols=st.integers(min_value=1, max_value=4), extra_rows=st.integers(min_value=0, max_value=6), seed=seeds)
    def test_residual_is_orthogonal_to_regressor(self, cols, extra_rows, seed):
        rng = np.random.default_rng(seed)
        Phi = rng.standard_normal((cols + extra_rows, cols))
        Y = rng.standard_normal(cols + extra_rows)
        x = la.solve_least_squares(Phi, Y)
        assert np.allclose(Phi.T @ (Y - Phi @ x), 0.0, atol=1e-9 * max(1.0, np.linalg.norm(Phi) * np.linalg.norm(Y)))

    @pytest.mark.unit
    def test_rank_deficient_raises(self):
        """Rank-deficient regressors raise with the rank result attached."""
        Phi = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(RankDeficientRegressor) as excinfo:
            la.solve_least_squares(Phi, np.array([1.0, 2.0]))
        assert excinfo.value.rank_result.rank == 1

    @pytest.mark.unit
    def test_row_mismatch(self):
        with pytest.raises(InvalidMatrix):
            la.solve_least_squares(np.eye(2), np.ones(3))


class TestHelpers:
    """Test validation helpers."""

    @pytest.mark.unit
    def test_real_if_close_drops_residue(self):
        M = np.array([[1.0 + 1e-14j, 2.0]])
        out = la.real_if_close(M)
        assert not np.iscomplexobj(out)
        assert np.allclose(out, [[1.0, 2.0]])

    @pytest.mark.unit
    def test_real_if_close_rejects_genuine_imaginary(self):
        with pytest.raises(NumericalInconsistency):
            la.real_if_close(np.array([1.0 + 0.5j]))

    @pytest.mark.unit
    def test_as_matrix_promotes_vector(self):
        assert la.as_matrix([1, 2, 3]).shape == (1, 3)

    @pytest.mark.unit
    def test_vstack_empty(self):
        assert la.vstack([], 4).shape == (0, 4)
