import numpy as np
import pytest

from vartomo import linalg

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def rand_hermitian(rng, n):
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (M + M.conj().T) / 2


class TestHermitianEig:
    def test_pauli_x_spectrum(self):
        w, V = linalg.hermitian_eig(SX)
        assert np.allclose(w, [-1.0, 1.0], atol=1e-12)

    def test_identity(self):
        w, V = linalg.hermitian_eig(np.eye(4))
        assert np.allclose(w, np.ones(4), atol=1e-12)
        assert np.abs(V.conj().T @ V - np.eye(4)).max() <= 1e-10

    def test_diagonal_sorted(self):
        w, V = linalg.hermitian_eig(np.diag([3.0, -2.0, 5.0]))
        assert np.allclose(w, [-2.0, 3.0, 5.0], atol=1e-12)
        # eigenvectors permute the axes
        assert np.allclose(np.abs(V), np.eye(3)[:, [1, 0, 2]], atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 8, 16])
    def test_reconstruction_and_unitarity(self, n):
        rng = np.random.default_rng(n)
        for _ in range(5):
            M = rand_hermitian(rng, n)
            w, V = linalg.hermitian_eig(M)
            assert np.abs((V * w) @ V.conj().T - M).max() <= 1e-10 * n
            assert np.abs(V.conj().T @ V - np.eye(n)).max() <= 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            linalg.hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_symmetrizes_small_defects(self):
        M = np.eye(2) + 1e-10 * np.array([[0, 1], [0, 0]])
        w, _ = linalg.hermitian_eig(M)
        assert np.allclose(w, [1.0, 1.0], atol=1e-9)


class TestPsdProject:
    def test_clamps_negative_eigenvalue(self):
        P = linalg.psd_project(np.diag([1.0, -0.5]))
        assert np.abs(P - np.diag([1.0, 0.0])).max() <= 1e-12

    def test_fixed_point_on_psd(self):
        rng = np.random.default_rng(1)
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        M = A @ A.conj().T
        assert np.abs(linalg.psd_project(M) - M).max() <= 1e-10

    def test_keeps_positive_eigenspace_of_pauli_x(self):
        P = linalg.psd_project(SX)
        assert np.abs(P - np.array([[0.5, 0.5], [0.5, 0.5]])).max() <= 1e-12

    def test_idempotent_and_frobenius_nearest(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            M = rand_hermitian(rng, 4)
            P = linalg.psd_project(M)
            assert np.abs(linalg.psd_project(P) - P).max() <= 1e-10
            # brute-force oracle: independent eigenvalue clamp
            w, V = np.linalg.eigh((M + M.conj().T) / 2)
            brute = (V * np.maximum(w, 0)) @ V.conj().T
            assert np.abs(P - brute).max() <= 1e-10
            # no random PSD matrix is closer in Frobenius norm
            for _ in range(5):
                B = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
                Y = B @ B.conj().T
                assert np.linalg.norm(M - P) <= np.linalg.norm(M - Y) + 1e-12


class TestKron:
    def test_identity_times_diag(self):
        out = linalg.kron(np.eye(2), np.diag([1.0, -1.0]))
        assert np.abs(out - np.diag([1.0, -1.0, 1.0, -1.0])).max() == 0

    def test_identity_one(self):
        A = np.arange(4.0).reshape(2, 2)
        assert np.abs(linalg.kron(A, np.eye(1)) - A).max() == 0

    def test_diag_product(self):
        out = linalg.kron(np.diag([2.0, 3.0]), np.diag([5.0, 7.0]))
        assert np.abs(out - np.diag([10.0, 14.0, 15.0, 21.0])).max() == 0

    def test_associativity(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            A, B, C = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
            left = linalg.kron(linalg.kron(A, B), C)
            right = linalg.kron(A, linalg.kron(B, C))
            assert np.abs(left - right).max() <= 1e-12


class TestHsInner:
    def test_pauli_norm(self):
        assert linalg.hs_inner(SX, SX) == pytest.approx(2.0)

    def test_pauli_orthogonality(self):
        assert abs(linalg.hs_inner(SX, SZ)) <= 1e-15

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_identity(self, d):
        assert linalg.hs_inner(np.eye(d), np.eye(d)) == pytest.approx(d)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            linalg.hs_inner(np.eye(2), np.eye(3))


class TestPsdSqrt:
    def test_diagonal(self):
        assert np.abs(linalg.psd_sqrt(np.diag([4.0, 9.0])) - np.diag([2.0, 3.0])).max() <= 1e-12

    def test_identity(self):
        assert np.abs(linalg.psd_sqrt(np.eye(3)) - np.eye(3)).max() <= 1e-12

    def test_projector_fixed_point(self):
        v = np.array([1.0, 1j]) / np.sqrt(2)
        P = np.outer(v, v.conj())
        assert np.abs(linalg.psd_sqrt(P) - P).max() <= 1e-10

    def test_square_reproduces(self):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        M = A @ A.conj().T
        R = linalg.psd_sqrt(M)
        assert np.abs(R @ R - M).max() <= 1e-9

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="not PSD"):
            linalg.psd_sqrt(np.diag([1.0, -1e-3]))


class TestVectorization:
    def test_identity_coordinates(self):
        assert np.allclose(linalg.vec_hermitian(np.eye(2)), [1, 1, 0, 0])

    def test_pauli_x_coordinates(self):
        assert np.allclose(linalg.vec_hermitian(SX), [0, 0, np.sqrt(2), 0])

    def test_roundtrip(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            M = rand_hermitian(rng, 4)
            back = linalg.mat_hermitian(linalg.vec_hermitian(M))
            assert np.abs(back - M).max() <= 1e-14
            v = linalg.vec_hermitian(M)
            assert np.abs(linalg.vec_hermitian(linalg.mat_hermitian(v)) - v).max() <= 1e-14

    def test_isometry(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            A = rand_hermitian(rng, 5)
            B = rand_hermitian(rng, 5)
            dot = linalg.vec_hermitian(A) @ linalg.vec_hermitian(B)
            assert abs(dot - np.trace(A.conj().T @ B).real) <= 1e-12

    def test_stack_matches_single(self):
        rng = np.random.default_rng(7)
        Ms = np.stack([rand_hermitian(rng, 3) for _ in range(4)])
        stacked = linalg.vec_hermitian_stack(Ms)
        for row, M in zip(stacked, Ms):
            assert np.allclose(row, linalg.vec_hermitian(M), atol=1e-14)

    def test_wrong_length(self):
        with pytest.raises(ValueError, match="not 3"):
            linalg.mat_hermitian(np.zeros(5), dim=3)


def test_matrices_equal_requires_explicit_tolerance():
    A = np.eye(2)
    assert linalg.matrices_equal(A, A + 1e-9, 1e-8)
    assert not linalg.matrices_equal(A, A + 1e-9, 1e-10)
    assert not linalg.matrices_equal(A, np.eye(3), 1.0)
