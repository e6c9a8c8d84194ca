import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma

from mimorelay.cmatrix import (
    LinAlgContractError,
    RngStream,
    SingularChannelError,
    check_thin_svd,
    haar_semi_unitary,
    min_eigenvalue_hermitian,
    sample_gaussian_matrix,
    thin_svd,
    zf_pseudo_inverse,
    zf_pseudo_inverse_masked,
)

from conftest import within_3se


def _stack(rows, cols, n, seed):
    gen = RngStream(seed, 0).generator()
    x = gen.standard_normal((2, n, rows, cols))
    return (x[0] + 1j * x[1]) * np.sqrt(0.5)


class TestRngStream:
    def test_same_pair_same_matrix(self):
        a = sample_gaussian_matrix(3, 5, RngStream(11, 4))
        b = sample_gaussian_matrix(3, 5, RngStream(11, 4))
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = sample_gaussian_matrix(3, 5, RngStream(11, 4))
        b = sample_gaussian_matrix(3, 5, RngStream(11, 5))
        assert not np.array_equal(a, b)

    def test_frozen_reference_values(self):
        # guards against silent changes of the seeding scheme
        z = sample_gaussian_matrix(1, 2, RngStream(0, 0))
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0, spawn_key=(0,))))
        x = gen.standard_normal((2, 1, 2))
        np.testing.assert_array_equal(z, (x[0] + 1j * x[1]) * np.sqrt(0.5))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            RngStream(-1, 0)


class TestGaussianSampling:
    def test_unit_variance(self):
        h = sample_gaussian_matrix(1, 100_000, RngStream(1, 0))
        assert abs(np.mean(np.abs(h) ** 2) - 1.0) <= 0.02

    def test_real_imag_split(self):
        h = sample_gaussian_matrix(1, 100_000, RngStream(2, 0))
        assert abs(np.var(h.real) - 0.5) < 0.01
        assert abs(np.var(h.imag) - 0.5) < 0.01
        assert abs(np.mean(h.real * h.imag)) < 0.01

    def test_wishart_trace(self):
        # E sum sigma_k^2 = E ||H||_F^2 = M N for a 2x4 channel
        H = _stack(2, 4, 100_000, 3)
        s = thin_svd(H).sigma
        assert abs(np.mean(np.sum(s**2, axis=-1)) - 8.0) <= 0.1

    def test_bad_shape(self):
        with pytest.raises(LinAlgContractError):
            sample_gaussian_matrix(0, 3, RngStream(0))


class TestThinSVD:
    def test_identity(self):
        U, s, V = thin_svd(np.eye(2, dtype=complex))
        np.testing.assert_allclose(s, [1.0, 1.0])
        np.testing.assert_allclose(U @ V.conj().T, np.eye(2), atol=1e-12)

    def test_diagonal(self):
        _, s, _ = thin_svd(np.diag([3.0, 2.0]).astype(complex))
        np.testing.assert_allclose(s, [3.0, 2.0])

    def test_wide_shapes(self):
        A = sample_gaussian_matrix(2, 4, RngStream(5))
        U, s, V = thin_svd(A)
        assert U.shape == (2, 2) and s.shape == (2,) and V.shape == (4, 2)

    def test_reconstruction(self):
        A = sample_gaussian_matrix(2, 4, RngStream(6))
        U, s, V = thin_svd(A)
        err = np.linalg.norm(U @ np.diag(s) @ V.conj().T - A)
        assert err <= 1e-9 * np.linalg.norm(A)

    def test_singular_values_are_root_eigenvalues(self):
        A = sample_gaussian_matrix(3, 5, RngStream(7))
        ev = np.sort(np.linalg.eigvalsh(A @ A.conj().T))[::-1]
        np.testing.assert_allclose(thin_svd(A).sigma, np.sqrt(ev), rtol=1e-12)

    def test_batch(self):
        A = _stack(2, 4, 500, 8)
        check_thin_svd(A, thin_svd(A))

    def test_tall_rejected(self):
        with pytest.raises(LinAlgContractError):
            thin_svd(np.ones((4, 2), dtype=complex))

    def test_nonfinite_rejected(self):
        A = np.ones((2, 3), dtype=complex)
        A[0, 0] = np.nan
        with pytest.raises(LinAlgContractError):
            thin_svd(A)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 6), extra=st.integers(0, 4), seed=st.integers(0, 2**32))
    def test_invariants(self, n, extra, seed):
        A = sample_gaussian_matrix(n, n + extra, RngStream(seed))
        check_thin_svd(A, thin_svd(A))

    def test_log_eigenvalue_moment(self):
        # (1/N) sum_j log2 sigma_j^2 for a 2x4 channel has mean (log2 e / N) sum_k psi(M - k)
        M, N = 4, 2
        H = _stack(N, M, 100_000, 9)
        x = np.mean(np.log2(thin_svd(H).sigma ** 2), axis=-1)
        target = np.log2(np.e) / N * sum(digamma(M - k) for k in range(N))
        ok, mean, se = within_3se(x, target)
        assert ok, (mean, target, se)


class TestZeroForcing:
    def test_identity(self):
        np.testing.assert_allclose(zf_pseudo_inverse(np.eye(2, dtype=complex)), np.eye(2))

    def test_diagonal(self):
        P = zf_pseudo_inverse(np.diag([2.0, 4.0]).astype(complex))
        np.testing.assert_allclose(P, np.diag([0.5, 0.25]))

    def test_residual_random(self):
        for i in range(50):
            G = sample_gaussian_matrix(4, 4, RngStream(10, i))
            assert np.max(np.abs(G @ zf_pseudo_inverse(G) - np.eye(4))) <= 1e-8

    def test_matches_pinv_formula(self):
        G = sample_gaussian_matrix(3, 3, RngStream(12))
        ref = G.conj().T @ np.linalg.inv(G @ G.conj().T)
        np.testing.assert_allclose(zf_pseudo_inverse(G), ref, rtol=1e-10, atol=1e-12)

    def test_singular_raises(self):
        G = np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex)
        with pytest.raises(SingularChannelError):
            zf_pseudo_inverse(G)

    def test_ill_conditioned_masked(self):
        G = np.stack([np.eye(2), np.diag([1.0, 1e-7])]).astype(complex)
        P, ok = zf_pseudo_inverse_masked(G)
        assert ok.tolist() == [True, False]
        assert np.all(P[1] == 0)

    def test_non_square(self):
        with pytest.raises(LinAlgContractError):
            zf_pseudo_inverse(np.ones((2, 3), dtype=complex))


class TestMinEigenvalue:
    def test_identity(self):
        assert min_eigenvalue_hermitian(np.eye(2)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert min_eigenvalue_hermitian(np.diag([0.3, 0.9])) == pytest.approx(0.3)

    def test_unquantized_gram_is_identity(self):
        V = haar_semi_unitary(4, 2, RngStream(13))
        Q = V.conj().T @ V @ V.conj().T @ V
        Q = 0.5 * (Q + Q.conj().T)
        assert min_eigenvalue_hermitian(Q) == pytest.approx(1.0, abs=1e-12)

    def test_non_hermitian_rejected(self):
        with pytest.raises(LinAlgContractError):
            min_eigenvalue_hermitian(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_batch(self):
        Q = np.stack([np.diag([2.0, 5.0]), np.diag([7.0, 1.5])])
        np.testing.assert_allclose(min_eigenvalue_hermitian(Q), [2.0, 1.5])


class TestHaar:
    def test_orthonormal_columns(self):
        V = haar_semi_unitary(5, 3, RngStream(14))
        np.testing.assert_allclose(V.conj().T @ V, np.eye(3), atol=1e-12)

    def test_first_entry_power(self):
        # each entry of a Haar column has E|v_1|^2 = 1/M
        gen = RngStream(15).generator()
        x = np.array([haar_semi_unitary(4, 1, gen)[0, 0] for _ in range(20_000)])
        assert abs(np.mean(np.abs(x) ** 2) - 0.25) < 0.01
