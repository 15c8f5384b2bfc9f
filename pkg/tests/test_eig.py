import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoatt.eig import balance, hessenberg, hessenberg_eigvals, spectrum
from geoatt.errors import NoConvergence
from geoatt.linalg import haar_sample


def as_multiset(lam, decimals=8):
    lam = np.round(np.asarray(lam, dtype=complex), decimals) + 0.0
    return sorted(lam.tolist(), key=lambda z: (z.real, z.imag))


def test_diagonal():
    assert as_multiset(spectrum(np.diag([1.0, -1.0, -1.0]))) == [-1, -1, 1]


def test_planar_rotation():
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    lam = spectrum(R)
    np.testing.assert_allclose(lam, [np.exp(-1j * th), np.exp(1j * th)], atol=1e-14)


def test_determinant_oracle():
    M = np.random.default_rng(5).standard_normal((5, 5))
    lam = spectrum(M)
    assert len(lam) == 5
    assert abs(np.prod(lam) - np.linalg.det(M)) <= 1e-8 * abs(np.linalg.det(M))


def test_trivial_sizes():
    assert spectrum(np.zeros((0, 0))).shape == (0,)
    np.testing.assert_array_equal(spectrum(np.array([[3.0]])), [3.0])
    with pytest.raises(ValueError):
        spectrum(np.ones((2, 3)))


@pytest.mark.parametrize("n", [2, 3, 7, 16, 40, 64])
def test_against_lapack(n):
    rng = np.random.default_rng(n)
    M = rng.standard_normal((n, n))
    ours = spectrum(M)
    ref = np.linalg.eigvals(M)
    # match each reference eigenvalue to its nearest computed one
    d = np.abs(ours[:, None] - ref[None, :])
    assert np.max(d.min(axis=0)) <= 1e-9 * np.linalg.norm(M)
    np.testing.assert_allclose(np.sum(ours), np.trace(M), atol=1e-10 * n)


def test_badly_scaled_matrix_balanced():
    D = np.diag(10.0 ** np.arange(-4, 5))
    M = D @ np.random.default_rng(1).standard_normal((9, 9)) @ np.linalg.inv(D)
    B = balance(M)
    assert np.linalg.norm(B) < np.linalg.norm(M)
    d = np.abs(spectrum(M)[:, None] - np.linalg.eigvals(M)[None, :])
    assert np.max(d.min(axis=0)) <= 1e-8 * np.max(np.abs(np.linalg.eigvals(M)))


def test_hessenberg_is_similar():
    M = np.random.default_rng(3).standard_normal((6, 6))
    H = hessenberg(M)
    assert np.allclose(np.tril(H, -2), 0.0)
    np.testing.assert_allclose(np.sort_complex(hessenberg_eigvals(H)), np.sort_complex(np.linalg.eigvals(M)), atol=1e-10)


def test_repeated_and_defective():
    J = np.array([[2.0, 1.0, 0.0], [0.0, 2.0, 1.0], [0.0, 0.0, 2.0]])
    np.testing.assert_allclose(spectrum(J), [2, 2, 2], atol=1e-4)
    np.testing.assert_allclose(spectrum(np.eye(4) * -3.0), [-3] * 4)


def test_iteration_cap():
    M = np.random.default_rng(0).standard_normal((8, 8))
    with pytest.raises(NoConvergence):
        spectrum(M, max_iter=1)


def test_eigenvector_residuals():
    for n in (3, 6, 12):
        M = np.random.default_rng(n).standard_normal((n, n))
        lam, V = spectrum(M, vectors=True)
        for j in range(n):
            r = np.linalg.norm(M @ V[:, j] - lam[j] * V[:, j])
            assert r <= 1e-8 * np.linalg.norm(M)


@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_rotation_spectrum_on_unit_circle(n, seed):
    lam = spectrum(haar_sample(n, seed))
    np.testing.assert_allclose(np.abs(lam), 1.0, atol=1e-8)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_sum_and_product_invariants(n, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    lam = spectrum(M)
    assert len(lam) == n
    assert abs(lam.sum() - np.trace(M)) <= 1e-9 * (1 + np.abs(M).sum())
    # eigenvalues come in conjugate pairs for real input
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex(lam.conj()), atol=1e-9)
