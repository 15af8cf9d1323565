"""Banded factorization, eigensolvers and power iteration against dense oracles."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import linalg_kernel as lk
from artifact.errors import SingularPivot, ValidationError
from artifact.lattice_ops import BandedHermitian, LatticeWindow

from conftest import random_banded


def test_band_storage_roundtrip(rng):
    M = random_banded(rng, 12, 3)
    D = M.to_dense()
    assert np.allclose(D, D.conj().T)
    v = rng.standard_normal(M.dim) + 1j * rng.standard_normal(M.dim)
    assert np.allclose(lk.band_matvec(M.ab, v), D @ v, atol=1e-13)
    V = rng.standard_normal((M.dim, 3))
    assert np.allclose(lk.band_matvec(M.ab, V), D @ V, atol=1e-13)


def test_band_to_general_layout(rng):
    M = random_banded(rng, 6, 2)
    w = 2
    gb = lk.band_to_general(M.ab)
    D = M.to_dense()
    # LAPACK general band storage: entry (i, j) lives at row w + w + i - j, column j
    for i in range(M.dim):
        for j in range(max(0, i - w), min(M.dim, i + w + 1)):
            assert gb[2 * w + i - j, j] == pytest.approx(D[i, j])


@pytest.mark.parametrize("draw", range(50))
def test_lu_backward_error(draw):
    rng = np.random.default_rng(draw)
    w = int(rng.integers(1, 6))
    M = random_banded(rng, int(rng.integers(5, 60)), w)
    sign = 1 if draw % 2 else -1
    z = complex(rng.uniform(-3, 3), sign * 10 ** rng.uniform(-3, 0))
    lu = lk.banded_lu(M, z)
    r = rng.standard_normal(M.dim) + 1j * rng.standard_normal(M.dim)
    Dz = M.to_dense() - z * np.eye(M.dim)
    for x, A in ((lu.solve(r), Dz), (lu.solve_adjoint(r), Dz.conj().T)):
        back = np.linalg.norm(A @ x - r) / (np.linalg.norm(A, 2) * np.linalg.norm(x) + np.linalg.norm(r))
        assert back <= 1e-11


def test_lu_matrix_rhs(rng):
    M = random_banded(rng, 20, 3)
    lu = lk.banded_lu(M, 0.3 + 0.01j)
    R = rng.standard_normal((M.dim, 4)) + 0j
    X = lu.solve(R)
    assert np.allclose((M.to_dense() - lu.z * np.eye(M.dim)) @ X, R, atol=1e-10)


def test_lu_singular_pivot():
    win = LatticeWindow.unilateral(3)
    Z = BandedHermitian(np.zeros((2, win.dim), dtype=complex), win)
    with pytest.raises(SingularPivot):
        lk.banded_lu(Z, 0.0)


def test_lu_rhs_length_checked(rng):
    lu = lk.banded_lu(random_banded(rng, 5, 1), 1j)
    with pytest.raises(ValidationError):
        lu.solve(np.ones(3))


def test_dense_eig_orthogonality(rng):
    M = random_banded(rng, 80, 4)
    vals, vecs = lk.hermitian_dense_eig(M.to_dense(), want_vectors=True)
    G = vecs.conj().T @ vecs
    assert np.max(np.abs(G - np.eye(M.dim))) <= 1e-10
    assert np.allclose(M.to_dense() @ vecs, vecs * vals, atol=1e-10)


def test_banded_eig_matches_dense(rng):
    M = random_banded(rng, 60, 3)
    dense = lk.hermitian_dense_eig(M.to_dense())
    band = lk.hermitian_banded_eig(M.ab)
    assert np.allclose(dense, band, atol=1e-11)
    lo, hi = -1.0, 2.0
    sel = lk.hermitian_banded_eig(M.ab, interval=(lo, hi))
    assert np.allclose(sel, dense[(dense > lo) & (dense <= hi)], atol=1e-11)
    vals, vecs = lk.hermitian_banded_eig(M.ab, want_vectors=True, interval=(lo, hi))
    G = vecs.conj().T @ vecs
    assert np.max(np.abs(G - np.eye(vals.size))) <= 1e-10


def test_dense_limit_enforced():
    with pytest.raises(ValidationError):
        lk.hermitian_dense_eig(np.zeros((lk.DENSE_LIMIT + 1, lk.DENSE_LIMIT + 1)))
    with pytest.raises(ValidationError):
        lk.hermitian_dense_eig(np.zeros((3, 4)))


@settings(max_examples=30, deadline=None)
@given(
    dim=st.integers(2, 256),
    seed=st.integers(0, 2**31 - 1),
    complex_entries=st.booleans(),
)
def test_power_iteration_matches_svd(dim, seed, complex_entries):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((dim, dim))
    if complex_entries:
        T = T + 1j * rng.standard_normal((dim, dim))
    sigma, iters, ok = lk.power_iteration_norm(lambda v: T.conj().T @ (T @ v), dim, tol=1e-9, cap=20000)
    exact = np.linalg.svd(T, compute_uv=False)[0]
    assert ok
    assert sigma == pytest.approx(exact, rel=1e-6)


def test_power_iteration_default_tol_against_svd(rng):
    T = rng.standard_normal((100, 100))
    sigma, _, ok = lk.power_iteration_norm(lambda v: T.T @ (T @ v), 100, cap=5000)
    assert ok
    assert sigma == pytest.approx(np.linalg.svd(T, compute_uv=False)[0], rel=1e-5)


def test_power_iteration_deterministic(rng):
    T = rng.standard_normal((40, 40))
    a = lk.power_iteration_norm(lambda v: T.T @ (T @ v), 40)
    b = lk.power_iteration_norm(lambda v: T.T @ (T @ v), 40)
    assert a == b


def test_power_iteration_cap_reports_nonconvergence():
    # two nearly equal top singular values converge very slowly
    T = np.diag([1.0, 1.0 - 1e-9, 0.5])
    sigma, iters, ok = lk.power_iteration_norm(lambda v: T @ (T @ v), 3, tol=1e-16, cap=5)
    assert not ok and iters == 5
    from artifact.errors import NoConvergence
    with pytest.raises(NoConvergence):
        lk.power_iteration_norm_strict(lambda v: T @ (T @ v), 3, tol=1e-16, cap=5)


def test_power_iteration_zero_map():
    sigma, it, ok = lk.power_iteration_norm(lambda v: 0 * v, 5)
    assert sigma == 0.0 and ok
