import math

import numpy as np
import pytest

from optomech_array.model import ArrayParams, Branch, group_velocity, photon_dispersion, polariton_frequencies
from optomech_array.oracle import (
    Boundary,
    ConvergenceError,
    HermitianMatrix,
    NonHermitianError,
    eigen_hermitian,
    finite_difference_velocity,
    jacobi_eigh,
    kspace_block,
    realspace_hamiltonian,
)


def check_decomposition(m, dec, tol=1e-10):
    m = np.asarray(m)
    v = dec.vectors
    norm = np.linalg.norm(m, 2)
    for lam, x in zip(dec.values, v.T):
        assert np.linalg.norm(m @ x - lam * x) <= tol * max(norm, 1.0)
    assert np.allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=tol)
    assert np.all(np.diff(dec.values) >= 0)


def bloch_union(p):
    k = 2 * np.pi * np.arange(p.n_sites) / (p.n_sites * p.spacing)
    lo, hi = polariton_frequencies(k, p)
    return np.sort(np.concatenate([lo, hi]))


# k-space block

def test_kspace_block_examples():
    p = ArrayParams(g_eff=0.0, detuning_om=-40.0)
    m = kspace_block(0.7, p).entries
    assert m[0, 1] == m[1, 0] == 0.0
    assert m[0, 0] == pytest.approx(photon_dispersion(0.7, p)) and m[1, 1] == 100.0
    m = kspace_block(math.pi / 2, ArrayParams(detuning_om=0.0)).entries
    assert np.allclose(m, [[100, 5], [5, 100]], atol=1e-13)
    assert eigen_hermitian(m).values == pytest.approx([95.0, 105.0], abs=1e-12)


# eigensolver

@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_identity(n):
    dec = eigen_hermitian(np.eye(n))
    assert np.all(dec.values == 1.0)
    check_decomposition(np.eye(n), dec)


def test_empty_matrix():
    values, vectors = jacobi_eigh(np.zeros((0, 0)))
    assert values.shape == (0,) and vectors.shape == (0, 0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_complex_reconstruction(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    m = (x + x.conj().T) / 2
    dec = eigen_hermitian(m)
    assert np.linalg.norm(dec.reconstruct() - m) <= 1e-10 * np.linalg.norm(m)
    check_decomposition(m, dec)
    assert dec.values == pytest.approx(np.linalg.eigvalsh(m), abs=1e-10)


def test_random_real_odd_size():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(15, 15))
    m = x + x.T
    dec = eigen_hermitian(m)
    check_decomposition(m, dec)
    assert dec.values == pytest.approx(np.linalg.eigvalsh(m), abs=1e-10)


def test_degenerate_complex_spectrum():
    # doubly degenerate eigenvalues stress the embedding recovery
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    m = q @ np.diag([1.0, 1.0, 2.0, 2.0, 2.0, -3.0]) @ q.conj().T
    dec = eigen_hermitian(m)
    assert dec.values == pytest.approx([-3, 1, 1, 2, 2, 2], abs=1e-10)
    check_decomposition(m, dec)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianError):
        eigen_hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(NonHermitianError):
        eigen_hermitian(np.array([[1.0, 1j], [1j, 1.0]]))
    with pytest.raises(ValueError):
        HermitianMatrix(np.zeros((2, 3)))


def test_sweep_budget_exhausted():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(12, 12))
    with pytest.raises(ConvergenceError):
        eigen_hermitian(x + x.T, max_sweeps=1)


def test_hermitian_matrix_is_read_only():
    h = HermitianMatrix(np.eye(3))
    assert h.dim == 3 and h.is_hermitian()
    with pytest.raises(ValueError):
        h.entries[0, 0] = 2.0


# real-space Hamiltonian

def test_realspace_structure():
    p = ArrayParams(n_sites=4, detuning_om=-30.0)
    h = realspace_hamiltonian(p, Boundary.OPEN).entries
    assert np.allclose(np.diag(h), [70.0] * 4 + [100.0] * 4)
    assert h[0, 1] == h[1, 0] == -1.0 and h[0, 3] == 0.0
    assert h[2, 6] == h[6, 2] == 5.0
    assert realspace_hamiltonian(p, Boundary.PERIODIC).entries[0, 3] == -1.0


def test_realspace_rejects_small_rings():
    with pytest.raises(ValueError):
        realspace_hamiltonian(ArrayParams(n_sites=2), Boundary.PERIODIC)
    realspace_hamiltonian(ArrayParams(n_sites=2), Boundary.OPEN)


def test_three_site_ring():
    p = ArrayParams(n_sites=3, g_eff=0.0, detuning_om=-20.0)
    h = realspace_hamiltonian(p, Boundary.PERIODIC).entries
    photon = eigen_hermitian(h[:3, :3]).values
    d = p.delta_eff
    assert photon == pytest.approx([d - 2, d + 1, d + 1], abs=1e-12)


@pytest.mark.parametrize("n", [8, 64])
@pytest.mark.parametrize("dom", [-100.0, 0.0, 10.0])
def test_bloch_equivalence(n, dom):
    p = ArrayParams(n_sites=n, detuning_om=dom)
    dec = eigen_hermitian(realspace_hamiltonian(p, Boundary.PERIODIC))
    assert np.max(np.abs(dec.values - bloch_union(p))) < 1e-9


def test_realspace_eigenvectors_match_numpy_up_to_sign():
    p = ArrayParams(n_sites=8, detuning_om=-100.0, g_eff=5.0)
    # open chain: nondegenerate spectrum, so eigenvectors are unique up to sign
    h = realspace_hamiltonian(p, Boundary.OPEN).entries
    dec = eigen_hermitian(h)
    ref_vals, ref_vecs = np.linalg.eigh(h)
    assert dec.values == pytest.approx(ref_vals, abs=1e-10)
    overlaps = np.abs(np.sum(dec.vectors * ref_vecs, axis=0))
    assert overlaps == pytest.approx(np.ones(16), abs=1e-9)


def test_open_chain_within_band_range():
    p = ArrayParams(n_sites=32, detuning_om=0.0)
    values = eigen_hermitian(realspace_hamiltonian(p, Boundary.OPEN)).values
    union = bloch_union(ArrayParams(n_sites=4096, detuning_om=0.0))
    assert values.min() >= union.min() - 1e-9 and values.max() <= union.max() + 1e-9


# finite differences

def test_fd_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_difference_velocity(Branch.LOWER, 0.3, ArrayParams(), h=0.0)


def test_fd_second_order_convergence():
    p = ArrayParams(detuning_om=3.0)
    k = 0.9
    exact = group_velocity(Branch.LOWER, k, p)
    e1 = abs(finite_difference_velocity(Branch.LOWER, k, p, h=1e-2) - exact)
    e2 = abs(finite_difference_velocity(Branch.LOWER, k, p, h=5e-3) - exact)
    assert e1 / e2 == pytest.approx(4.0, rel=0.02)
