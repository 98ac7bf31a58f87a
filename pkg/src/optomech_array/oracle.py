"""Numerical ground truth for the closed-form band structure.

Builds the Bloch 2x2 blocks and the real-space single-excitation
Hamiltonian, diagonalizes them with an in-house cyclic Jacobi solver, and
differentiates dispersions by central differences.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import ArrayParams, Branch, photon_dispersion, polariton_frequencies

__all__ = [
    "Boundary",
    "HermitianMatrix",
    "EigenDecomposition",
    "NonHermitianError",
    "ConvergenceError",
    "kspace_block",
    "realspace_hamiltonian",
    "eigen_hermitian",
    "jacobi_eigh",
    "finite_difference_velocity",
]

MAX_SWEEPS = 50
HERMITIAN_ATOL = 1e-14


class NonHermitianError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    OPEN = "open"


@dataclass(frozen=True)
class HermitianMatrix:
    """Dense Hermitian matrix; real input is kept real-symmetric."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries)
        if not np.iscomplexobj(m):
            m = m.astype(float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        m = self.entries
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        return bool(np.all(np.abs(m - m.conj().T) <= atol * scale))


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.values) @ v.conj().T


def kspace_block(k, p: ArrayParams) -> HermitianMatrix:
    """Bloch Hamiltonian in the ``(A_k, B_k)`` basis."""
    w_ph = float(photon_dispersion(k, p))
    return HermitianMatrix(np.array([[w_ph, p.g_eff], [p.g_eff, p.omega_m]]))


def realspace_hamiltonian(p: ArrayParams, boundary: Boundary = Boundary.PERIODIC) -> HermitianMatrix:
    """Single-excitation Hamiltonian ordered ``(a_1..a_N, b_1..b_N)``."""
    boundary = Boundary(boundary)
    n = p.n_sites
    if n < 2:
        raise ValueError("n_sites must be >= 2")
    if boundary is Boundary.PERIODIC and n < 3:
        # wrap bond and direct bond would coincide
        raise ValueError("periodic boundary requires n_sites >= 3")
    h = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    h[idx, idx] = p.delta_eff
    h[n + idx, n + idx] = p.omega_m
    h[idx, n + idx] = p.g_eff
    h[n + idx, idx] = p.g_eff
    h[idx[:-1], idx[1:]] = -p.hopping
    h[idx[1:], idx[:-1]] = -p.hopping
    if boundary is Boundary.PERIODIC:
        h[0, n - 1] = h[n - 1, 0] = -p.hopping
    return HermitianMatrix(h)


def _round_robin(n: int):
    """Yield ``n - 1`` rounds of ``n // 2`` disjoint index pairs covering every pair once."""
    players = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[n - 1 : n - 1 - half : -1])
        yield np.minimum(p, q), np.maximum(p, q)
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = MAX_SWEEPS):
    """Cyclic Jacobi diagonalization of a real symmetric matrix.

    Each sweep visits all off-diagonal pairs in round-robin order; the
    ``n // 2`` rotations of one round act on disjoint rows and columns and
    are applied together.

    Returns
    -------
    values, vectors
        Ascending eigenvalues and the orthogonal matrix whose columns are
        the matching eigenvectors.
    """
    a = np.array(a, dtype=float)
    n0 = a.shape[0]
    if n0 == 0:
        return np.zeros(0), np.zeros((0, 0))
    n = n0 + (n0 % 2)
    if n != n0:
        # a decoupled zero row is never rotated: its off-diagonal entries stay zero
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(n)
    fro = np.linalg.norm(a)
    rounds = list(_round_robin(n)) if n > 1 else []

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * fro or fro == 0:
            break
        for p, q in rounds:
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            active = apq != 0
            with np.errstate(divide="ignore", invalid="ignore"):
                tau = np.where(active, (aqq - app) / (2.0 * apq), 0.0)
            t = np.where(active, np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            ap = a[:, p].copy()
            aq = a[:, q]
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap = a[p, :].copy()
            aq = a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > tol * fro:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})")

    values = np.diag(a)[:n0]
    vectors = v[:n0, :n0]
    order = np.argsort(values, kind="stable")
    return values[order], vectors[:, order]


def _complex_from_embedding(values, vectors, n, scale):
    """Recover ``n`` complex eigenpairs from the ``2n`` real ones of ``[[Re, -Im], [Im, Re]]``."""
    z = vectors[:n] + 1j * vectors[n:]
    out_vals = []
    out_vecs = []
    i = 0
    tol = 1e-9 * max(scale, 1.0)
    while i < len(values):
        j = i + 1
        while j < len(values) and values[j] - values[j - 1] <= tol:
            j += 1
        block = z[:, i:j]
        m = (j - i) // 2
        u, _, _ = np.linalg.svd(block, full_matrices=False)
        # each complex eigenvector appears twice (as z and i z) in the real embedding
        out_vecs.append(u[:, :m])
        out_vals.extend([np.mean(values[i:j])] * m)
        i = j
    return np.array(out_vals), np.hstack(out_vecs)


def eigen_hermitian(m: HermitianMatrix, tol: float = 1e-14, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi.

    Complex input is diagonalized through its real-symmetric embedding.

    Raises
    ------
    NonHermitianError
        If the input is not Hermitian within ``1e-14`` relative.
    ConvergenceError
        If the sweep budget is exhausted.
    """
    if not isinstance(m, HermitianMatrix):
        m = HermitianMatrix(m)
    if not m.is_hermitian():
        raise NonHermitianError("matrix is not Hermitian")
    a = m.entries
    if not np.iscomplexobj(a) or not np.any(a.imag):
        values, vectors = jacobi_eigh(np.real(a), tol=tol, max_sweeps=max_sweeps)
        if np.iscomplexobj(a):
            vectors = vectors.astype(complex)
        return EigenDecomposition(values, vectors)
    n = m.dim
    emb = np.block([[a.real, -a.imag], [a.imag, a.real]])
    values, vectors = jacobi_eigh(emb, tol=tol, max_sweeps=max_sweeps)
    values, vectors = _complex_from_embedding(values, vectors, n, float(np.max(np.abs(a))))
    return EigenDecomposition(values, vectors)


def finite_difference_velocity(branch: Branch, k, p: ArrayParams, h: float = 1e-5):
    """Central difference ``(omega(k + h) - omega(k - h)) / 2h`` of a polariton branch."""
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h!r}")
    i = 0 if Branch(branch) is Branch.LOWER else 1
    plus = polariton_frequencies(np.asarray(k) + h, p)[i]
    minus = polariton_frequencies(np.asarray(k) - h, p)[i]
    return (plus - minus) / (2.0 * h)
