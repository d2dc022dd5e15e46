"""Hermitian operator basis and Bloch-vector coordinates for density matrices.

A state of Hilbert-space dimension ``D`` is written as

    rho = 1/D + sum_j r_j Omega_j,

where ``Omega_j`` are the ``d = D**2 - 1`` traceless generalized Gell-Mann
matrices normalized to ``tr(Omega_j Omega_k) = delta_jk``.  Because the basis
is orthonormal, Euclidean distances between Bloch vectors equal
Hilbert-Schmidt distances between the operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import InvalidDimensionError, ShapeError

TOL_PSD = 1e-10


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal traceless Hermitian basis of dimension ``dim_hilbert``."""

    dim_hilbert: int
    omegas: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.dim_hilbert**2 - 1

    def __len__(self) -> int:
        return self.d


@lru_cache(maxsize=32)
def _gell_mann(D: int) -> np.ndarray:
    mats = []
    # symmetric, then antisymmetric, each over j < k lexicographically
    for j in range(D):
        for k in range(j + 1, D):
            m = np.zeros((D, D), dtype=complex)
            m[j, k] = m[k, j] = 1.0
            mats.append(m)
    for j in range(D):
        for k in range(j + 1, D):
            m = np.zeros((D, D), dtype=complex)
            m[j, k] = -1j
            m[k, j] = 1j
            mats.append(m)
    for l in range(1, D):
        diag = np.zeros(D)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    out = np.array(mats) / np.sqrt(2.0)
    out.setflags(write=False)
    return out


def build_basis(D: int) -> HermitianBasis:
    """Return the normalized generalized Gell-Mann basis for dimension ``D``.

    Ordering is fixed: symmetric pairs, antisymmetric pairs, then diagonal
    matrices, so vectorizations are reproducible.
    """
    if int(D) != D or D < 2:
        raise InvalidDimensionError(f"Hilbert-space dimension must be >= 2, got {D}")
    return HermitianBasis(int(D), _gell_mann(int(D)))


def _check_length(r: np.ndarray, basis: HermitianBasis) -> None:
    if r.shape[-1] != basis.d:
        raise ShapeError(
            f"Bloch vector has length {r.shape[-1]}, expected {basis.d} for D={basis.dim_hilbert}"
        )


def to_matrix(r, basis: HermitianBasis) -> np.ndarray:
    """Map Bloch vector(s) ``r`` of shape ``(..., d)`` to density-like matrices."""
    r = np.asarray(r, dtype=float)
    _check_length(r, basis)
    D = basis.dim_hilbert
    rho = np.tensordot(r, basis.omegas, axes=([-1], [0]))
    return rho + np.eye(D) / D


def from_matrix(rho, basis: HermitianBasis) -> np.ndarray:
    """Bloch coordinates ``tr(rho Omega_j)`` of Hermitian matrix (or stack) ``rho``."""
    rho = np.asarray(rho)
    if rho.shape[-2:] != (basis.dim_hilbert, basis.dim_hilbert):
        raise ShapeError(f"expected trailing shape {(basis.dim_hilbert,) * 2}, got {rho.shape}")
    # tr(rho Omega) = sum_ab rho_ab Omega_ba
    return np.einsum("...ab,jba->...j", rho, basis.omegas).real


def min_eigenvalue(r, basis: HermitianBasis) -> np.ndarray:
    """Smallest eigenvalue of ``rho(r)``; vectorized over leading axes."""
    r = np.asarray(r, dtype=float)
    _check_length(r, basis)
    if basis.dim_hilbert == 2:
        # qubit: eigenvalues are 1/2 +- |r|/sqrt(2)
        return 0.5 - np.linalg.norm(r, axis=-1) / np.sqrt(2.0)
    return np.linalg.eigvalsh(to_matrix(r, basis))[..., 0]


def is_physical(r, basis: HermitianBasis, tol_psd: float = TOL_PSD):
    """True where ``rho(r)`` is positive semidefinite up to ``tol_psd``."""
    return min_eigenvalue(r, basis) >= -tol_psd


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto the probability simplex.

    Sort-and-threshold algorithm; exact and non-iterative.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)


def project_to_states(h, basis: HermitianBasis) -> np.ndarray:
    """Bloch vector of the unit-trace positive operator closest to Hermitian ``h``.

    Closeness is in Frobenius norm; the eigenvalues of ``h`` are projected
    onto the probability simplex and the eigenvectors are kept.
    """
    h = np.asarray(h)
    h = 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))
    w, v = np.linalg.eigh(h)
    w = project_simplex(w)
    rho = (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return from_matrix(rho, basis)


def project_bloch(r, basis: HermitianBasis) -> np.ndarray:
    """Project an arbitrary Bloch vector onto the physical state space."""
    return project_to_states(to_matrix(r, basis), basis)


def purity_radius(D: int) -> float:
    """Radius ``sqrt(1 - 1/D)`` of the ball containing all Bloch vectors."""
    return float(np.sqrt(1.0 - 1.0 / D))
