"""Measurement models, multinomial data and maximum-likelihood state fitting.

Every POVM outcome ``Pi_j`` is stored only through its Bloch-basis
coordinates: the trace part ``t_j = tr(Pi_j)/D`` and the traceless part
``q_j = tr(Pi_j Omega)``, so that Born probabilities are affine in the
Bloch vector, ``p_j = t_j + q_j . r``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .bloch import HermitianBasis, TOL_PSD, build_basis, from_matrix, min_eigenvalue, project_bloch, to_matrix
from .exceptions import (
    ConvergenceError,
    DataQualityError,
    DegenerateEnsembleError,
    DegenerateProbabilityError,
    InvalidDistributionError,
    NotInformationallyCompleteError,
    ShapeError,
)

logger = logging.getLogger(__name__)


class Case(str, Enum):
    A = "A"  # estimator interior to the state space
    B = "B"  # estimator on the boundary (rank deficient)


@dataclass(frozen=True)
class PovmModel:
    """Vectorized POVM: ``t`` has shape (M,), ``q`` has shape (M, d)."""

    dim_hilbert: int
    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if t.ndim != 1 or q.ndim != 2 or q.shape[0] != t.shape[0]:
            raise ShapeError(f"inconsistent POVM arrays t{t.shape}, q{q.shape}")
        if q.shape[1] != self.dim_hilbert**2 - 1:
            raise ShapeError(f"q has {q.shape[1]} columns, expected {self.dim_hilbert**2 - 1}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    @property
    def M(self) -> int:
        return self.t.shape[0]

    @property
    def d(self) -> int:
        return self.q.shape[1]

    @property
    def basis(self) -> HermitianBasis:
        return build_basis(self.dim_hilbert)

    def is_informationally_complete(self, tol: float = 1e-10) -> bool:
        return np.linalg.matrix_rank(self.q, tol=tol * max(1.0, np.abs(self.q).max())) == self.d

    def completeness_residual(self) -> float:
        return max(abs(self.t.sum() - 1.0), float(np.abs(self.q.sum(axis=0)).max()))

    def operators(self) -> np.ndarray:
        """Reconstruct the outcome matrices ``Pi_j`` (shape (M, D, D))."""
        basis = self.basis
        D = self.dim_hilbert
        return self.t[:, None, None] * np.eye(D) + np.tensordot(self.q, basis.omegas, axes=([1], [0]))

    def permuted(self, perm) -> "PovmModel":
        perm = np.asarray(perm)
        return PovmModel(self.dim_hilbert, self.t[perm], self.q[perm])


def povm_from_operators(ops) -> PovmModel:
    ops = np.asarray(ops, dtype=complex)
    D = ops.shape[-1]
    basis = build_basis(D)
    t = np.trace(ops, axis1=1, axis2=2).real / D
    return PovmModel(D, t, from_matrix(ops, basis))


@dataclass(frozen=True)
class CountData:
    n: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n)
        if n.ndim != 1:
            raise ShapeError("counts must be a 1-D array")
        if np.any(n < 0) or not np.all(np.equal(np.mod(n, 1), 0)):
            raise InvalidDistributionError("counts must be non-negative integers")
        object.__setattr__(self, "n", n.astype(np.int64))

    @property
    def N(self) -> int:
        return int(self.n.sum())

    @property
    def M(self) -> int:
        return self.n.shape[0]


@dataclass(frozen=True)
class MlFit:
    """Maximum-likelihood estimate and the local quantities around it."""

    r_ml: np.ndarray
    p_ml: Optional[np.ndarray]
    log_l_max: float
    g_ml: np.ndarray
    f_ml: np.ndarray
    case: Case
    rank: Optional[int]
    n_iter: int = 0

    @property
    def d(self) -> int:
        return self.r_ml.shape[0]


# -- measurement construction -------------------------------------------------


def pauli6_povm() -> PovmModel:
    """Qubit POVM with outcomes ``(1 +- sigma_k)/6`` for k = x, y, z."""
    sig = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    ops = []
    for s in sig:
        ops.append((np.eye(2) + s) / 6.0)
        ops.append((np.eye(2) - s) / 6.0)
    return povm_from_operators(ops)


def _inverse_sqrt_psd(G: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(G)
    if w[0] <= 1e-12 * max(w[-1], 1e-300):
        raise DegenerateEnsembleError("frame operator is singular")
    return (v / np.sqrt(w)) @ v.conj().T


def _condition(ops: np.ndarray) -> np.ndarray:
    G = ops.sum(axis=0)
    W = _inverse_sqrt_psd(0.5 * (G + G.conj().T))
    out = W @ ops @ W
    return 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))


def make_random_povm(D: int, M: int, seed: int) -> PovmModel:
    """Random full-rank POVM of ``M`` outcomes, ``Pi_j ~ A_j^dag A_j`` conditioned to sum to 1."""
    if M < D * D:
        raise NotInformationallyCompleteError(f"M={M} outcomes cannot be IC for D={D} (need M >= {D * D})")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((M, D, D)) + 1j * rng.standard_normal((M, D, D))
    ops = np.conj(np.swapaxes(A, 1, 2)) @ A
    return povm_from_operators(_condition(ops))


def haar_states(D: int, M: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.standard_normal((M, D)) + 1j * rng.standard_normal((M, D))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def sqrt_measurement(states) -> PovmModel:
    """Square-root measurement ``G^{-1/2}|psi_j><psi_j|G^{-1/2}`` built from kets (rows)."""
    psi = np.asarray(states, dtype=complex)
    ops = np.einsum("ma,mb->mab", psi, psi.conj())
    return povm_from_operators(_condition(ops))


def make_sqrt_measurement(D: int, M: int, seed: int) -> PovmModel:
    if M < D * D:
        raise NotInformationallyCompleteError(f"M={M} outcomes cannot be IC for D={D} (need M >= {D * D})")
    return sqrt_measurement(haar_states(D, M, np.random.default_rng(seed)))


def random_pure_state(D: int, seed: int) -> np.ndarray:
    basis = build_basis(D)
    psi = haar_states(D, 1, np.random.default_rng(seed))[0]
    return from_matrix(np.outer(psi, psi.conj()), basis)


# -- data and likelihood ------------------------------------------------------


def born_probabilities(r, povm: PovmModel) -> np.ndarray:
    """Born probabilities ``t + q r``; vectorized over leading axes of ``r``."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != povm.d:
        raise ShapeError(f"Bloch vector length {r.shape[-1]} does not match POVM (d={povm.d})")
    return povm.t + r @ povm.q.T


def simulate_counts(p, N: int, seed: int) -> CountData:
    """Multinomial draw of ``N`` trials by sequential binomial conditioning."""
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidDistributionError(f"probabilities must be non-negative and sum to 1 (sum={p.sum()!r})")
    if N < 1:
        raise InvalidDistributionError("N must be positive")
    p = np.clip(p, 0.0, None)
    rng = np.random.default_rng(seed)
    n = np.zeros(p.size, dtype=np.int64)
    remaining = int(N)
    mass = 1.0
    for j in range(p.size - 1):
        if remaining == 0:
            break
        frac = min(1.0, p[j] / mass) if mass > 0 else 0.0
        n[j] = rng.binomial(remaining, frac)
        remaining -= n[j]
        mass -= p[j]
    n[-1] += remaining
    return CountData(n)


def log_likelihood_from_probs(n, p) -> np.ndarray:
    """``sum_j n_j log p_j`` over observed outcomes; ``-inf`` if any such ``p_j <= 0``."""
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    obs = n > 0
    po = p[..., obs]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(n[obs] * np.log(np.where(po > 0, po, 1.0)), axis=-1)
    return np.where(np.all(po > 0, axis=-1), out, -np.inf)


def log_likelihood(r, counts: CountData, povm: PovmModel):
    return log_likelihood_from_probs(counts.n, born_probabilities(r, povm))


def fisher_and_gradient(r, counts: CountData, povm: PovmModel):
    """Gradient ``sum n_j q_j/p_j`` and Fisher matrix ``N sum q_j q_j^T/p_j`` at ``r``."""
    p = born_probabilities(r, povm)
    if np.any(p <= 0):
        raise DegenerateProbabilityError(f"non-positive Born probability (min {p.min():.3e})")
    g = povm.q.T @ (counts.n / p)
    F = counts.N * (povm.q.T * (1.0 / p)) @ povm.q
    return g, 0.5 * (F + F.T)


def _probs_and_gradient(r, n, povm):
    p = born_probabilities(r, povm)
    obs = n > 0
    if np.any(p[obs] <= 0):
        return p, None
    return p, povm.q[obs].T @ (n[obs] / p[obs])


def _log_ratio(n, p_new, p_old):
    # sum n log(p_new/p_old) without cancellation between two large log-likelihoods
    obs = n > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = (p_new[obs] - p_old[obs]) / p_old[obs]
    if np.any(p_new[obs] <= 0):
        return -np.inf
    return float(n[obs] @ np.log1p(rel))


def _lipschitz_estimate(r, n, povm, iters=30):
    # power iteration on the observed-data Hessian sum n q q^T / p^2
    p = born_probabilities(r, povm)
    obs = n > 0
    Q = povm.q[obs]
    w = n[obs] / p[obs] ** 2
    v = np.ones(povm.d) / np.sqrt(povm.d)
    lam = 1.0
    for _ in range(iters):
        hv = Q.T @ (w * (Q @ v))
        lam = np.linalg.norm(hv)
        if lam == 0:
            return 1.0
        v = hv / lam
    return float(lam)


def mle_fit(
    counts: CountData,
    povm: PovmModel,
    tol_grad: Optional[float] = None,
    max_iters: int = 20000,
    tol_rank: float = 1e-6,
    r0=None,
) -> MlFit:
    """Maximum-likelihood Bloch vector by accelerated projected gradient ascent.

    Nesterov momentum with function-value restart; the step size starts from
    a power-iteration estimate of the local curvature and is adapted by
    backtracking.  Convergence is declared when the norm of the
    gradient mapping drops below ``tol_grad`` (default ``1e-8 * N``).
    """
    if counts.M != povm.M:
        raise ShapeError(f"{counts.M} counts for a POVM with {povm.M} outcomes")
    if not povm.is_informationally_complete():
        raise NotInformationallyCompleteError("POVM is not informationally complete")
    if counts.N == 0:
        raise DataQualityError("no counts recorded: the likelihood is flat")
    basis = povm.basis
    n = counts.n.astype(float)
    N = counts.N
    tol = 1e-8 * N if tol_grad is None else tol_grad

    x = np.zeros(povm.d) if r0 is None else project_bloch(r0, basis)
    px, gx = _probs_and_gradient(x, n, povm)
    if gx is None:
        x = np.zeros(povm.d)
        px, gx = _probs_and_gradient(x, n, povm)
    L = _lipschitz_estimate(x, n, povm)
    y, py, gy = x, px, gx
    t = 1.0
    it = 0
    gmap = np.inf
    for it in range(1, max_iters + 1):
        while True:
            x_new = project_bloch(y + gy / L, basis)
            p_new, g_new = _probs_and_gradient(x_new, n, povm)
            diff = x_new - y
            gain = _log_ratio(n, p_new, py)
            if g_new is not None and gain >= gy @ diff - 0.5 * L * (diff @ diff):
                break
            L *= 2.0
        if y is not x and _log_ratio(n, p_new, px) < 0:
            # momentum overshoot: restart from the current iterate
            y, py, gy, t = x, px, gx, 1.0
            continue
        x_prev = x
        x, px, gx = x_new, p_new, g_new
        gmap = L * np.linalg.norm(project_bloch(x + gx / L, basis) - x)
        if gmap < tol:
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + ((t - 1.0) / t_new) * (x - x_prev)
        t = t_new
        py, gy = _probs_and_gradient(y, n, povm)
        if gy is None:
            y, py, gy, t = x, px, gx, 1.0
        L *= 0.9
    else:
        raise ConvergenceError(
            f"projected gradient did not converge in {max_iters} iterations (residual {gmap:.3e})",
            last_iterate=x,
        )
    return _finalize_fit(x, counts, povm, tol_rank, it)


def _finalize_fit(r, counts: CountData, povm: PovmModel, tol_rank: float, n_iter: int) -> MlFit:
    basis = povm.basis
    eig = np.linalg.eigvalsh(to_matrix(r, basis))
    rank = int(np.sum(eig >= tol_rank))
    case = Case.B if rank < povm.dim_hilbert else Case.A
    g, F = fisher_and_gradient(r, counts, povm)
    p = born_probabilities(r, povm)
    logger.debug("ML fit: rank %d, case %s, %d iterations", rank, case.value, n_iter)
    return MlFit(
        r_ml=r,
        p_ml=p,
        log_l_max=float(log_likelihood_from_probs(counts.n, p)),
        g_ml=g,
        f_ml=F,
        case=case,
        rank=rank,
        n_iter=n_iter,
    )


def fit_from_point(r, counts: CountData, povm: PovmModel, tol_rank: float = 1e-6) -> MlFit:
    """Wrap a known maximizer ``r`` (e.g. exact-frequency data) as an :class:`MlFit`."""
    return _finalize_fit(np.asarray(r, dtype=float), counts, povm, tol_rank, 0)


class TomographyLikelihood:
    """Likelihood and state-space membership for a tomography dataset."""

    def __init__(self, povm: PovmModel, counts: CountData, tol_psd: float = TOL_PSD):
        if counts.M != povm.M:
            raise ShapeError(f"{counts.M} counts for a POVM with {povm.M} outcomes")
        self.povm = povm
        self.counts = counts
        self.tol_psd = tol_psd
        self.basis = povm.basis
        obs = counts.n > 0
        self._n = counts.n[obs].astype(float)
        self._t = povm.t[obs]
        self._q = povm.q[obs]

    @property
    def d(self) -> int:
        return self.povm.d

    def log_likelihood(self, r) -> np.ndarray:
        p = self._t + np.asarray(r, dtype=float) @ self._q.T
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.log(np.where(p > 0, p, 1.0)) @ self._n
        return np.where(np.all(p > 0, axis=-1), out, -np.inf)

    def contains(self, r) -> np.ndarray:
        return min_eigenvalue(r, self.basis) >= -self.tol_psd

    def min_eigenvalue(self, r) -> np.ndarray:
        return min_eigenvalue(r, self.basis)

    def project(self, r) -> np.ndarray:
        return project_bloch(r, self.basis)

    def interior_reference(self) -> np.ndarray:
        """A strictly interior point (the maximally mixed state)."""
        return np.zeros(self.d)
