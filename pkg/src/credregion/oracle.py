"""Brute-force references for validating the in-region pipeline.

Two kinds of ground truth live here: conventional Monte Carlo filtering over
the whole state space (feasible only for qubits and qutrits), and an exactly
Gaussian likelihood on a box whose region averages, sizes and credibilities
are known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .bloch import build_basis, is_physical, purity_radius
from .certify import LambdaGrid, analytic_case_a
from .exceptions import DomainError, FeasibilityError
from .tomography import Case, MlFit

ORACLE_MAX_D = 3


@dataclass
class OracleResult:
    grid: LambdaGrid
    s_abs: np.ndarray
    c: np.ndarray
    n_total: int
    n_in: np.ndarray
    s_stderr: np.ndarray
    c_stderr: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        return self.n_in > 0

    def as_table(self) -> dict:
        return {
            "lambda": self.grid.values,
            "s_abs": self.s_abs,
            "s_abs_stderr": self.s_stderr,
            "C": self.c,
            "C_stderr": self.c_stderr,
            "n_in": self.n_in,
            "usable": self.usable.astype(int),
        }


def uniform_ball(n: int, d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.random(n) ** (1.0 / d))[:, None]


def _state_chunks(D: int, n: int, rng: np.random.Generator, chunk: int):
    if D > ORACLE_MAX_D:
        raise FeasibilityError(f"uniform state-space sampling is limited to D <= {ORACLE_MAX_D}, got D={D}")
    basis = build_basis(D)
    radius = purity_radius(D)
    drawn = 0
    produced = 0
    while produced < n:
        m = min(chunk, 2 * (n - produced) + 16)
        cand = uniform_ball(m, basis.d, radius, rng)
        drawn += m
        keep = cand if D == 2 else cand[is_physical(cand, basis, 0.0)]
        keep = keep[: n - produced]
        produced += keep.shape[0]
        yield keep, drawn


def sample_state_space_uniform(D: int, n: int, seed: int, return_acceptance: bool = False):
    """``n`` Bloch vectors uniform over the state space (flat measure), by rejection from the purity ball."""
    rng = np.random.default_rng(seed)
    parts = []
    drawn = 0
    for keep, drawn in _state_chunks(D, n, rng, chunk=max(n, 1024)):
        parts.append(keep)
    pts = np.concatenate(parts) if parts else np.empty((0, D * D - 1))
    if return_acceptance:
        return pts, pts.shape[0] / drawn
    return pts


class _Accumulator:
    def __init__(self, grid: LambdaGrid, log_l_max: float):
        self.log_thr = np.log(grid.values) + log_l_max
        self.log_l_max = log_l_max
        n = len(grid)
        self.n_in = np.zeros(n, dtype=np.int64)
        self.w_in = np.zeros(n)
        self.w2_in = np.zeros(n)
        self.w_all = 0.0
        self.w2_all = 0.0
        self.n_total = 0

    def add(self, log_l: np.ndarray) -> None:
        w = np.exp(log_l - self.log_l_max)
        order = np.argsort(log_l)
        ll_sorted = log_l[order]
        w_sorted = w[order]
        # suffix sums over points with log L >= threshold
        cw = np.concatenate([np.cumsum(w_sorted[::-1])[::-1], [0.0]])
        cw2 = np.concatenate([np.cumsum((w_sorted**2)[::-1])[::-1], [0.0]])
        first = np.searchsorted(ll_sorted, self.log_thr, side="left")
        self.n_in += log_l.size - first
        self.w_in += cw[first]
        self.w2_in += cw2[first]
        self.w_all += cw[0]
        self.w2_all += cw2[0]
        self.n_total += log_l.size

    def result(self, grid: LambdaGrid) -> OracleResult:
        n = max(self.n_total, 1)
        s = self.n_in / n
        c = self.w_in / self.w_all if self.w_all > 0 else np.zeros_like(self.w_in)
        # delta-method variance of the self-normalized ratio sum_in w / sum w
        var_c = ((1 - c) ** 2 * self.w2_in + c**2 * (self.w2_all - self.w2_in)) / max(self.w_all, 1e-300) ** 2
        return OracleResult(
            grid=grid,
            s_abs=s,
            c=c,
            n_total=self.n_total,
            n_in=self.n_in.copy(),
            s_stderr=np.sqrt(s * (1 - s) / n),
            c_stderr=np.sqrt(np.maximum(var_c, 0.0)),
        )


def filter_certify(states, model, grid: LambdaGrid, log_l_max: float) -> OracleResult:
    """Size and credibility by filtering a uniform sample of the whole parameter space."""
    states = np.atleast_2d(states)
    acc = _Accumulator(grid, log_l_max)
    acc.add(np.asarray(model.log_likelihood(states), dtype=float))
    return acc.result(grid)


def oracle_certify(D: int, n: int, seed: int, model, grid: LambdaGrid, log_l_max: float, chunk: int = 1_000_000):
    """Streaming version of :func:`filter_certify` over ``n`` fresh uniform states."""
    rng = np.random.default_rng(seed)
    acc = _Accumulator(grid, log_l_max)
    for keep, _ in _state_chunks(D, n, rng, chunk):
        acc.add(np.asarray(model.log_likelihood(keep), dtype=float))
    return acc.result(grid)


class GaussianToyModel:
    """Exactly Gaussian log-likelihood on the box ``|r_i - center_i| <= box_halfwidth``.

    ``log L(r) = log_l_max - (r - center)^T F (r - center) / 2``.  While the
    region stays inside the box its size, credibility, ``u`` and squared
    capacity are all known in closed form.
    """

    def __init__(self, d: int, F=None, box_halfwidth: float = 10.0, center=None, log_l_max: float = 0.0):
        if d < 1 or d > 8:
            raise DomainError(f"toy model supports 1 <= d <= 8, got {d}")
        self.d = int(d)
        self.F = np.eye(d) if F is None else np.asarray(F, dtype=float)
        self.center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        self.box_halfwidth = float(box_halfwidth)
        self.log_l_max = float(log_l_max)
        self.fit = MlFit(
            r_ml=self.center.copy(),
            p_ml=None,
            log_l_max=self.log_l_max,
            g_ml=np.zeros(d),
            f_ml=self.F,
            case=Case.A,
            rank=None,
        )

    def log_likelihood(self, r) -> np.ndarray:
        delta = np.asarray(r, dtype=float) - self.center
        return self.log_l_max - 0.5 * np.einsum("...i,ij,...j->...", delta, self.F, delta)

    def contains(self, r) -> np.ndarray:
        return np.all(np.abs(np.asarray(r) - self.center) <= self.box_halfwidth, axis=-1)

    def interior_reference(self) -> np.ndarray:
        return self.center.copy()

    def region_inside_box(self, lam: float) -> bool:
        """Whether the ellipsoid of level ``lam`` fits in the box."""
        finv_diag = np.diag(np.linalg.inv(self.F))
        return bool(np.all(np.sqrt(-2.0 * np.log(lam) * finv_diag) <= self.box_halfwidth))

    def true_credibility(self, lam) -> np.ndarray:
        return chi2.cdf(-2.0 * np.log(lam), self.d)

    def true_u(self, lam) -> np.ndarray:
        return -2.0 * np.log(lam) / (self.d + 2.0)

    def true_s2(self, lam) -> np.ndarray:
        return np.array([analytic_case_a(self.F, self.d, x)[0] for x in np.atleast_1d(lam)])

    def true_size(self, lam) -> np.ndarray:
        """Prior content of the region as a fraction of the box."""
        from .certify import unit_ball_volume

        lam = np.asarray(lam, dtype=float)
        vol = unit_ball_volume(self.d) * (-2.0 * np.log(lam)) ** (0.5 * self.d) / np.sqrt(np.linalg.det(self.F))
        return vol / (2.0 * self.box_halfwidth) ** self.d


def cap_average_oracle(F, g, lam: float, n: int, seed: int = 0, chunk: int = 1_000_000) -> dict:
    """Brute-force averages over the Gaussian cap region of a boundary ML point.

    The log-likelihood is ``g.r - r^T F r / 2`` relative to its value at the
    ML point ``r = 0``; the region is its ``lambda`` level set cut by the
    half-space ``g.r <= 0``.  Points are drawn uniformly in the ellipsoid by
    rejection from its bounding box and kept on the cap side.  Returns the
    mean squared distance to the ML point (``s2``), the mean of
    ``log L - log(lambda L_max)`` (``u``), their standard errors and the
    number of cap points.
    """
    F = np.asarray(F, dtype=float)
    g = np.asarray(g, dtype=float)
    d = F.shape[0]
    finv = np.linalg.inv(F)
    r_c = finv @ g
    q = 0.5 * float(g @ r_c)
    eps = -2.0 * (np.log(lam) - q)
    chol = np.linalg.cholesky(F)
    rng = np.random.default_rng(seed)
    sums = np.zeros(4)
    count = 0
    drawn = 0
    while drawn < n:
        m = min(chunk, n - drawn)
        drawn += m
        z = rng.uniform(-1.0, 1.0, (m, d))
        z = z[np.einsum("ij,ij->i", z, z) <= 1.0]
        r = r_c + np.sqrt(eps) * np.linalg.solve(chol.T, z.T).T
        r = r[r @ g <= 0.0]
        s2 = np.einsum("ij,ij->i", r, r)
        ll = r @ g - 0.5 * np.einsum("ij,jk,ik->i", r, F, r)
        u = ll - np.log(lam)
        sums += [s2.sum(), (s2**2).sum(), u.sum(), (u**2).sum()]
        count += r.shape[0]
    if count == 0:
        raise DomainError("no cap points drawn")
    s2_mean, u_mean = sums[0] / count, sums[2] / count
    return {
        "s2": s2_mean,
        "s2_stderr": float(np.sqrt(max(sums[1] / count - s2_mean**2, 0.0) / count)),
        "u": u_mean,
        "u_stderr": float(np.sqrt(max(sums[3] / count - u_mean**2, 0.0) / count)),
        "n_cap": count,
    }


def gradient_for_cap(F, lam: float, l: float, direction=None) -> np.ndarray:
    """Score vector ``g`` along ``direction`` giving cap parameter ``l`` at level ``lam``."""
    F = np.asarray(F, dtype=float)
    d = F.shape[0]
    e = np.eye(d)[0] if direction is None else np.asarray(direction, dtype=float)
    e = e / np.sqrt(e @ np.linalg.inv(F) @ e)
    # l^2 = q / (q - log lam)  with  q = g^T F^-1 g / 2
    q = l * l * (-np.log(lam)) / (1.0 - l * l)
    return np.sqrt(2.0 * q) * e


def gaussian_toy_model(d: int, F=None, box_halfwidth: float = 10.0) -> GaussianToyModel:
    return GaussianToyModel(d, F, box_halfwidth)
