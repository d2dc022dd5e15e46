"""Accelerated hit-and-run sampling of a credible region.

Each step draws an isotropic direction, intersects the line through the
current point with the bounding ellipsoid, and draws a point on that chord
from the prior's one-dimensional marginal.  Rejected draws shrink the chord
toward the current point (which is always in the region), so every step
ends inside the region without discarding the chain position.

Chains are advanced as a vectorized batch: one row per chain, each with its
own ellipsoid and likelihood threshold.  This is how whole lambda grids are
sampled at once.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import ChainUnhealthyError, ConfigError, StepFailureError
from .region import RegionGeometry, chord_endpoints_batch

logger = logging.getLogger(__name__)

TAIL_CUTOFF = 8.0
BLOCK_SIZE = 1024


@dataclass(frozen=True)
class Prior:
    """Uniform prior, or a Gaussian prior with given mean and covariance.

    Either way the prior is restricted to the parameter space by the model's
    membership test.
    """

    kind: str = "uniform"
    mean: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "gaussian":
            mean = np.asarray(self.mean, dtype=float)
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (mean.size, mean.size):
                raise ConfigError("Gaussian prior covariance must be d x d")
            try:
                chol = np.linalg.cholesky(0.5 * (cov + cov.T))
            except np.linalg.LinAlgError as exc:
                raise ConfigError("Gaussian prior covariance must be positive definite") from exc
            eye = np.eye(mean.size)
            prec = np.linalg.solve(chol.T, np.linalg.solve(chol, eye))
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_precision", 0.5 * (prec + prec.T))

    @classmethod
    def uniform(cls) -> "Prior":
        return cls("uniform")

    @classmethod
    def gaussian(cls, mean, covariance) -> "Prior":
        return cls("gaussian", mean, covariance)

    @property
    def precision(self) -> np.ndarray:
        return self._precision

    def sample_on_chord(self, x, e, lo, hi, rng: np.random.Generator) -> np.ndarray:
        """Draw ``beta`` in ``[lo, hi]`` from the prior restricted to ``x + beta e``."""
        if self.kind == "uniform":
            return lo + (hi - lo) * rng.random(lo.shape)
        Pe = e @ self.precision
        tau = np.einsum("ni,ni->n", Pe, e)
        center = -np.einsum("ni,ni->n", Pe, x - self.mean) / tau
        sigma = 1.0 / np.sqrt(tau)
        z = truncated_standard_normal((lo - center) / sigma, (hi - center) / sigma, rng)
        return np.clip(center + sigma * z, lo, hi)


def truncated_standard_normal(a, b, rng: np.random.Generator) -> np.ndarray:
    """Standard normal draws truncated to ``[a, b]`` (elementwise).

    Inverse CDF, evaluated in whichever tail keeps the probabilities small;
    windows entirely beyond ``TAIL_CUTOFF`` use exponential rejection.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    u = rng.random(a.shape)
    plo, phi = ndtr(lo), ndtr(hi)
    z = ndtri(plo + u * (phi - plo))
    far = (hi < -TAIL_CUTOFF) | ~np.isfinite(z)
    if np.any(far):
        for i in np.flatnonzero(far):
            z[i] = -_tail_rejection(-hi[i], -lo[i], rng)
    z = np.clip(z, lo, hi)
    return np.where(flip, -z, z)


def _tail_rejection(a: float, b: float, rng: np.random.Generator) -> float:
    # standard normal on [a, b] with a > 0 large: exponential proposal
    while True:
        z = a + rng.exponential(1.0 / a)
        if z <= b and rng.random() <= np.exp(-0.5 * (z - a) ** 2):
            return z


@dataclass(frozen=True)
class ChainConfig:
    k_samples: int
    burn_in: Optional[int] = None
    thinning: int = 1
    seed: int = 0
    max_shrink_iters: int = 64
    failure_budget: float = 0.01
    n_batches: int = 50
    chains_per_region: int = 8

    def __post_init__(self):
        if self.k_samples < 1:
            raise ConfigError("k_samples must be >= 1")
        if self.chains_per_region < 1:
            raise ConfigError("chains_per_region must be >= 1")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if self.max_shrink_iters < 1:
            raise ConfigError("max_shrink_iters must be >= 1")

    def burn_in_for(self, d: int) -> int:
        return 10 * d if self.burn_in is None else self.burn_in


@dataclass
class RegionSample:
    """Chain output for one credible region."""

    points: np.ndarray
    log_l_values: np.ndarray
    accept_stats: np.ndarray
    n_stalls: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class ChainRun:
    """Output of a batch of chains.

    ``observable_mean`` and ``observable_stderr`` have shape
    ``(n_chains, n_observables)``; the standard errors come from batch means.
    """

    observable_mean: np.ndarray
    observable_stderr: np.ndarray
    shrink_hist: np.ndarray
    n_stalls: np.ndarray
    n_steps: int
    points: Optional[np.ndarray] = None
    log_l_values: Optional[np.ndarray] = None
    thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))


def _step_batch(x, ll, e, r_c, A, thr, model, prior, rng, max_shrink):
    """Advance every chain by one hit-and-run move.

    Returns new positions, their log-likelihoods, the number of draws each
    chain needed, and a mask of stalled chains (left in place).
    """
    n = x.shape[0]
    lo, hi = chord_endpoints_batch(x, e, r_c, A)
    new_x = x.copy()
    new_ll = ll.copy()
    iters = np.zeros(n, dtype=np.int64)
    accepted = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    while idx.size:
        beta = prior.sample_on_chord(x[idx], e[idx], lo[idx], hi[idx], rng)
        cand = x[idx] + beta[:, None] * e[idx]
        llc = model.log_likelihood(cand)
        ok = llc >= thr[idx]
        if np.any(ok):
            ok[ok] = model.contains(cand[ok])
        iters[idx] += 1
        acc = idx[ok]
        accepted[acc] = True
        new_x[acc] = cand[ok]
        new_ll[acc] = llc[ok]
        rej = ~ok
        b = beta[rej]
        ridx = idx[rej]
        lo[ridx] = np.where(b < 0, b, lo[ridx])
        hi[ridx] = np.where(b > 0, b, hi[ridx])
        idx = ridx[iters[ridx] < max_shrink]
    return new_x, new_ll, iters, ~accepted


def hit_and_run_step(r_ref, geom: RegionGeometry, model, prior: Prior, rng, max_shrink_iters: int = 64):
    """One accelerated hit-and-run move from ``r_ref`` (which must lie in the region)."""
    x = np.asarray(r_ref, dtype=float)[None, :]
    ll = np.atleast_1d(model.log_likelihood(x))
    v = rng.standard_normal(x.shape)
    e = v / np.linalg.norm(v, axis=1, keepdims=True)
    new_x, _, _, stalled = _step_batch(
        x, ll, e, geom.r_c[None], geom.A[None], np.array([geom.log_threshold]), model, prior, rng, max_shrink_iters
    )
    if stalled[0]:
        raise StepFailureError(f"no region point found after {max_shrink_iters} shrink iterations", point=x[0])
    return new_x[0]


def _new_chords(idx, x, r_c, A, rng):
    v = rng.standard_normal((idx.size, x.shape[1]))
    e = v / np.linalg.norm(v, axis=1, keepdims=True)
    lo, hi = chord_endpoints_batch(x[idx], e, r_c[idx], A[idx])
    return e, lo, hi


def _run_block(r_c, A, thr, starts, model, prior, cfg, rng, observables, keep_points):
    # Chains advance asynchronously: a chain that accepts (or stalls) starts
    # its next move in the same pass, so the working vector stays full.
    n, d = starts.shape
    x = np.array(starts, dtype=float)
    ll = np.asarray(model.log_likelihood(x), dtype=float)
    if np.any(ll < thr) or not np.all(model.contains(x)):
        raise ConfigError("every chain must start inside its region")
    burn = cfg.burn_in_for(d)
    k = cfg.k_samples
    thin = cfg.thinning
    total = burn + k * thin
    n_batches = max(1, min(cfg.n_batches, k))
    batch_of = (np.arange(k) * n_batches) // k
    batch_size = np.bincount(batch_of, minlength=n_batches).astype(float)
    n_obs = len(observables)
    sums = np.zeros((n, n_batches, n_obs))
    hist = np.zeros((n, cfg.max_shrink_iters + 1), dtype=np.int64)
    stalls = np.zeros(n, dtype=np.int64)
    pts = np.empty((k, n, d)) if keep_points else None
    lls = np.empty((k, n)) if keep_points else None

    done = np.zeros(n, dtype=np.int64)
    draws = np.zeros(n, dtype=np.int64)
    all_idx = np.arange(n)
    e = np.empty((n, d))
    lo = np.empty(n)
    hi = np.empty(n)
    e[:], lo[:], hi[:] = _new_chords(all_idx, x, r_c, A, rng)
    idx = all_idx
    while idx.size:
        beta = prior.sample_on_chord(x[idx], e[idx], lo[idx], hi[idx], rng)
        cand = x[idx] + beta[:, None] * e[idx]
        llc = model.log_likelihood(cand)
        ok = llc >= thr[idx]
        if np.any(ok):
            ok[ok] = model.contains(cand[ok])
        draws[idx] += 1
        acc = idx[ok]
        x[acc] = cand[ok]
        ll[acc] = llc[ok]
        rej = ~ok
        ridx = idx[rej]
        b = beta[rej]
        lo[ridx] = np.where(b < 0, b, lo[ridx])
        hi[ridx] = np.where(b > 0, b, hi[ridx])
        stalled = ridx[draws[ridx] >= cfg.max_shrink_iters]
        stalls[stalled] += 1
        fin = np.concatenate([acc, stalled])
        if fin.size:
            fin.sort()
            hist[fin, np.minimum(draws[fin], cfg.max_shrink_iters)] += 1
            draws[fin] = 0
            step = done[fin] - burn
            rec = fin[(step >= 0) & (step % thin == thin - 1)]
            if rec.size:
                slot = (done[rec] - burn) // thin
                if n_obs:
                    vals = np.stack([f(x[rec], ll[rec], rec) for f in observables], axis=-1)
                    sums[rec, batch_of[slot], :] += vals
                if keep_points:
                    pts[slot, rec] = x[rec]
                    lls[slot, rec] = ll[rec]
            done[fin] += 1
            more = fin[done[fin] < total]
            if more.size:
                e[more], lo[more], hi[more] = _new_chords(more, x, r_c, A, rng)
        idx = all_idx[done < total]

    budget = cfg.failure_budget * total
    if np.any(stalls > budget):
        raise ChainUnhealthyError(
            f"{int(stalls.max())} stalled steps out of {total} exceed the {cfg.failure_budget:.0%} budget"
        )
    bmeans = sums / batch_size[None, :, None]
    mean = np.einsum("nbo,b->no", bmeans, batch_size) / k
    if n_batches > 1:
        var_b = np.einsum("nbo,b->no", (bmeans - mean[:, None, :]) ** 2, batch_size) / (n_batches - 1)
        stderr = np.sqrt(var_b / k)
    else:
        stderr = np.full_like(mean, np.nan)
    return mean, stderr, hist, stalls, total, pts, lls


def run_chains(
    r_c: np.ndarray,
    A: np.ndarray,
    thresholds: np.ndarray,
    starts: np.ndarray,
    model,
    prior: Prior,
    cfg: ChainConfig,
    observables: Sequence[Callable] = (),
    keep_points: bool = False,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> ChainRun:
    """Run independent chains, one per row of ``r_c``/``A``/``thresholds``/``starts``.

    Chains are grouped in fixed blocks of ``block_size``; block ``i`` draws
    from the ``i``-th child of ``SeedSequence(cfg.seed)``, so results do not
    depend on ``threads``.  Each observable maps ``(points, log_l)`` to one
    value per chain and is averaged over recorded steps.
    """
    r_c = np.atleast_2d(r_c)
    A = np.asarray(A).reshape(r_c.shape[0], r_c.shape[1], r_c.shape[1])
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    starts = np.atleast_2d(starts)
    n = r_c.shape[0]
    blocks = [np.arange(i, min(i + block_size, n)) for i in range(0, n, block_size)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(blocks))

    def work(i):
        sl = blocks[i]
        obs = [(lambda x, ll, rows, f=f, sl=sl: f(x, ll, sl[rows])) for f in observables]
        return _run_block(
            r_c[sl], A[sl], thresholds[sl], starts[sl], model, prior, cfg,
            np.random.default_rng(seeds[i]), obs, keep_points,
        )

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(blocks))))
    else:
        results = [work(i) for i in range(len(blocks))]
    mean = np.concatenate([r[0] for r in results])
    stderr = np.concatenate([r[1] for r in results])
    hist = np.concatenate([r[2] for r in results])
    stalls = np.concatenate([r[3] for r in results])
    pts = np.concatenate([r[5] for r in results], axis=1) if keep_points else None
    lls = np.concatenate([r[6] for r in results], axis=1) if keep_points else None
    return ChainRun(mean, stderr, hist, stalls, results[0][4], pts, lls, thresholds)


def sample_region(geom: RegionGeometry, model, prior: Prior, cfg: ChainConfig, start) -> RegionSample:
    """Run one chain in ``R_lambda`` from ``start`` and keep every recorded point."""
    run = run_chains(
        geom.r_c[None], geom.A[None], np.array([geom.log_threshold]), np.asarray(start, dtype=float)[None],
        model, prior, cfg, keep_points=True,
    )
    return RegionSample(
        points=run.points[:, 0, :],
        log_l_values=run.log_l_values[:, 0],
        accept_stats=run.shrink_hist[0],
        n_stalls=int(run.n_stalls[0]),
    )


def sample_regions(geoms: Sequence[RegionGeometry], model, prior: Prior, cfg: ChainConfig, starts, threads: int = 1):
    """One chain per geometry, sampled as a vectorized batch; returns a list of samples."""
    run = run_chains(
        np.stack([g.r_c for g in geoms]), np.stack([g.A for g in geoms]),
        np.array([g.log_threshold for g in geoms]), np.asarray(starts, dtype=float),
        model, prior, cfg, keep_points=True, threads=threads,
    )
    return [
        RegionSample(run.points[:, i, :], run.log_l_values[:, i], run.shrink_hist[i], int(run.n_stalls[i]))
        for i in range(len(geoms))
    ]
