"""Region averages, size and credibility curves, and closed-form asymptotics.

The size ``S`` of the region ``R_lambda`` follows from the region average
``u_lambda`` of ``log L - log(lambda L_max)`` through

    d(log y)/d lambda = -1 / (lambda u_lambda),    y = u S,

and the credibility follows from ``S`` alone:

    C_lambda = (lambda S_lambda + int_lambda^1 S) / int_0^1 S.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import betainc, gammaincc, gammaln
from sklearn.isotonic import IsotonicRegression

from .exceptions import DataQualityError, DomainError, OutOfRegimeError
from .hitrun import ChainConfig, Prior, RegionSample, run_chains
from .region import DEFAULT_INFLATION, build_geometry, effective_lambda, find_interior_start, fisher_inverse
from .tomography import Case, MlFit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing lambda values in (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise DomainError("lambda grid must be a non-empty 1-D array")
        if np.any(v <= 0) or np.any(v >= 1):
            raise DomainError("lambda values must lie strictly inside (0, 1)")
        if np.any(np.diff(v) <= 0):
            raise DomainError("lambda grid must be strictly increasing")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def log_spaced(cls, lo: float = 1e-6, hi: float = 1 - 1e-3, n: int = 200) -> "LambdaGrid":
        return cls(np.geomspace(lo, hi, n))

    @classmethod
    def loglog_spaced(cls, lo: float = 1e-6, hi: float = 1 - 1e-3, n: int = 200) -> "LambdaGrid":
        """Uniform in ``log(-log lambda)``: dense near both 0 and 1."""
        s = np.linspace(np.log(-np.log(lo)), np.log(-np.log(hi)), n)
        return cls(np.exp(-np.exp(s)))

    @classmethod
    def default(cls) -> "LambdaGrid":
        return cls.loglog_spaced()


@dataclass
class CertificationResult:
    grid: LambdaGrid
    u: np.ndarray
    s_rel: np.ndarray
    c: np.ndarray
    capacity_p2: np.ndarray
    mc_errors: dict = field(default_factory=dict)
    case: Optional[Case] = None
    r_ml: Optional[np.ndarray] = None
    log_l_max: Optional[float] = None

    def as_table(self) -> dict:
        """Column name -> array, in the fixed CSV column order."""
        return {
            "lambda": self.grid.values,
            "u": self.u,
            "u_stderr": self.mc_errors.get("u", np.full(len(self.grid), np.nan)),
            "s_rel": self.s_rel,
            "s_rel_stderr": self.mc_errors.get("s_rel", np.full(len(self.grid), np.nan)),
            "C": self.c,
            "C_stderr": self.mc_errors.get("c", np.full(len(self.grid), np.nan)),
            "S_HS": self.capacity_p2,
            "S_HS_stderr": self.mc_errors.get("capacity_p2", np.full(len(self.grid), np.nan)),
            "case": self.case.value if self.case is not None else "",
        }


# -- Monte Carlo averages -----------------------------------------------------


def integrated_autocorr_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2 or np.allclose(x, x[0]):
        return 1.0
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) < c * taus
    m = int(np.argmin(window)) if not np.all(window) else n - 1
    return float(max(taus[m], 1.0))


def mean_and_stderr(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataQualityError("cannot average an empty sample")
    if values.size == 1:
        return float(values[0]), 0.0
    tau = integrated_autocorr_time(values)
    ess = values.size / tau
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(ess))


def u_average(sample: RegionSample, lam: float, log_l_max: float) -> tuple[float, float]:
    """Region average of ``log L - log(lambda L_max)`` and its standard error."""
    if len(sample) == 0:
        raise DataQualityError("empty region sample")
    return mean_and_stderr(sample.log_l_values - np.log(lam) - log_l_max)


def distance_p(points, r_ml, p: float = 2.0, mode: str = "power") -> np.ndarray:
    """``sum_j |r_j - r_ml_j|^p`` (``mode="power"``) or its ``1/p`` root (``"root"``)."""
    if p <= 0:
        raise DomainError(f"p must be positive, got {p}")
    if mode not in ("power", "root"):
        raise DomainError(f"mode must be 'power' or 'root', got {mode!r}")
    s = np.sum(np.abs(np.asarray(points) - r_ml) ** p, axis=-1)
    return s if mode == "power" else s ** (1.0 / p)


def capacity_average(sample: RegionSample, r_ml, p: float = 2.0, mode: str = "power") -> float:
    """Region average of the l_p distance to the ML point."""
    if len(sample) == 0:
        raise DataQualityError("empty region sample")
    return float(distance_p(sample.points, r_ml, p, mode).mean())


# -- size and credibility -----------------------------------------------------


def solve_size_ode(grid: LambdaGrid, u, step: str = "loglog") -> np.ndarray:
    """Relative region size ``S(lambda)/S(lambda_1)`` from region averages ``u``.

    Forward Euler in ``log y``.  With ``step="loglog"`` (default) the step
    variable is ``s = log(-log lambda)``, where the right-hand side
    ``-log(lambda)/u`` is bounded and slowly varying over the whole of (0, 1).
    ``step="lambda"`` steps directly in lambda, ``-d lambda/(lambda u)``,
    which is first order too but far less accurate near ``lambda = 1``.
    """
    lam = grid.values
    u = np.asarray(u, dtype=float)
    if u.shape != lam.shape:
        raise DomainError("u must have one value per grid point")
    if np.any(~np.isfinite(u)) or np.any(u <= 0):
        raise DataQualityError("region averages u must be positive and finite")
    if step == "loglog":
        L = -np.log(lam)
        incr = (L / u)[:-1] * np.diff(np.log(L))
    elif step == "lambda":
        incr = -np.diff(lam) / (lam * u)[:-1]
    else:
        raise DomainError(f"unknown step variable {step!r}")
    log_y = np.concatenate([[0.0], np.cumsum(incr)])
    log_s = log_y - np.log(u)
    return np.exp(log_s - log_s[0])


def _content_below(lam1: float, s1: float, exponent: float) -> float:
    # int_0^lam1 S with S = s1 (L/L1)^a, L = -log lambda: s1 L1^-a Gamma(a+1, L1)
    L1 = -np.log(lam1)
    a = exponent
    return float(s1 * np.exp(gammaln(a + 1.0) - a * np.log(L1)) * gammaincc(a + 1.0, L1))


def credibility(grid: LambdaGrid, s_rel, s_stderr=None, below: str = "power") -> np.ndarray:
    """Credibility of each region from the size curve (trapezoidal quadrature).

    ``S`` is tapered linearly to zero at ``lambda = 1``.  Below the first
    grid point it follows the local power law ``S ~ (-log lambda)^a`` fitted
    to the first two points (``below="power"``), or is held at ``s_rel[0]``
    (``below="constant"``).
    """
    lam = grid.values
    S = np.asarray(s_rel, dtype=float)
    if S.shape != lam.shape:
        raise DomainError("s_rel must have one value per grid point")
    if np.any(S < 0):
        raise DataQualityError("region sizes must be non-negative")
    if s_stderr is not None:
        rise = np.diff(S) - 3.0 * np.hypot(s_stderr[1:], s_stderr[:-1])
        if np.any(rise > 0):
            warnings.warn("size curve increases beyond Monte Carlo noise", RuntimeWarning, stacklevel=2)
    pieces = 0.5 * (S[1:] + S[:-1]) * np.diff(lam)
    tail = 0.5 * S[-1] * (1.0 - lam[-1])
    above = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]]) + tail
    if below == "power" and lam.size > 1 and S[0] > 0 and S[1] > 0:
        a = np.log(S[0] / S[1]) / np.log(np.log(lam[0]) / np.log(lam[1]))
        head = _content_below(lam[0], S[0], float(np.clip(a, 0.0, 50.0)))
    elif below in ("power", "constant"):
        head = S[0] * lam[0]
    else:
        raise DomainError(f"unknown extension {below!r}")
    total = head + above[0]
    c = np.clip((lam * S + above) / total, 0.0, 1.0)
    if np.all(np.diff(S) <= 0):
        # exact arithmetic gives a nonincreasing C here; remove rounding-level rises
        c = np.minimum.accumulate(c)
    return c


def bootstrap_curves(grid: LambdaGrid, u, u_stderr, n_boot: int = 200, seed: int = 0):
    """Parametric-bootstrap standard errors of ``(s_rel, C)`` given noisy ``u``."""
    u = np.asarray(u, dtype=float)
    err = np.nan_to_num(np.asarray(u_stderr, dtype=float))
    rng = np.random.default_rng(seed)
    s_reps = np.empty((n_boot, u.size))
    c_reps = np.empty((n_boot, u.size))
    for b in range(n_boot):
        ub = np.maximum(u + err * rng.standard_normal(u.size), 1e-3 * u)
        s_reps[b] = solve_size_ode(grid, ub)
        c_reps[b] = credibility(grid, s_reps[b])
    return s_reps.std(axis=0, ddof=1), c_reps.std(axis=0, ddof=1)


def credibility_stderr(grid: LambdaGrid, u, u_stderr, n_boot: int = 200, seed: int = 0) -> np.ndarray:
    """Parametric-bootstrap standard error of the credibility curve."""
    return bootstrap_curves(grid, u, u_stderr, n_boot, seed)[1]


def monotone_size(s_rel, s_stderr) -> np.ndarray:
    """Project a noisy size curve onto nonincreasing curves with ``s_rel[0] = 1``.

    Weighted isotonic regression of ``log s_rel`` with weights from the
    relative standard errors.
    """
    s_rel = np.asarray(s_rel, dtype=float)
    rel = np.asarray(s_stderr, dtype=float) / s_rel
    floor = max(float(np.nanmin(rel[rel > 0])) if np.any(rel > 0) else 1.0, 1e-12) * 1e-3
    w = 1.0 / np.maximum(np.nan_to_num(rel, nan=1.0), floor) ** 2
    log_s = isotonic_decreasing(np.log(s_rel), w)
    return np.exp(log_s - log_s[0])


def isotonic_decreasing(y, w=None) -> np.ndarray:
    """Least-squares nonincreasing fit (pool-adjacent-violators)."""
    x = np.arange(len(y))
    return IsotonicRegression(increasing=False).fit_transform(x, y, sample_weight=w)


# -- closed-form asymptotics --------------------------------------------------


def unit_ball_volume(d: float) -> float:
    """``pi^(d/2) / Gamma(d/2 + 1)``."""
    return float(np.exp(0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)))


def cap_volume(d: int, l: float, x: int) -> float:
    """``V_d I_{(1-l)/2}((d+x)/2, (d+x)/2)``.

    For ``x = 1`` this is the volume of the unit-ball cap ``{|z| <= 1, z_1 >= l}``.
    """
    a = 0.5 * (d + x)
    return unit_ball_volume(d) * float(betainc(a, a, 0.5 * (1.0 - l)))


def analytic_case_a(f_ml, d: int, lam: float) -> tuple[float, float]:
    """Squared-HS capacity and ``u`` for an interior ML point (Gaussian likelihood)."""
    if not 0.0 < lam <= 1.0:
        raise DomainError(f"lambda must lie in (0, 1], got {lam}")
    neg_log = -np.log(lam)
    s2 = float(np.trace(fisher_inverse(np.asarray(f_ml, dtype=float)))) * neg_log / (0.5 * d + 1.0)
    u = 2.0 * neg_log / (d + 2.0)
    return s2, u


def analytic_case_b(fit: MlFit, lam: float, u_form: str = "cap") -> tuple[float, float]:
    """Squared-HS capacity and ``u`` for a boundary ML point.

    The region is modeled as the cap cut from the Gaussian ellipsoid by the
    hyperplane through the ML point tangent to its isocontour.

    ``u_form="cap"`` converts the cap average of ``log L - log(lambda' L_max)``
    to the ``lambda`` reference by subtracting ``log(lambda/lambda')``, which
    is the exact cap average.  ``u_form="ratio"`` applies the multiplicative
    conversion ``log(lambda L_max)/log(lambda' L_max)`` instead.
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if u_form not in ("cap", "ratio"):
        raise DomainError(f"unknown u_form {u_form!r}")
    F = np.asarray(fit.f_ml, dtype=float)
    g = np.asarray(fit.g_ml, dtype=float)
    d = F.shape[0]
    finv = fisher_inverse(F)
    q = 0.5 * float(g @ finv @ g)
    log_lp = float(np.log(lam)) - q
    l = float(np.sqrt(q / -log_lp))
    if l >= 1.0:
        raise OutOfRegimeError(f"cap parameter l={l:.4f} >= 1")
    n1 = cap_volume(d, l, 1)
    n3 = cap_volume(d, l, 3)
    if l > 0.0:
        coeff = -unit_ball_volume(d - 1) / (l * (d + 1.0)) * (1.0 - l * l) ** (0.5 * (d + 1)) + n1
        m = coeff * (finv @ g)
    else:
        m = np.zeros(d)
    Mbar = (-log_lp) / (d + 2.0) * n3 * finv + 0.5 * np.outer(m, g @ finv)
    s2 = 2.0 * float(np.trace(Mbar)) / n1
    bracket = -log_lp + (float(g @ m) - float(np.trace(F @ Mbar))) / n1
    if u_form == "cap":
        u = bracket - q
    else:
        log_l_max = fit.log_l_max
        u = bracket * (np.log(lam) + log_l_max) / (log_lp + log_l_max)
    return s2, float(u)


def analytic_curves(fit: MlFit, grid: LambdaGrid, u_form: str = "cap") -> dict:
    """Closed-form capacity, ``u`` and the credibility implied by that ``u``."""
    lam = grid.values
    if fit.case == Case.A:
        vals = [analytic_case_a(fit.f_ml, fit.d, x) for x in lam]
    else:
        vals = [analytic_case_b(fit, x, u_form=u_form) for x in lam]
    s2 = np.array([v[0] for v in vals])
    u = np.array([v[1] for v in vals])
    c = credibility(grid, solve_size_ode(grid, u))
    return {"lambda": lam, "s2_analytic": s2, "u_analytic": u, "C_analytic": c}


# -- full pipeline ------------------------------------------------------------


def certify(
    fit: MlFit,
    model,
    grid: Optional[LambdaGrid] = None,
    prior: Optional[Prior] = None,
    cfg: Optional[ChainConfig] = None,
    inflation: float = DEFAULT_INFLATION,
    smooth: bool = False,
    threads: int = 1,
    n_boot: int = 200,
) -> CertificationResult:
    """Sample every region on the grid and assemble ``u``, ``S``, ``C`` and ``S_HS``."""
    grid = LambdaGrid.default() if grid is None else grid
    prior = Prior.uniform() if prior is None else prior
    cfg = ChainConfig(k_samples=2000) if cfg is None else cfg
    geoms = [build_geometry(fit, x, inflation) for x in grid.values]
    starts = np.stack([find_interior_start(fit, g, model) for g in geoms])
    thresholds = np.array([g.log_threshold for g in geoms])
    r_ml = np.asarray(fit.r_ml, dtype=float)

    # several short chains per region keep the vectorized batch wide
    n_rep = cfg.chains_per_region
    n_lam = len(grid)
    rows = np.tile(np.arange(n_lam), n_rep)
    thr_rows = thresholds[rows]

    def u_obs(x, ll, sl):
        return ll - thr_rows[sl]

    def hs_obs(x, ll, sl):
        return np.sum((x - r_ml) ** 2, axis=1)

    run = run_chains(
        np.stack([g.r_c for g in geoms])[rows], np.stack([g.A for g in geoms])[rows], thr_rows, starts[rows],
        model, prior, replace(cfg, k_samples=-(-cfg.k_samples // n_rep)),
        observables=(u_obs, hs_obs), threads=threads,
    )
    mean = run.observable_mean.reshape(n_rep, n_lam, -1).mean(axis=0)
    stderr = np.sqrt((run.observable_stderr.reshape(n_rep, n_lam, -1) ** 2).sum(axis=0)) / n_rep
    stalls = run.n_stalls.reshape(n_rep, n_lam).sum(axis=0)
    u, cap = mean[:, 0], mean[:, 1]
    u_err, cap_err = stderr[:, 0], stderr[:, 1]
    if smooth:
        u = isotonic_decreasing(u, 1.0 / np.maximum(u_err, 1e-300) ** 2)
    s_rel = solve_size_ode(grid, u)
    s_err, c_err = bootstrap_curves(grid, u, u_err, n_boot=n_boot, seed=cfg.seed)
    credibility(grid, s_rel, s_err)  # warns when the raw curve rises beyond noise
    s_rel = monotone_size(s_rel, s_err)
    c = credibility(grid, s_rel)
    return CertificationResult(
        grid=grid,
        u=u,
        s_rel=s_rel,
        c=c,
        capacity_p2=cap,
        mc_errors={"u": u_err, "capacity_p2": cap_err, "c": c_err, "s_rel": s_err, "stalls": stalls},
        case=fit.case,
        r_ml=r_ml,
        log_l_max=fit.log_l_max,
    )
