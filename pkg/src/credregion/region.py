"""Per-lambda geometry of the credible region R_lambda = {r : L(r) >= lambda L_max}.

The Gaussian expansion of the log-likelihood about the ML point,
``log L ~ log L_max + g.(r - r_ml) - (r - r_ml)^T F (r - r_ml)/2``, has
isocontours centered at ``r_c = r_ml + F^{-1} g``.  Its lambda-level set is
the ellipsoid ``(r - r_c)^T F (r - r_c) <= -2 log lambda'`` with
``log lambda' = log lambda - g^T F^{-1} g / 2``.  That ellipsoid (optionally
inflated) bounds the sampler's chords; membership itself always uses the
exact likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, EmptyRegionError, IllConditionedFisherError, ReferenceOutsideError
from .tomography import Case, MlFit

DEFAULT_INFLATION = 2.0
EIG_FLOOR = 1e-12


def fisher_inverse(f_ml: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Inverse of a symmetric Fisher matrix via eigendecomposition.

    Eigenvalues below ``floor * max_eigenvalue`` are raised to that floor.
    """
    f = 0.5 * (f_ml + f_ml.T)
    w, v = np.linalg.eigh(f)
    if w[-1] <= 0 or not np.all(np.isfinite(w)):
        raise IllConditionedFisherError("Fisher matrix is not positive definite")
    w = np.maximum(w, floor * w[-1])
    return (v / w) @ v.T


@dataclass(frozen=True)
class RegionGeometry:
    lam: float
    lambda_prime: float
    r_c: np.ndarray
    A: np.ndarray
    l: float
    inflation: float
    log_l_max: float

    @property
    def log_threshold(self) -> float:
        """Membership threshold ``log(lambda L_max)``."""
        return float(np.log(self.lam) + self.log_l_max)

    @property
    def d(self) -> int:
        return self.r_c.shape[0]

    def quadratic_form(self, r) -> np.ndarray:
        delta = np.asarray(r) - self.r_c
        return np.einsum("...i,ij,...j->...", delta, self.A, delta)


def effective_lambda(fit: MlFit, lam: float) -> tuple[float, float]:
    """Return ``(log lambda', l)`` for the fit at level ``lam``."""
    if fit.case == Case.A:
        return float(np.log(lam)), 0.0
    q = 0.5 * float(fit.g_ml @ fisher_inverse(fit.f_ml) @ fit.g_ml)
    log_lp = float(np.log(lam)) - q
    return log_lp, float(np.sqrt(q / -log_lp))


def build_geometry(fit: MlFit, lam: float, inflation: float = DEFAULT_INFLATION) -> RegionGeometry:
    """Bounding-ellipsoid geometry of ``R_lam``.

    ``inflation`` scales the semi-axes linearly (``A`` is divided by
    ``inflation**2``).
    """
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam}")
    if inflation < 1.0:
        raise DomainError(f"inflation must be >= 1, got {inflation}")
    finv = fisher_inverse(fit.f_ml)
    if fit.case == Case.A:
        r_c = np.array(fit.r_ml, dtype=float)
    else:
        r_c = fit.r_ml + finv @ fit.g_ml
    log_lp, l = effective_lambda(fit, lam)
    A = fit.f_ml / (-2.0 * log_lp) / inflation**2
    return RegionGeometry(
        lam=float(lam),
        lambda_prime=float(np.exp(log_lp)),
        r_c=r_c,
        A=0.5 * (A + A.T),
        l=l,
        inflation=float(inflation),
        log_l_max=float(fit.log_l_max),
    )


def membership(r, geom: RegionGeometry, model) -> np.ndarray:
    """Exact region test: inside the parameter space and ``log L >= log(lambda L_max)``."""
    r = np.asarray(r, dtype=float)
    inside = np.asarray(model.contains(r))
    ll = np.asarray(model.log_likelihood(r))
    return inside & (ll >= geom.log_threshold)


def chord_endpoints(r_ref, e_v, geom: RegionGeometry) -> tuple[float, float]:
    """Roots ``mu_- < 0 < mu_+`` where ``r_ref + mu e_v`` meets the ellipsoid boundary."""
    delta = np.asarray(r_ref, dtype=float) - geom.r_c
    e_v = np.asarray(e_v, dtype=float)
    Ae = geom.A @ e_v
    a = float(e_v @ Ae)
    b = float(delta @ Ae)
    c = float(delta @ geom.A @ delta)
    if c >= 1.0:
        raise ReferenceOutsideError(f"reference point lies outside the bounding ellipsoid (c={c:.6g})")
    mu_minus, mu_plus = _roots(np.asarray(a), np.asarray(b), np.asarray(c - 1.0))
    return float(mu_minus), float(mu_plus)


def _roots(a, b, cm1):
    # roots of a mu^2 + 2 b mu + (c - 1) = 0 without cancellation
    root = np.sqrt(b * b - a * cm1)
    q = -(b + np.where(b >= 0, root, -root))
    r1 = q / a
    r2 = cm1 / q
    return np.minimum(r1, r2), np.maximum(r1, r2)


def chord_endpoints_batch(r_ref, e_v, r_c, A):
    """Vectorized chord endpoints for stacked chains (rows)."""
    delta = r_ref - r_c
    Ae = np.einsum("nij,nj->ni", A, e_v)
    a = np.einsum("ni,ni->n", e_v, Ae)
    b = np.einsum("ni,ni->n", delta, Ae)
    c = np.einsum("ni,nij,nj->n", delta, A, delta)
    if np.any(c >= 1.0):
        raise ReferenceOutsideError("reference point lies outside the bounding ellipsoid")
    return _roots(a, b, c - 1.0)


def _strictly_interior(r, model) -> bool:
    if hasattr(model, "min_eigenvalue"):
        return bool(model.min_eigenvalue(r) > 0.0)
    return bool(model.contains(r))


def find_interior_start(
    fit: MlFit,
    geom: RegionGeometry,
    model,
    n_attempts: int = 32,
    seed: int = 0,
) -> np.ndarray:
    """A point of ``R_lambda`` strictly inside the parameter space and the bounding ellipsoid.

    The ML point is used directly when it is interior.  A boundary ML point
    is pulled toward the model's interior reference along
    ``(1 - t) r_ml + t r_mix`` for ``t = 1e-6, 1e-5, ...``.  If that fails, the
    squared ellipsoid residual ``[1 - (x - r_c)^T A (x - r_c)]^2`` is
    minimized by projected gradient steps from random starts and the result
    is pulled inward the same way.
    """
    r_ml = np.asarray(fit.r_ml, dtype=float)

    def ok(x):
        return (
            bool(membership(x, geom, model))
            and _strictly_interior(x, model)
            and float(geom.quadratic_form(x)) < 1.0
        )

    if ok(r_ml):
        return r_ml
    r_mix = model.interior_reference()
    for t in 10.0 ** np.arange(-6, 0):
        x = (1.0 - t) * r_ml + t * r_mix
        if ok(x):
            return x
    # fallback: seed on the level surface of the bounding ellipsoid
    rng = np.random.default_rng(seed)
    project = getattr(model, "project", None)
    for _ in range(n_attempts):
        x = r_ml + rng.standard_normal(r_ml.shape) * np.sqrt(np.diag(np.linalg.pinv(geom.A))) * 0.1
        for _ in range(200):
            delta = x - geom.r_c
            res = 1.0 - delta @ geom.A @ delta
            grad = -4.0 * res * (geom.A @ delta)
            x = x - 0.1 * grad / max(np.linalg.norm(geom.A, 2), 1e-300)
            if project is not None:
                x = project(x)
        for t in (0.5, 0.25, 0.1, 0.01, 1e-3):
            y = (1.0 - t) * r_ml + t * x
            for s in 10.0 ** np.arange(-6, 0):
                z = (1.0 - s) * y + s * r_mix
                if ok(z):
                    return z
    raise EmptyRegionError(f"no interior point found for lambda={geom.lam:.6g}")
