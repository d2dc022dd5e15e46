"""scikit-learn style wrappers around the tomography and certification routines.

``X`` passed to ``fit`` is a single vector of outcome counts for the POVM
given at construction.  ``transform`` takes lambda values and returns the
certified curves interpolated at those levels.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bloch import to_matrix
from ._validation import check_counts, check_lambdas, check_probability
from .certify import LambdaGrid, analytic_curves, certify
from .exceptions import ConfigError
from .hitrun import ChainConfig, Prior
from .region import DEFAULT_INFLATION
from .tomography import CountData, PovmModel, TomographyLikelihood, mle_fit


def _interp_loglog(lam_grid, values, lam):
    # curves are smooth in log(-log lambda); the grid runs in increasing lambda
    s_grid = np.log(-np.log(lam_grid))[::-1]
    s = np.log(-np.log(lam))
    return np.interp(s, s_grid, np.asarray(values)[::-1])


class MaximumLikelihoodTomography(BaseEstimator):
    """Maximum-likelihood state estimate by accelerated projected gradient."""

    def __init__(self, povm: PovmModel | None = None, tol_rank: float = 1e-6, max_iters: int = 20000):
        self.povm = povm
        self.tol_rank = tol_rank
        self.max_iters = max_iters

    def _check_povm(self):
        if not isinstance(self.povm, PovmModel):
            raise ConfigError("povm must be a PovmModel")
        return self.povm

    def fit(self, X, y=None):
        povm = self._check_povm()
        counts = CountData(check_counts(X, povm.M))
        self.fit_ = mle_fit(counts, povm, max_iters=self.max_iters, tol_rank=self.tol_rank)
        self.counts_ = counts
        self.r_ml_ = self.fit_.r_ml
        self.rank_ = self.fit_.rank
        self.case_ = self.fit_.case
        self.log_l_max_ = self.fit_.log_l_max
        return self

    def density_matrix(self) -> np.ndarray:
        check_is_fitted(self, "fit_")
        return to_matrix(self.r_ml_, self.povm.basis)

    def predict(self, X=None) -> np.ndarray:
        """Born probabilities of the fitted state (``X`` is ignored)."""
        check_is_fitted(self, "fit_")
        return self.fit_.p_ml

    def score(self, X, y=None) -> float:
        """Log-likelihood of new counts ``X`` at the fitted state."""
        check_is_fitted(self, "fit_")
        n = check_counts(X, self.povm.M)
        p = self.fit_.p_ml
        seen = n > 0
        return float(np.sum(n[seen] * np.log(p[seen])))


class _CurveMixin(TransformerMixin):
    _columns: tuple = ()

    def _table(self) -> dict:
        raise NotImplementedError

    def transform(self, X) -> np.ndarray:
        """Interpolate the fitted curves at lambda values ``X``.

        Returns one row per lambda and one column per name in ``columns_``.
        """
        check_is_fitted(self, "grid_")
        lam = check_lambdas(X)
        table = self._table()
        return np.column_stack([_interp_loglog(self.grid_.values, table[c], lam) for c in self._columns])

    @property
    def columns_(self) -> tuple:
        return self._columns

    def predict(self, X) -> np.ndarray:
        """Credibility of the regions at lambda values ``X``."""
        return self.transform(X)[:, self._columns.index(self._credibility_column)]

    def level_for_credibility(self, c: float) -> float:
        """Largest grid-interpolated lambda whose region has credibility at least ``c``."""
        check_is_fitted(self, "grid_")
        c = check_probability(c, "credibility")
        lam = self.grid_.values
        cred = np.minimum.accumulate(np.asarray(self._table()[self._credibility_column]))
        s = np.log(-np.log(lam))
        if c >= cred[0]:
            return float(lam[0])
        if c <= cred[-1]:
            return float(lam[-1])
        # cred decreases along the grid, so interpolate on the reversed arrays
        s_star = np.interp(c, cred[::-1], s[::-1])
        return float(np.exp(-np.exp(s_star)))


class CredibleRegionCertifier(BaseEstimator, _CurveMixin):
    """Size, credibility and capacity of likelihood-threshold regions by in-region sampling."""

    _columns = ("u", "s_rel", "C", "S_HS")
    _credibility_column = "C"

    def __init__(
        self,
        povm: PovmModel | None = None,
        n_lambda: int = 200,
        k_samples: int = 2000,
        burn_in: int | None = None,
        chains_per_region: int = 8,
        inflation: float = DEFAULT_INFLATION,
        prior: Prior | None = None,
        smooth: bool = False,
        seed: int = 0,
        threads: int = 1,
    ):
        self.povm = povm
        self.n_lambda = n_lambda
        self.k_samples = k_samples
        self.burn_in = burn_in
        self.chains_per_region = chains_per_region
        self.inflation = inflation
        self.prior = prior
        self.smooth = smooth
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        mle = MaximumLikelihoodTomography(self.povm).fit(X)
        self.fit_ = mle.fit_
        self.grid_ = LambdaGrid.loglog_spaced(n=self.n_lambda)
        cfg = ChainConfig(
            k_samples=self.k_samples, burn_in=self.burn_in, seed=self.seed,
            chains_per_region=self.chains_per_region,
        )
        model = TomographyLikelihood(self.povm, mle.counts_)
        self.result_ = certify(
            self.fit_, model, self.grid_, prior=self.prior, cfg=cfg,
            inflation=self.inflation, smooth=self.smooth, threads=self.threads,
        )
        return self

    def _table(self) -> dict:
        return self.result_.as_table()


class AnalyticCertifier(BaseEstimator, _CurveMixin):
    """Closed-form asymptotic curves for the fitted data."""

    _columns = ("u_analytic", "s2_analytic", "C_analytic")
    _credibility_column = "C_analytic"

    def __init__(self, povm: PovmModel | None = None, n_lambda: int = 200, u_form: str = "cap"):
        self.povm = povm
        self.n_lambda = n_lambda
        self.u_form = u_form

    def fit(self, X, y=None):
        mle = MaximumLikelihoodTomography(self.povm).fit(X)
        self.fit_ = mle.fit_
        self.grid_ = LambdaGrid.loglog_spaced(n=self.n_lambda)
        self.curves_ = analytic_curves(self.fit_, self.grid_, u_form=self.u_form)
        return self

    def _table(self) -> dict:
        return self.curves_
