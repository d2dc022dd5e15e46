"""Size and credibility of likelihood-threshold credible regions by in-region sampling."""

from .bloch import HermitianBasis, build_basis, from_matrix, is_physical, to_matrix
from .certify import (
    CertificationResult,
    LambdaGrid,
    analytic_case_a,
    analytic_case_b,
    analytic_curves,
    capacity_average,
    certify,
    credibility,
    solve_size_ode,
    u_average,
)
from .estimators import AnalyticCertifier, CredibleRegionCertifier, MaximumLikelihoodTomography
from .hitrun import ChainConfig, Prior, hit_and_run_step, run_chains, sample_region
from .oracle import GaussianToyModel, filter_certify, gaussian_toy_model, oracle_certify, sample_state_space_uniform
from .region import RegionGeometry, build_geometry, chord_endpoints, find_interior_start, membership
from .tomography import (
    Case,
    CountData,
    MlFit,
    PovmModel,
    TomographyLikelihood,
    make_random_povm,
    make_sqrt_measurement,
    mle_fit,
    pauli6_povm,
    simulate_counts,
)

__version__ = "0.1.0"
