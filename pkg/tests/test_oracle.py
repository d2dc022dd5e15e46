import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import norm

from credregion.bloch import build_basis, is_physical, purity_radius
from credregion.certify import LambdaGrid, cap_volume, unit_ball_volume
from credregion.exceptions import FeasibilityError
from credregion.oracle import (
    GaussianToyModel,
    cap_average_oracle,
    filter_certify,
    gradient_for_cap,
    oracle_certify,
    sample_state_space_uniform,
    uniform_ball,
)
from credregion.tomography import CountData, TomographyLikelihood, mle_fit, pauli6_povm


def hs_state_volume(N):
    # Hilbert-Schmidt volume of the N-level density matrices (Zyczkowski-Sommers)
    log_v = 0.5 * np.log(N) + 0.5 * N * (N - 1) * np.log(2 * np.pi)
    log_v += sum(gammaln(k) for k in range(1, N + 1)) - gammaln(N * N)
    return np.exp(log_v)


def test_uniform_ball_radial_law():
    rng = np.random.default_rng(0)
    pts = uniform_ball(50_000, 4, 2.0, rng)
    rad = np.linalg.norm(pts, axis=1)
    assert rad.max() <= 2.0
    # P(|r| <= t R) = t^d
    assert np.mean(rad <= 1.0) == pytest.approx(0.5**4, abs=0.005)


def test_qubit_sampling_accepts_everything():
    pts, acc = sample_state_space_uniform(2, 10_000, seed=0, return_acceptance=True)
    assert acc == 1.0
    assert pts.shape == (10_000, 3)
    assert np.all(np.linalg.norm(pts, axis=1) <= purity_radius(2) + 1e-15)


def test_qubit_ball_volume_equals_state_volume():
    assert unit_ball_volume(3) * purity_radius(2) ** 3 == pytest.approx(hs_state_volume(2), rel=1e-12)


def test_qutrit_acceptance_matches_state_space_volume():
    pts, acc = sample_state_space_uniform(3, 100_000, seed=0, return_acceptance=True)
    expected = hs_state_volume(3) / (unit_ball_volume(8) * purity_radius(3) ** 8)
    drawn = pts.shape[0] / acc
    se = np.sqrt(expected * (1 - expected) / drawn)
    assert expected == pytest.approx(0.0265819289, rel=1e-9)
    assert abs(acc - expected) < 4 * se
    assert acc == pytest.approx(0.026492789192637548, rel=1e-12)  # frozen for seed 0
    assert np.all(is_physical(pts, build_basis(3), 0.0))


def test_oracle_refuses_large_dimensions():
    with pytest.raises(FeasibilityError):
        sample_state_space_uniform(4, 10, seed=0)


def test_filter_certify_on_gaussian_toy():
    toy = GaussianToyModel(2, np.eye(2) * 4.0, box_halfwidth=2.0)
    grid = LambdaGrid.log_spaced(1e-3, 0.9, 12)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-2.0, 2.0, (400_000, 2))
    res = filter_certify(pts, toy, grid, 0.0)
    z_s = (res.s_abs - toy.true_size(grid.values)) / res.s_stderr
    # the box cuts off part of the Gaussian mass, which rescales the credibility
    box_mass = (2 * norm.cdf(4.0) - 1) ** 2
    z_c = (res.c - toy.true_credibility(grid.values) / box_mass) / res.c_stderr
    assert np.max(np.abs(z_s)) < 4.5 and np.max(np.abs(z_c)) < 4.5
    assert np.all(res.usable)
    table = res.as_table()
    assert list(table) == ["lambda", "s_abs", "s_abs_stderr", "C", "C_stderr", "n_in", "usable"]


def test_streamed_oracle_matches_single_pass():
    povm = pauli6_povm()
    counts = CountData(np.array([60, 40, 55, 45, 52, 48]))
    fit = mle_fit(counts, povm)
    model = TomographyLikelihood(povm, counts)
    grid = LambdaGrid.log_spaced(1e-3, 0.9, 8)
    a = oracle_certify(2, 30_000, 5, model, grid, fit.log_l_max, chunk=7_000)
    pts = sample_state_space_uniform(2, 30_000, seed=5)
    b = filter_certify(pts, model, grid, fit.log_l_max)
    assert a.n_total == b.n_total == 30_000
    # streaming changes the chunking (hence the draws) but not the estimates beyond noise
    assert np.all(np.abs(a.c - b.c) < 5 * np.hypot(a.c_stderr, b.c_stderr) + 1e-12)
    assert np.all(np.diff(a.n_in) <= 0)


def test_cap_oracle_reproduces_cap_parameter():
    F = np.array([[2.0, 0.5], [0.5, 1.0]])
    lam, l = 0.1, 0.5
    g = gradient_for_cap(F, lam, l, direction=[0.3, 1.0])
    q = 0.5 * g @ np.linalg.solve(F, g)
    assert np.sqrt(q / (q - np.log(lam))) == pytest.approx(l)
    ref = cap_average_oracle(F, g, lam, n=200_000, seed=3)
    # the retained cap fraction equals the normalized cap volume
    frac = ref["n_cap"] / (200_000 * np.pi / 4)
    assert frac == pytest.approx(cap_volume(2, l, 1) / np.pi, abs=0.01)
    assert ref["u"] > 0 and ref["s2"] > 0
