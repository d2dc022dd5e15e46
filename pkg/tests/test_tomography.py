import numpy as np
import pytest

from credregion.bloch import build_basis, is_physical, to_matrix
from credregion.exceptions import (
    ConvergenceError,
    DegenerateProbabilityError,
    InvalidDistributionError,
    NotInformationallyCompleteError,
    ShapeError,
)
from credregion.tomography import (
    Case,
    CountData,
    PovmModel,
    TomographyLikelihood,
    born_probabilities,
    fisher_and_gradient,
    fit_from_point,
    log_likelihood,
    log_likelihood_from_probs,
    make_random_povm,
    make_sqrt_measurement,
    mle_fit,
    pauli6_povm,
    random_pure_state,
    simulate_counts,
)


def pauli_closed_form(n):
    # each axis decouples: s_k = (n+ - n-)/(n+ + n-), r_k = s_k / sqrt(2)
    n = np.asarray(n, dtype=float).reshape(3, 2)
    s = (n[:, 0] - n[:, 1]) / n.sum(axis=1)
    return s / np.sqrt(2)


def test_pauli6_vectors_frozen():
    p = pauli6_povm()
    np.testing.assert_allclose(p.t, np.full(6, 1 / 6), atol=1e-15)
    c = np.sqrt(2) / 6
    expected = np.array([[c, 0, 0], [-c, 0, 0], [0, c, 0], [0, -c, 0], [0, 0, c], [0, 0, -c]])
    np.testing.assert_allclose(p.q, expected, atol=1e-15)
    assert p.is_informationally_complete()
    assert p.completeness_residual() < 1e-15


@pytest.mark.parametrize("maker", [make_random_povm, make_sqrt_measurement])
@pytest.mark.parametrize("D,M", [(2, 4), (2, 6), (3, 12), (4, 16)])
def test_random_povms_are_valid(maker, D, M):
    p = maker(D, M, seed=7)
    ops = p.operators()
    np.testing.assert_allclose(ops.sum(axis=0), np.eye(D), atol=1e-10)
    assert np.min(np.linalg.eigvalsh(ops)) > -1e-12
    assert p.is_informationally_complete()


def test_povm_seed_determinism():
    a = make_random_povm(3, 10, seed=11)
    b = make_random_povm(3, 10, seed=11)
    np.testing.assert_array_equal(a.q, b.q)
    assert not np.array_equal(a.q, make_random_povm(3, 10, seed=12).q)


def test_too_few_outcomes():
    with pytest.raises(NotInformationallyCompleteError):
        make_random_povm(3, 8, seed=0)


def test_povm_shape_checks():
    with pytest.raises(ShapeError):
        PovmModel(2, np.ones(4) / 4, np.zeros((4, 2)))


def test_born_probabilities_match_trace_rule():
    rng = np.random.default_rng(0)
    p = make_random_povm(3, 11, seed=3)
    r = random_pure_state(3, seed=4)
    rho = to_matrix(r, build_basis(3))
    direct = np.einsum("mab,ba->m", p.operators(), rho).real
    np.testing.assert_allclose(born_probabilities(r, p), direct, atol=1e-12)
    batch = rng.standard_normal((7, 8)) * 0.05
    assert born_probabilities(batch, p).shape == (7, 11)


def test_simulate_counts_statistics():
    p = np.array([0.5, 0.2, 0.2, 0.1])
    draws = np.array([simulate_counts(p, 1000, seed=s).n for s in range(400)])
    assert np.all(draws.sum(axis=1) == 1000)
    np.testing.assert_allclose(draws.mean(axis=0) / 1000, p, atol=0.004)
    np.testing.assert_allclose(draws.var(axis=0), 1000 * p * (1 - p), rtol=0.2)
    np.testing.assert_array_equal(simulate_counts(p, 1000, seed=3).n, simulate_counts(p, 1000, seed=3).n)


def test_simulate_counts_zero_probability_outcome():
    n = simulate_counts([0.0, 0.5, 0.5, 0.0], 100, seed=0).n
    assert n[0] == 0 and n[3] == 0


@pytest.mark.parametrize("p", [[0.5, 0.6], [-0.1, 1.1]])
def test_simulate_counts_rejects_bad_distribution(p):
    with pytest.raises(InvalidDistributionError):
        simulate_counts(p, 10, seed=0)


def test_count_data_validation():
    with pytest.raises(InvalidDistributionError):
        CountData(np.array([1, -2, 3]))
    with pytest.raises(InvalidDistributionError):
        CountData(np.array([1.5, 2]))
    assert CountData(np.array([3.0, 4.0])).N == 7


def test_log_likelihood_conventions():
    n = np.array([3, 0, 2])
    assert log_likelihood_from_probs(n, np.array([0.5, 0.0, 0.5])) == pytest.approx(5 * np.log(0.5))
    assert log_likelihood_from_probs(n, np.array([0.5, 0.5, 0.0])) == -np.inf


def test_fisher_and_gradient_against_finite_differences():
    p = make_random_povm(2, 5, seed=1)
    c = CountData(np.array([30, 25, 10, 20, 15]))
    r = np.array([0.1, -0.05, 0.2])
    g, F = fisher_and_gradient(r, c, p)
    h = 1e-6
    fd = np.array([(log_likelihood(r + h * e, c, p) - log_likelihood(r - h * e, c, p)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(g, fd, rtol=1e-6)
    np.testing.assert_allclose(F, F.T)
    assert np.all(np.linalg.eigvalsh(F) > 0)


def test_fisher_raises_on_zero_probability():
    p = pauli6_povm()
    c = CountData(np.array([10, 0, 5, 5, 5, 5]))
    with pytest.raises(DegenerateProbabilityError):
        fisher_and_gradient(np.array([0.75, 0, 0]), c, p)


def test_mle_interior_matches_closed_form():
    n = np.array([100, 80, 95, 90, 70, 65])
    fit = mle_fit(CountData(n), pauli6_povm())
    np.testing.assert_allclose(fit.r_ml, pauli_closed_form(n), atol=1e-7)
    # frozen values for this dataset
    np.testing.assert_allclose(fit.r_ml, [0.078567420132, 0.019110994086, 0.026189140044], atol=1e-7)
    assert fit.case == Case.A and fit.rank == 2
    assert fit.log_l_max == pytest.approx(float(log_likelihood(pauli_closed_form(n), CountData(n), pauli6_povm())), abs=1e-8)
    assert np.linalg.norm(fit.g_ml) < 1e-3


def test_mle_boundary_is_case_b_with_kkt():
    n = np.array([95, 5, 80, 20, 50, 50])
    povm = pauli6_povm()
    fit = mle_fit(CountData(n), povm)
    assert fit.case == Case.B and fit.rank == 1
    s = np.sqrt(2) * fit.r_ml
    assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-6)
    # gradient is an outward normal of the Bloch sphere
    cosang = fit.g_ml @ fit.r_ml / (np.linalg.norm(fit.g_ml) * np.linalg.norm(fit.r_ml))
    assert cosang == pytest.approx(1.0, abs=1e-6)


def test_mle_is_a_maximum_under_feasible_perturbations():
    povm = make_random_povm(3, 12, seed=5)
    basis = povm.basis
    counts = simulate_counts(born_probabilities(random_pure_state(3, seed=6), povm), 400, seed=7)
    fit = mle_fit(counts, povm)
    assert is_physical(fit.r_ml, basis, 1e-8)
    rng = np.random.default_rng(8)
    mix = np.zeros(povm.d)
    for _ in range(200):
        other = rng.standard_normal(povm.d)
        other *= 0.3 / np.linalg.norm(other)
        if not is_physical(other, basis):
            other = mix
        t = rng.uniform(1e-4, 0.1)
        y = (1 - t) * fit.r_ml + t * other  # convex combination keeps physicality
        assert log_likelihood(y, counts, povm) <= fit.log_l_max + 1e-8


def test_mle_convergence_error_reports_iterate():
    povm = make_random_povm(3, 12, seed=5)
    counts = simulate_counts(born_probabilities(random_pure_state(3, seed=6), povm), 400, seed=7)
    with pytest.raises(ConvergenceError) as info:
        mle_fit(counts, povm, max_iters=2, tol_grad=1e-14)
    assert info.value.last_iterate is not None


def test_mle_shape_mismatch():
    with pytest.raises(ShapeError):
        mle_fit(CountData(np.array([1, 2, 3])), pauli6_povm())


def test_fit_from_point_exact_frequencies():
    povm = pauli6_povm()
    r = np.array([0.1, 0.2, -0.1]) / np.sqrt(2)
    # p = (1 +- s_k)/6 with s = (0.1, 0.2, -0.1): integral counts at N = 6000
    n = np.array([1100, 900, 1200, 800, 900, 1100])
    fit = fit_from_point(r, CountData(n), povm)
    assert fit.case == Case.A
    np.testing.assert_allclose(fit.g_ml, 0.0, atol=1e-8)


def test_likelihood_model_interface():
    povm = pauli6_povm()
    c = CountData(np.array([10, 0, 5, 5, 5, 5]))
    model = TomographyLikelihood(povm, c)
    r = np.array([[0.0, 0, 0], [-0.75, 0, 0], [0.7, 0, 0]])
    ll = model.log_likelihood(r)
    assert np.isfinite(ll[0]) and ll[1] == -np.inf
    np.testing.assert_array_equal(model.contains(r), [True, False, True])
    np.testing.assert_allclose(model.interior_reference(), 0.0)


def test_mle_rejects_empty_data():
    from credregion.exceptions import DataQualityError

    with pytest.raises(DataQualityError):
        mle_fit(CountData(np.zeros(6, dtype=int)), pauli6_povm())
