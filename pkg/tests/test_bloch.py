import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from credregion.bloch import (
    build_basis,
    from_matrix,
    is_physical,
    min_eigenvalue,
    project_simplex,
    project_to_states,
    purity_radius,
    to_matrix,
)
from credregion.exceptions import InvalidDimensionError, ShapeError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_density(D, rng, rank=None):
    rank = D if rank is None else rank
    X = rng.standard_normal((D, rank)) + 1j * rng.standard_normal((D, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


@pytest.mark.parametrize("D", [2, 3, 4, 8])
def test_basis_orthonormal_traceless_hermitian(D):
    b = build_basis(D)
    assert len(b) == D * D - 1
    om = b.omegas
    assert np.max(np.abs(np.trace(om, axis1=1, axis2=2))) < 1e-12
    assert np.max(np.abs(om - np.conj(np.swapaxes(om, 1, 2)))) < 1e-15
    gram = np.einsum("jab,kba->jk", om, om)
    assert np.max(np.abs(gram - np.eye(D * D - 1))) < 1e-12


def test_qubit_basis_is_scaled_pauli_in_fixed_order():
    om = build_basis(2).omegas
    for m, s in zip(om, (SX, SY, SZ)):
        np.testing.assert_allclose(m, s / np.sqrt(2), atol=1e-15)


def test_three_qubit_dimension():
    assert build_basis(8).d == 63


@pytest.mark.parametrize("D", [1, 0, 2.5])
def test_invalid_dimension(D):
    with pytest.raises(InvalidDimensionError):
        build_basis(D)


def test_basis_spans_hermitian_matrices():
    rng = np.random.default_rng(0)
    for D in (2, 3, 5):
        b = build_basis(D)
        H = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        H = H + H.conj().T
        r = from_matrix(H, b)
        rebuilt = np.trace(H).real / D * np.eye(D) + np.einsum("j,jab->ab", r, b.omegas)
        np.testing.assert_allclose(rebuilt, H, atol=1e-12)


def test_zero_vector_is_maximally_mixed():
    for D in (2, 3, 4):
        np.testing.assert_allclose(to_matrix(np.zeros(D * D - 1), build_basis(D)), np.eye(D) / D, atol=1e-15)


def test_qubit_pole_is_pure_state():
    rho = to_matrix([0.0, 0.0, 1 / np.sqrt(2)], build_basis(2))
    np.testing.assert_allclose(rho, np.diag([1.0, 0.0]), atol=1e-15)


def test_roundtrip_random_states():
    rng = np.random.default_rng(1)
    for D in (2, 3, 4, 8):
        b = build_basis(D)
        rho = random_density(D, rng)
        np.testing.assert_allclose(to_matrix(from_matrix(rho, b), b), rho, atol=1e-12)


def test_vectorized_conversion():
    rng = np.random.default_rng(2)
    b = build_basis(3)
    rhos = np.array([random_density(3, rng) for _ in range(5)])
    r = from_matrix(rhos, b)
    assert r.shape == (5, 8)
    np.testing.assert_allclose(to_matrix(r, b), rhos, atol=1e-12)


def test_wrong_length_raises():
    with pytest.raises(ShapeError):
        to_matrix(np.zeros(4), build_basis(2))


def test_physicality_examples():
    b = build_basis(2)
    assert is_physical(np.zeros(3), b, 0.0)
    assert not is_physical([0.0, 0.0, 1.0], b)
    assert is_physical([0.0, 0.0, 1 / np.sqrt(2)], b, 1e-10)


def test_min_eigenvalue_matches_eigvalsh():
    rng = np.random.default_rng(3)
    for D in (2, 3):
        b = build_basis(D)
        r = rng.standard_normal((20, D * D - 1)) * 0.3
        direct = np.linalg.eigvalsh(to_matrix(r, b))[:, 0]
        np.testing.assert_allclose(min_eigenvalue(r, b), direct, atol=1e-12)


def test_purity_bound_for_physical_states():
    rng = np.random.default_rng(4)
    for D in (2, 3, 4):
        b = build_basis(D)
        for rank in range(1, D + 1):
            r = from_matrix(random_density(D, rng, rank), b)
            assert r @ r <= purity_radius(D) ** 2 + 1e-12
            if rank == 1:
                assert r @ r == pytest.approx(1 - 1 / D, abs=1e-12)


def _brute_simplex(v, grid=201):
    # exhaustive search on a fine lattice of the 2-simplex
    best, arg = np.inf, None
    for i, j in itertools.product(range(grid), repeat=2):
        if i + j < grid:
            x = np.array([i, j, grid - 1 - i - j]) / (grid - 1)
            val = np.sum((x - v) ** 2)
            if val < best:
                best, arg = val, x
    return arg


def test_simplex_projection_against_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(5):
        v = rng.normal(0.3, 0.8, 3)
        np.testing.assert_allclose(project_simplex(v), _brute_simplex(v), atol=1e-2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=12))
def test_simplex_projection_properties(vals):
    v = np.array(vals)
    x = project_simplex(v)
    assert np.all(x >= 0)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)
    # KKT: coordinates in the support share the same shift
    shift = (v - x)[x > 1e-12]
    assert np.ptp(shift) < 1e-9
    np.testing.assert_allclose(project_simplex(x), x, atol=1e-12)


def test_project_to_states_examples():
    b = build_basis(2)
    r = project_to_states(np.diag([1.5, -0.5]).astype(complex), b)
    np.testing.assert_allclose(to_matrix(r, b), np.diag([1.0, 0.0]), atol=1e-12)
    rng = np.random.default_rng(6)
    rho = random_density(3, rng)
    b3 = build_basis(3)
    np.testing.assert_allclose(to_matrix(project_to_states(rho, b3), b3), rho, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10_000))
def test_projection_lands_in_state_space(D, seed):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    H = H + H.conj().T
    b = build_basis(D)
    assert is_physical(project_to_states(H, b), b, 1e-10)
