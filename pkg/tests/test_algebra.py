"""Dirac matrix algebra and symbol spectral identities."""

import numpy as np
import pytest

from diraclab.algebra import (
    Momentum,
    dirac_matrices,
    eigenprojections,
    eta,
    projection_grid,
    symbol,
)

ALPHA, BETA = dirac_matrices()
IDENT = np.eye(4)


def test_beta_entries():
    assert BETA[0, 0] == 1.0
    assert BETA[2, 2] == -1.0
    np.testing.assert_array_equal(BETA, np.diag([1, 1, -1, -1]).astype(complex))


def test_anticommutation_exact():
    for j in range(3):
        for k in range(3):
            anti = ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j]
            np.testing.assert_array_equal(anti, 2.0 * (j == k) * IDENT)
        np.testing.assert_array_equal(ALPHA[j] @ BETA + BETA @ ALPHA[j], np.zeros((4, 4)))
    np.testing.assert_array_equal(BETA @ BETA, IDENT)


def test_symbol_at_origin_is_mass_beta():
    np.testing.assert_array_equal(symbol(Momentum((0.0, 0.0, 0.0), m=1.0)), BETA)


def test_symbol_eigenvalues_unit_x():
    h0 = symbol(Momentum((1.0, 0.0, 0.0), m=1.0))
    np.testing.assert_array_equal(h0, ALPHA[0] + BETA)
    vals = np.sort(np.linalg.eigvalsh(h0))
    np.testing.assert_allclose(vals, [-np.sqrt(2)] * 2 + [np.sqrt(2)] * 2, atol=1e-14)


def test_symbol_hermitian():
    rng = np.random.default_rng(3)
    for _ in range(20):
        h0 = symbol(Momentum(tuple(rng.normal(size=3) * 4), m=1.0))
        assert np.max(np.abs(h0 - h0.conj().T)) < 1e-15


def test_projection_at_origin():
    se = eigenprojections(Momentum((0.0, 0.0, 0.0), m=1.0))
    assert se.eta == 1.0
    np.testing.assert_allclose(se.p_plus, np.diag([1, 1, 0, 0]).astype(complex), atol=0)


def test_three_four_five():
    assert eigenprojections(Momentum((3.0, 0.0, 0.0), m=4.0)).eta == pytest.approx(5.0)


def test_projector_identities_and_spectral_identity():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        z = tuple(rng.uniform(-10, 10, size=3))
        k = Momentum(z, m=1.0)
        se = eigenprojections(k)
        h0 = symbol(k)
        checks = [
            se.p_plus @ se.p_plus - se.p_plus,
            se.p_minus @ se.p_minus - se.p_minus,
            se.p_plus @ se.p_minus,
            se.p_plus + se.p_minus - IDENT,
            h0 - (se.eta * se.p_plus - se.eta * se.p_minus),
        ]
        worst = max(worst, *(np.max(np.abs(c)) for c in checks))
        assert abs(np.trace(se.p_plus).real - 2.0) < 1e-13
        assert abs(np.trace(se.p_minus).real - 2.0) < 1e-13
        assert se.eta >= 1.0
    assert worst < 1e-13


def test_projection_grid_matches_pointwise():
    rng = np.random.default_rng(5)
    zs = rng.normal(size=(40, 3)) * 2.0
    grid_p = projection_grid(zs, m=1.3, branch=+1)
    grid_m = projection_grid(zs, m=1.3, branch=-1)
    for i, z in enumerate(zs):
        se = eigenprojections(Momentum(tuple(z), m=1.3))
        np.testing.assert_allclose(grid_p[i], se.p_plus, atol=1e-14)
        np.testing.assert_allclose(grid_m[i], se.p_minus, atol=1e-14)


def test_eta_vectorized():
    zs = np.array([[3.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(eta(zs, m=4.0), [5.0, 4.0])
