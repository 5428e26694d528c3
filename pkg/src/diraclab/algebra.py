"""Dirac matrices and the momentum-space symbol of the free Dirac operator.

Natural units (hbar = c = 1) throughout.  The free operator acts on
C^4-valued fields; its momentum-space symbol is the Hermitian 4x4 matrix

    h0(zeta) = sum_k alpha_k zeta_k + m beta

with eigenvalues +-eta(zeta), eta = sqrt(|zeta|^2 + m^2), each twice
degenerate.  The orthogonal projections onto the positive/negative energy
eigenspaces are

    p_{+-}(zeta) = (I +- h0(zeta)/eta) / 2.

Everything here is a pure function of small value types and is safe for
unrestricted parallel use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PAULI",
    "Momentum",
    "SymbolEigen",
    "dirac_matrices",
    "symbol",
    "eta",
    "eigenprojections",
]

# 2x2 Pauli matrices.
PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def dirac_matrices():
    """Return the 4x4 Dirac matrices (alpha_1, alpha_2, alpha_3), beta.

    Standard representation: alpha_j has the Pauli matrix sigma_j on the
    off-diagonal 2x2 blocks, beta = diag(I, -I).  Entries are exact
    (integer-valued real/imaginary parts).
    """
    zero = np.zeros((2, 2), dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    alpha = tuple(
        np.block([[zero, sig], [sig, zero]]) for sig in PAULI
    )
    beta = np.block([[eye2, zero], [zero, -eye2]])
    return alpha, beta


_ALPHA, _BETA = dirac_matrices()


@dataclass(frozen=True)
class Momentum:
    """A momentum-space point zeta together with the particle mass m > 0."""

    zeta: tuple[float, float, float]
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got m={self.m}")

    @property
    def zeta_array(self) -> np.ndarray:
        return np.asarray(self.zeta, dtype=float)


@dataclass(frozen=True)
class SymbolEigen:
    """Spectral data of h0(zeta): energy eta and the +- projections."""

    eta: float
    p_plus: np.ndarray
    p_minus: np.ndarray


def symbol(k: Momentum) -> np.ndarray:
    """Momentum-space symbol h0(zeta) = zeta.alpha + m beta (Hermitian)."""
    z = k.zeta_array
    h0 = k.m * _BETA.copy()
    for j in range(3):
        h0 += z[j] * _ALPHA[j]
    return h0


def eta(zeta, m: float = 1.0):
    """Relativistic energy eta = sqrt(|zeta|^2 + m^2); vectorized.

    `zeta` may be a single 3-vector or an (..., 3) array.
    """
    z = np.asarray(zeta, dtype=float)
    return np.sqrt(np.sum(z * z, axis=-1) + m * m)


def eigenprojections(k: Momentum) -> SymbolEigen:
    """Eigenvalue eta(zeta) and projections p_{+-}(zeta) of the symbol.

    Satisfies h0 = eta p_+ - eta p_-, p_+- idempotent and mutually
    orthogonal, p_+ + p_- = I, trace(p_+-) = 2.
    """
    h0 = symbol(k)
    en = float(eta(k.zeta_array, k.m))
    p_plus = 0.5 * (np.eye(4, dtype=complex) + h0 / en)
    p_minus = 0.5 * (np.eye(4, dtype=complex) - h0 / en)
    return SymbolEigen(eta=en, p_plus=p_plus, p_minus=p_minus)


def projection_grid(zeta: np.ndarray, m: float, branch: int = +1) -> np.ndarray:
    """Projections p_{+-}(zeta) for a batch of momenta, shape (..., 4, 4).

    `branch` +1 selects p_+, -1 selects p_-.  Used by the spectral
    propagator and the identification engine, where per-point `Momentum`
    objects would be wasteful.
    """
    z = np.asarray(zeta, dtype=float)
    en = eta(z, m)[..., None, None]
    h0 = m * _BETA + np.einsum("...k,kij->...ij", z, np.stack(_ALPHA))
    sign = 1.0 if branch >= 0 else -1.0
    return 0.5 * (np.eye(4, dtype=complex) + sign * h0 / en)
