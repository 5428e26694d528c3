"""Periodic-box C^4 spinor fields and the centered discrete Fourier pair.

A SpinorGrid samples a C^4-valued field on the cubic lattice

    x_j = (j - n/2) dx,  j = 0..n-1,  dx = L / n,

per axis, or its momentum-space transform on the dual lattice

    zeta_m = (m - n/2) dzeta,  dzeta = 2 pi / L.

The transform convention carries all (2 pi) factors,

    ghat(zeta) = dx^3 (2 pi)^(-3/2) sum_j e^(-i x_j . zeta) g(x_j),
    g(x_j)     = dzeta^3 (2 pi)^(-3/2) sum_m e^(+i x_j . zeta_m) ghat(zeta_m),

which makes the discrete L^2 norms on the two lattices equal (Parseval) and
reduces to FFTs after (-1)^(j1+j2+j3) checkerboard phases.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["SpinorGrid", "position_axes", "momentum_axes"]


def position_axes(n: int, box: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * (box / n)


def momentum_axes(n: int, box: float) -> np.ndarray:
    return (np.arange(n) - n // 2) * (2.0 * np.pi / box)


def _checkerboard(n: int) -> np.ndarray:
    s = 1.0 - 2.0 * (np.arange(n) % 2)
    return s[:, None, None] * s[None, :, None] * s[None, None, :]


@dataclass(frozen=True)
class SpinorGrid:
    """A spinor field sampled on the box lattice, tagged by its space."""

    box: float
    n: int
    values: np.ndarray  # (n, n, n, 4) complex
    space: str = "position"

    def __post_init__(self):
        if self.n % 2 != 0:
            raise ValueError("grid size must be even")
        if self.values.shape != (self.n, self.n, self.n, 4):
            raise ValueError(f"values must have shape (n, n, n, 4), got {self.values.shape}")
        if self.space not in ("position", "momentum"):
            raise ValueError(f"unknown space tag {self.space!r}")

    @property
    def dx(self) -> float:
        return self.box / self.n

    @property
    def dzeta(self) -> float:
        return 2.0 * np.pi / self.box

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3 if self.space == "position" else self.dzeta ** 3

    def axes(self) -> np.ndarray:
        return position_axes(self.n, self.box) if self.space == "position" \
            else momentum_axes(self.n, self.box)

    def points(self) -> np.ndarray:
        """Full lattice as an (n^3, 3) array, C-ordered."""
        ax = self.axes()
        g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def norm(self) -> float:
        return float(np.sqrt(self.cell_volume * np.sum(np.abs(self.values) ** 2)))

    def inner(self, other: "SpinorGrid") -> complex:
        if other.space != self.space or other.n != self.n or other.box != self.box:
            raise ValueError("inner product needs matching grids and spaces")
        return complex(self.cell_volume * np.sum(np.conj(self.values) * other.values))

    def with_values(self, values: np.ndarray, space: str | None = None) -> "SpinorGrid":
        return replace(self, values=values, space=space or self.space)

    # -- transforms --------------------------------------------------------

    def to_momentum(self) -> "SpinorGrid":
        if self.space == "momentum":
            return self
        n = self.n
        cb = _checkerboard(n)[..., None]
        work = np.fft.fftn(self.values * cb, axes=(0, 1, 2))
        # centered lattice phase: per-axis factor (-1)^(n/2) from j,m shifts
        parity = (-1.0) ** ((n // 2) % 2)
        scale = self.dx ** 3 * (2.0 * np.pi) ** (-1.5) * parity ** 3
        return SpinorGrid(box=self.box, n=n, values=scale * cb * work, space="momentum")

    def to_position(self) -> "SpinorGrid":
        if self.space == "position":
            return self
        n = self.n
        cb = _checkerboard(n)[..., None]
        work = np.fft.ifftn(self.values * cb, axes=(0, 1, 2))
        parity = (-1.0) ** ((n // 2) % 2)
        scale = self.dzeta ** 3 * (2.0 * np.pi) ** (-1.5) * parity ** 3 * n ** 3
        return SpinorGrid(box=self.box, n=n, values=scale * cb * work, space="position")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zeros(n: int, box: float, space: str = "position") -> "SpinorGrid":
        return SpinorGrid(box=box, n=n, values=np.zeros((n, n, n, 4), dtype=complex),
                          space=space)
