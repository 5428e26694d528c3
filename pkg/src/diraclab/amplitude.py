"""Matrix amplitude, cone cut-off, and energy-window functions.

The identification symbol factors as  e^(i Phi) P(x, zeta) C(x, zeta)
psi(|zeta|^2)  with

    P = (I - S)^-1 p0,
    S = (2 eta)^-1 (V(x) I + sum_k d_k Phi(x, zeta) alpha_k),

p0 the positive-energy projection (negative branch: eta -> -eta and
p0 -> p_-).  S is Hermitian with eigenvalues V/(2 eta) +- |grad Phi|/(2 eta),
so invertibility of I - S reduces to a scalar margin check.

The cut-off  C_s(x, zeta) = theta(|x|) omega_s(<x^, zeta^>)  removes the
origin (theta ramps over [r0, r1]) and restricts to the cone where the ray
integrals converge; omega_s ramps over [nu - ramp, nu + ramp], so the
support sits in the cone with aperture parameter nu - ramp.  The energy
window psi is a smooth bump equal to 1 exactly on the image of the spectral
interval [delta_lo, delta_hi] under mu -> mu^2 - m^2.

All transitions use the C-infinity step built from b(t) = exp(-1/t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import dirac_matrices, eigenprojections, Momentum
from .eikonal import PhaseModel
from .potentials import PotentialFamily

__all__ = [
    "smooth_step",
    "CutoffModel",
    "AmplitudeModel",
    "s_matrix",
    "amplitude",
    "cutoff_value",
    "energy_window",
    "amplitude_decay_check",
]

_ALPHA, _BETA = dirac_matrices()
_ALPHA_STACK = np.stack(_ALPHA)


class AmplitudeMarginError(ArithmeticError):
    """I - S too close to singular for a reliable amplitude."""


def smooth_step(t):
    """C-infinity monotone step: 0 for t <= 0, 1 for t >= 1.

    Built from the bump b(t) = exp(-1/t) as b(t) / (b(t) + b(1-t)).
    """
    t = np.asarray(t, dtype=float)
    lo = t <= 0.0
    hi = t >= 1.0
    mid = ~(lo | hi)
    out = np.where(hi, 1.0, 0.0)
    if np.any(mid):
        tm = np.clip(t, 1e-12, 1.0 - 1e-12)
        b1 = np.exp(-1.0 / tm)
        b2 = np.exp(-1.0 / (1.0 - tm))
        out = np.where(mid, b1 / (b1 + b2), out)
    return out


@dataclass(frozen=True)
class CutoffModel:
    """Cone cut-off and energy window parameters.

    nu : nominal cone parameter in (-1, 1); omega ramps over
        [nu - ramp_half, nu + ramp_half], so the support cone parameter is
        nu - ramp_half (recorded in run manifests).
    r0, r1 : radii of the origin-removing ramp theta.
    delta : compact spectral interval (mu_lo, mu_hi) in (m, inf).
    window_ramp : width of the psi roll-off in s = |zeta|^2.
    m : particle mass.
    """

    nu: float = 0.0
    ramp_half: float = 0.2
    r0: float = 1.0
    r1: float = 2.0
    delta: tuple = (1.2, 2.0)
    window_ramp: float = 0.3
    m: float = 1.0

    def __post_init__(self):
        if not (-1.0 < self.nu < 1.0):
            raise ValueError(f"nu must lie in (-1, 1), got {self.nu}")
        if not (0.0 < self.ramp_half and -1.0 < self.nu - self.ramp_half):
            raise ValueError("omega ramp must stay inside (-1, 1)")
        if not (0.0 <= self.r0 < self.r1):
            raise ValueError("need 0 <= r0 < r1")
        lo, hi = self.delta
        if not (self.m < lo < hi):
            raise ValueError(f"window delta must satisfy m < lo < hi, got {self.delta}")
        if not (0.0 < self.window_ramp < lo * lo - self.m * self.m):
            raise ValueError("window_ramp must be positive and keep psi supported in (0, inf)")

    @property
    def support_nu(self) -> float:
        """Aperture parameter of the cone containing the cut-off support."""
        return self.nu - self.ramp_half

    @property
    def window_plateau(self) -> tuple:
        """Interval of s = |zeta|^2 where psi = 1 (image of delta)."""
        lo, hi = self.delta
        return (lo * lo - self.m * self.m, hi * hi - self.m * self.m)

    @property
    def window_support(self) -> tuple:
        s1, s2 = self.window_plateau
        return (s1 - self.window_ramp, s2 + self.window_ramp)

    def theta(self, r):
        """Origin-removing radial ramp: 0 for r <= r0, 1 for r >= r1."""
        return smooth_step((np.asarray(r, dtype=float) - self.r0) / (self.r1 - self.r0))

    def omega(self, tau, sign: int = +1):
        """Direction cut-off; omega_+ ramps up across the cone boundary.

        omega_-(tau) = omega_+(-tau).
        """
        t = np.asarray(tau, dtype=float) * (1.0 if sign >= 0 else -1.0)
        return smooth_step((t - self.support_nu) / (2.0 * self.ramp_half))

    def psi(self, ssq):
        """Energy window in s = |zeta|^2: 1 on the plateau, 0 outside."""
        s = np.asarray(ssq, dtype=float)
        s1, s2 = self.window_plateau
        w = self.window_ramp
        up = smooth_step((s - (s1 - w)) / w)
        down = smooth_step(((s2 + w) - s) / w)
        return up * down


def cutoff_value(model: CutoffModel, x, zeta, sign: int = +1):
    """theta(|x|) * omega_s(<x^, zeta^>); zero at the origin by theta."""
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    kk = np.linalg.norm(zeta)
    safe = np.where(r > 0.0, r, 1.0)
    tau = (x @ (zeta / kk)) / safe
    return model.theta(r) * np.where(r > 0.0, model.omega(tau, sign), 0.0)


def energy_window(model: CutoffModel, ssq):
    """psi(|zeta|^2); module-level alias of CutoffModel.psi."""
    s = np.asarray(ssq, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("psi takes s = |zeta|^2 >= 0")
    return model.psi(s)


@dataclass(frozen=True)
class AmplitudeModel:
    """Evaluator pair (S, P) for a phase model and potential member.

    branch +1 uses eta and p_+; branch -1 substitutes -eta and p_-.
    The margin keeps I - S safely invertible (spectral radius of S below
    1 - margin).
    """

    phase: PhaseModel
    family: PotentialFamily
    branch: int = +1
    m: float = 1.0
    margin: float = 0.05

    def eta_signed(self, zeta):
        kk = float(np.linalg.norm(zeta))
        en = math.sqrt(kk * kk + self.m * self.m)
        return en if self.branch >= 0 else -en

    def s_matrix(self, x, zeta):
        """S(x, zeta) = (2 eta)^-1 (V I + grad Phi . alpha); Hermitian."""
        x = np.asarray(x, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        v = self.family.value(x)
        grad = self.phase.gradient(x, zeta)
        inv2e = 0.5 / self.eta_signed(zeta)
        eye = np.eye(4, dtype=complex)
        return inv2e * (v[..., None, None] * eye
                        + np.einsum("...k,kij->...ij", grad, _ALPHA_STACK))

    def s_norm(self, x, zeta):
        """Spectral radius |V|/(2|eta|) + |grad Phi|/(2|eta|) of S."""
        x = np.asarray(x, dtype=float)
        v = self.family.value(x)
        grad = self.phase.gradient(x, np.asarray(zeta, dtype=float))
        inv2e = 0.5 / abs(self.eta_signed(zeta))
        return inv2e * (np.abs(v) + np.linalg.norm(grad, axis=-1))

    def p0(self, zeta):
        se = eigenprojections(Momentum(tuple(np.asarray(zeta, dtype=float)), m=self.m))
        return se.p_plus if self.branch >= 0 else se.p_minus

    def amplitude(self, x, zeta):
        """P = (I - S)^-1 p0 by direct 4x4 solve, with margin enforcement."""
        x = np.asarray(x, dtype=float)
        self.s_matrix_norm_check(x, zeta)
        s = self.s_matrix(x, zeta)
        p0 = self.p0(zeta)
        eye = np.eye(4, dtype=complex)
        return np.linalg.solve(eye - s, np.broadcast_to(p0, s.shape).copy())

    def s_matrix_norm_check(self, x, zeta):
        norms = self.s_norm(x, zeta)
        bound = 1.0 - self.margin
        if np.any(np.atleast_1d(norms) >= bound):
            flat = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, 3))
            bad = int(np.argmax(np.atleast_1d(norms)))
            raise AmplitudeMarginError(
                f"|S| = {float(np.max(norms)):.4f} >= {bound:.2f} at "
                f"x={flat[bad % flat.shape[0]]}, zeta={np.asarray(zeta)}"
            )
        return norms


def s_matrix(model: AmplitudeModel, x, zeta):
    """Module-level alias of AmplitudeModel.s_matrix."""
    return model.s_matrix(x, zeta)


def amplitude(model: AmplitudeModel, x, zeta):
    """Module-level alias of AmplitudeModel.amplitude."""
    return model.amplitude(x, zeta)


@dataclass(frozen=True)
class AmplitudeDecayReport:
    """Fit of ||P - p0|| against <x> along a cone ray."""

    rho: float
    radii: np.ndarray
    deviations: np.ndarray
    fitted_exponent: float
    required_exponent: float

    @property
    def passed(self) -> bool:
        if np.max(self.deviations) == 0.0:
            return True
        return self.fitted_exponent <= self.required_exponent


def amplitude_decay_check(model: AmplitudeModel, zeta, direction=None, radii=None,
                          slack: float = 0.1) -> AmplitudeDecayReport:
    """Fit the decay exponent of ||P(x) - p0|| along a cone ray."""
    zeta = np.asarray(zeta, dtype=float)
    if direction is None:
        direction = zeta / np.linalg.norm(zeta)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if radii is None:
        radii = np.geomspace(4.0, 400.0, 8)
    radii = np.asarray(radii, dtype=float)
    pts = radii[:, None] * direction[None, :]
    p = model.amplitude(pts, zeta)
    p0 = model.p0(zeta)
    dev = np.linalg.norm((p - p0).reshape(len(radii), -1), axis=1)
    if np.max(dev) == 0.0:
        fitted = float("nan")
    else:
        lb = np.log(np.sqrt(1.0 + radii ** 2))
        fitted = float(np.polyfit(lb, np.log(np.maximum(dev, 1e-300)), 1)[0])
    rho = model.phase.rho
    return AmplitudeDecayReport(rho=rho, radii=radii, deviations=dev,
                                fitted_exponent=fitted,
                                required_exponent=-rho + slack)
