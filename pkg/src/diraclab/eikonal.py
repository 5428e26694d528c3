"""Eikonal phase construction by ray-integral quadrature.

The oscillating phase of the long-range identification is built iteratively
from ray integrals of the potential,

    Phi = sum_{n=1..N} Phi_(n),      (N + 1) rho > 1,  N in {1, 2},
    Phi_(1) = Q_s(eta V - V^2/2),    Phi_(2) = Q_s(|grad Phi_(1)|^2 / 2),

where the ray transform subtracts the pure-ray contribution so the integral
converges for slowly decaying integrands:

    (Q_s F)(x) = s * int_0^inf (F(x + s t zeta) - F(s t zeta)) dt,  s = +-1.

For the radial catalog potentials everything reduces to scalar integrals
over the scaled ray parameter tau = t |zeta| that depend on x and zeta only
through r = |x| and u' = s <x^, zeta^>; the energy eta(|zeta|) enters as a
polynomial coefficient.  Two evaluation routes exist:

* direct per-point quadrature (`PhaseModel.phase` / `.gradient`), used by
  bound checks and the eigenfunction-residual study;
* dense (r, u') lookup tables (`PhaseModel.tables`), consumed by the
  identification engine where millions of (x, zeta) pairs are touched.

Quadrature is panel-wise Gauss-Legendre on geometrically growing panels
with analytic power-law tail corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .algebra import Momentum
from .potentials import PotentialFamily

__all__ = [
    "RayQuadrature",
    "TailError",
    "q_transform",
    "PhaseModel",
    "PhaseTables",
    "minimal_term_count",
    "phase_build",
    "phase_grad",
    "phase_simple_longrange",
    "phase_hfree_example",
    "phase_bound_check",
    "PhaseBoundReport",
]


class TailError(ValueError):
    """Estimated quadrature tail exceeds the configured tolerance."""


# ---------------------------------------------------------------------------
# panel quadrature
# ---------------------------------------------------------------------------


def _panel_nodes(t_max: float, nodes_per_panel: int, first_panel: float, growth: float):
    """Gauss-Legendre nodes/weights on [0, first] + geometric panels to t_max."""
    base_x, base_w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = [0.0, min(first_panel, t_max)]
    while edges[-1] < t_max:
        edges.append(min(edges[-1] * growth, t_max))
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (base_x + 1.0))
        weights.append(half * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class RayQuadrature:
    """Panel scheme for the ray integrals.

    Geometric panels [0, first], [first, g*first], ... up to t_max with
    fixed Gauss-Legendre order per panel, plus an analytic power-law tail
    correction beyond t_max.  The estimated tail remainder must stay below
    tail_tol or evaluation refuses.
    """

    t_max: float = 1.0e4
    nodes_per_panel: int = 16
    first_panel: float = 1.0
    growth: float = 2.0
    tail_tol: float = 1.0e-5

    def __post_init__(self):
        if self.t_max <= 0 or self.nodes_per_panel < 2 or self.growth <= 1:
            raise ValueError("invalid ray quadrature parameters")

    @cached_property
    def nodes(self):
        return _panel_nodes(self.t_max, self.nodes_per_panel, self.first_panel, self.growth)

    def extended(self, reach: float) -> "RayQuadrature":
        """Quadrature whose cap comfortably exceeds the given spatial reach.

        Tail corrections assume |x| << t_max; evaluations at large radii
        (bound-fit sweeps, nested second-order integrals) scale the cap up,
        which only appends geometric panels.
        """
        need = 64.0 * (reach + 1.0)
        if need <= self.t_max:
            return self
        return replace(self, t_max=need)


def q_transform(f, k, sign: int, quad: RayQuadrature, x, *, tail_exponent=None) -> float:
    """Subtracted ray integral s * int_0^inf (F(x + s t zeta) - F(s t zeta)) dt.

    Parameters
    ----------
    f : callable
        Scalar field on R^3; accepts points of shape (..., 3).
    k : Momentum or array-like
        Carries the ray direction zeta.
    sign : +1 or -1
        Outgoing / incoming ray family.
    quad : RayQuadrature
    x : array-like shape (3,)
        Evaluation point; must lie in the cone where the subtracted
        integrand decays integrably.
    tail_exponent : float, optional
        Known decay power p of the subtracted integrand (~ t^-p).  When
        omitted it is estimated from the last panel.

    Raises
    ------
    TailError
        If the estimated tail beyond t_max exceeds quad.tail_tol.
    FloatingPointError
        On non-finite integrand samples.
    """
    zeta = k.zeta_array if isinstance(k, Momentum) else np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    s = 1.0 if sign >= 0 else -1.0
    t, w = quad.nodes
    ray = s * t[:, None] * zeta[None, :]
    vals = f(x[None, :] + ray) - f(ray)
    if not np.all(np.isfinite(vals)):
        bad = t[~np.isfinite(vals)][0]
        raise FloatingPointError(f"non-finite ray integrand at t={bad} (x={x})")
    body = float(np.dot(w, vals))

    # Power-law tail: D(t) ~ A t^-p  =>  int_T^inf D = D(T) T / (p - 1).
    t_hi = quad.t_max
    d_hi = float(f(x + s * t_hi * zeta) - f(s * t_hi * zeta))
    if d_hi == 0.0:
        tail = 0.0
    else:
        if tail_exponent is None:
            t_lo = t_hi / quad.growth
            d_lo = float(f(x + s * t_lo * zeta) - f(s * t_lo * zeta))
            if d_lo == 0.0 or abs(d_hi) >= abs(d_lo):
                raise TailError(
                    f"ray integrand not decaying at t_max={t_hi:g}; increase t_max"
                )
            p = math.log(abs(d_lo) / abs(d_hi)) / math.log(quad.growth)
        else:
            p = float(tail_exponent)
        if p <= 1.0:
            raise TailError(f"estimated tail power {p:.3f} <= 1 is non-integrable")
        tail = d_hi * t_hi / (p - 1.0)
        # The correction removes the leading t^-p term; the remainder is one
        # order higher in |x| / t_max.
        reach = float(np.linalg.norm(x))
        remainder = abs(tail) * min(1.0, (p + 1.0) * reach / t_hi)
        if remainder > quad.tail_tol:
            suggested = t_hi * (remainder / quad.tail_tol) ** (1.0 / p)
            raise TailError(
                f"estimated tail remainder {remainder:.3e} exceeds tail_tol "
                f"{quad.tail_tol:g}; increase t_max to ~{suggested:.3g}"
            )
    return s * (body + tail)


# ---------------------------------------------------------------------------
# radial profiles and their ray integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _RadialProfile:
    """Scalar radial profile G(r) with derivative, for ray integrals."""

    value: object  # callable r -> G(r)
    deriv: object  # callable r -> G'(r)

    def tail_power(self, t_ref: float) -> float:
        """Effective decay power p with G ~ r^-p near t_ref (log-derivative)."""
        g = float(self.value(np.asarray(t_ref)))
        if g == 0.0:
            return 0.0
        gp = float(self.deriv(np.asarray(t_ref)))
        return max(-t_ref * gp / g, 0.0)


def _profile_v(member: PotentialFamily) -> _RadialProfile:
    return _RadialProfile(value=member.radial, deriv=member.radial_d1)


def _profile_v2(member: PotentialFamily) -> _RadialProfile:
    def val(r):
        v = member.radial(r)
        return v * v

    def der(r):
        return 2.0 * member.radial(r) * member.radial_d1(r)

    return _RadialProfile(value=val, deriv=der)


def _profile_power(rho: float, scale: float) -> _RadialProfile:
    """Bare profile scale * <r>^-rho (the closed-form example phase)."""

    def val(r):
        r = np.asarray(r, dtype=float)
        return scale * (1.0 + r * r) ** (-0.5 * rho)

    def der(r):
        r = np.asarray(r, dtype=float)
        return -scale * rho * r * (1.0 + r * r) ** (-0.5 * rho - 1.0)

    return _RadialProfile(value=val, deriv=der)


def _ray_distances(r, uprime, tau):
    """|x + s t zeta| on the scaled ray: R = sqrt(r^2 + 2 tau r u' + tau^2)."""
    rr = r[..., None]
    uu = uprime[..., None]
    return np.sqrt(np.maximum(rr * rr + 2.0 * tau * rr * uu + tau * tau, 0.0))


def _ray_integrals(profile: _RadialProfile, r, uprime, quad: RayQuadrature,
                   want_i: bool = True, want_grad: bool = True, chunk: int = 2048):
    """Scaled-ray integrals of a radial profile at points (r, u').

    Returns a dict with any of

        I  = int_0^inf [G(R(tau)) - G(tau)] dtau              (subtracted)
        A0 = int_0^inf G'(R)/R dtau
        A1 = int_0^inf tau G'(R)/R dtau

    including analytic power-law tail corrections beyond tau_max.  These
    are the building blocks of Phi_(1) and grad Phi_(1): for F(y) =
    c_G G(|y|) one has Q_s F = s (c_G / k) I(r, s u) and

        int_0^inf grad F(x + s t zeta) dt
            = (c_G / k) [ x A0(r, s u) + s zeta^ A1(r, s u) ].
    """
    r = np.asarray(r, dtype=float)
    uprime = np.asarray(uprime, dtype=float)
    shape = np.broadcast_shapes(r.shape, uprime.shape)
    r = np.broadcast_to(r, shape).reshape(-1)
    uprime = np.broadcast_to(uprime, shape).reshape(-1)
    tau, w = quad.nodes
    n = r.size

    out = {}
    if want_i:
        out["I"] = np.empty(n)
    if want_grad:
        out["A0"] = np.empty(n)
        out["A1"] = np.empty(n)

    g_tau = profile.value(tau) if want_i else None
    t_hi = quad.t_max
    g_hi = float(profile.value(np.asarray(t_hi)))
    gp_hi = float(profile.deriv(np.asarray(t_hi)))
    p = profile.tail_power(t_hi)
    has_tail = g_hi != 0.0 and p > 0.0

    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        rr, uu = r[sl], uprime[sl]
        R = _ray_distances(rr, uu, tau)
        if want_i:
            vals = profile.value(R) - g_tau
            body = vals @ w
            # tail of the subtracted integrand, from R ~ tau + r u' + ...
            if has_tail:
                ru = rr * uu
                tail = (-g_hi * ru
                        - (p / (p + 1.0)) * (rr * rr * (1.0 - uu * uu) / 2.0) * g_hi / t_hi
                        + 0.5 * p * ru * ru * g_hi / t_hi)
            else:
                tail = 0.0
            out["I"][sl] = body + tail
        if want_grad:
            gpR = profile.deriv(R)
            safe = np.where(R > 0.0, R, 1.0)
            kern = np.where(R > 0.0, gpR / safe, 0.0)
            a0 = kern @ w
            a1 = (kern * tau) @ w
            if has_tail:
                a0 = a0 + gp_hi / (p + 1.0)
                a1 = a1 + (-g_hi - rr * uprime[sl] * gp_hi * (p + 2.0) / (p + 1.0))
            out["A0"][sl] = a0
            out["A1"][sl] = a1

    for key in out:
        out[key] = out[key].reshape(shape)
        if not np.all(np.isfinite(out[key])):
            raise FloatingPointError(f"non-finite ray integral ({key})")
    return out


def _power_tail(vals, tau, nodes_per_panel):
    """Generic power-law tail from the last two panel means of an integrand."""
    npp = nodes_per_panel
    if vals.shape[-1] < 2 * npp:
        return np.zeros(vals.shape[:-1])
    d_hi = np.mean(vals[..., -npp:], axis=-1)
    d_lo = np.mean(vals[..., -2 * npp:-npp], axis=-1)
    t_hi = float(np.mean(tau[-npp:]))
    t_lo = float(np.mean(tau[-2 * npp:-npp]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(d_lo) / np.abs(d_hi)
        p = np.log(np.where(ratio > 1.0, ratio, np.e)) / math.log(t_hi / t_lo)
    ok = (d_hi != 0.0) & (np.abs(d_hi) < np.abs(d_lo)) & (p > 1.0)
    return np.where(ok, d_hi * t_hi / np.maximum(p - 1.0, 1e-12), 0.0)


# ---------------------------------------------------------------------------
# phase model
# ---------------------------------------------------------------------------


def minimal_term_count(rho: float) -> int:
    """Smallest N in {1, 2} with (N + 1) rho > 1."""
    if 2.0 * rho > 1.0:
        return 1
    if 3.0 * rho > 1.0:
        return 2
    raise ValueError(f"rho={rho} needs N > 2 phase terms; only N <= 2 is supported")


@dataclass(frozen=True)
class PhaseModel:
    """Evaluatable eikonal phase Phi(x, zeta) with spatial gradient.

    Attributes
    ----------
    sign : +1 (outgoing rays, t -> +inf) or -1.
    branch : +1 for the positive-energy part, -1 replaces eta by -eta.
    n_terms : number of iteration terms N in {1, 2}.
    rho : decay exponent of the underlying profile.
    profile_a : radial profile multiplied by (branch * eta) in F_(0).
    profile_b : optional radial profile entering with coefficient -1/2
        (the V^2 correction); None for the simplified phases.
    family : underlying potential member (h fixed); None for synthetic
        coupling-free profiles.
    m : particle mass entering eta(zeta).
    quad : ray quadrature scheme.
    """

    sign: int
    branch: int
    n_terms: int
    rho: float
    profile_a: _RadialProfile
    profile_b: _RadialProfile | None
    family: PotentialFamily | None
    m: float = 1.0
    quad: RayQuadrature = field(default_factory=RayQuadrature)
    label: str = "built"

    # -- geometry helpers --------------------------------------------------

    def _split(self, x, zeta):
        x = np.asarray(x, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        kk = float(np.linalg.norm(zeta))
        if kk == 0.0:
            raise ValueError("zeta must be nonzero")
        zh = zeta / kk
        safe = np.where(r > 0.0, r, 1.0)
        u = (x @ zh) / safe
        uprime = self.sign * np.where(r > 0.0, u, 0.0)
        eta_b = self.branch * math.sqrt(kk * kk + self.m * self.m)
        return x, r, np.clip(uprime, -1.0, 1.0), kk, zh, eta_b

    def _quad_for(self, r):
        return self.quad.extended(float(np.max(r)) if np.size(r) else 0.0)

    # -- first-order term --------------------------------------------------

    def _phi1(self, r, uprime, kk, eta_b, quad):
        ia = _ray_integrals(self.profile_a, r, uprime, quad, want_grad=False)["I"]
        phi = eta_b * ia
        if self.profile_b is not None:
            ib = _ray_integrals(self.profile_b, r, uprime, quad, want_grad=False)["I"]
            phi = phi - 0.5 * ib
        return self.sign * phi / kk

    def _grad1_parts(self, r, uprime, kk, eta_b, quad):
        """Coefficients (g0, g1) with grad Phi_(1) = g0 x + g1 zeta^."""
        ga = _ray_integrals(self.profile_a, r, uprime, quad, want_i=False)
        a0 = eta_b * ga["A0"]
        a1 = eta_b * ga["A1"]
        if self.profile_b is not None:
            gb = _ray_integrals(self.profile_b, r, uprime, quad, want_i=False)
            a0 = a0 - 0.5 * gb["A0"]
            a1 = a1 - 0.5 * gb["A1"]
        return self.sign * a0 / kk, a1 / kk

    # -- second-order term (N = 2) -------------------------------------------

    def _f1(self, ry, uy, kk, eta_b, quad):
        """F_(1) = |grad Phi_(1)|^2 / 2 at scaled-ray geometry (ry, uy = s u)."""
        g0, g1 = self._grad1_parts(ry, uy, kk, eta_b, quad)
        cross = ry * (self.sign * uy)  # x . zeta^ = r u
        return 0.5 * (g0 * g0 * ry * ry + g1 * g1 + 2.0 * g0 * g1 * cross)

    def _phi2(self, r, uprime, kk, eta_b, quad):
        tau, w = quad.nodes
        shape = np.broadcast_shapes(np.shape(r), np.shape(uprime))
        r = np.broadcast_to(np.asarray(r, float), shape).reshape(-1)
        uprime = np.broadcast_to(np.asarray(uprime, float), shape).reshape(-1)
        inner = quad.extended(quad.t_max + (float(np.max(r)) if r.size else 0.0))
        f1_ray = self._f1(tau, np.ones_like(tau), kk, eta_b, inner)
        out = np.empty(r.size)
        for i in range(r.size):
            R = np.sqrt(r[i] ** 2 + 2.0 * tau * r[i] * uprime[i] + tau * tau)
            U = np.where(R > 0.0, (r[i] * uprime[i] + tau) / np.where(R > 0, R, 1.0), 1.0)
            vals = self._f1(R, np.clip(U, -1.0, 1.0), kk, eta_b, inner) - f1_ray
            tail = float(_power_tail(vals[None, :], tau, quad.nodes_per_panel)[0])
            out[i] = self.sign * (float(vals @ w) + tail) / kk
        return out.reshape(shape)

    # -- public evaluators -----------------------------------------------------

    def phase(self, x, zeta):
        """Phi(x, zeta) by direct quadrature; x (..., 3), zeta (3,)."""
        x, r, uprime, kk, _, eta_b = self._split(x, zeta)
        quad = self._quad_for(r)
        phi = self._phi1(r, uprime, kk, eta_b, quad)
        if self.n_terms >= 2:
            phi = phi + self._phi2(r, uprime, kk, eta_b, quad)
        return phi

    def gradient(self, x, zeta, fd_rel: float = 0.02):
        """grad_x Phi; analytic for Phi_(1), sixth-order FD for Phi_(2).

        The FD step scales with <x>, the variation scale of the phase.
        """
        x, r, uprime, kk, zh, eta_b = self._split(x, zeta)
        quad = self._quad_for(r)
        g0, g1 = self._grad1_parts(r, uprime, kk, eta_b, quad)
        grad = g0[..., None] * x + g1[..., None] * zh
        if self.n_terms >= 2:
            grad = grad + self._fd_grad2(x, zeta, fd_rel)
        return grad

    def _fd_grad2(self, x, zeta, fd_rel):
        orig_shape = np.shape(x)
        pts0 = np.asarray(x, dtype=float).reshape(-1, 3)
        steps = fd_rel * np.sqrt(1.0 + np.sum(pts0 * pts0, axis=-1))
        coeff = np.array([-1.0, 9.0, -45.0, 45.0, -9.0, 1.0]) / 60.0
        offs = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
        grad = np.zeros_like(pts0)
        for axis in range(3):
            pts = np.repeat(pts0[:, None, :], 6, axis=1)
            pts[:, :, axis] += offs[None, :] * steps[:, None]
            _, r, uprime, kk, _, eta_b = self._split(pts, zeta)
            quad = self._quad_for(r)
            vals = self._phi2(r, uprime, kk, eta_b, quad)
            grad[:, axis] = (vals @ coeff) / steps
        return grad.reshape(orig_shape)

    # -- engine tables ---------------------------------------------------------

    def tables(self, r_max: float, nr: int = 257, nu: int = 193,
               u_min: float = -0.6) -> "PhaseTables":
        """Dense (r, u') tables for the PSDO engine; built once per key.

        The lazily filled cache is write-once: concurrent builders compute
        identical deterministic tables.
        """
        key = (round(float(r_max), 6), nr, nu, round(float(u_min), 6))
        cache = self.__dict__.setdefault("_table_cache", {})
        if key not in cache:
            cache[key] = PhaseTables.build(self, r_max=r_max, nr=nr, nu=nu, u_min=u_min)
        return cache[key]


# ---------------------------------------------------------------------------
# lookup tables for the engine
# ---------------------------------------------------------------------------


def _cubic_weights(frac):
    """Catmull-Rom weights for 4-point interpolation on a uniform grid."""
    f = frac
    f2 = f * f
    f3 = f2 * f
    w0 = -0.5 * f3 + f2 - 0.5 * f
    w1 = 1.5 * f3 - 2.5 * f2 + 1.0
    w2 = -1.5 * f3 + 2.0 * f2 + 0.5 * f
    w3 = 0.5 * f3 - 0.5 * f2
    return w0, w1, w2, w3


def _deriv4(arr, step, axis):
    """Fourth-order central differences with second-order edges."""
    d = np.gradient(arr, step, axis=axis, edge_order=2)
    inner = (np.roll(arr, 2, axis=axis) - 8.0 * np.roll(arr, 1, axis=axis)
             + 8.0 * np.roll(arr, -1, axis=axis) - np.roll(arr, -2, axis=axis)) / (12.0 * step)
    idx = [slice(None)] * arr.ndim
    idx[axis] = slice(2, -2)
    d[tuple(idx)] = inner[tuple(idx)]
    return d


@dataclass(frozen=True)
class PhaseTables:
    """Per-model lookup tables on a uniform (r, u') grid.

    Holds the subtracted ray integral I and the gradient kernels A0, A1 for
    the eta-linear profile (suffix A) and the V^2 profile (suffix B, when
    present), plus, for N = 2 models, the second-order quadratic-form
    integrals J.. and their grid derivatives.  Evaluation contract per
    (x, zeta) pair, after row interpolation in r = |x|:

        Phi  = sign/k (eta_b IA - IB/2) + sign/(2k^3)(eta_b^2 Jaa - eta_b Jab + Jbb/4)
        grad Phi = g0 x + g1 zeta^
    """

    sign: int
    branch: int
    n_terms: int
    r_max: float
    dr: float
    nr: int
    u0: float
    du: float
    nu: int
    data: dict

    @staticmethod
    def build(model: PhaseModel, r_max: float, nr: int, nu: int,
              u_min: float) -> "PhaseTables":
        if u_min < -0.95:
            raise ValueError("phase tables support u_min >= -0.95")
        # Margin rows beyond u' = 1 keep the cubic stencil inside the data;
        # the ray integrand continues analytically there (tau >= 0 keeps the
        # ray distance positive for u' > 0).
        du = (1.0 - u_min) / (nu - 4)
        u0 = u_min - du
        u_grid = u0 + du * np.arange(nu)
        r_grid = np.linspace(0.0, r_max, nr)
        rr, uu = np.meshgrid(r_grid, u_grid, indexing="ij")
        quad = model.quad
        data = {}
        ga = _ray_integrals(model.profile_a, rr, uu, quad)
        data["IA"], data["A0A"], data["A1A"] = ga["I"], ga["A0"], ga["A1"]
        if model.profile_b is not None:
            gb = _ray_integrals(model.profile_b, rr, uu, quad)
            data["IB"], data["A0B"], data["A1B"] = gb["I"], gb["A0"], gb["A1"]
        if model.n_terms >= 2:
            PhaseTables._build_second(model, r_grid, u_grid, data)
        return PhaseTables(sign=model.sign, branch=model.branch, n_terms=model.n_terms,
                           r_max=r_max, dr=float(r_grid[1] - r_grid[0]), nr=nr,
                           u0=float(u0), du=float(du), nu=nu, data=data)

    @staticmethod
    def _build_second(model: PhaseModel, r_grid, u_grid, data):
        """Tables of Phi_(2)'s quadratic forms and their grid derivatives.

        The forms P.. combine the A0/A1 kernels; they are tabulated on an
        extended log radial grid so the outer ray integral reaches far
        beyond the box, then integrated along scaled rays.
        """
        quad = model.quad
        tau, w = quad.nodes
        r_ext = np.concatenate([r_grid, np.geomspace(
            max(r_grid[-1] * 1.02, 1.0), quad.t_max + r_grid[-1], 161)])
        inner = quad.extended(float(r_ext[-1]))
        uu = u_grid[None, :]
        kern = {}
        zero = _RadialProfile(value=lambda r: np.zeros_like(np.asarray(r, float)),
                              deriv=lambda r: np.zeros_like(np.asarray(r, float)))
        for name, prof in (("a", model.profile_a), ("b", model.profile_b or zero)):
            g = _ray_integrals(prof, r_ext[:, None], uu, inner, want_i=False)
            kern[name + "0"], kern[name + "1"] = g["A0"], g["A1"]

        ru = r_ext[:, None] * uu

        def quad_form(p0, q0, p1, q1):
            return (kern[p0] * kern[q0] * (r_ext ** 2)[:, None]
                    + kern[p1] * kern[q1]
                    + ru * (kern[p0] * kern[q1] + kern[p1] * kern[q0]))

        pforms = {
            "Jaa": quad_form("a0", "a0", "a1", "a1"),
            "Jab": quad_form("a0", "b0", "a1", "b1"),
            "Jbb": quad_form("b0", "b0", "b1", "b1"),
        }

        du_g = float(u_grid[1] - u_grid[0])

        def interp_p(table, R, U):
            Rc = np.clip(R, r_ext[0], r_ext[-1])
            ir = np.clip(np.searchsorted(r_ext, Rc) - 1, 0, r_ext.size - 2)
            fr = (Rc - r_ext[ir]) / (r_ext[ir + 1] - r_ext[ir])
            Uc = np.clip(U, u_grid[0], u_grid[-1])
            iu = np.clip(((Uc - u_grid[0]) / du_g).astype(int), 0, u_grid.size - 2)
            fu = (Uc - (u_grid[0] + iu * du_g)) / du_g
            return (table[ir, iu] * (1 - fr) * (1 - fu) + table[ir, iu + 1] * (1 - fr) * fu
                    + table[ir + 1, iu] * fr * (1 - fu) + table[ir + 1, iu + 1] * fr * fu)

        for name, ptab in pforms.items():
            ray_profile = interp_p(ptab, tau, np.ones_like(tau))
            out = np.empty((r_grid.size, u_grid.size))
            for i in range(r_grid.size):
                R = np.sqrt(r_grid[i] ** 2
                            + 2.0 * tau[None, :] * r_grid[i] * u_grid[:, None]
                            + (tau * tau)[None, :])
                U = (r_grid[i] * u_grid[:, None] + tau[None, :]) / np.where(R > 0, R, 1.0)
                vals = interp_p(ptab, R, np.clip(U, -1.0, 1.0)) - ray_profile[None, :]
                out[i] = vals @ w + _power_tail(vals, tau, quad.nodes_per_panel)
            data[name] = out
        dr = float(r_grid[1] - r_grid[0])
        for name in ("Jaa", "Jab", "Jbb"):
            data[name + "_r"] = _deriv4(data[name], dr, axis=0)
            data[name + "_u"] = _deriv4(data[name], du_g, axis=1)

    # -- evaluation --------------------------------------------------------

    KERNEL_ORDER_FIRST = ("IA", "A0A", "A1A")
    KERNEL_ORDER_B = ("IB", "A0B", "A1B")
    KERNEL_ORDER_SECOND = ("Jaa", "Jab", "Jbb", "Jaa_r", "Jab_r", "Jbb_r",
                           "Jaa_u", "Jab_u", "Jbb_u")

    def stacked(self) -> np.ndarray:
        """All tables as one contiguous (T, nr, nu) block in kernel order."""
        cached = self.__dict__.get("_stacked")
        if cached is None:
            names = list(self.KERNEL_ORDER_FIRST)
            if "IB" in self.data:
                names += list(self.KERNEL_ORDER_B)
            if self.n_terms >= 2:
                names += list(self.KERNEL_ORDER_SECOND)
            cached = np.ascontiguousarray(np.stack([self.data[n] for n in names]))
            self.__dict__["_stacked"] = cached
        return cached

    def row_interp(self, r):
        """Cubic interpolation along r; returns name -> (len(r), nu) rows."""
        r = np.asarray(r, dtype=float)
        pos = np.clip(r / self.dr, 1.0, self.nr - 3.0)
        idx = pos.astype(np.intp)
        frac = pos - idx
        w0, w1, w2, w3 = _cubic_weights(frac[:, None])
        rows = {}
        for name, tab in self.data.items():
            rows[name] = (w0 * tab[idx - 1] + w1 * tab[idx] + w2 * tab[idx + 1]
                          + w3 * tab[idx + 2])
        return rows

    def pair_eval(self, rows, uprime):
        """Cubic interpolation along u' of pre-interpolated r-rows.

        `uprime` has shape (nx, nk); each rows[name] has shape (nx, nu).
        """
        pos = np.clip((uprime - self.u0) / self.du, 1.0, self.nu - 3.0)
        idx = pos.astype(np.intp)
        frac = pos - idx
        w0, w1, w2, w3 = _cubic_weights(frac)
        rix = np.arange(uprime.shape[0])[:, None]
        out = {}
        for name, row in rows.items():
            out[name] = (w0 * row[rix, idx - 1] + w1 * row[rix, idx]
                         + w2 * row[rix, idx + 1] + w3 * row[rix, idx + 2])
        return out

    def phase_and_grad(self, vals, r, uprime, kk, eta_b):
        """Assemble Phi and gradient coefficients (g0, g1) per pair.

        vals : dict from pair_eval, shapes (nx, nk);
        r : (nx, 1); uprime : (nx, nk); kk, eta_b : (nk,) per zeta column.
        grad Phi = g0 * x + g1 * zeta^.
        """
        s = float(self.sign)
        inv_k = 1.0 / kk
        phi = eta_b * vals["IA"]
        a0 = eta_b * vals["A0A"]
        a1 = eta_b * vals["A1A"]
        if "IB" in vals:
            phi = phi - 0.5 * vals["IB"]
            a0 = a0 - 0.5 * vals["A0B"]
            a1 = a1 - 0.5 * vals["A1B"]
        phi = s * phi * inv_k
        g0 = s * a0 * inv_k
        g1 = a1 * inv_k
        if self.n_terms >= 2:
            c = s * 0.5 * inv_k ** 3
            combo = eta_b ** 2 * vals["Jaa"] - eta_b * vals["Jab"] + 0.25 * vals["Jbb"]
            combo_r = eta_b ** 2 * vals["Jaa_r"] - eta_b * vals["Jab_r"] + 0.25 * vals["Jbb_r"]
            combo_u = eta_b ** 2 * vals["Jaa_u"] - eta_b * vals["Jab_u"] + 0.25 * vals["Jbb_u"]
            phi = phi + c * combo
            safe_r = np.maximum(r, 1.0e-9)
            g0 = g0 + c * (combo_r / safe_r - uprime * combo_u / (safe_r * safe_r))
            g1 = g1 + c * s * combo_u / safe_r
        return phi, g0, g1


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _member(family: PotentialFamily, h: float | None) -> PotentialFamily:
    if h is None:
        return family
    return family.at_h(h) if math.isfinite(h) else family.limit()


def phase_build(family: PotentialFamily, h: float | None = None, sign: int = +1,
                n_terms: int | None = None, m: float = 1.0,
                quad: RayQuadrature | None = None, branch: int = +1) -> PhaseModel:
    """Iteratively constructed phase with F_(0) = eta V - V^2/2.

    n_terms defaults to the minimal N with (N + 1) rho > 1; rho <= 1/3 is
    rejected (would need N > 2).
    """
    member = _member(family, h)
    n = minimal_term_count(member.rho) if n_terms is None else int(n_terms)
    if n not in (1, 2):
        raise ValueError(f"n_terms must be 1 or 2, got {n}")
    if (n + 1) * member.rho <= 1.0:
        raise ValueError(f"(N+1) rho > 1 violated: N={n}, rho={member.rho}")
    return PhaseModel(sign=+1 if sign >= 0 else -1, branch=+1 if branch >= 0 else -1,
                      n_terms=n, rho=member.rho, profile_a=_profile_v(member),
                      profile_b=_profile_v2(member), family=member, m=m,
                      quad=quad or RayQuadrature(), label="built")


def phase_simple_longrange(family: PotentialFamily, h: float | None = None,
                           sign: int = +1, m: float = 1.0,
                           quad: RayQuadrature | None = None,
                           branch: int = +1) -> PhaseModel:
    """Simplified phase Phi = +- eta(zeta) Q_s(V_h), valid for rho in (1/2, 1).

    Drops the quadratic -V^2/2 term of the full construction.
    """
    member = _member(family, h)
    if not (0.5 < member.rho < 1.0):
        raise ValueError(
            f"simplified long-range phase requires rho in (1/2, 1), got {member.rho}"
        )
    return PhaseModel(sign=+1 if sign >= 0 else -1, branch=+1 if branch >= 0 else -1,
                      n_terms=1, rho=member.rho, profile_a=_profile_v(member),
                      profile_b=None, family=member, m=m,
                      quad=quad or RayQuadrature(), label="simple")


def phase_hfree_example(rho: float, sign: int = +1, m: float = 1.0,
                        quad: RayQuadrature | None = None, branch: int = +1,
                        scale: float = 1.0) -> PhaseModel:
    """Closed-form parameter-free phase from the bare profile <y>^-rho.

    Phi = +- eta(zeta) int_0^inf (<x +- t zeta>^-rho - <+- t zeta>^-rho) dt,
    h-independent by construction.  `scale` multiplies the profile
    (coupling-matched pairings in equivalence studies); default 1.0 is the
    bare closed form.
    """
    if not (0.0 < rho <= 1.0):
        raise ValueError(f"h-free example phase requires rho in (0, 1], got {rho}")
    return PhaseModel(sign=+1 if sign >= 0 else -1, branch=+1 if branch >= 0 else -1,
                      n_terms=1, rho=rho, profile_a=_profile_power(rho, scale),
                      profile_b=None, family=None, m=m,
                      quad=quad or RayQuadrature(), label="hfree")


def phase_grad(model: PhaseModel, x, k) -> np.ndarray:
    """grad_x Phi(x, zeta); module-level alias of PhaseModel.gradient."""
    zeta = k.zeta_array if isinstance(k, Momentum) else np.asarray(k, dtype=float)
    return model.gradient(x, zeta)


# ---------------------------------------------------------------------------
# bound check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseBoundReport:
    """Log-log growth fits of |Phi| and |grad Phi| on the cone."""

    rho: float
    radii: np.ndarray
    phi_max: np.ndarray
    grad_max: np.ndarray
    phi_exponent: float
    grad_exponent: float
    phi_required: float
    grad_required: float
    zero: bool

    @property
    def passed(self) -> bool:
        if self.zero:
            return True
        return (self.phi_exponent <= self.phi_required
                and self.grad_exponent <= self.grad_required)


def phase_bound_check(model: PhaseModel, nu: float = 0.0, sample_count: int = 6,
                      radii=None, k_values=(0.8, 1.2, 1.7), slack: float = 0.1,
                      seed: int = 11) -> PhaseBoundReport:
    """Fit max |Phi| and max |grad Phi| against <x> on cone samples.

    Radii default to a high range (1e3 .. 1e6) so that the logarithmic
    growth of the rho = 1 case fits within the +slack allowance; the
    quadrature cap extends automatically with the radius.
    """
    if radii is None:
        radii = np.geomspace(1.0e3, 1.0e6, 7)
    radii = np.asarray(radii, dtype=float)
    if sample_count < 1:
        raise ValueError("need at least one cone sample")
    rng = np.random.default_rng(seed)
    u_samples = rng.uniform(nu + 0.05, 0.98, sample_count)

    phi_max = np.zeros(radii.size)
    grad_max = np.zeros(radii.size)
    for kk in k_values:
        zeta = np.array([0.0, 0.0, kk])
        for us in u_samples:
            uz = us * model.sign  # u' = sign * u lands in the sampled range
            dirs = np.array([math.sqrt(max(0.0, 1.0 - uz * uz)), 0.0, uz])
            pts = radii[:, None] * dirs[None, :]
            phi_max = np.maximum(phi_max, np.abs(model.phase(pts, zeta)))
            grad_max = np.maximum(grad_max,
                                  np.max(np.abs(model.gradient(pts, zeta)), axis=-1))
    zero = bool(np.max(phi_max) == 0.0)
    if zero:
        phi_exp = grad_exp = float("nan")
    else:
        lb = np.log(np.sqrt(1.0 + radii ** 2))
        phi_exp = float(np.polyfit(lb, np.log(np.maximum(phi_max, 1e-300)), 1)[0])
        grad_exp = float(np.polyfit(lb, np.log(np.maximum(grad_max, 1e-300)), 1)[0])
    return PhaseBoundReport(rho=model.rho, radii=radii, phi_max=phi_max,
                            grad_max=grad_max, phi_exponent=phi_exp,
                            grad_exponent=grad_exp, phi_required=1.0 - model.rho + slack,
                            grad_required=-model.rho + slack, zero=zero)
