"""Catalog of analytic h-parameterized long-range potential families.

Every family is radial, real-valued and obeys the uniform decay bound

    |d^a V_h(x)| <= C <x>^(-rho - |a|),   <x> = sqrt(1 + |x|^2),

for derivative orders |a| <= 2, with C independent of the family parameter
h in (0, inf].  Families:

``static``
    V_h(x) = kappa <x>^-rho, independent of h.  Exact control case.
``relax``
    V_h(x) = kappa <x>^-rho (1 + a exp(-|x|/h)); the h -> inf member is
    kappa (1 + a) <x>^-rho.  The exponential relaxation keeps the
    derivative bound h-uniform for h >= 1.
``additive``
    V_h(x) = kappa <x>^-rho + h^-1 <x>^-rho2 with rho2 >= rho; the
    h -> inf member is kappa <x>^-rho.

Potentials are analytic callables, never grid samples: the eikonal ray
integrals evaluate them far outside any computation box.  Evaluators are
pure and immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = ["PotentialFamily", "make_family", "verify_decay", "DecayReport"]

FAMILIES = ("static", "relax", "additive")

# Minimal phase term count N <= 2 covers (N+1) rho > 1 only for rho > 1/3.
RHO_MIN = 1.0 / 3.0


def _bracket(r):
    """<r> = sqrt(1 + r^2) for radii r >= 0."""
    return np.sqrt(1.0 + r * r)


@dataclass(frozen=True)
class PotentialFamily:
    """One member (fixed h) of an analytic radial potential family.

    Exposes the radial profile v(r) with two derivatives and the full
    vector evaluators built on it.  h = math.inf selects the declared
    strong-resolvent limit member.
    """

    family_id: str
    rho: float
    kappa: float
    h: float
    extra: float  # relax: relaxation weight a; additive: second exponent rho2

    # -- radial profile -------------------------------------------------

    def radial(self, r):
        """Profile v(r) with V(x) = v(|x|); vectorized over r >= 0."""
        r = np.asarray(r, dtype=float)
        w = _bracket(r)
        base = self.kappa * w ** (-self.rho)
        if self.family_id == "static":
            return base
        if self.family_id == "relax":
            return base * (1.0 + self.extra * self._relax_exp(r))
        # additive
        return base + self._inv_h() * w ** (-self.extra)

    def radial_d1(self, r):
        """First radial derivative v'(r)."""
        r = np.asarray(r, dtype=float)
        w = _bracket(r)
        dbase = -self.rho * self.kappa * r * w ** (-self.rho - 2.0)
        if self.family_id == "static":
            return dbase
        if self.family_id == "relax":
            e = self._relax_exp(r)
            base = self.kappa * w ** (-self.rho)
            return dbase * (1.0 + self.extra * e) + base * self.extra * self._relax_exp_d1(r, e)
        return dbase - self.extra * self._inv_h() * r * w ** (-self.extra - 2.0)

    def radial_d2(self, r):
        """Second radial derivative v''(r)."""
        r = np.asarray(r, dtype=float)
        w = _bracket(r)
        p = self.rho
        d2base = self.kappa * p * ((p + 2.0) * r * r * w ** (-p - 4.0) - w ** (-p - 2.0))
        if self.family_id == "static":
            return d2base
        if self.family_id == "relax":
            a = self.extra
            e = self._relax_exp(r)
            base = self.kappa * w ** (-p)
            dbase = -p * self.kappa * r * w ** (-p - 2.0)
            de = self._relax_exp_d1(r, e)
            d2e = self._relax_exp_d2(r, e)
            return d2base * (1.0 + a * e) + 2.0 * dbase * a * de + base * a * d2e
        q = self.extra
        d2second = self._inv_h() * q * ((q + 2.0) * r * r * w ** (-q - 4.0) - w ** (-q - 2.0))
        return d2base + d2second

    def _inv_h(self):
        return 0.0 if math.isinf(self.h) else 1.0 / self.h

    def _relax_exp(self, r):
        if math.isinf(self.h):
            return np.ones_like(np.asarray(r, dtype=float))
        return np.exp(-np.asarray(r, dtype=float) / self.h)

    def _relax_exp_d1(self, r, e):
        if math.isinf(self.h):
            return np.zeros_like(e)
        return -e / self.h

    def _relax_exp_d2(self, r, e):
        if math.isinf(self.h):
            return np.zeros_like(e)
        return e / (self.h * self.h)

    # -- vector evaluators ----------------------------------------------

    def value(self, x):
        """V_h(x) for x of shape (..., 3); returns shape (...,)."""
        x = np.asarray(x, dtype=float)
        return self.radial(np.linalg.norm(x, axis=-1))

    def gradient(self, x):
        """grad V_h(x), shape (..., 3).  Zero at the origin by convention."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0.0, r, 1.0)
        return (self.radial_d1(r) / safe)[..., None] * x

    def hessian(self, x):
        """Second partials of V_h, shape (..., 3, 3).

        Radial decomposition v'' xhat xhat^T + (v'/r)(I - xhat xhat^T);
        at r -> 0 falls back to v''(0) I (exact for smooth profiles).
        """
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0.0, r, 1.0)
        xh = x / safe[..., None]
        d1 = self.radial_d1(r)
        d2 = self.radial_d2(r)
        eye = np.eye(3)
        outer = xh[..., :, None] * xh[..., None, :]
        rad = np.where(r > 1e-12, d1 / safe, d2)
        hess = d2[..., None, None] * outer + rad[..., None, None] * (eye - outer)
        return hess

    # -- family navigation ----------------------------------------------

    def at_h(self, h: float) -> "PotentialFamily":
        """Sibling member of the same family at a different h."""
        if not (h > 0):
            raise ValueError(f"h must be positive (or math.inf), got {h}")
        return replace(self, h=float(h))

    def limit(self) -> "PotentialFamily":
        """The declared h = inf strong-resolvent limit member."""
        return replace(self, h=math.inf)


def make_family(family_id: str, rho: float, kappa: float, h: float = math.inf,
                extra: float | None = None) -> PotentialFamily:
    """Construct a catalog potential member.

    Parameters
    ----------
    family_id : {'static', 'relax', 'additive'}
    rho : decay exponent, must exceed 1/3 (the phase construction with
        N <= 2 terms requires (N+1) rho > 1).
    kappa : coupling strength.
    h : family parameter in (0, inf]; math.inf selects the limit member.
    extra : family-specific scalar; relaxation weight a for 'relax'
        (default 1.0), second exponent rho2 >= rho for 'additive'
        (default rho + 0.5).
    """
    if family_id not in FAMILIES:
        raise ValueError(f"unknown family_id {family_id!r}; choose from {FAMILIES}")
    if not rho > RHO_MIN:
        raise ValueError(
            f"rho must exceed 1/3 (N <= 2 phase terms need (N+1) rho > 1), got rho={rho}"
        )
    if not math.isfinite(kappa):
        raise ValueError(f"kappa must be finite, got {kappa}")
    if not (h > 0):
        raise ValueError(f"h must be positive (or math.inf), got {h}")
    if extra is None:
        extra = 1.0 if family_id == "relax" else rho + 0.5
    if family_id == "additive" and extra < rho:
        raise ValueError(f"additive family needs rho2 >= rho, got rho2={extra} < rho={rho}")
    return PotentialFamily(family_id=family_id, rho=float(rho), kappa=float(kappa),
                           h=float(h), extra=float(extra))


@dataclass(frozen=True)
class DecayOrderFit:
    """Fit result for one derivative order of the decay bound."""

    order: int
    fitted_exponent: float
    required_exponent: float
    constants: dict  # smallest admissible C per h
    exponent_ok: bool
    uniform_ok: bool
    zero: bool


@dataclass(frozen=True)
class DecayReport:
    """Exponent fits and h-uniform constants for a potential family."""

    family_id: str
    rho: float
    orders: tuple
    h_values: tuple

    @property
    def passed(self) -> bool:
        return all(o.exponent_ok and o.uniform_ok for o in self.orders)


# h sweep over which the constant C must stay uniform.
_DECAY_H_SWEEP = (1.0, 10.0, 100.0, math.inf)
# Admissible spread of C across the h sweep (guards against h-growing bounds).
_UNIFORMITY_FACTOR = 4.0


def _order_samples(member, pts, order):
    """max |d^a V| over multi-indices of the given order, per sample point."""
    if order == 0:
        return np.abs(member.value(pts))
    if order == 1:
        return np.max(np.abs(member.gradient(pts)), axis=-1)
    return np.max(np.abs(member.hessian(pts)), axis=(-2, -1))


def verify_decay(family: PotentialFamily, order_max: int = 2,
                 sample_count: int = 24, seed: int = 7, slack: float = 0.1) -> DecayReport:
    """Fit the decay exponent of max_h |d^a V_h| against <x>.

    Samples log-spaced radii |x| in [1, 1e3] with random directions, sweeps
    h over {1, 10, 100, inf}, fits the log-log slope of the h-envelope per
    derivative order, and reports the smallest admissible constant C per h.
    Passes when every fitted exponent is <= -rho - |a| + slack and the
    constants stay within a fixed factor across the h sweep.
    """
    if order_max > 2:
        raise ValueError("decay check supports derivative orders 0..2 only")
    rng = np.random.default_rng(seed)
    radii = np.logspace(0.0, 3.0, sample_count)
    dirs = rng.normal(size=(sample_count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = radii[:, None] * dirs
    brackets = _bracket(radii)

    members = [family.at_h(h) if not math.isinf(h) else family.limit()
               for h in _DECAY_H_SWEEP]

    fits = []
    for order in range(order_max + 1):
        required = -family.rho - order
        per_h = {}
        envelope = np.zeros(sample_count)
        for h, member in zip(_DECAY_H_SWEEP, members):
            vals = _order_samples(member, pts, order)
            if not np.all(np.isfinite(vals)):
                bad = pts[~np.isfinite(vals)][0]
                raise FloatingPointError(
                    f"non-finite order-{order} derivative of {family.family_id} at x={bad}"
                )
            per_h[h] = float(np.max(vals * brackets ** (-required)))
            envelope = np.maximum(envelope, vals)
        zero = bool(np.max(envelope) == 0.0)
        if zero:
            fitted = float("nan")
            exponent_ok = True
            uniform_ok = True
        else:
            mask = envelope > 0.0
            fitted = float(np.polyfit(np.log(brackets[mask]), np.log(envelope[mask]), 1)[0])
            exponent_ok = fitted <= required + slack
            cs = np.array(list(per_h.values()))
            positive = cs[cs > 0.0]
            uniform_ok = positive.size == 0 or (
                float(np.max(positive)) <= _UNIFORMITY_FACTOR * float(np.min(positive))
            )
        fits.append(DecayOrderFit(order=order, fitted_exponent=fitted,
                                  required_exponent=required, constants=per_h,
                                  exponent_ok=exponent_ok, uniform_ok=uniform_ok,
                                  zero=zero))
    return DecayReport(family_id=family.family_id, rho=family.rho,
                       orders=tuple(fits), h_values=_DECAY_H_SWEEP)
