"""Amplitude matrix, cone cut-off, and energy window."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from diraclab.algebra import dirac_matrices, eigenprojections, Momentum
from diraclab.amplitude import (
    AmplitudeMarginError,
    AmplitudeModel,
    CutoffModel,
    amplitude,
    amplitude_decay_check,
    cutoff_value,
    energy_window,
    s_matrix,
    smooth_step,
)
from diraclab.eikonal import phase_build
from diraclab.potentials import make_family

ALPHA, BETA = dirac_matrices()


def make_model(rho=0.9, kappa=0.2, h=4.0, branch=+1):
    fam = make_family("relax", rho=rho, kappa=kappa, h=h)
    return AmplitudeModel(phase=phase_build(fam), family=fam, branch=branch)


class TestSmoothStep:
    def test_exact_saturation(self):
        assert smooth_step(-0.5) == 0.0
        assert smooth_step(0.0) == 0.0
        assert smooth_step(1.0) == 1.0
        assert smooth_step(2.0) == 1.0

    def test_monotone(self):
        t = np.linspace(-0.2, 1.2, 200)
        v = smooth_step(t)
        assert np.all(np.diff(v) >= 0.0)
        assert np.all((v >= 0.0) & (v <= 1.0))


class TestCutoff:
    def test_zero_at_origin(self):
        c = CutoffModel()
        assert cutoff_value(c, np.zeros(3), np.array([0.0, 0.0, 1.0])) == 0.0

    def test_far_forward_is_one(self):
        c = CutoffModel()
        zeta = np.array([0.0, 0.0, 1.3])
        assert cutoff_value(c, np.array([0.0, 0.0, 50.0]), zeta, +1) == pytest.approx(1.0)

    def test_far_backward_is_zero(self):
        c = CutoffModel()
        zeta = np.array([0.0, 0.0, 1.3])
        assert cutoff_value(c, np.array([0.0, 0.0, -50.0]), zeta, +1) == 0.0
        assert cutoff_value(c, np.array([0.0, 0.0, -50.0]), zeta, -1) == pytest.approx(1.0)

    def test_support_inside_cone(self):
        c = CutoffModel(nu=0.0, ramp_half=0.2)
        taus = np.linspace(-1.0, c.support_nu, 50)
        assert np.all(c.omega(taus, +1) == 0.0)
        assert np.all(c.omega(-taus, -1) == 0.0)

    def test_theta_ramp(self):
        c = CutoffModel(r0=1.0, r1=2.0)
        assert c.theta(0.5) == 0.0
        assert c.theta(1.0) == 0.0
        assert c.theta(2.0) == 1.0
        assert 0.0 < c.theta(1.5) < 1.0


class TestEnergyWindow:
    def test_plateau_values(self):
        c = CutoffModel(delta=(1.2, 2.0), m=1.0)
        s1, s2 = c.window_plateau
        assert s1 == pytest.approx(0.44)
        assert s2 == pytest.approx(3.0)
        for s in np.linspace(s1, s2, 9):
            assert energy_window(c, s) == pytest.approx(1.0)

    def test_outside_support_zero(self):
        c = CutoffModel(delta=(1.2, 2.0), m=1.0, window_ramp=0.3)
        assert energy_window(c, 0.05) == 0.0
        assert energy_window(c, 4.0) == 0.0

    def test_negative_s_rejected(self):
        with pytest.raises(ValueError):
            energy_window(CutoffModel(), -1.0)

    def test_smoothness_on_ramp(self):
        # sixth-order FD of psi stays bounded across the roll-off
        c = CutoffModel(delta=(1.2, 2.0), m=1.0, window_ramp=0.3)
        s = np.linspace(0.14, 0.44, 400)
        h = s[1] - s[0]
        vals = c.psi(s)
        d6 = np.diff(vals, 6) / h ** 6
        assert np.all(np.isfinite(d6))
        assert np.max(np.abs(np.diff(vals))) < 0.05

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            CutoffModel(delta=(0.9, 2.0), m=1.0)


class TestSMatrix:
    def test_zero_coupling_gives_zero(self):
        model = make_model(kappa=0.0)
        s = s_matrix(model, np.array([3.0, 0.0, 4.0]), np.array([0.0, 0.0, 1.2]))
        np.testing.assert_array_equal(s, np.zeros((4, 4)))

    def test_constant_potential_stub(self):
        # V = v, grad Phi = 0  =>  S = v/(2 eta) I
        v = 0.3
        stub_phase = SimpleNamespace(gradient=lambda x, z: np.zeros(np.shape(x)), rho=1.0)
        stub_family = SimpleNamespace(value=lambda x: np.full(np.shape(x)[:-1], v))
        model = AmplitudeModel(phase=stub_phase, family=stub_family)
        zeta = np.array([0.0, 0.0, 1.0])
        s = model.s_matrix(np.array([1.0, 2.0, 2.0]), zeta)
        en = math.sqrt(2.0)
        np.testing.assert_allclose(s, v / (2 * en) * np.eye(4), atol=1e-15)

    def test_hermitian_on_cone_samples(self):
        model = make_model()
        zeta = np.array([0.0, 0.0, 1.2])
        rng = np.random.default_rng(2)
        pts = []
        while len(pts) < 100:
            p = rng.normal(size=3) * 10.0
            if p[2] / np.linalg.norm(p) > 0.0:
                pts.append(p)
        s = model.s_matrix(np.array(pts), zeta)
        herm = np.max(np.abs(s - np.conj(np.swapaxes(s, -1, -2))))
        assert herm < 1e-13

    def test_norm_bound(self):
        model = make_model()
        zeta = np.array([0.0, 0.0, 1.2])
        x = np.array([2.0, 1.0, 5.0])
        v = abs(float(model.family.value(x)))
        g = float(np.linalg.norm(model.phase.gradient(x, zeta)))
        en = math.sqrt(1.0 + 1.44)
        s = model.s_matrix(x, zeta)
        opnorm = np.linalg.norm(s, ord=2)
        assert opnorm <= (v + g) / (2 * en) + 1e-12


class TestAmplitude:
    def test_zero_coupling_returns_projection(self):
        model = make_model(kappa=0.0)
        zeta = np.array([0.4, 0.0, 1.1])
        p = amplitude(model, np.array([1.0, 0.0, 3.0]), zeta)
        np.testing.assert_array_equal(p, model.p0(zeta))

    def test_negative_branch_projection(self):
        model = make_model(kappa=0.0, branch=-1)
        zeta = np.array([0.0, 0.0, 0.0 + 1e-9])
        p = amplitude(model, np.array([0.0, 0.0, 3.0]), zeta)
        se = eigenprojections(Momentum(tuple(zeta)))
        np.testing.assert_allclose(p, se.p_minus, atol=1e-12)

    def test_neumann_series_oracle(self):
        model = make_model(rho=0.9, kappa=0.2)
        zeta = np.array([0.0, 0.0, 1.2])
        rng = np.random.default_rng(6)
        pts = []
        while len(pts) < 20:
            p = rng.normal(size=3) * 6.0
            if np.linalg.norm(p) > 1.0 and p[2] / np.linalg.norm(p) > 0.1:
                pts.append(p)
        pts = np.array(pts)
        p_direct = model.amplitude(pts, zeta)
        s = model.s_matrix(pts, zeta)
        p0 = model.p0(zeta)
        norms = model.s_norm(pts, zeta)
        keep = norms <= 0.3
        assert np.any(keep)
        series = np.broadcast_to(p0, s.shape).copy()
        power = np.broadcast_to(np.eye(4, dtype=complex), s.shape).copy()
        for _ in range(8):
            power = power @ s
            series = series + power @ p0
        err = np.linalg.norm((p_direct - series).reshape(len(pts), -1), axis=1)
        bound = norms ** 9 / (1.0 - norms)
        assert np.all(err[keep] <= bound[keep] + 1e-14)

    def test_decay_fit(self):
        model = make_model(rho=0.9, kappa=0.2)
        rep = amplitude_decay_check(model, np.array([0.0, 0.0, 1.2]))
        assert rep.passed
        assert rep.fitted_exponent <= -0.9 + 0.1

    def test_margin_violation_reports_location(self):
        model = make_model(rho=0.9, kappa=3.5, h=4.0)
        with pytest.raises(AmplitudeMarginError, match="x="):
            model.amplitude(np.array([0.0, 0.0, 2.0]), np.array([0.0, 0.0, 1.2]))
