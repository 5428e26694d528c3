"""Ray transform and eikonal phase models against independent oracles."""

import math

import numpy as np
import pytest
from scipy.special import erfc

from diraclab.algebra import Momentum
from diraclab.eikonal import (
    PhaseModel,
    RayQuadrature,
    TailError,
    minimal_term_count,
    phase_bound_check,
    phase_build,
    phase_grad,
    phase_hfree_example,
    phase_simple_longrange,
    q_transform,
)
from diraclab.potentials import make_family

QUAD = RayQuadrature()


def gaussian(pts):
    pts = np.asarray(pts, dtype=float)
    return np.exp(-np.sum(pts * pts, axis=-1))


class TestQTransform:
    def test_zero_at_origin_exact(self):
        fam = make_family("static", rho=0.8, kappa=1.0)
        val = q_transform(fam.value, Momentum((0.0, 0.0, 1.2)), +1, QUAD, np.zeros(3),
                          tail_exponent=1.8)
        assert val == 0.0

    def test_gaussian_erfc_closed_form(self):
        # substitution s = a + t gives (sqrt(pi)/2)(erfc(a) - 1)
        for a in (0.3, 1.0, 2.5):
            x = np.array([0.0, 0.0, a])
            k = Momentum((0.0, 0.0, 1.0))
            val = q_transform(gaussian, k, +1, QUAD, x)
            expected = 0.5 * math.sqrt(math.pi) * (erfc(a) - 1.0)
            assert val == pytest.approx(expected, abs=1e-8)

    def test_gaussian_erfc_minus_sign(self):
        # sign=-1 at x = -a zeta^ traverses the same profile
        a = 0.7
        val = q_transform(gaussian, Momentum((0.0, 0.0, 1.0)), -1, QUAD,
                          np.array([0.0, 0.0, -a]))
        expected = -0.5 * math.sqrt(math.pi) * (erfc(a) - 1.0)
        assert val == pytest.approx(expected, abs=1e-8)

    def test_linearity(self):
        fam1 = make_family("static", rho=0.8, kappa=1.0)
        fam2 = make_family("static", rho=1.2, kappa=0.5)
        x = np.array([1.0, 2.0, 3.0])
        k = Momentum((0.0, 0.0, 1.3))

        def fsum(pts):
            return fam1.value(pts) + fam2.value(pts)

        v1 = q_transform(fam1.value, k, +1, QUAD, x, tail_exponent=1.8)
        v2 = q_transform(fam2.value, k, +1, QUAD, x, tail_exponent=2.2)
        # the summed integrand mixes two tail powers, so a single power-law
        # correction is exact only to the tail tolerance
        vs = q_transform(fsum, k, +1, QUAD, x)
        assert vs == pytest.approx(v1 + v2, abs=2.0 * QUAD.tail_tol)

    def test_tail_refusal_names_larger_cap(self):
        fam = make_family("static", rho=0.4, kappa=1.0)
        tiny = RayQuadrature(t_max=100.0, tail_tol=1e-12)
        with pytest.raises(TailError, match="increase t_max"):
            q_transform(fam.value, Momentum((0.0, 0.0, 1.0)), +1, tiny,
                        np.array([0.0, 0.0, 30.0]))

    def test_nonfinite_integrand_reported(self):
        def bad(pts):
            pts = np.asarray(pts)
            vals = np.sum(pts, axis=-1)
            return np.where(np.abs(vals - 3.0) < 2.0, np.nan, 1.0 / (1.0 + vals ** 2))

        with pytest.raises(FloatingPointError, match="non-finite"):
            q_transform(bad, Momentum((0.0, 0.0, 1.0)), +1, QUAD, np.array([0.0, 0.0, 1.0]))


class TestMinimalTermCount:
    def test_values(self):
        assert minimal_term_count(0.6) == 1
        assert minimal_term_count(1.0) == 1
        assert minimal_term_count(0.5) == 2
        assert minimal_term_count(0.4) == 2

    def test_too_small(self):
        with pytest.raises(ValueError):
            minimal_term_count(0.3)


class TestPhaseModels:
    def test_zero_potential_phase_identically_zero(self):
        fam = make_family("static", rho=0.8, kappa=0.0)
        model = phase_build(fam)
        pts = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [10.0, 0.0, 5.0]])
        np.testing.assert_array_equal(model.phase(pts, np.array([0.0, 0.0, 1.2])), 0.0)
        np.testing.assert_array_equal(model.gradient(pts, np.array([0.0, 0.0, 1.2])), 0.0)

    def test_phase_zero_at_origin_exact(self):
        fam = make_family("relax", rho=0.75, kappa=0.4, h=3.0)
        for label, model in [
            ("built", phase_build(fam)),
            ("simple", phase_simple_longrange(fam)),
            ("hfree", phase_hfree_example(0.75)),
        ]:
            val = model.phase(np.zeros(3), np.array([0.4, -0.3, 1.0]))
            assert float(val) == 0.0, label

    def test_build_minimal_n(self):
        fam = make_family("static", rho=0.6, kappa=0.3)
        assert phase_build(fam).n_terms == 1
        fam2 = make_family("static", rho=0.4, kappa=0.3)
        assert phase_build(fam2).n_terms == 2

    def test_build_rejects_insufficient_n(self):
        fam = make_family("static", rho=0.4, kappa=0.3)
        with pytest.raises(ValueError, match="rho"):
            phase_build(fam, n_terms=1)

    def test_phase_against_q_transform_oracle(self):
        # direct q_transform of F0 = eta V - V^2/2 must match the reduced path
        fam = make_family("relax", rho=0.85, kappa=0.3, h=4.0)
        zeta = np.array([0.3, -0.5, 1.1])
        k = Momentum(tuple(zeta))
        en = math.sqrt(np.dot(zeta, zeta) + 1.0)
        model = phase_build(fam, n_terms=1)

        def f0(pts):
            v = fam.value(pts)
            return en * v - 0.5 * v * v

        for x in (np.array([2.0, 1.0, 4.0]), np.array([-1.0, 3.0, 8.0])):
            oracle = q_transform(f0, k, +1, QUAD, x, tail_exponent=1.85)
            val = float(model.phase(x, zeta))
            assert val == pytest.approx(oracle, rel=2e-6, abs=1e-7)

    def test_minus_sign_against_q_transform_oracle(self):
        fam = make_family("static", rho=0.7, kappa=0.5)
        zeta = np.array([0.0, 0.8, 0.9])
        k = Momentum(tuple(zeta))
        en = math.sqrt(np.dot(zeta, zeta) + 1.0)
        model = phase_build(fam, sign=-1, n_terms=1)

        def f0(pts):
            v = fam.value(pts)
            return en * v - 0.5 * v * v

        x = np.array([1.0, -2.0, -5.0])
        oracle = q_transform(f0, k, -1, QUAD, x, tail_exponent=1.7)
        assert float(model.phase(x, zeta)) == pytest.approx(oracle, rel=2e-6, abs=1e-7)

    def test_simple_plus_quadratic_recombines_built(self):
        fam = make_family("static", rho=0.8, kappa=0.6)
        zeta = np.array([0.0, 0.0, 1.3])
        k = Momentum(tuple(zeta))
        built = phase_build(fam, n_terms=1)
        simple = phase_simple_longrange(fam)

        def v2(pts):
            v = fam.value(pts)
            return -0.5 * v * v

        x = np.array([3.0, 1.0, 6.0])
        q_v2 = q_transform(v2, k, +1, QUAD, x, tail_exponent=2.6)
        diff = float(built.phase(x, zeta)) - float(simple.phase(x, zeta)) - q_v2
        assert abs(diff) < 1e-8

    def test_hfree_equals_simple_for_unit_static(self):
        fam = make_family("static", rho=0.75, kappa=1.0)
        simple = phase_simple_longrange(fam)
        hfree = phase_hfree_example(0.75)
        zeta = np.array([0.5, 0.5, 1.0])
        pts = np.array([[1.0, 0.0, 2.0], [4.0, -1.0, 7.0]])
        np.testing.assert_allclose(simple.phase(pts, zeta), hfree.phase(pts, zeta),
                                   rtol=0, atol=1e-14)

    def test_simple_requires_midrange_rho(self):
        with pytest.raises(ValueError, match=r"\(1/2, 1\)"):
            phase_simple_longrange(make_family("static", rho=1.2, kappa=1.0))

    def test_simple_h_limit_monotone(self):
        fam = make_family("additive", rho=0.75, kappa=0.5, h=1.0, extra=1.5)
        zeta = np.array([0.0, 0.0, 1.2])
        pts = np.array([[2.0, 0.0, 3.0], [0.5, 1.0, 5.0], [4.0, 2.0, 1.0]])
        lim = phase_simple_longrange(fam.limit())
        ref = lim.phase(pts, zeta)
        sups = []
        for h in [1.0, 2.0, 4.0, 8.0, 16.0]:
            cur = phase_simple_longrange(fam.at_h(h))
            sups.append(np.max(np.abs(cur.phase(pts, zeta) - ref)))
        assert all(b <= a + 1e-15 for a, b in zip(sups, sups[1:]))
        assert sups[-1] < sups[0] / 8.0


class TestGradient:
    @pytest.mark.parametrize("n_terms,rho", [(1, 0.75), (2, 0.6)])
    def test_gradient_against_finite_differences(self, n_terms, rho):
        fam = make_family("static", rho=rho, kappa=0.4)
        model = phase_build(fam, n_terms=n_terms)
        zeta = np.array([0.2, -0.1, 1.1])
        rng = np.random.default_rng(4)
        count = 12 if n_terms == 1 else 4
        zh = zeta / np.linalg.norm(zeta)
        pts = []
        while len(pts) < count:
            p = rng.normal(size=3) * 6.0
            if (p @ zh) / np.linalg.norm(p) > 0.15:
                pts.append(p)
        pts = np.array(pts)
        grad = model.gradient(pts, zeta)
        step = 1e-3
        for axis in range(3):
            dp = pts.copy()
            dm = pts.copy()
            dp[:, axis] += step
            dm[:, axis] -= step
            fd = (model.phase(dp, zeta) - model.phase(dm, zeta)) / (2 * step)
            rel = np.abs(fd - grad[:, axis]) / (1.0 + np.abs(grad[:, axis]))
            assert np.max(rel) < 1e-5

    def test_gradient_fifty_cone_points(self):
        fam = make_family("relax", rho=0.9, kappa=0.3, h=5.0)
        model = phase_build(fam)
        zeta = np.array([0.0, 0.0, 1.2])
        rng = np.random.default_rng(8)
        pts = []
        while len(pts) < 50:
            p = rng.normal(size=3) * 8.0
            if p[2] / np.linalg.norm(p) > 0.1:
                pts.append(p)
        pts = np.array(pts)
        grad = model.gradient(pts, zeta)
        step = 1e-3
        worst = 0.0
        for axis in range(3):
            dp = pts.copy()
            dm = pts.copy()
            dp[:, axis] += step
            dm[:, axis] -= step
            fd = (model.phase(dp, zeta) - model.phase(dm, zeta)) / (2 * step)
            worst = max(worst, np.max(np.abs(fd - grad[:, axis])
                                      / (1.0 + np.abs(grad[:, axis]))))
        assert worst < 1e-5

    def test_zero_potential_gradient(self):
        fam = make_family("static", rho=0.8, kappa=0.0)
        model = phase_build(fam)
        g = phase_grad(model, np.array([1.0, 2.0, 3.0]), Momentum((0.0, 0.0, 1.0)))
        np.testing.assert_array_equal(g, np.zeros(3))

    def test_radial_symmetry_along_axis(self):
        # x parallel to zeta keeps grad Phi parallel to zeta^
        fam = make_family("static", rho=0.8, kappa=0.7)
        model = phase_build(fam)
        zeta = np.array([0.0, 0.0, 1.4])
        x = np.array([0.0, 0.0, 6.0])
        g = model.gradient(x, zeta)
        assert abs(g[0]) < 1e-8 and abs(g[1]) < 1e-8
        assert abs(g[2]) > 1e-4


class TestQuadratureConvergence:
    def test_doubling_nodes_stable(self):
        fam = make_family("static", rho=0.75, kappa=1.0)
        zeta = np.array([0.0, 0.0, 1.2])
        pts = np.array([[2.0, 0.0, 5.0], [10.0, 5.0, 40.0], [0.0, 1.0, 50.0]])
        coarse = phase_build(fam, quad=RayQuadrature(nodes_per_panel=16))
        fine = phase_build(fam, quad=RayQuadrature(nodes_per_panel=32))
        diff = np.abs(coarse.phase(pts, zeta) - fine.phase(pts, zeta))
        assert np.max(diff) < 1e-8

    def test_linearity_in_potential_without_v2(self):
        zeta = np.array([0.0, 0.0, 1.1])
        pts = np.array([[1.0, 2.0, 4.0], [3.0, 0.0, 9.0]])
        one = phase_simple_longrange(make_family("static", rho=0.8, kappa=1.0))
        lam = phase_simple_longrange(make_family("static", rho=0.8, kappa=3.5))
        np.testing.assert_allclose(3.5 * one.phase(pts, zeta), lam.phase(pts, zeta),
                                   rtol=1e-12)


class TestBoundCheck:
    def test_zero_potential_reports_zero_and_passes(self):
        model = phase_build(make_family("static", rho=0.8, kappa=0.0))
        rep = phase_bound_check(model, sample_count=3)
        assert rep.zero and rep.passed

    @pytest.mark.parametrize("rho", [0.6, 0.75, 1.0])
    def test_exponent_fits(self, rho):
        model = phase_build(make_family("static", rho=rho, kappa=0.4))
        rep = phase_bound_check(model, sample_count=4, k_values=(0.9, 1.5))
        assert rep.phi_exponent <= 1.0 - rho + 0.1
        assert rep.grad_exponent <= -rho + 0.1
        assert rep.passed

    def test_rho_one_log_growth(self):
        model = phase_build(make_family("static", rho=1.0, kappa=0.4))
        rep = phase_bound_check(model, sample_count=4, k_values=(1.2,))
        assert rep.phi_exponent == pytest.approx(0.0, abs=0.1)


class TestHFreeExample:
    def test_bound_estimate(self):
        model = phase_hfree_example(0.75)
        rep = phase_bound_check(model, sample_count=4, k_values=(1.0, 1.6))
        assert rep.phi_exponent <= 0.25 + 0.1
        assert rep.passed

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            phase_hfree_example(1.4)
