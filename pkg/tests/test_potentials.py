"""Potential catalog: closed forms, derivatives, decay bound fits."""

import math

import numpy as np
import pytest

from diraclab.potentials import make_family, verify_decay


def test_static_value_at_origin():
    fam = make_family("static", rho=1.0, kappa=1.0, h=7.0)
    assert fam.value(np.zeros(3)) == pytest.approx(1.0)


def test_relax_limit_doubles():
    fam = make_family("relax", rho=0.9, kappa=0.7, h=math.inf, extra=1.0)
    x = np.array([1.0, -2.0, 0.5])
    w = math.sqrt(1.0 + np.dot(x, x))
    assert fam.value(x) == pytest.approx(2.0 * 0.7 * w ** (-0.9), rel=1e-14)


def test_additive_direct_formula():
    # independent scalar evaluation of kappa<x>^-rho + (1/h)<x>^-rho2
    fam = make_family("additive", rho=0.75, kappa=1.0, h=10.0, extra=1.5)
    x = np.ones(3)
    w = math.sqrt(1.0 + 3.0)
    expected = w ** (-0.75) + 0.1 * w ** (-1.5)
    assert fam.value(x) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(0.6299588965606879, rel=1e-12)


def test_unknown_family_and_bad_rho():
    with pytest.raises(ValueError, match="unknown family_id"):
        make_family("coulomb", rho=1.0, kappa=1.0)
    with pytest.raises(ValueError, match="1/3"):
        make_family("static", rho=0.2, kappa=1.0)


def test_realness_and_finiteness():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 3)) * 5.0
    for fid in ("static", "relax", "additive"):
        fam = make_family(fid, rho=0.8, kappa=0.5, h=3.0)
        vals = fam.value(pts)
        assert np.isrealobj(vals) and np.all(np.isfinite(vals))


@pytest.mark.parametrize("fid,h", [("static", 2.0), ("relax", 3.0),
                                   ("additive", 5.0), ("relax", math.inf)])
def test_gradient_matches_finite_differences(fid, h):
    fam = make_family(fid, rho=0.9, kappa=1.3, h=h)
    rng = np.random.default_rng(17)
    # keep radii >= 0.5: the relax profile has a kink at the origin
    pts = rng.normal(size=(100, 3))
    pts *= (0.5 + 19.5 * rng.random((100, 1))) / np.linalg.norm(pts, axis=1, keepdims=True)
    grad = fam.gradient(pts)
    step = 1e-4
    for axis in range(3):
        dp = pts.copy()
        dm = pts.copy()
        dp[:, axis] += step
        dm[:, axis] -= step
        fd = (fam.value(dp) - fam.value(dm)) / (2.0 * step)
        denom = np.maximum(np.abs(grad[:, axis]), 1e-8)
        assert np.max(np.abs(fd - grad[:, axis]) / denom) < 1e-6


@pytest.mark.parametrize("fid", ["static", "relax", "additive"])
def test_hessian_matches_finite_differences(fid):
    fam = make_family(fid, rho=0.7, kappa=0.8, h=4.0)
    rng = np.random.default_rng(23)
    pts = rng.normal(size=(20, 3))
    pts *= (1.0 + 9.0 * rng.random((20, 1))) / np.linalg.norm(pts, axis=1, keepdims=True)
    hess = fam.hessian(pts)
    step = 1e-4
    for i in range(3):
        dp = pts.copy()
        dm = pts.copy()
        dp[:, i] += step
        dm[:, i] -= step
        fd = (fam.gradient(dp) - fam.gradient(dm)) / (2.0 * step)
        assert np.max(np.abs(fd - hess[:, i, :])) < 1e-5


def test_h_monotone_approach_to_limit():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(60, 3)) * 8.0
    for fid in ("relax", "additive"):
        fam = make_family(fid, rho=0.9, kappa=1.0, h=1.0)
        lim = fam.limit()
        ref = lim.value(pts)
        sups = []
        for h in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]:
            sups.append(np.max(np.abs(fam.at_h(h).value(pts) - ref)))
        diffs = np.diff(sups)
        assert np.all(diffs <= 1e-15)


@pytest.mark.parametrize("fid", ["static", "relax", "additive"])
def test_decay_bound_fits(fid):
    fam = make_family(fid, rho=0.8, kappa=1.0, h=2.0)
    report = verify_decay(fam, order_max=2)
    assert report.passed
    for fit in report.orders:
        assert fit.fitted_exponent <= fit.required_exponent + 0.1


def test_decay_static_rho_one_order_zero():
    report = verify_decay(make_family("static", rho=1.0, kappa=1.0), order_max=0)
    fit = report.orders[0]
    assert fit.fitted_exponent == pytest.approx(-1.0, abs=0.1)


def test_decay_zero_potential_trivially_passes():
    report = verify_decay(make_family("static", rho=0.9, kappa=0.0), order_max=2)
    assert report.passed
    assert all(fit.zero for fit in report.orders)
    assert all(c == 0.0 for fit in report.orders for c in fit.constants.values())
