"""Compiled inner loops for the identification sweeps.

The per-pair symbol assembly (cut-off, table interpolation, oscillatory
factor, Clifford-closed-form amplitude) fused with the momentum contraction
is the hot path; numpy's per-op temporaries are memory-bound there.  These
kernels process pairs in (x-block, zeta-chunk) order with fixed in-block
summation, so threading over blocks cannot change results.  Weight formulas
match `psdo._BoundSpec.pair_weights` exactly (same operation order, no
fastmath); the numpy path stays available as a reference implementation and
for platforms without numba.

Forward kernel: parallel over x-blocks (each output row has one writer).
Adjoint kernel: parallel over zeta-blocks, identical weight scalars, so the
discrete pairing identity holds to rounding.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["HAVE_NUMBA", "forward_sweep", "adjoint_sweep"]

HAVE_NUMBA = False
if not os.environ.get("DIRACLAB_DISABLE_NUMBA"):
    try:
        from numba import njit, prange

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        HAVE_NUMBA = False

if not HAVE_NUMBA:  # pragma: no cover - exercised only without numba
    def forward_sweep(*args, **kwargs):
        raise RuntimeError("numba kernels unavailable")

    def adjoint_sweep(*args, **kwargs):
        raise RuntimeError("numba kernels unavailable")
else:
    import math

    @njit(cache=True, inline="always")
    def _cubic4(f):
        f2 = f * f
        f3 = f2 * f
        return (-0.5 * f3 + f2 - 0.5 * f,
                1.5 * f3 - 2.5 * f2 + 1.0,
                -1.5 * f3 + 2.0 * f2 + 0.5 * f,
                0.5 * f3 - 0.5 * f2)

    @njit(cache=True, inline="always")
    def _build_rows(tabs, r_i, dr, nr, rows):
        # cubic interpolation of every stacked table along r, into rows(T, nu)
        pos = r_i / dr
        if pos < 1.0:
            pos = 1.0
        hi = nr - 3.0
        if pos > hi:
            pos = hi
        ir = int(pos)
        w0, w1, w2, w3 = _cubic4(pos - ir)
        n_t = tabs.shape[0]
        n_u = tabs.shape[2]
        for t in range(n_t):
            for q in range(n_u):
                rows[t, q] = (w0 * tabs[t, ir - 1, q] + w1 * tabs[t, ir, q]
                              + w2 * tabs[t, ir + 1, q] + w3 * tabs[t, ir + 2, q])

    @njit(cache=True, inline="always")
    def _pair_scalars(rows, uprime, dots, r_i, v_i, kk_j, eta_j, u0, du, n_u,
                      has_phase, has_b, has_second, full_amp, sign, branch,
                      margin):
        """Phase, weight multipliers and margin flag for one (x, zeta) pair.

        Returns (phi, w0r, wxr, wzr, ok) with the amplitude factors
        w0r = (1-a)/denom, wxr = g0/(2 eta denom), wzr = g1/(2 eta denom)
        (1, 0, 0 for scalar modes).
        """
        phi = 0.0
        g0 = 0.0
        g1 = 0.0
        eta_b = branch * eta_j
        if has_phase:
            upos = (uprime - u0) / du
            if upos < 1.0:
                upos = 1.0
            hiu = n_u - 3.0
            if upos > hiu:
                upos = hiu
            iu = int(upos)
            c0, c1, c2, c3 = _cubic4(upos - iu)
            ia = (c0 * rows[0, iu - 1] + c1 * rows[0, iu]
                  + c2 * rows[0, iu + 1] + c3 * rows[0, iu + 2])
            a0 = (c0 * rows[1, iu - 1] + c1 * rows[1, iu]
                  + c2 * rows[1, iu + 1] + c3 * rows[1, iu + 2])
            a1 = (c0 * rows[2, iu - 1] + c1 * rows[2, iu]
                  + c2 * rows[2, iu + 1] + c3 * rows[2, iu + 2])
            phi = eta_b * ia
            ga = eta_b * a0
            gb = eta_b * a1
            if has_b:
                ib = (c0 * rows[3, iu - 1] + c1 * rows[3, iu]
                      + c2 * rows[3, iu + 1] + c3 * rows[3, iu + 2])
                b0 = (c0 * rows[4, iu - 1] + c1 * rows[4, iu]
                      + c2 * rows[4, iu + 1] + c3 * rows[4, iu + 2])
                b1 = (c0 * rows[5, iu - 1] + c1 * rows[5, iu]
                      + c2 * rows[5, iu + 1] + c3 * rows[5, iu + 2])
                phi -= 0.5 * ib
                ga -= 0.5 * b0
                gb -= 0.5 * b1
            inv_k = 1.0 / kk_j
            phi = sign * phi * inv_k
            g0 = sign * ga * inv_k
            g1 = gb * inv_k
            if has_second:
                base = 6 if has_b else 3
                jaa = (c0 * rows[base, iu - 1] + c1 * rows[base, iu]
                       + c2 * rows[base, iu + 1] + c3 * rows[base, iu + 2])
                jab = (c0 * rows[base + 1, iu - 1] + c1 * rows[base + 1, iu]
                       + c2 * rows[base + 1, iu + 1] + c3 * rows[base + 1, iu + 2])
                jbb = (c0 * rows[base + 2, iu - 1] + c1 * rows[base + 2, iu]
                       + c2 * rows[base + 2, iu + 1] + c3 * rows[base + 2, iu + 2])
                jaar = (c0 * rows[base + 3, iu - 1] + c1 * rows[base + 3, iu]
                        + c2 * rows[base + 3, iu + 1] + c3 * rows[base + 3, iu + 2])
                jabr = (c0 * rows[base + 4, iu - 1] + c1 * rows[base + 4, iu]
                        + c2 * rows[base + 4, iu + 1] + c3 * rows[base + 4, iu + 2])
                jbbr = (c0 * rows[base + 5, iu - 1] + c1 * rows[base + 5, iu]
                        + c2 * rows[base + 5, iu + 1] + c3 * rows[base + 5, iu + 2])
                jaau = (c0 * rows[base + 6, iu - 1] + c1 * rows[base + 6, iu]
                        + c2 * rows[base + 6, iu + 1] + c3 * rows[base + 6, iu + 2])
                jabu = (c0 * rows[base + 7, iu - 1] + c1 * rows[base + 7, iu]
                        + c2 * rows[base + 7, iu + 1] + c3 * rows[base + 7, iu + 2])
                jbbu = (c0 * rows[base + 8, iu - 1] + c1 * rows[base + 8, iu]
                        + c2 * rows[base + 8, iu + 1] + c3 * rows[base + 8, iu + 2])
                cc = sign * 0.5 * inv_k * inv_k * inv_k
                combo = eta_b * eta_b * jaa - eta_b * jab + 0.25 * jbb
                combo_r = eta_b * eta_b * jaar - eta_b * jabr + 0.25 * jbbr
                combo_u = eta_b * eta_b * jaau - eta_b * jabu + 0.25 * jbbu
                phi += cc * combo
                safe_r = r_i if r_i > 1.0e-9 else 1.0e-9
                g0 += cc * (combo_r / safe_r - uprime * combo_u / (safe_r * safe_r))
                g1 += cc * sign * combo_u / safe_r

        if not full_amp:
            return phi, 1.0, 0.0, 0.0, True
        inv2e = 0.5 / eta_b
        a = v_i * inv2e
        ru = dots / kk_j
        bsq = (g0 * g0 * r_i * r_i + g1 * g1 + 2.0 * g0 * g1 * ru) * inv2e * inv2e
        if bsq < 0.0:
            bsq = 0.0
        sn = abs(a) + math.sqrt(bsq)
        if sn >= 1.0 - margin:
            return phi, 0.0, 0.0, 0.0, False
        denom = (1.0 - a) * (1.0 - a) - bsq
        return phi, (1.0 - a) / denom, g0 * inv2e / denom, g1 * inv2e / denom, True

    @njit(cache=True, parallel=True)
    def forward_sweep(xpts, r, theta, vofx, zvec, kk, eta, psi, tabs,
                      u0, du, dr, has_phase, has_b, has_second, has_cut,
                      full_amp, sign, branch, cut_lo, cut_hi, margin,
                      vb, out, err):
        """out(x) += sum_k weights(x, k) . vb(:, k, :); one writer per x-block."""
        n_x = xpts.shape[0]
        n_k = zvec.shape[0]
        n_c = vb.shape[2]
        nr = tabs.shape[1]
        n_u = tabs.shape[2]
        n_t = tabs.shape[0]
        xb = 64
        n_blocks = (n_x + xb - 1) // xb
        for blk in prange(n_blocks):
            rows = np.empty((n_t, n_u))
            lo = blk * xb
            hi = min(lo + xb, n_x)
            for i in range(lo, hi):
                x0 = xpts[i, 0]
                x1 = xpts[i, 1]
                x2 = xpts[i, 2]
                r_i = r[i]
                th_i = theta[i]
                v_i = vofx[i]
                if th_i == 0.0:
                    continue
                if has_phase:
                    _build_rows(tabs, r_i, dr, nr, rows)
                inv_r = 1.0 / (r_i if r_i > 1.0e-300 else 1.0e-300)
                for j in range(n_k):
                    w = psi[j] * th_i
                    dots = x0 * zvec[j, 0] + x1 * zvec[j, 1] + x2 * zvec[j, 2]
                    uprime = sign * dots * inv_r / kk[j]
                    if uprime > 1.0:
                        uprime = 1.0
                    elif uprime < -1.0:
                        uprime = -1.0
                    if has_cut:
                        if uprime <= cut_lo:
                            continue
                        if uprime < cut_hi:
                            t = (uprime - cut_lo) / (cut_hi - cut_lo)
                            if t < 1.0e-12:
                                t = 1.0e-12
                            elif t > 1.0 - 1.0e-12:
                                t = 1.0 - 1.0e-12
                            b1 = math.exp(-1.0 / t)
                            b2 = math.exp(-1.0 / (1.0 - t))
                            w *= b1 / (b1 + b2)
                    if w == 0.0:
                        continue
                    phi, w0r, wxr, wzr, ok = _pair_scalars(
                        rows, uprime, dots, r_i, v_i, kk[j], eta[j], u0, du,
                        n_u, has_phase, has_b, has_second, full_amp, sign,
                        branch, margin)
                    if not ok:
                        err[0] = 1.0
                        err[1] = x0
                        err[2] = x1
                        err[3] = x2
                        continue
                    ph = dots + phi
                    osc = complex(math.cos(ph), math.sin(ph))
                    cw0 = w * w0r * osc
                    if full_amp:
                        cwx = w * wxr * osc
                        cwz = w * wzr * osc
                        for c in range(n_c):
                            out[i, c] += (cw0 * vb[0, j, c]
                                          + cwx * (x0 * vb[1, j, c]
                                                   + x1 * vb[2, j, c]
                                                   + x2 * vb[3, j, c])
                                          + cwz * vb[4, j, c])
                    else:
                        for c in range(n_c):
                            out[i, c] += cw0 * vb[0, j, c]

    @njit(cache=True, parallel=True)
    def adjoint_sweep(xpts, r, theta, vofx, zvec, kk, eta, psi, tabs,
                      u0, du, dr, has_phase, has_b, has_second, has_cut,
                      full_amp, sign, branch, cut_lo, cut_hi, margin,
                      fb, out, err):
        """out(k) += sum_x conj(weights) . fb(:, x, :); one writer per k-block."""
        n_x = xpts.shape[0]
        n_k = zvec.shape[0]
        n_c = fb.shape[2]
        nr = tabs.shape[1]
        n_u = tabs.shape[2]
        n_t = tabs.shape[0]
        kb = 512
        n_blocks = (n_k + kb - 1) // kb
        for blk in prange(n_blocks):
            rows = np.empty((n_t, n_u))
            klo = blk * kb
            khi = min(klo + kb, n_k)
            for i in range(n_x):
                x0 = xpts[i, 0]
                x1 = xpts[i, 1]
                x2 = xpts[i, 2]
                r_i = r[i]
                th_i = theta[i]
                v_i = vofx[i]
                if th_i == 0.0:
                    continue
                if has_phase:
                    _build_rows(tabs, r_i, dr, nr, rows)
                inv_r = 1.0 / (r_i if r_i > 1.0e-300 else 1.0e-300)
                for j in range(klo, khi):
                    w = psi[j] * th_i
                    dots = x0 * zvec[j, 0] + x1 * zvec[j, 1] + x2 * zvec[j, 2]
                    uprime = sign * dots * inv_r / kk[j]
                    if uprime > 1.0:
                        uprime = 1.0
                    elif uprime < -1.0:
                        uprime = -1.0
                    if has_cut:
                        if uprime <= cut_lo:
                            continue
                        if uprime < cut_hi:
                            t = (uprime - cut_lo) / (cut_hi - cut_lo)
                            if t < 1.0e-12:
                                t = 1.0e-12
                            elif t > 1.0 - 1.0e-12:
                                t = 1.0 - 1.0e-12
                            b1 = math.exp(-1.0 / t)
                            b2 = math.exp(-1.0 / (1.0 - t))
                            w *= b1 / (b1 + b2)
                    if w == 0.0:
                        continue
                    phi, w0r, wxr, wzr, ok = _pair_scalars(
                        rows, uprime, dots, r_i, v_i, kk[j], eta[j], u0, du,
                        n_u, has_phase, has_b, has_second, full_amp, sign,
                        branch, margin)
                    if not ok:
                        err[0] = 1.0
                        err[1] = x0
                        err[2] = x1
                        err[3] = x2
                        continue
                    ph = dots + phi
                    osc = complex(math.cos(ph), -math.sin(ph))
                    cw0 = w * w0r * osc
                    if full_amp:
                        cwx = w * wxr * osc
                        cwz = w * wzr * osc
                        z0 = zvec[j, 0] / kk[j]
                        z1 = zvec[j, 1] / kk[j]
                        z2 = zvec[j, 2] / kk[j]
                        for c in range(n_c):
                            out[j, c] += (cw0 * fb[0, i, c]
                                          + cwx * fb[4, i, c]
                                          + cwz * (z0 * fb[1, i, c]
                                                   + z1 * fb[2, i, c]
                                                   + z2 * fb[3, i, c]))
                    else:
                        for c in range(n_c):
                            out[j, c] += cw0 * fb[0, i, c]
