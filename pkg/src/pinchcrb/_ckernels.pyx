# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos

cnp.import_array()


def aggregate_batch(y, wg_phase, double k, double sqrt_a0, r, theta):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(wg_phase, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t T = rv.shape[0], M = yv.shape[0], t, m
    out = np.empty((3, T), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double rr, st, ct, ym, rm, amp, ph, ar, ai, cr, ci, dth, drr
    cdef double sr, si, str_, sti, srr, sri
    with nogil:
        for t in range(T):
            rr = rv[t]
            st = sin(tv[t])
            ct = cos(tv[t])
            sr = si = str_ = sti = srr = sri = 0.0
            for m in range(M):
                ym = yv[m]
                rm = sqrt(rr * rr - 2.0 * rr * ym * st + ym * ym)
                amp = sqrt_a0 / rm
                ph = k * rm + pv[m]
                ar = amp * cos(ph)
                ai = -amp * sin(ph)
                # a * (-1/rm - j k)
                cr = -ar / rm + k * ai
                ci = -ai / rm - k * ar
                dth = -rr * ym * ct / rm
                drr = (rr - ym * st) / rm
                sr += ar
                si += ai
                str_ += cr * dth
                sti += ci * dth
                srr += cr * drr
                sri += ci * drr
            o[0, t] = sr + 1j * si
            o[1, t] = str_ + 1j * sti
            o[2, t] = srr + 1j * sri
    return out[0], out[1], out[2]


def rx_gram_batch(nd, double R, double k, double b0, r, theta):
    cdef const double[::1] ndv = np.ascontiguousarray(nd, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t T = rv.shape[0], N = ndv.shape[0], t, n
    out = np.empty((5, T), dtype=np.float64)
    cdef double[:, ::1] o = out
    scratch = np.empty((5, N), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef double rr, st, ct, l, dl2, ln, dln, dth0, dr0, ratio, ddth, ddr, w, sw
    cdef double x, wsum, mtr, mti, mrr, mri, ur, ui, vr, vi
    cdef double ii, ss, kk, proj, pr, pi, perp
    with nogil:
        for t in range(T):
            rr = rv[t]
            st = sin(tv[t])
            ct = cos(tv[t])
            l = sqrt(R * R + rr * rr - 2.0 * R * rr * ct)
            dth0 = R * rr * st / l
            dr0 = (rr - R * ct) / l
            wsum = mtr = mti = mrr = mri = 0.0
            for n in range(N):
                x = ndv[n]
                dl2 = x * (x - 2.0 * rr * st)
                ln = sqrt(l * l + dl2)
                dln = dl2 / (ln + l)
                ratio = dln / (l * ln)
                ddth = -R * rr * st * ratio - x * rr * ct / ln
                ddr = -(rr - R * ct) * ratio - x * st / ln
                # (-1/ln - j k) * dd + ratio * d0
                sc[0, n] = -ddth / ln + ratio * dth0
                sc[1, n] = -k * ddth
                sc[2, n] = -ddr / ln + ratio * dr0
                sc[3, n] = -k * ddr
                w = 1.0 / (ln * ln)
                sc[4, n] = w
                wsum += w
                mtr += w * sc[0, n]
                mti += w * sc[1, n]
                mrr += w * sc[2, n]
                mri += w * sc[3, n]
            mtr /= wsum
            mti /= wsum
            mrr /= wsum
            mri /= wsum
            ii = ss = kk = 0.0
            for n in range(N):
                sw = sqrt(sc[4, n])
                ur = sw * (sc[0, n] - mtr)
                ui = sw * (sc[1, n] - mti)
                vr = sw * (sc[2, n] - mrr)
                vi = sw * (sc[3, n] - mri)
                ii += ur * ur + ui * ui
                ss += vr * vr + vi * vi
                kk += ur * vr + ui * vi
            proj = kk / ii if ii > 0.0 else 0.0
            perp = 0.0
            for n in range(N):
                sw = sqrt(sc[4, n])
                pr = sw * ((sc[2, n] - mrr) - proj * (sc[0, n] - mtr))
                pi = sw * ((sc[3, n] - mri) - proj * (sc[1, n] - mti))
                perp += pr * pr + pi * pi
            o[0, t] = b0 * ii
            o[1, t] = b0 * ss
            o[2, t] = b0 * kk
            o[3, t] = b0 * b0 * ii * perp
            o[4, t] = b0 * wsum
    return out[0], out[1], out[2], out[3], out[4]
