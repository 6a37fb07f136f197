"""Vectorised numpy implementation of the batch kernels (reference / fallback).

``aggregate_batch`` evaluates the transmit sum S and its (theta, r) derivatives.

``rx_gram_batch`` evaluates the receiver-only part of the projected Fisher
terms. With g = S b the components of g_theta, g_r along g vanish after
projection, so i = |S|^2 i_rx, s = |S|^2 s_rx, k = |S|^2 k_rx and
is - k^2 = |S|^4 det_rx. Writing b_theta = b * c_theta, the projection of
b * c onto the complement of b is b * (c - <c>_w) with weights |b_n|^2, so only
the deviations c_n - c_0 from the centre element matter. Those deviations are
formed from l_n - l = (l_n^2 - l^2) / (l_n + l) without subtracting nearly
equal numbers; the 2x2 Gram determinant comes from one Gram-Schmidt step.
"""

from __future__ import annotations

import numpy as np


def aggregate_batch(y, wg_phase, k, sqrt_a0, r, theta):
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)[:, None]
    st = np.sin(np.asarray(theta, dtype=float))[:, None]
    ct = np.cos(np.asarray(theta, dtype=float))[:, None]
    rm = np.sqrt(r * r - 2.0 * r * y * st + y * y)
    a = sqrt_a0 / rm * np.exp(-1j * (k * rm + wg_phase))
    coef = a * (-1.0 / rm - 1j * k)
    S = a.sum(axis=1)
    S_theta = (coef * (-r * y * ct / rm)).sum(axis=1)
    S_r = (coef * ((r - y * st) / rm)).sum(axis=1)
    return S, S_theta, S_r


def rx_gram_batch(nd, R, k, b0, r, theta):
    """Return (i_rx, s_rx, k_rx, det_rx, bnorm2) per target.

    ``nd`` holds n * d_R per element; pass zeros for the plane-wave receiver.
    """
    nd = np.asarray(nd, dtype=float)[None, :]
    r = np.asarray(r, dtype=float)[:, None]
    st = np.sin(np.asarray(theta, dtype=float))[:, None]
    ct = np.cos(np.asarray(theta, dtype=float))[:, None]

    l = np.sqrt(R * R + r * r - 2.0 * R * r * ct)
    dl2 = nd * (nd - 2.0 * r * st)
    ln = np.sqrt(l * l + dl2)
    dln = dl2 / (ln + l)
    d_theta0 = R * r * st / l
    d_r0 = (r - R * ct) / l
    ratio = dln / (l * ln)
    dd_theta = -R * r * st * ratio - nd * r * ct / ln
    dd_r = -(r - R * ct) * ratio - nd * st / ln
    amp = -1.0 / ln - 1j * k
    dc_theta = amp * dd_theta + ratio * d_theta0
    dc_r = amp * dd_r + ratio * d_r0

    w = 1.0 / (ln * ln)
    wsum = w.sum(axis=1, keepdims=True)
    e_theta = dc_theta - (w * dc_theta).sum(axis=1, keepdims=True) / wsum
    e_r = dc_r - (w * dc_r).sum(axis=1, keepdims=True) / wsum
    sw = np.sqrt(w)
    u = sw * e_theta
    v = sw * e_r

    i_rx = (u.real ** 2 + u.imag ** 2).sum(axis=1)
    s_rx = (v.real ** 2 + v.imag ** 2).sum(axis=1)
    k_rx = (u.real * v.real + u.imag * v.imag).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where(i_rx > 0, k_rx / i_rx, 0.0)
    perp = v - proj[:, None] * u
    det_rx = i_rx * (perp.real ** 2 + perp.imag ** 2).sum(axis=1)
    return b0 * i_rx, b0 * s_rx, b0 * k_rx, b0 * b0 * det_rx, b0 * wsum[:, 0]
