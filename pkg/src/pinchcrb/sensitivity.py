"""Analytic (theta, r) derivatives of the observation chain and a finite-difference verifier."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .response import aggregate_tx, receive_distances, rx_elements, tx_elements, wavenumber
from .scene import (
    ReceiverLayout,
    RxMode,
    Target,
    TransmitterLayout,
    _check_rx_index,
    _check_tx_index,
    as_real,
    rx_center_distance,
    tx_distances,
)

# Finite-difference defaults; see ``central_difference``.
RANGE_STEP = 1e-6
ANGLE_STEP = 1e-7
REL_GUARD = 1e-12


def d_tx_distances(layout: TransmitterLayout, r, theta):
    """(d r_m / d theta, d r_m / d r) for every PA, trailing M axis."""
    rm = tx_distances(layout, r, theta)
    r = as_real(r)[..., None]
    th = as_real(theta)[..., None]
    y = layout.pa_positions
    return -r * y * np.cos(th) / rm, (r - y * np.sin(th)) / rm


def d_tx_distance(layout: TransmitterLayout, target: Target, m: int) -> tuple[float, float]:
    _check_tx_index(layout, m)
    d_th, d_r = d_tx_distances(layout, target.range, target.direction)
    return float(d_th[m]), float(d_r[m])


def d_rx_distances(rx: ReceiverLayout, r, theta):
    """(d l_n / d theta, d l_n / d r); in plane-wave mode every entry is the centre derivative."""
    ln = receive_distances(rx, r, theta)
    r = as_real(r)[..., None]
    th = as_real(theta)[..., None]
    R = rx.baseline
    nd = 0.0 if rx.mode is RxMode.PLANE_WAVE else rx.indices * rx.spacing
    d_th = (R * r * np.sin(th) - nd * r * np.cos(th)) / ln
    d_r = (r - R * np.cos(th) - nd * np.sin(th)) / ln
    return d_th, d_r


def d_rx_distance(rx: ReceiverLayout, target: Target, n: float) -> tuple[float, float]:
    n = _check_rx_index(rx, n)
    pos = int(np.flatnonzero(rx.indices == n)[0])
    d_th, d_r = d_rx_distances(rx, target.range, target.direction)
    return float(d_th[pos]), float(d_r[pos])


def d_tx_elements(layout: TransmitterLayout, r, theta):
    a = tx_elements(layout, r, theta)
    rm = tx_distances(layout, r, theta)
    d_th, d_r = d_tx_distances(layout, r, theta)
    # The waveguide phase is fixed by the PA positions and has no (theta, r) dependence.
    coef = a * (-1.0 / rm - 1j * wavenumber(layout.wavelength))
    return coef * d_th, coef * d_r


def d_tx_element(layout: TransmitterLayout, target: Target, m: int) -> tuple[complex, complex]:
    _check_tx_index(layout, m)
    d_th, d_r = d_tx_elements(layout, target.range, target.direction)
    return complex(d_th[m]), complex(d_r[m])


def d_rx_elements(rx: ReceiverLayout, r, theta):
    b = rx_elements(rx, r, theta)
    ln = receive_distances(rx, r, theta)
    d_th, d_r = d_rx_distances(rx, r, theta)
    coef = b * (-1.0 / ln - 1j * wavenumber(rx.wavelength))
    return coef * d_th, coef * d_r


def d_rx_element(rx: ReceiverLayout, target: Target, n: float) -> tuple[complex, complex]:
    n = _check_rx_index(rx, n)
    pos = int(np.flatnonzero(rx.indices == n)[0])
    d_th, d_r = d_rx_elements(rx, target.range, target.direction)
    return complex(d_th[pos]), complex(d_r[pos])


def d_aggregate_tx(layout: TransmitterLayout, target: Target) -> tuple[complex, complex]:
    d_th, d_r = d_tx_elements(layout, target.range, target.direction)
    return complex(d_th.sum()), complex(d_r.sum())


@dataclass(frozen=True)
class ObservationJacobian:
    g_theta: np.ndarray
    g_r: np.ndarray


def observation_jacobian(layout: TransmitterLayout, rx: ReceiverLayout, target: Target) -> ObservationJacobian:
    """Product rule g_theta = S_theta b + S b_theta, g_r = S_r b + S b_r."""
    S = aggregate_tx(layout, target)
    S_th, S_r = d_aggregate_tx(layout, target)
    b = rx_elements(rx, target.range, target.direction)
    b_th, b_r = d_rx_elements(rx, target.range, target.direction)
    return ObservationJacobian(g_theta=S_th * b + S * b_th, g_r=S_r * b + S * b_r)


# --- finite differences ---------------------------------------------------


def range_step(r: float) -> float:
    return RANGE_STEP * max(1.0, abs(r))


def central_difference(f: Callable, x: float, h: float) -> np.ndarray:
    """Central difference with one Richardson step (error O(h^4)).

    ``f`` is evaluated at long-double abscissae. At 27 GHz the carrier phase of
    each element is ~1e4 rad, so double-precision rounding divided by a 1e-7
    step swamps derivatives that are small (PAs near the centre, theta near 0);
    the plain central difference also leaves a (k h)^2 / 6 truncation error at
    the range step. Extended precision plus the h / h/2 combination clears both.
    """
    x, h = np.longdouble(x), np.longdouble(h)
    coarse = (np.asarray(f(x + h)) - np.asarray(f(x - h))) / (2 * h)
    fine = (np.asarray(f(x + h / 2)) - np.asarray(f(x - h / 2))) / h
    out = (4 * fine - coarse) / 3
    return out.astype(np.complex128 if np.iscomplexobj(out) else np.float64)


def relative_error(analytic, numeric, guard: float = REL_GUARD) -> float:
    """Max component-wise deviation, scaled by max(|analytic|, guard) per entry."""
    a = np.atleast_1d(np.asarray(analytic))
    b = np.atleast_1d(np.asarray(numeric))
    scale = np.maximum(np.abs(a), guard)
    dev = np.maximum(np.abs(a.real - b.real), np.abs(a.imag - b.imag))
    return float(np.max(dev / scale))


def fd_theta(f: Callable[[Target], np.ndarray], target: Target, h: float | None = None) -> np.ndarray:
    h = ANGLE_STEP if h is None else h
    return central_difference(lambda th: f(Target(target.range, th)), target.direction, h)


def fd_range(f: Callable[[Target], np.ndarray], target: Target, h: float | None = None) -> np.ndarray:
    h = range_step(target.range) if h is None else h
    return central_difference(lambda r: f(Target(r, target.direction)), target.range, h)


def derivative_errors(layout: TransmitterLayout, rx: ReceiverLayout, target: Target,
                      jacobian: Callable = observation_jacobian) -> dict[str, float]:
    """Max relative error of each analytic derivative against finite differences.

    ``jacobian`` is injectable so a deliberately broken chain can be fed through
    the same comparison.
    """
    r, th = target.range, target.direction

    def per_element(fn):
        return lambda t: fn(t.range, t.direction)

    def agg(t):
        return tx_elements(layout, t.range, t.direction).sum(axis=-1)

    def obs(t):
        return agg(t) * rx_elements(rx, t.range, t.direction)

    tx_d = d_tx_distances(layout, r, th)
    rx_d = d_rx_distances(rx, r, th)
    tx_e = d_tx_elements(layout, r, th)
    rx_e = d_rx_elements(rx, r, th)
    s_d = d_aggregate_tx(layout, target)
    jac = jacobian(layout, rx, target)

    tx_dist = per_element(lambda rr, tt: tx_distances(layout, rr, tt))
    rx_dist = per_element(lambda rr, tt: receive_distances(rx, rr, tt))
    tx_el = per_element(lambda rr, tt: tx_elements(layout, rr, tt))
    rx_el = per_element(lambda rr, tt: rx_elements(rx, rr, tt))

    checks = {
        "d_tx_distance": (tx_d, tx_dist),
        "d_rx_distance": (rx_d, rx_dist),
        "d_tx_element": (tx_e, tx_el),
        "d_rx_element": (rx_e, rx_el),
        "d_aggregate_tx": (s_d, agg),
        "observation_jacobian": ((jac.g_theta, jac.g_r), obs),
    }
    out = {}
    for name, ((an_th, an_r), fn) in checks.items():
        out[name] = max(
            relative_error(an_th, fd_theta(fn, target)),
            relative_error(an_r, fd_range(fn, target)),
        )
    return out


def center_derivative(rx: ReceiverLayout, r: float, theta: float) -> tuple[float, float]:
    """(d l / d theta, d l / d r) of the receiver-centre distance."""
    l = float(rx_center_distance(rx, r, theta))
    R = rx.baseline
    return R * r * math.sin(theta) / l, (r - R * math.cos(theta)) / l
