"""Cramer-Rao bounds for (theta, r) with the complex reflection coefficient as nuisance.

Two independent routes are provided:

* ``closed_form_crb`` / ``closed_form_batch``: the projected terms i, s, k and
  CRB_theta = c s / (is - k^2), CRB_r = c i / (is - k^2), c = sigma^2 / (2 L |rho|^2).
  Evaluated through the batch kernels, which factor g = S b and form the
  receiver projections without catastrophic cancellation.
* ``numerical_fim_crb``: assembles the 4x4 real FIM over (theta, r, Re kappa,
  Im kappa) from the observation Jacobian, eliminates the nuisance block with a
  Schur complement and inverts. Runs in mpmath by default because is - k^2 can
  sit ten orders of magnitude below i*s.

Scaling convention: the FIM is (2 L / sigma^2) Re{J^H J} with J = dw/dz and
w = rho g, i.e. L = B T_p independent looks each with noise variance sigma^2.

The cross term is k = Re{g_t^H g_r} - Re{(g_t^H g)(g^H g_r)} / ||g||^2, the
exact off-diagonal of the Schur complement.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np

from . import kernels
from .response import observation, wavenumber
from .scene import ReceiverLayout, RxMode, Target, TransmitterLayout
from .sensitivity import observation_jacobian

DEGENERACY_THRESHOLD = 1e-10
# Absolute floor (relative to ||g_t||^2 ||g_r||^2) for the literal formula, whose
# plane-wave residue is rounding noise rather than exact zeros.
_ROUNDOFF_FLOOR = 1e-26


class DegenerateObservationError(ValueError):
    """The noiseless observation vector g is identically zero."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class SensingBudget:
    power: float
    kappa: complex
    pulse_time: float
    bandwidth: float
    noise_psd: float

    def __post_init__(self):
        for name in ("power", "pulse_time", "bandwidth", "noise_psd"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        object.__setattr__(self, "kappa", complex(self.kappa))
        if self.kappa == 0:
            raise ValueError("kappa must be non-zero")
        if self.time_bandwidth < 1 - 1e-9:  # slack for B * T_p rounding
            warnings.warn(f"time-bandwidth product L = {self.time_bandwidth:.3g} < 1", stacklevel=3)

    @classmethod
    def from_levels(cls, power_dbm: float = 0.0, noise_dbm: float = -90.0, kappa: complex = 1.0,
                    time_bandwidth: float = 1.0, bandwidth: float = 10e6) -> "SensingBudget":
        """Budget from transmit power and noise power (dBm) plus L = B T_p."""
        sigma2 = dbm_to_watts(noise_dbm)
        return cls(power=dbm_to_watts(power_dbm), kappa=kappa, pulse_time=time_bandwidth / bandwidth,
                   bandwidth=bandwidth, noise_psd=sigma2 / bandwidth)

    @property
    def time_bandwidth(self) -> float:
        return self.bandwidth * self.pulse_time

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth

    @property
    def rho(self) -> complex:
        return math.sqrt(self.pulse_time * self.power) * self.kappa

    @property
    def prefactor(self) -> float:
        """sigma^2 / (2 L |rho|^2)."""
        return self.noise_power / (2.0 * self.time_bandwidth * abs(self.rho) ** 2)

    def scaled(self, *, power: float | None = None, kappa: complex | None = None,
               pulse_time: float | None = None, time_bandwidth: float | None = None) -> "SensingBudget":
        """Copy with P, kappa, T_p or L replaced, holding the noise power sigma^2 fixed.

        B and N0 are re-derived (B = L / T_p, N0 = sigma^2 / B), so each factor of
        P T_p L |kappa|^2 can be varied on its own.
        """
        t_p = self.pulse_time if pulse_time is None else pulse_time
        big_l = self.time_bandwidth if time_bandwidth is None else time_bandwidth
        bandwidth = big_l / t_p
        return SensingBudget(
            power=self.power if power is None else power,
            kappa=self.kappa if kappa is None else kappa,
            pulse_time=t_p,
            bandwidth=bandwidth,
            noise_psd=self.noise_power / bandwidth,
        )


@dataclass(frozen=True)
class CrbReport:
    i: float
    s: float
    k: float
    schur_det: float
    crb_theta: float
    crb_r: float
    divergent: bool

    @property
    def sqrt_crb_theta_deg(self) -> float:
        return math.degrees(math.sqrt(self.crb_theta))

    @property
    def sqrt_crb_r(self) -> float:
        return math.sqrt(self.crb_r)


def is_divergent(det: float, i: float, s: float, floor: float = 0.0,
                 threshold: float = DEGENERACY_THRESHOLD) -> bool:
    return bool(det <= threshold * max(i * s, floor))


def _report(i, s, k, det, prefactor, floor=0.0) -> CrbReport:
    i, s, k, det = float(i), float(s), float(k), float(det)
    if is_divergent(det, i, s, floor):
        return CrbReport(i, s, k, det, math.inf, math.inf, True)
    return CrbReport(i, s, k, det, prefactor * s / det, prefactor * i / det, False)


def isk_terms(g, g_theta, g_r) -> tuple[float, float, float]:
    """i, s, k straight from the definitions (no factorisation assumed)."""
    g, g_theta, g_r = (np.asarray(v, dtype=complex) for v in (g, g_theta, g_r))
    gg = float(np.vdot(g, g).real)
    if gg == 0.0:
        raise DegenerateObservationError("observation vector g is zero")
    t_g = np.vdot(g_theta, g)
    r_g = np.vdot(g_r, g)
    i = float(np.vdot(g_theta, g_theta).real - abs(t_g) ** 2 / gg)
    s = float(np.vdot(g_r, g_r).real - abs(r_g) ** 2 / gg)
    k = float(np.vdot(g_theta, g_r).real - (t_g * np.conj(r_g)).real / gg)
    return i, s, k


def crb_from_vectors(g, g_theta, g_r, budget: SensingBudget) -> CrbReport:
    """Bounds from explicit g, g_theta, g_r via the literal i, s, k formulas."""
    i, s, k = isk_terms(g, g_theta, g_r)
    tt = float(np.vdot(g_theta, g_theta).real)
    rr = float(np.vdot(g_r, g_r).real)
    # i and s at the roundoff level of the unprojected norms carry no information
    eps = math.sqrt(_ROUNDOFF_FLOOR)
    if i <= eps * tt or s <= eps * rr:
        return CrbReport(i, s, k, i * s - k * k, math.inf, math.inf, True)
    return _report(i, s, k, i * s - k * k, budget.prefactor, _ROUNDOFF_FLOOR * tt * rr)


@dataclass(frozen=True)
class BatchCrb:
    """Per-target arrays from ``closed_form_batch``; divergent entries carry inf."""

    i: np.ndarray
    s: np.ndarray
    k: np.ndarray
    schur_det: np.ndarray
    crb_theta: np.ndarray
    crb_r: np.ndarray
    divergent: np.ndarray
    S: np.ndarray


def receiver_offsets(rx: ReceiverLayout) -> np.ndarray:
    if rx.mode is RxMode.PLANE_WAVE:
        return np.zeros(rx.n_elements)
    return rx.indices * rx.spacing


def transmit_factor(layout: TransmitterLayout, r, theta) -> np.ndarray:
    S, _, _ = kernels.aggregate_batch(
        layout.pa_positions, layout.waveguide_phases(), wavenumber(layout.wavelength),
        math.sqrt(layout.ref_gain), np.atleast_1d(r), np.atleast_1d(theta),
    )
    return S


def receiver_terms(rx: ReceiverLayout, r, theta):
    """(i_rx, s_rx, k_rx, det_rx, ||b||^2): receiver part of the projected terms."""
    return kernels.rx_gram_batch(
        receiver_offsets(rx), rx.baseline, wavenumber(rx.wavelength), rx.ref_gain,
        np.atleast_1d(r), np.atleast_1d(theta),
    )


def combine(S, rx_terms, prefactor: float, threshold: float = DEGENERACY_THRESHOLD) -> BatchCrb:
    i_rx, s_rx, k_rx, det_rx, _ = rx_terms
    s2 = np.abs(S) ** 2
    divergent = (det_rx <= threshold * i_rx * s_rx) | (s2 == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        crb_theta = np.where(divergent, np.inf, prefactor * s_rx / (s2 * det_rx))
        crb_r = np.where(divergent, np.inf, prefactor * i_rx / (s2 * det_rx))
    return BatchCrb(s2 * i_rx, s2 * s_rx, s2 * k_rx, s2 * s2 * det_rx,
                    crb_theta, crb_r, divergent, S)


def closed_form_batch(layout: TransmitterLayout, rx: ReceiverLayout, r, theta,
                      budget: SensingBudget) -> BatchCrb:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    S = transmit_factor(layout, r, theta)
    return combine(S, receiver_terms(rx, r, theta), budget.prefactor)


def closed_form_crb(layout: TransmitterLayout, rx: ReceiverLayout, target: Target,
                    budget: SensingBudget) -> CrbReport:
    res = closed_form_batch(layout, rx, target.range, target.direction, budget)
    if res.S[0] == 0:
        raise DegenerateObservationError("aggregate transmit factor S vanishes")
    return CrbReport(float(res.i[0]), float(res.s[0]), float(res.k[0]), float(res.schur_det[0]),
                     float(res.crb_theta[0]), float(res.crb_r[0]), bool(res.divergent[0]))


# --- FIM oracle ------------------------------------------------------------


def _mp_observation(layout: TransmitterLayout, rx: ReceiverLayout, target: Target):
    """g, g_theta, g_r evaluated with mpmath at the current working precision."""
    mpf, j = mpmath.mpf, mpmath.mpc(0, 1)
    lam = mpf(layout.wavelength)
    k = 2 * mpmath.pi / lam
    r, th = mpf(target.range), mpf(target.direction)
    st, ct = mpmath.sin(th), mpmath.cos(th)

    sqa = mpmath.sqrt(mpf(layout.ref_gain))
    S = S_t = S_r = mpmath.mpc(0)
    for y in layout.pa_positions:
        y = mpf(y)
        rm = mpmath.sqrt(r * r - 2 * r * y * st + y * y)
        phase = k * rm
        if layout.waveguide_phase_enabled:
            phase += 2 * mpmath.pi * abs(y - mpf(layout.feed_y)) / mpf(layout.guided_wavelength)
        a = sqa / rm * mpmath.exp(-j * phase)
        coef = a * (-1 / rm - j * k)
        S += a
        S_t += coef * (-r * y * ct / rm)
        S_r += coef * ((r - y * st) / rm)

    k_rx = 2 * mpmath.pi / mpf(rx.wavelength)
    sqb = mpmath.sqrt(mpf(rx.ref_gain))
    R, d = mpf(rx.baseline), mpf(rx.spacing)
    plane = rx.mode is RxMode.PLANE_WAVE
    g, g_t, g_r = [], [], []
    for n in rx.indices:
        nd = mpf(0) if plane else mpf(n) * d
        ln = mpmath.sqrt(R * R + r * r - 2 * R * r * ct - 2 * nd * r * st + nd * nd)
        b = sqb / ln * mpmath.exp(-j * k_rx * ln)
        coef = b * (-1 / ln - j * k_rx)
        b_t = coef * (R * r * st - nd * r * ct) / ln
        b_r = coef * (r - R * ct - nd * st) / ln
        g.append(S * b)
        g_t.append(S_t * b + S * b_t)
        g_r.append(S_r * b + S * b_r)
    return g, g_t, g_r


def _schur_crb(F, scale_isk, threshold, floor):
    """(i, s, k, det, crb_theta, crb_r) from a 4x4 FIM; bounds are None when singular.

    Works for any scalar type with field arithmetic (float or mpf). The nuisance
    block is diagonal because Re{(c g)^H (j c g)} = 0. ``floor`` (relative to
    F_00 F_11) keeps cancellation residue from passing as information.
    """
    p_r, p_i = F[2][2], F[3][3]
    if p_r == 0 or p_i == 0:
        return 0, 0, 0, 0, None, None
    Q = [[F[a][b] - F[a][2] * F[b][2] / p_r - F[a][3] * F[b][3] / p_i for b in range(2)]
         for a in range(2)]
    det = Q[0][0] * Q[1][1] - Q[0][1] * Q[1][0]
    isk = (Q[0][0] / scale_isk, Q[1][1] / scale_isk, Q[0][1] / scale_isk, det / scale_isk ** 2)
    if det <= threshold * max(Q[0][0] * Q[1][1], floor * F[0][0] * F[1][1]):
        return (*isk, None, None)
    return (*isk, Q[1][1] / det, Q[0][0] / det)


def numerical_fim_crb(layout: TransmitterLayout, rx: ReceiverLayout, target: Target,
                      budget: SensingBudget, dps: int | None = 40) -> CrbReport:
    """Bounds via explicit FIM assembly and Schur complement.

    ``dps`` is the mpmath working precision; ``dps=None`` runs the same algebra
    in float64 on the double-precision Jacobian (only trustworthy when
    is - k^2 is not tiny relative to i*s).
    """
    if dps is None:
        g = observation(layout, rx, target).g
        jac = observation_jacobian(layout, rx, target)
        c = math.sqrt(budget.pulse_time * budget.power)
        rho = budget.rho
        J = np.stack([rho * jac.g_theta, rho * jac.g_r, c * g, 1j * c * g])
        w = 2.0 * budget.time_bandwidth / budget.noise_power
        F = (w * (J.conj() @ J.T).real).tolist()
        out = _schur_crb(F, w * abs(rho) ** 2, DEGENERACY_THRESHOLD, _ROUNDOFF_FLOOR)
    else:
        with mpmath.workdps(dps):
            mpf = mpmath.mpf
            g, g_t, g_r = _mp_observation(layout, rx, target)
            c = mpmath.sqrt(mpf(budget.pulse_time) * mpf(budget.power))
            rho = c * mpmath.mpc(budget.kappa.real, budget.kappa.imag)
            cols = [[rho * v for v in g_t], [rho * v for v in g_r],
                    [c * v for v in g], [mpmath.mpc(0, 1) * c * v for v in g]]
            w = 2 * mpf(budget.time_bandwidth) / (mpf(budget.noise_psd) * mpf(budget.bandwidth))
            F = [[w * mpmath.re(mpmath.fsum(mpmath.conj(x) * y for x, y in zip(ca, cb)))
                  for cb in cols] for ca in cols]
            floor = mpf(10) ** (-(3 * dps) // 2)
            out = _schur_crb(F, w * abs(rho) ** 2, mpf(DEGENERACY_THRESHOLD), floor)
    i, s, k, det, crb_theta, crb_r = out
    if crb_theta is None:
        return CrbReport(float(i), float(s), float(k), float(det), math.inf, math.inf, True)
    return CrbReport(float(i), float(s), float(k), float(det), float(crb_theta), float(crb_r), False)


def phase_rotated(budget: SensingBudget, angle: float) -> SensingBudget:
    return budget.scaled(kappa=budget.kappa * cmath.exp(1j * angle))
