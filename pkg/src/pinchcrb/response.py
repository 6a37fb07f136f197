"""Near-field element responses, aggregate transmit factor and noiseless observation.

The canonical matched-filter output is ``y = rho * g + noise`` with
``g = S(r, theta) * b(r, theta)`` and ``S`` the plain sum of transmit element
responses. Perfect delay match (autocorrelation R(0) = 1) is assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import (
    ReceiverLayout,
    RxMode,
    Target,
    TransmitterLayout,
    _check_rx_index,
    _check_tx_index,
    rx_center_distance,
    rx_distances,
    tx_distances,
)


def wavenumber(wavelength: float) -> float:
    return 2.0 * math.pi / wavelength


def tx_elements(layout: TransmitterLayout, r, theta) -> np.ndarray:
    """Transmit steering entries a_m for every PA, trailing M axis."""
    rm = tx_distances(layout, r, theta)
    phase = wavenumber(layout.wavelength) * rm + layout.waveguide_phases()
    return math.sqrt(layout.ref_gain) / rm * np.exp(-1j * phase)


def tx_element(layout: TransmitterLayout, target: Target, m: int) -> complex:
    _check_tx_index(layout, m)
    return complex(tx_elements(layout, target.range, target.direction)[m])


def receive_distances(rx: ReceiverLayout, r, theta) -> np.ndarray:
    """Per-element distances used by the receive model (all equal to l in plane-wave mode)."""
    if rx.mode is RxMode.PLANE_WAVE:
        l = rx_center_distance(rx, r, theta)[..., None]
        return np.broadcast_to(l, l.shape[:-1] + (rx.n_elements,)).copy()
    return rx_distances(rx, r, theta)


def rx_elements(rx: ReceiverLayout, r, theta) -> np.ndarray:
    ln = receive_distances(rx, r, theta)
    return math.sqrt(rx.ref_gain) / ln * np.exp(-1j * wavenumber(rx.wavelength) * ln)


def rx_element(rx: ReceiverLayout, target: Target, n: float) -> complex:
    n = _check_rx_index(rx, n)
    pos = int(np.flatnonzero(rx.indices == n)[0])
    return complex(rx_elements(rx, target.range, target.direction)[pos])


def aggregate_tx(layout: TransmitterLayout, target: Target) -> complex:
    return complex(np.sum(tx_elements(layout, target.range, target.direction)))


@dataclass(frozen=True)
class ObservationModel:
    g: np.ndarray
    S: complex
    b: np.ndarray


def observation(layout: TransmitterLayout, rx: ReceiverLayout, target: Target) -> ObservationModel:
    S = aggregate_tx(layout, target)
    b = rx_elements(rx, target.range, target.direction)
    return ObservationModel(g=S * b, S=S, b=b)
