"""Planar bistatic geometry: pinching-antenna transmitter, ULA receiver, point target.

Transmitter elements sit on the y-axis at x = 0, receiver elements on the line
x = R. Targets are given in polar coordinates (r, theta) about the transmitter
centre, theta measured from the x-axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Relative slack used when auditing spacing / bounds of stored positions.
_LAYOUT_RTOL = 1e-9


class InvalidLayoutError(ValueError):
    """A transmitter or receiver layout violates its geometric constraints."""


class DegenerateGeometryError(ValueError):
    """The target coincides with an array reference point."""


def wavelength_for(frequency: float) -> float:
    if frequency <= 0:
        raise ValueError(f"frequency must be positive, got {frequency!r}")
    return SPEED_OF_LIGHT / frequency


def free_space_gain(wavelength: float) -> float:
    """Channel power gain at 1 m, (lambda / 4 pi)^2."""
    return (wavelength / (4.0 * math.pi)) ** 2


def element_indices(count: int) -> np.ndarray:
    """Symmetric element indices {0, +-1, ...}; index 0 is dropped for even counts."""
    if count < 1:
        raise InvalidLayoutError(f"element count must be >= 1, got {count}")
    if count % 2:
        half = (count - 1) // 2
        return np.arange(-half, half + 1, dtype=float)
    half = count // 2
    return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)]).astype(float)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransmitterLayout:
    """Pinching antennas along one dielectric waveguide.

    Positions are sorted and re-centred on construction so they sum to zero.
    ``waveguide_phase_enabled=False`` turns the layout into a conventional
    array transmitter (no in-waveguide phase).
    """

    pa_positions: np.ndarray
    wavelength: float
    guided_wavelength: float
    waveguide_length: float
    feed_y: float | None = None
    ref_gain: float | None = None
    waveguide_phase_enabled: bool = True

    def __post_init__(self):
        lam, lam_g, length = self.wavelength, self.guided_wavelength, self.waveguide_length
        if not lam > 0 or not lam_g > 0:
            raise InvalidLayoutError("wavelength and guided_wavelength must be positive")
        if not length >= 0:
            raise InvalidLayoutError("waveguide_length must be non-negative")
        pos = np.sort(np.asarray(self.pa_positions, dtype=float).ravel())
        if pos.size == 0:
            raise InvalidLayoutError("at least one pinching antenna is required")
        if not np.all(np.isfinite(pos)):
            raise InvalidLayoutError("positions must be finite")
        pos = pos - pos.mean()
        slack = _LAYOUT_RTOL * max(length, lam)
        if pos.size > 1 and np.min(np.diff(pos)) < lam / 2 - slack:
            raise InvalidLayoutError(
                f"adjacent elements closer than lambda/2 = {lam / 2:.6g} m"
            )
        if np.max(np.abs(pos)) > length / 2 + slack:
            raise InvalidLayoutError(
                f"positions exceed the waveguide half-length {length / 2:.6g} m"
            )
        object.__setattr__(self, "pa_positions", _frozen(pos))
        if self.feed_y is None:
            object.__setattr__(self, "feed_y", -length / 2)
        ref = free_space_gain(lam) if self.ref_gain is None else float(self.ref_gain)
        if not ref > 0:
            raise InvalidLayoutError("ref_gain must be positive")
        object.__setattr__(self, "ref_gain", ref)

    @classmethod
    def for_carrier(cls, positions, frequency: float, n_eff: float = 1.4,
                    waveguide_length: float = 10.0, **kwargs) -> "TransmitterLayout":
        lam = wavelength_for(frequency)
        return cls(positions, wavelength=lam, guided_wavelength=lam / n_eff,
                   waveguide_length=waveguide_length, **kwargs)

    @property
    def n_antennas(self) -> int:
        return int(self.pa_positions.size)

    @property
    def aperture(self) -> float:
        return float(self.pa_positions[-1] - self.pa_positions[0])

    def waveguide_phases(self) -> np.ndarray:
        """In-waveguide phase 2 pi |y_m - y_f| / lambda_g per element (zeros for ULA).

        The absolute value is the propagation distance from the feed; for the
        default end feed it equals y_m - y_f.
        """
        if not self.waveguide_phase_enabled:
            return np.zeros_like(self.pa_positions)
        return 2.0 * math.pi * np.abs(self.pa_positions - self.feed_y) / self.guided_wavelength

    def mirrored(self) -> "TransmitterLayout":
        return TransmitterLayout(
            -self.pa_positions, self.wavelength, self.guided_wavelength,
            self.waveguide_length, feed_y=-self.feed_y, ref_gain=self.ref_gain,
            waveguide_phase_enabled=self.waveguide_phase_enabled,
        )


class RxMode(enum.Enum):
    EXACT = "exact"
    PLANE_WAVE = "plane-wave"


@dataclass(frozen=True)
class ReceiverLayout:
    n_elements: int
    spacing: float
    baseline: float
    wavelength: float
    ref_gain: float | None = None
    mode: RxMode = RxMode.EXACT
    indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise InvalidLayoutError(f"n_elements must be a positive integer, got {self.n_elements!r}")
        if not self.spacing > 0:
            raise InvalidLayoutError("spacing must be positive")
        if not self.baseline > 0:
            raise InvalidLayoutError("baseline must be positive")
        if not self.wavelength > 0:
            raise InvalidLayoutError("wavelength must be positive")
        ref = free_space_gain(self.wavelength) if self.ref_gain is None else float(self.ref_gain)
        if not ref > 0:
            raise InvalidLayoutError("ref_gain must be positive")
        object.__setattr__(self, "ref_gain", ref)
        object.__setattr__(self, "mode", RxMode(self.mode))
        object.__setattr__(self, "indices", _frozen(element_indices(int(self.n_elements))))

    @property
    def aperture(self) -> float:
        return self.n_elements * self.spacing

    def with_elements(self, n_elements: int) -> "ReceiverLayout":
        return ReceiverLayout(n_elements, self.spacing, self.baseline, self.wavelength,
                              self.ref_gain, self.mode)

    def with_mode(self, mode: RxMode) -> "ReceiverLayout":
        return ReceiverLayout(self.n_elements, self.spacing, self.baseline, self.wavelength,
                              self.ref_gain, mode)


@dataclass(frozen=True)
class Target:
    range: float
    direction: float

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError(f"target range must be positive, got {self.range!r}")
        if not abs(self.direction) < math.pi / 2:
            raise ValueError(f"target direction must lie in (-pi/2, pi/2), got {self.direction!r}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.range * math.cos(self.direction), self.range * math.sin(self.direction))


def as_real(x) -> np.ndarray:
    """Array view of ``x`` as floating point, keeping extended precision if given."""
    return np.asarray(x, dtype=np.result_type(x, np.float64))


def _check_tx_index(layout: TransmitterLayout, m: int) -> float:
    if not 0 <= m < layout.n_antennas:
        raise IndexError(f"PA index {m} out of range for M={layout.n_antennas}")
    return float(layout.pa_positions[m])


def _check_rx_index(rx: ReceiverLayout, n: float) -> float:
    if not np.any(rx.indices == n):
        raise IndexError(f"receive index {n} not in {rx.indices.tolist()}")
    return float(n)


def tx_distances(layout: TransmitterLayout, r, theta) -> np.ndarray:
    """Target to every PA distance; broadcasts (r, theta) and appends an M axis."""
    r = as_real(r)[..., None]
    st = np.sin(as_real(theta))[..., None]
    y = layout.pa_positions
    return np.sqrt(r * r - 2.0 * r * y * st + y * y)


def tx_distance(layout: TransmitterLayout, target: Target, m: int) -> float:
    y = _check_tx_index(layout, m)
    r, th = target.range, target.direction
    return math.sqrt(r * r - 2.0 * r * y * math.sin(th) + y * y)


def rx_center_distance(rx: ReceiverLayout, r, theta):
    r = as_real(r)
    R = rx.baseline
    return np.sqrt(R * R + r * r - 2.0 * R * r * np.cos(theta))


def rx_distances(rx: ReceiverLayout, r, theta) -> np.ndarray:
    """Target to every receive element distance (exact geometry), trailing N axis."""
    r = as_real(r)[..., None]
    th = as_real(theta)[..., None]
    R, nd = rx.baseline, rx.indices * rx.spacing
    return np.sqrt(R * R + r * r - 2.0 * R * r * np.cos(th) - 2.0 * nd * r * np.sin(th) + nd * nd)


def rx_distance(rx: ReceiverLayout, target: Target, n: float) -> float:
    n = _check_rx_index(rx, n)
    r, th, R, nd = target.range, target.direction, rx.baseline, n * rx.spacing
    return math.sqrt(R * R + r * r - 2.0 * R * r * math.cos(th)
                     - 2.0 * nd * r * math.sin(th) + nd * nd)


def rx_center_range_angle(rx: ReceiverLayout, target: Target) -> tuple[float, float]:
    """Range l and bearing phi of the target seen from the receiver centre."""
    r, th, R = target.range, target.direction, rx.baseline
    l = math.sqrt(R * R + r * r - 2.0 * R * r * math.cos(th))
    if l == 0.0:
        raise DegenerateGeometryError("target coincides with the receiver centre")
    ratio = max(-1.0, min(1.0, r * math.sin(th) / l))
    return l, math.asin(ratio)


def delay_condition(tx_aperture: float, rx_aperture: float, bandwidth: float) -> bool:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return tx_aperture + rx_aperture <= SPEED_OF_LIGHT / bandwidth


def delay_condition_holds(tx: TransmitterLayout, rx: ReceiverLayout, bandwidth: float) -> bool:
    """Narrowband check D_T + D_R <= c / B (per-element delays treated as equal)."""
    return delay_condition(tx.waveguide_length, rx.aperture, bandwidth)
