import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchcrb.response import (
    aggregate_tx,
    observation,
    rx_element,
    rx_elements,
    tx_element,
    tx_elements,
)
from pinchcrb.scene import (
    ReceiverLayout,
    RxMode,
    Target,
    TransmitterLayout,
    rx_distance,
    tx_distances,
    wavelength_for,
)

LAM = wavelength_for(27e9)


def mp_aggregate(layout, target, dps=40):
    """Term-by-term sum of the transmit entries in mpmath."""
    with mpmath.workdps(dps):
        r, th = mpmath.mpf(target.range), mpmath.mpf(target.direction)
        total = mpmath.mpc(0)
        for y in layout.pa_positions:
            y = mpmath.mpf(y)
            rm = mpmath.sqrt(r ** 2 - 2 * r * y * mpmath.sin(th) + y ** 2)
            ph = 2 * mpmath.pi * rm / layout.wavelength
            if layout.waveguide_phase_enabled:
                ph += 2 * mpmath.pi * (y - layout.feed_y) / layout.guided_wavelength
            total += mpmath.sqrt(layout.ref_gain) / rm * mpmath.exp(-1j * ph)
        return complex(total)


def test_centred_element_without_waveguide_phase():
    lay = TransmitterLayout([0.0], LAM, LAM / 1.4, 10.0, feed_y=0.0)
    a = tx_element(lay, Target(12.0, 0.0), 0)
    expected = math.sqrt(lay.ref_gain) / 12.0 * np.exp(-2j * math.pi * 12.0 / LAM)
    assert a == pytest.approx(expected, rel=1e-12)


def test_tx_phase_against_high_precision_oracle():
    lam, lam_g = 0.011103, 0.0079307
    lay = TransmitterLayout([-1.0, 1.0], lam, lam_g, 10.0, feed_y=-5.0)
    a = tx_element(lay, Target(10.0, math.pi / 6), 1)
    with mpmath.workdps(40):
        want = -(2 * mpmath.pi * mpmath.sqrt(91) / mpmath.mpf("0.011103")
                 + 2 * mpmath.pi * 6 / mpmath.mpf("0.0079307"))
        want = float(mpmath.fmod(want, 2 * mpmath.pi))
    diff = math.remainder(math.atan2(a.imag, a.real) - want, 2 * math.pi)
    assert abs(diff) < 1e-9
    assert abs(a) == pytest.approx(math.sqrt(lay.ref_gain) / math.sqrt(91), rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(r=st.floats(5, 25), theta=st.floats(-0.52, 0.52), n=st.integers(1, 12))
def test_modulus_laws(r, theta, n):
    lay = TransmitterLayout([-2.0, -0.3, 0.4, 3.1], LAM, LAM / 1.4, 10.0)
    a = tx_elements(lay, r, theta)
    assert np.allclose(np.abs(a) * tx_distances(lay, r, theta), math.sqrt(lay.ref_gain), rtol=1e-14)
    rx = ReceiverLayout(n, LAM / 2, 30.0, LAM)
    t = Target(r, theta)
    for idx in rx.indices:
        assert abs(rx_element(rx, t, idx)) * rx_distance(rx, t, idx) == pytest.approx(
            math.sqrt(rx.ref_gain), rel=1e-14)


def test_rx_centre_element_and_plane_wave():
    rx = ReceiverLayout(5, LAM / 2, 30.0, LAM)
    t = Target(10.0, 0.0)
    expected = math.sqrt(rx.ref_gain) / 20.0 * np.exp(-2j * math.pi * 20.0 / LAM)
    assert rx_element(rx, t, 0) == pytest.approx(expected, rel=1e-12)
    pw = rx_elements(rx.with_mode(RxMode.PLANE_WAVE), 10.0, 0.4)
    assert np.all(pw == pw[0])
    assert pw[0] == pytest.approx(rx_element(rx, Target(10.0, 0.4), 0), rel=1e-15)


def test_rx_modulus_with_coordinate_oracle():
    rx = ReceiverLayout(7, LAM / 2, 30.0, LAM)
    q = np.array([10 * math.cos(math.pi / 6), 10 * math.sin(math.pi / 6)])
    l3 = float(np.linalg.norm(np.array([30.0, 3 * LAM / 2]) - q))
    assert abs(rx_element(rx, Target(10.0, math.pi / 6), 3)) == pytest.approx(
        math.sqrt(rx.ref_gain) / l3, rel=1e-12)


def test_single_element_aggregate():
    lay = TransmitterLayout([0.0], LAM, LAM / 1.4, 10.0, feed_y=0.0)
    t = Target(9.0, 0.2)
    assert aggregate_tx(lay, t) == tx_element(lay, t, 0)


def test_misaligned_pair_is_strictly_below_triangle_bound():
    # At theta = 0 both PAs are equidistant, so only the waveguide phase differs:
    # a separation of lambda_g / 2 puts them pi apart.
    lam_g = LAM / 1.4
    sep = lam_g / 2 + 2 * lam_g
    lay = TransmitterLayout([-sep / 2, sep / 2], LAM, lam_g, 10.0)
    t = Target(15.0, 0.0)
    a = tx_elements(lay, 15.0, 0.0)
    dphi = math.remainder(np.angle(a[1]) - np.angle(a[0]), 2 * math.pi)
    assert abs(abs(dphi) - math.pi) < 1e-6
    assert abs(aggregate_tx(lay, t)) < 1e-6 * (abs(a[0]) + abs(a[1]))


def test_aggregate_matches_extended_precision_sum():
    lay = TransmitterLayout([-0.2425, -0.0704, 0.1003, 0.2126], LAM, LAM / 1.4, 10.0)
    t = Target(15.0, 0.0)
    want = mp_aggregate(lay, t)
    # Each carrier phase is ~8.5e3 rad, so double rounding alone is ~2e-12 of
    # one term; measure against the term scale rather than the (cancelling) sum.
    scale = np.sum(np.abs(tx_elements(lay, t.range, t.direction)))
    assert abs(aggregate_tx(lay, t) - want) <= 1e-12 * scale


def test_observation_structure():
    lay = TransmitterLayout([-0.5, 0.5], LAM, LAM / 1.4, 10.0)
    t = Target(14.0, -0.2)
    one = observation(lay, ReceiverLayout(1, LAM / 2, 30.0, LAM), t)
    assert one.g.shape == (1,)
    assert one.g[0] == pytest.approx(one.S * one.b[0], rel=1e-15)
    obs = observation(lay, ReceiverLayout(9, LAM / 2, 30.0, LAM), t)
    assert np.linalg.norm(obs.g) ** 2 == pytest.approx(abs(obs.S) ** 2 * np.linalg.norm(obs.b) ** 2, rel=1e-13)
    pw = observation(lay, ReceiverLayout(9, LAM / 2, 30.0, LAM, mode=RxMode.PLANE_WAVE), t)
    assert np.allclose(pw.g, pw.g[0], rtol=1e-15, atol=0)


def test_ula_without_waveguide_phase_depends_on_range_only():
    lay = TransmitterLayout((np.arange(4) - 1.5) * LAM / 2, LAM, LAM / 1.4, 1.0,
                            feed_y=0.0, waveguide_phase_enabled=False)
    a = tx_elements(lay, 11.0, 0.3)
    rm = tx_distances(lay, 11.0, 0.3)
    assert np.allclose(a, math.sqrt(lay.ref_gain) / rm * np.exp(-2j * math.pi * rm / LAM), rtol=1e-13)
