"""Seeded numerical checks: analytic derivatives vs finite differences, closed form vs FIM oracle."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .crb import SensingBudget, closed_form_crb, numerical_fim_crb
from .placement import project_feasible
from .scene import ReceiverLayout, RxMode, Target, TransmitterLayout, wavelength_for
from .sensitivity import derivative_errors, observation_jacobian

FD_TOLERANCE = 1e-6
FIM_TOLERANCE = 1e-8
RX_SIZES = (1, 2, 3, 4, 5, 8, 16, 32, 64)


@dataclass(frozen=True)
class ConfigSpace:
    """Ranges random validation scenes are drawn from (SI units, radians)."""

    wavelength: float = wavelength_for(27e9)
    n_eff: float = 1.4
    waveguide_length: float = 10.0
    baseline: float = 30.0
    rx_spacing_wavelengths: float = 0.5
    theta_min: float = -math.pi / 6
    theta_max: float = math.pi / 6
    r_min: float = 5.0
    r_max: float = 25.0
    max_pas: int = 8
    rx_sizes: tuple[int, ...] = RX_SIZES
    plane_wave_fraction: float = 0.2

    def draw(self, rng: np.random.Generator, plane_wave: bool | None = None):
        lam = self.wavelength
        m_cap = max(1, min(self.max_pas, int(self.waveguide_length // (lam / 2))))
        m = int(rng.integers(1, m_cap + 1))
        y = project_feasible(rng.uniform(-self.waveguide_length / 2, self.waveguide_length / 2, m),
                             self.waveguide_length, lam / 2)
        tx = TransmitterLayout(y, lam, lam / self.n_eff, self.waveguide_length,
                               waveguide_phase_enabled=bool(rng.integers(2)))
        if plane_wave is None:
            plane_wave = bool(rng.random() < self.plane_wave_fraction)
        rx = ReceiverLayout(int(rng.choice(self.rx_sizes)), self.rx_spacing_wavelengths * lam,
                            self.baseline, lam, mode=RxMode.PLANE_WAVE if plane_wave else RxMode.EXACT)
        target = Target(rng.uniform(self.r_min, self.r_max), rng.uniform(self.theta_min, self.theta_max))
        return tx, rx, target


@dataclass(frozen=True)
class CheckReport:
    name: str
    configs: int
    max_error: float
    tolerance: float
    elapsed: float
    worst: str = ""
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.configs > 0 and self.max_error <= self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {status} max_rel_error={self.max_error:.3e} tol={self.tolerance:.1e} "
                f"configs={self.configs} skipped={self.skipped} time={self.elapsed:.2f}s")


def _describe(tx: TransmitterLayout, rx: ReceiverLayout, target: Target) -> str:
    return (f"M={tx.n_antennas} N={rx.n_elements} mode={rx.mode.value} "
            f"r={target.range:.6g} theta={target.direction:.6g}")


def fd_check(n_configs: int, seed: int, space: ConfigSpace | None = None,
             jacobian: Callable = observation_jacobian, tolerance: float = FD_TOLERANCE) -> CheckReport:
    """Worst analytic-vs-finite-difference error over ``n_configs`` random scenes."""
    if n_configs < 1:
        raise ValueError("n_configs must be >= 1")
    space = space or ConfigSpace()
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    t0 = time.perf_counter()
    for _ in range(n_configs):
        tx, rx, target = space.draw(rng)
        errs = derivative_errors(tx, rx, target, jacobian=jacobian)
        name, err = max(errs.items(), key=lambda kv: kv[1])
        if not err <= worst:  # also catches NaN
            worst, where = err if math.isfinite(err) else math.inf, f"{name} at {_describe(tx, rx, target)}"
    return CheckReport("derivatives", n_configs, worst, tolerance, time.perf_counter() - t0, where)


def fim_check(n_configs: int, seed: int, space: ConfigSpace | None = None,
              budget: SensingBudget | None = None, tolerance: float = FIM_TOLERANCE,
              dps: int | None = 40) -> CheckReport:
    """Worst closed-form vs numerical-FIM disagreement over ``n_configs`` non-degenerate scenes.

    Degenerate scenes are skipped but must be flagged divergent by both routes;
    a disagreement on divergence counts as an infinite error.
    """
    if n_configs < 1:
        raise ValueError("n_configs must be >= 1")
    space = space or ConfigSpace(plane_wave_fraction=0.0)
    budget = budget or SensingBudget.from_levels()
    rng = np.random.default_rng(seed)
    worst, where, done, skipped = 0.0, "", 0, 0
    t0 = time.perf_counter()
    while done < n_configs and skipped <= 10 * n_configs:
        tx, rx, target = space.draw(rng)
        a = closed_form_crb(tx, rx, target, budget)
        b = numerical_fim_crb(tx, rx, target, budget, dps=dps)
        if a.divergent or b.divergent:
            skipped += 1
            if a.divergent != b.divergent:
                worst, where = math.inf, f"divergence mismatch at {_describe(tx, rx, target)}"
            continue
        done += 1
        err = max(abs(a.crb_theta - b.crb_theta) / b.crb_theta, abs(a.crb_r - b.crb_r) / b.crb_r)
        if err > worst:
            worst, where = err, _describe(tx, rx, target)
    return CheckReport("fim_oracle", done, worst, tolerance, time.perf_counter() - t0, where, skipped)
