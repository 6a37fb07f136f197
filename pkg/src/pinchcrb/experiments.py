"""Monte Carlo N-sweeps, slope estimation and the plane-wave degeneracy study."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .crb import SensingBudget, closed_form_batch
from .placement import (
    DEFAULT_RESTARTS,
    DIVERGENT_PENALTY,
    Objective,
    PlacementProblem,
    grid_ensemble,
    optimize_placement,
)
from .scene import ReceiverLayout, RxMode, TransmitterLayout

DEFAULT_N_VALUES = (2, 4, 8, 16, 32, 64)
DEFAULT_SAMPLES = 2048


@dataclass(frozen=True)
class EnsembleBounds:
    """Uniform target distribution in (theta, r); angles in radians."""

    theta_min: float = -math.pi / 6
    theta_max: float = math.pi / 6
    r_min: float = 5.0
    r_max: float = 25.0

    def __post_init__(self):
        if not self.theta_min <= self.theta_max:
            raise ValueError("theta_min must not exceed theta_max")
        if not -math.pi / 2 < self.theta_min and self.theta_max < math.pi / 2:
            raise ValueError("directions must lie in (-pi/2, pi/2)")
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("ranges must satisfy 0 < r_min <= r_max")

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        # One (n, 2) block so a longer draw extends a shorter one from the same stream.
        u = rng.random((n, 2))
        theta = self.theta_min + (self.theta_max - self.theta_min) * u[:, 0]
        r = self.r_min + (self.r_max - self.r_min) * u[:, 1]
        return r, theta


@dataclass(frozen=True)
class PlacementDirective:
    """Optimize an M-element PAS on the grid ensemble instead of using a fixed layout."""

    m_antennas: int
    waveguide_length: float
    wavelength: float
    guided_wavelength: float
    objective: Objective = field(default_factory=Objective.range)
    restarts: int = DEFAULT_RESTARTS
    reference_n: int = 16
    grid: tuple[int, int] = (16, 16)
    feed_y: float | None = None
    penalty: float = DIVERGENT_PENALTY


TransmitterSpec = Union[TransmitterLayout, PlacementDirective]


@dataclass(frozen=True)
class SweepSpec:
    transmitters: Sequence[tuple[str, TransmitterSpec]]
    rx: ReceiverLayout
    budget: SensingBudget
    n_values: Sequence[int] = DEFAULT_N_VALUES
    ensemble: EnsembleBounds = field(default_factory=EnsembleBounds)
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        n = tuple(int(v) for v in self.n_values)
        if not n or any(v < 1 for v in n) or any(b <= a for a, b in zip(n, n[1:])):
            raise ValueError("n_values must be non-empty, positive and strictly ascending")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        labels = [lab for lab, _ in self.transmitters]
        if len(set(labels)) != len(labels):
            raise ValueError("transmitter labels must be unique")
        object.__setattr__(self, "n_values", n)
        object.__setattr__(self, "transmitters", tuple(self.transmitters))


@dataclass(frozen=True)
class SweepRow:
    label: str
    n: int
    mean_sqrt_crb_r: float
    mean_sqrt_crb_theta_deg: float
    divergent_fraction: float
    # Standard errors of the two means; not serialized.
    sem_r: float = field(default=math.nan, compare=False)
    sem_theta_deg: float = field(default=math.nan, compare=False)

    @property
    def all_divergent(self) -> bool:
        return self.divergent_fraction == 1.0


def _round_sig(x: float, digits: int) -> float:
    return float(f"{x:.{digits}g}") if math.isfinite(x) else x


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    layouts: dict = field(default_factory=dict, compare=False)

    def labels(self) -> list[str]:
        return list(dict.fromkeys(row.label for row in self.rows))

    def for_label(self, label: str) -> list[SweepRow]:
        return sorted((row for row in self.rows if row.label == label), key=lambda row: row.n)

    def cell(self, label: str, n: int) -> SweepRow:
        for row in self.rows:
            if row.label == label and row.n == n:
                return row
        raise KeyError((label, n))

    def rounded(self, digits: int = 12) -> "SweepResult":
        """Values as they appear after rendering with ``digits`` significant digits."""
        rows = tuple(
            SweepRow(row.label, row.n, _round_sig(row.mean_sqrt_crb_r, digits),
                     _round_sig(row.mean_sqrt_crb_theta_deg, digits),
                     _round_sig(row.divergent_fraction, digits))
            for row in self.rows
        )
        return SweepResult(rows)


def cell_seed(seed: int, label: str, n: int) -> np.random.SeedSequence:
    """Order-independent stream for one (label, N) cell."""
    return np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8")), int(n)])


def resolve_transmitter(tx: TransmitterSpec, spec: SweepSpec) -> TransmitterLayout:
    if isinstance(tx, TransmitterLayout):
        return tx
    e = spec.ensemble
    r, th = grid_ensemble(tx.grid[0], tx.grid[1], e.theta_min, e.theta_max, e.r_min, e.r_max)
    problem = PlacementProblem(
        tx.m_antennas, tx.waveguide_length, tx.wavelength, tx.guided_wavelength,
        spec.rx.with_elements(tx.reference_n), spec.budget, r, th, objective=tx.objective,
        feed_y=tx.feed_y, divergent_penalty=tx.penalty,
    )
    result = optimize_placement(problem, spec.seed, restarts=tx.restarts)
    return problem.layout(result.positions)


def _mean_sem(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.inf, math.nan
    mean = float(np.mean(values))
    sem = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, sem


def sweep_cell(layout: TransmitterLayout, rx: ReceiverLayout, budget: SensingBudget,
               r: np.ndarray, theta: np.ndarray, label: str, n: int) -> SweepRow:
    res = closed_form_batch(layout, rx.with_elements(n), r, theta, budget)
    ok = ~res.divergent
    mean_r, sem_r = _mean_sem(np.sqrt(res.crb_r[ok]))
    mean_t, sem_t = _mean_sem(np.degrees(np.sqrt(res.crb_theta[ok])))
    return SweepRow(label, n, mean_r, mean_t, float(np.mean(res.divergent)), sem_r, sem_t)


def run_sweep(spec: SweepSpec) -> SweepResult:
    """One row per (label, N); placement directives are optimized once and reused over N."""
    layouts = {label: resolve_transmitter(tx, spec) for label, tx in spec.transmitters}
    rows = []
    for label, _ in spec.transmitters:
        for n in spec.n_values:
            rng = np.random.Generator(np.random.PCG64(cell_seed(spec.seed, label, n)))
            r, theta = spec.ensemble.draw(rng, spec.samples)
            rows.append(sweep_cell(layouts[label], spec.rx, spec.budget, r, theta, label, n))
    return SweepResult(tuple(rows), layouts)


def estimate_slope(result: SweepResult, label: str, metric: str = "range") -> float:
    """OLS slope of log(mean sqrt CRB) against log(N) over the finite rows of ``label``."""
    attr = {"range": "mean_sqrt_crb_r", "angle": "mean_sqrt_crb_theta_deg"}[metric]
    pts = [(row.n, getattr(row, attr)) for row in result.for_label(label)]
    pts = [(n, v) for n, v in pts if math.isfinite(v) and v > 0]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 finite rows for {label!r}, got {len(pts)}")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass(frozen=True)
class DegeneracyRow:
    l: float
    mode: RxMode
    r: float
    i: float
    s: float
    k: float
    schur_det: float
    crb_theta: float
    crb_r: float
    divergent: bool


def range_for_center_distance(l: float, baseline: float, theta: float) -> float:
    """Target range r at bearing ``theta`` whose distance to the receiver centre is ``l``."""
    disc = l * l - (baseline * math.sin(theta)) ** 2
    if disc < 0:
        raise ValueError(f"no target at bearing {theta:g} rad is {l:g} m from the receiver")
    return baseline * math.cos(theta) + math.sqrt(disc)


def degeneracy_study(rx_distances: Sequence[float], layout: TransmitterLayout, budget: SensingBudget,
                     rx: ReceiverLayout, bearing: float = math.radians(15.0)) -> list[DegeneracyRow]:
    """Closed-form CRBs in both receiver modes for targets at the given receiver distances."""
    rows = []
    for l in rx_distances:
        r = range_for_center_distance(float(l), rx.baseline, bearing)
        for mode in (RxMode.EXACT, RxMode.PLANE_WAVE):
            res = closed_form_batch(layout, rx.with_mode(mode), r, bearing, budget)
            rows.append(DegeneracyRow(
                float(l), mode, r, float(res.i[0]), float(res.s[0]), float(res.k[0]),
                float(res.schur_det[0]), float(res.crb_theta[0]), float(res.crb_r[0]),
                bool(res.divergent[0]),
            ))
    return rows
