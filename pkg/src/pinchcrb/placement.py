"""Pinching-antenna placement by multi-start projected pattern search."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .crb import SensingBudget, combine, receiver_terms, transmit_factor
from .response import wavenumber
from .scene import ReceiverLayout, TransmitterLayout

DIVERGENT_PENALTY = 1e6
DEFAULT_RESTARTS = 32
INITIAL_STEP_FRACTION = 0.1
STEP_SHRINK = 0.5
FINAL_STEP_FRACTION = 0.01  # of the wavelength
_MAX_SWEEPS_PER_STEP = 200
SCAN_STARTS = 4
SCAN_PITCH_FRACTION = 0.25  # of the wavelength


class InfeasibleProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Objective:
    """Weighted sum of ensemble-mean sqrt(CRB_r) [m] and sqrt(CRB_theta) [deg]."""

    w_range: float = 1.0
    w_angle: float = 0.0
    name: str = "weighted"

    @classmethod
    def range(cls) -> "Objective":
        return cls(1.0, 0.0, "range")

    @classmethod
    def angle(cls) -> "Objective":
        return cls(0.0, 1.0, "angle")

    @classmethod
    def weighted(cls, w_range: float, w_angle: float) -> "Objective":
        return cls(float(w_range), float(w_angle), "weighted")


def grid_ensemble(n_theta: int = 16, n_range: int = 16, theta_min: float = -math.pi / 6,
                  theta_max: float = math.pi / 6, r_min: float = 5.0,
                  r_max: float = 25.0) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centre tensor grid over [theta_min, theta_max] x [r_min, r_max], as (r, theta)."""
    if n_theta < 1 or n_range < 1:
        raise ValueError("grid dimensions must be >= 1")
    th = theta_min + (np.arange(n_theta) + 0.5) * ((theta_max - theta_min) / n_theta)
    r = r_min + (np.arange(n_range) + 0.5) * ((r_max - r_min) / n_range)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    return rr.ravel(), tt.ravel()


@dataclass(frozen=True)
class PlacementProblem:
    m_antennas: int
    waveguide_length: float
    wavelength: float
    guided_wavelength: float
    rx: ReceiverLayout
    budget: SensingBudget
    target_ranges: np.ndarray
    target_directions: np.ndarray
    objective: Objective = field(default_factory=Objective.range)
    feed_y: float | None = None
    ref_gain: float | None = None
    divergent_penalty: float = DIVERGENT_PENALTY
    _rx_terms: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m_antennas < 1:
            raise InfeasibleProblemError("m_antennas must be >= 1")
        if self.m_antennas * self.min_spacing > self.waveguide_length:
            raise InfeasibleProblemError(
                f"{self.m_antennas} PAs at lambda/2 = {self.min_spacing:.6g} m "
                f"do not fit on a {self.waveguide_length:g} m waveguide"
            )
        r = np.atleast_1d(np.asarray(self.target_ranges, dtype=float))
        th = np.atleast_1d(np.asarray(self.target_directions, dtype=float))
        if r.size == 0 or r.shape != th.shape:
            raise ValueError("target ensemble must be non-empty with matching shapes")
        object.__setattr__(self, "target_ranges", r)
        object.__setattr__(self, "target_directions", th)
        if self.feed_y is None:
            object.__setattr__(self, "feed_y", -self.waveguide_length / 2)
        object.__setattr__(self, "_rx_terms", receiver_terms(self.rx, r, th))

    @property
    def min_spacing(self) -> float:
        return self.wavelength / 2

    def layout(self, positions) -> TransmitterLayout:
        return TransmitterLayout(positions, self.wavelength, self.guided_wavelength,
                                 self.waveguide_length, feed_y=self.feed_y, ref_gain=self.ref_gain)


@dataclass(frozen=True)
class PlacementResult:
    positions: np.ndarray
    objective_value: float
    iterations: int
    restarts_used: int
    history: tuple[float, ...] = ()
    seed: int | None = None


def _ensemble_objective(problem: PlacementProblem, S: np.ndarray) -> float:
    res = combine(S, problem._rx_terms, problem.budget.prefactor)
    pen = problem.divergent_penalty
    obj = problem.objective
    total = 0.0
    if obj.w_range:
        total += obj.w_range * float(np.mean(np.where(res.divergent, pen, np.sqrt(res.crb_r))))
    if obj.w_angle:
        deg = np.degrees(np.sqrt(res.crb_theta))
        total += obj.w_angle * float(np.mean(np.where(res.divergent, pen, deg)))
    return total


def evaluate_objective(layout: TransmitterLayout, problem: PlacementProblem) -> float:
    """Ensemble mean of sqrt(CRB) per the problem objective; divergent targets cost the penalty."""
    S = transmit_factor(layout, problem.target_ranges, problem.target_directions)
    return _ensemble_objective(problem, S)


def ula_baseline(m_antennas: int, wavelength: float, ref_gain: float | None = None,
                 waveguide_length: float | None = None) -> TransmitterLayout:
    """Centred lambda/2 array without in-waveguide phase (conventional transmitter)."""
    if m_antennas < 1:
        raise ValueError("m_antennas must be >= 1")
    pos = (np.arange(m_antennas) - (m_antennas - 1) / 2) * (wavelength / 2)
    length = m_antennas * wavelength / 2 if waveguide_length is None else waveguide_length
    return TransmitterLayout(pos, wavelength, wavelength, length, ref_gain=ref_gain,
                             waveguide_phase_enabled=False)


# --- feasibility projection -------------------------------------------------


def _repair(x: list[float], half: float, gap: float) -> list[float]:
    """Clip to [-half, half], then push apart to at least ``gap`` staying inside."""
    out = [min(max(v, -half), half) for v in x]
    for i in range(1, len(out)):
        if out[i] < out[i - 1] + gap:
            out[i] = out[i - 1] + gap
    if out[-1] > half:
        out[-1] = half
        for i in range(len(out) - 2, -1, -1):
            if out[i] > out[i + 1] - gap:
                out[i] = out[i + 1] - gap
    return out


def project_feasible(positions, waveguide_length: float, gap: float) -> np.ndarray:
    """Map positions to a sorted, centred layout with gaps >= ``gap`` inside the waveguide.

    Repair is monotone in a common shift c, so the shift giving zero mean is
    found by bisection when plain re-centring leaves the waveguide.
    """
    half = waveguide_length / 2
    x = sorted(float(v) for v in positions)
    rep = _repair(x, half, gap)
    mean = math.fsum(rep) / len(rep)
    if rep[0] - mean >= -half and rep[-1] - mean <= half:
        return np.array([v - mean for v in rep])
    lo, hi = x[0] - waveguide_length, x[-1] + waveguide_length
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m = math.fsum(_repair([v - mid for v in x], half, gap)) / len(x)
        if m > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    rep = _repair([v - 0.5 * (lo + hi) for v in x], half, gap)
    mean = math.fsum(rep) / len(rep)
    return np.array([min(max(v - mean, -half), half) for v in rep])


def audit_layout(positions, waveguide_length: float, gap: float, tol: float = 1e-9) -> list[str]:
    """Constraint violations of a position vector (empty when feasible)."""
    p = np.asarray(positions, dtype=float)
    problems = []
    if np.any(np.diff(p) < 0):
        problems.append("positions not sorted")
    if p.size > 1 and np.min(np.diff(np.sort(p))) < gap - tol:
        problems.append(f"min gap {np.min(np.diff(np.sort(p))):.6g} < {gap:.6g}")
    if np.max(np.abs(p)) > waveguide_length / 2 + tol:
        problems.append("position outside waveguide")
    if abs(p.sum()) > tol * max(1, p.size):
        problems.append(f"positions not centred (sum {p.sum():.3g})")
    return problems


# --- search -----------------------------------------------------------------


class _Evaluator:
    """Objective on raw position vectors, skipping layout validation."""

    def __init__(self, problem: PlacementProblem):
        self.problem = problem
        self.k = wavenumber(problem.wavelength)
        self.sqrt_a0 = math.sqrt(problem.layout([0.0]).ref_gain)
        self.scale = 2.0 * math.pi / problem.guided_wavelength

    def __call__(self, y: np.ndarray) -> float:
        p = self.problem
        S, _, _ = kernels.aggregate_batch(y, self.scale * np.abs(y - p.feed_y), self.k, self.sqrt_a0,
                                          p.target_ranges, p.target_directions)
        return _ensemble_objective(p, S)


def spacing_scan(problem: PlacementProblem, count: int = SCAN_STARTS) -> list[np.ndarray]:
    """Best centred equal-spacing layouts with pitch on a lambda/4 lattice.

    For M = 2 this enumerates every lattice gap, so seeding the search with it
    makes the result at least as good as exhaustive lattice enumeration.
    """
    M, D = problem.m_antennas, problem.waveguide_length
    if M == 1 or count < 1:
        return []
    f = _Evaluator(problem)
    pitch = SCAN_PITCH_FRACTION * problem.wavelength
    j_min = math.ceil(problem.min_spacing / pitch - 1e-9)
    j_max = math.floor(D / ((M - 1) * pitch) + 1e-9)
    base = np.arange(M) - (M - 1) / 2
    scored = []
    for j in range(j_min, j_max + 1):
        y = base * (j * pitch)
        scored.append((f(y), j, y))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [y for _, _, y in scored[:count]]


def _pattern_search(f: _Evaluator, x: np.ndarray):
    problem = f.problem
    M, D, gap = problem.m_antennas, problem.waveguide_length, problem.min_spacing
    x = project_feasible(x, D, gap)
    fx = f(x)
    evals = 1
    step = INITIAL_STEP_FRACTION * D
    final = FINAL_STEP_FRACTION * problem.wavelength
    while step >= final:
        for _ in range(_MAX_SWEEPS_PER_STEP):
            improved = False
            for i in range(M):
                for sign in (1.0, -1.0):
                    cand = x.copy()
                    cand[i] += sign * step
                    cand = project_feasible(cand, D, gap)
                    fc = f(cand)
                    evals += 1
                    if fc < fx:
                        x, fx, improved = cand, fc, True
                        break
            if not improved:
                break
        step *= STEP_SHRINK
    return x, fx, evals


def _random_start(problem: PlacementProblem, rng: np.random.Generator) -> np.ndarray:
    D = problem.waveguide_length
    return np.sort(rng.uniform(-D / 2, D / 2, problem.m_antennas))


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("PINCHCRB_THREADS", "1")))
    except ValueError:
        return 1


def optimize_placement(problem: PlacementProblem, seed: int, restarts: int = DEFAULT_RESTARTS,
                       workers: int | None = None, scan_starts: int = SCAN_STARTS) -> PlacementResult:
    """Best of several projected pattern searches; deterministic for a given seed.

    Starts are the ``scan_starts`` best equal-spacing layouts followed by
    ``restarts`` random draws, each random draw from its own generator spawned
    from ``seed`` so results do not depend on execution order. Ties go to the
    earliest start.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    f = _Evaluator(problem)
    starts = spacing_scan(problem, scan_starts)
    for ss in np.random.SeedSequence(seed).spawn(restarts):
        starts.append(_random_start(problem, np.random.default_rng(ss)))
    workers = _workers() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda x0: _pattern_search(f, x0), starts))
    else:
        runs = [_pattern_search(f, x0) for x0 in starts]

    best_x, best_f, history, evals = None, math.inf, [], 0
    for x, fx, n in runs:
        evals += n
        if fx < best_f:
            best_x, best_f = x, fx
        history.append(best_f)
    return PlacementResult(positions=best_x, objective_value=best_f, iterations=evals,
                           restarts_used=len(starts), history=tuple(history), seed=seed)
