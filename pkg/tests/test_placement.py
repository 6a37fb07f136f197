import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchcrb.crb import SensingBudget, closed_form_crb
from pinchcrb.placement import (
    InfeasibleProblemError,
    Objective,
    PlacementProblem,
    audit_layout,
    evaluate_objective,
    grid_ensemble,
    optimize_placement,
    project_feasible,
    ula_baseline,
)
from pinchcrb.scene import ReceiverLayout, Target, wavelength_for

LAM = wavelength_for(27e9)
BUDGET = SensingBudget.from_levels()
RX8 = ReceiverLayout(8, LAM / 2, 30.0, LAM)


def problem(m, ranges, directions, objective=None, rx=RX8, length=10.0):
    return PlacementProblem(m, length, LAM, LAM / 1.4, rx, BUDGET, ranges, directions,
                            objective=objective or Objective.range())


def small_problem(m, objective=None):
    r, th = grid_ensemble(4, 4)
    return problem(m, r, th, objective)


@pytest.mark.parametrize("m, want", [
    (1, [0.0]),
    (2, [-LAM / 4, LAM / 4]),
    (4, [-3 * LAM / 4, -LAM / 4, LAM / 4, 3 * LAM / 4]),
])
def test_ula_baseline_examples(m, want):
    lay = ula_baseline(m, LAM)
    assert lay.pa_positions == pytest.approx(want, abs=1e-15)
    assert not lay.waveguide_phase_enabled


@pytest.mark.parametrize("m", [3, 5, 8, 16])
def test_ula_baseline_structure(m):
    pos = ula_baseline(m, LAM).pa_positions
    assert abs(pos.sum()) < 1e-15
    assert np.diff(pos) == pytest.approx(np.full(m - 1, LAM / 2), rel=1e-12)


def test_ula_baseline_rejects_zero():
    with pytest.raises(ValueError):
        ula_baseline(0, LAM)


def test_infeasible_problem():
    r, th = grid_ensemble(2, 2)
    with pytest.raises(InfeasibleProblemError):
        problem(2000, r, th)
    with pytest.raises(InfeasibleProblemError):
        problem(3, r, th, length=LAM)
    with pytest.raises(ValueError):
        problem(2, [], [])


def test_grid_ensemble_cell_centres():
    r, th = grid_ensemble(2, 4, theta_min=-0.5, theta_max=0.5, r_min=5, r_max=25)
    assert sorted(set(np.round(r, 12))) == [7.5, 12.5, 17.5, 22.5]
    assert sorted(set(np.round(th, 12))) == [-0.25, 0.25]
    assert r.size == 8


def test_objective_of_single_target_is_its_bound():
    t = Target(14.0, 0.21)
    lay = ula_baseline(3, LAM)
    rep = closed_form_crb(lay, RX8, t, BUDGET)
    pr = problem(3, [t.range], [t.direction])
    assert evaluate_objective(lay, pr) == pytest.approx(rep.sqrt_crb_r, rel=1e-14)
    pa = problem(3, [t.range], [t.direction], Objective.angle())
    assert evaluate_objective(lay, pa) == pytest.approx(rep.sqrt_crb_theta_deg, rel=1e-14)


def test_duplicated_ensemble_entries_do_not_change_objective():
    r, th = np.array([8.0, 19.0, 12.0]), np.array([0.1, -0.3, 0.45])
    lay = small_problem(4).layout([-2.0, -0.5, 1.0, 3.0])
    base = evaluate_objective(lay, problem(4, r, th))
    dup = evaluate_objective(lay, problem(4, np.tile(r, 3), np.tile(th, 3)))
    assert dup == pytest.approx(base, rel=1e-14)


def test_weighted_sum_with_unit_range_weight_is_range_objective():
    r, th = grid_ensemble(3, 3)
    lay = small_problem(3).layout([-1.0, 0.2, 2.0])
    a = evaluate_objective(lay, problem(3, r, th, Objective.weighted(1.0, 0.0)))
    b = evaluate_objective(lay, problem(3, r, th, Objective.range()))
    assert a == b


def test_divergent_targets_cost_the_penalty():
    r, th = grid_ensemble(2, 2)
    pr = PlacementProblem(2, 10.0, LAM, LAM / 1.4, ReceiverLayout(1, LAM / 2, 30.0, LAM), BUDGET, r, th)
    assert evaluate_objective(pr.layout([-1.0, 1.0]), pr) == pr.divergent_penalty


@settings(max_examples=300, deadline=None)
@given(m=st.integers(1, 12), length=st.floats(0.1, 20.0), data=st.data())
def test_projection_always_feasible(m, length, data):
    gap = LAM / 2
    if m * gap > length:
        return
    xs = data.draw(st.lists(st.floats(-2 * length, 2 * length), min_size=m, max_size=m))
    p = project_feasible(xs, length, gap)
    assert p.size == m
    assert audit_layout(p, length, gap) == []


@settings(max_examples=100, deadline=None)
@given(m=st.integers(1, 8), data=st.data())
def test_projection_fixes_feasible_centred_layouts(m, data):
    gaps = data.draw(st.lists(st.floats(LAM / 2, 1.0), min_size=m - 1, max_size=m - 1))
    y = np.concatenate([[0.0], np.cumsum(gaps)])
    y -= y.mean()
    p = project_feasible(y, 10.0, LAM / 2)
    assert p == pytest.approx(y, abs=1e-12)


def test_audit_reports_violations():
    assert audit_layout([0.0, 0.001], 10.0, LAM / 2)
    assert audit_layout([-6.0, 6.0], 10.0, LAM / 2)
    assert audit_layout([0.0, 1.0], 10.0, LAM / 2)  # not centred
    assert audit_layout([1.0, -1.0], 10.0, LAM / 2)  # not sorted
    assert audit_layout([-1.0, 1.0], 10.0, LAM / 2) == []


def test_same_seed_is_bit_identical():
    pr = small_problem(3)
    a = optimize_placement(pr, seed=7, restarts=6)
    b = optimize_placement(pr, seed=7, restarts=6)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert (a.objective_value, a.history, a.iterations, a.restarts_used) == (
        b.objective_value, b.history, b.iterations, b.restarts_used)


def test_parallel_restarts_match_serial():
    pr = small_problem(3)
    a = optimize_placement(pr, seed=2, restarts=6, workers=1)
    b = optimize_placement(pr, seed=2, restarts=6, workers=3)
    assert np.array_equal(a.positions, b.positions)
    assert a.objective_value == b.objective_value and a.history == b.history


def test_result_is_audited_and_consistent():
    pr = small_problem(4)
    res = optimize_placement(pr, seed=0, restarts=8)
    assert audit_layout(res.positions, pr.waveguide_length, pr.min_spacing) == []
    assert evaluate_objective(pr.layout(res.positions), pr) == pytest.approx(res.objective_value, rel=1e-12)
    assert res.restarts_used >= 8


def test_restart_monotonicity():
    pr = small_problem(3)
    res = optimize_placement(pr, seed=4, restarts=12)
    assert all(b <= a for a, b in zip(res.history, res.history[1:]))
    few = optimize_placement(pr, seed=4, restarts=3)
    assert res.objective_value <= few.objective_value


def test_single_pa_beats_fine_grid_scan():
    pr = problem(1, [12.0], [0.0])
    res = optimize_placement(pr, seed=0, restarts=32)
    half = pr.waveguide_length / 2
    grid = np.arange(-half, half + 1e-12, LAM / 100)
    scan = min(evaluate_objective(pr.layout(project_feasible([y], pr.waveguide_length, pr.min_spacing)), pr)
               for y in grid)
    assert res.objective_value <= scan + 1e-9 * scan


def test_pair_beats_quarter_wavelength_grid():
    pr = small_problem(2)
    res = optimize_placement(pr, seed=0, restarts=32)
    # every feasible grid pair is a pure gap once re-centred
    step = LAM / 4
    best = math.inf
    for j in range(2, int(pr.waveguide_length / step + 1e-9) + 1):
        gap = j * step
        best = min(best, evaluate_objective(pr.layout([-gap / 2, gap / 2]), pr))
    assert res.objective_value <= best + 1e-9


@pytest.mark.parametrize("m", [2, 4])
def test_optimized_pas_beats_ula(m):
    pr = small_problem(m)
    res = optimize_placement(pr, seed=1, restarts=8)
    ula = evaluate_objective(ula_baseline(m, LAM), pr)
    assert res.objective_value <= ula
