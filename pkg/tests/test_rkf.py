"""Cash-Karp tableau, step control and whole-solve invariants."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from regime_rkf import GridSpec, StepControlConfig, make_model, solve, two_regime_model
from regime_rkf.rkf import CASH_KARP, ButcherTableau, embedded_step, propose_step


def test_weights_sum_to_one_and_rows_to_nodes():
    assert sum(CASH_KARP.b5) == 1 and sum(CASH_KARP.b4) == 1
    for c, row in zip(CASH_KARP.c, CASH_KARP.a):
        assert sum(row, Fraction(0)) == c
    bad = ButcherTableau(CASH_KARP.c, CASH_KARP.a, CASH_KARP.b5[:-1] + (Fraction(0),),
                         CASH_KARP.b4)
    with pytest.raises(ValueError):
        bad.check()


def _local_error(k: float) -> tuple[float, float]:
    f = lambda t, y: y * math.cos(t)  # noqa: E731
    exact = math.exp(math.sin(0.3 + k) - math.sin(0.3))
    y5, y4 = embedded_step(f, np.array([1.0]), 0.3, k)
    return abs(y5[0] - exact), abs(y5[0] - y4[0])


def test_scalar_local_order_five():
    ks = (0.2, 0.1, 0.05)
    errs = [_local_error(k) for k in ks]
    orders = [math.log2(a[0] / b[0]) for a, b in zip(errs[:-1], errs[1:])]
    estimates = [math.log2(a[1] / b[1]) for a, b in zip(errs[:-1], errs[1:])]
    assert min(orders) > 5.5   # local error O(k^6)
    assert min(estimates) > 4.5  # embedded estimate O(k^5)


def test_step_proposal_is_capped():
    cfg = StepControlConfig()
    assert propose_step(0.0, True, 1e-3, cfg) == pytest.approx(5e-3)
    assert propose_step(1e-20, True, 1e-3, cfg) == pytest.approx(5e-3)
    assert propose_step(1.0, False, 1e-3, cfg) == pytest.approx(1e-4)
    assert propose_step(1e-6, False, 1e-3, cfg) < 1e-3


def test_accepted_steps_meet_the_tolerance(coarse_two_regime):
    res = coarse_two_regime
    assert res.accepted_steps
    assert all(r.e_u < res.problem.cfg.tol for r in res.accepted_steps)
    assert any(not r.accepted for r in res.steps)


def test_accepted_steps_sum_to_maturity(coarse_two_regime):
    res = coarse_two_regime
    assert math.fsum(r.k_used for r in res.accepted_steps) == pytest.approx(1.0, abs=1e-12)
    assert res.state.tau == 1.0


def test_boundary_starts_at_strike_and_never_rises(coarse_two_regime):
    taus = np.array([t for t, _ in coarse_two_regime.trajectory])
    sf = np.array([s for _, s in coarse_two_regime.trajectory])
    assert taus[0] == 0.0 and np.all(sf[0] == 9.0)
    assert np.all(np.diff(taus) > 0)
    assert np.all(np.diff(sf, axis=0) <= 0.0)
    assert np.all(sf[-1] > 3.0)


def test_identical_regimes_collapse_to_one():
    grid = GridSpec.from_spacing(0.05)
    fixed = StepControlConfig(adaptive=False, initial_dt=1e-3)
    one = solve(make_model(9, 1, [0.1], [0.8], [[0.0]]), grid, fixed)
    two = solve(make_model(9, 1, [0.1, 0.1], [0.8, 0.8], [[-6, 6], [9, -9]]), grid, fixed)
    for a, b in ((one.state.u, two.state.u), (one.state.w, two.state.w),
                 (one.state.sf, two.state.sf)):
        assert np.max(np.abs(b - a)) <= 1e-8


def test_schedule_replay_reproduces_an_adaptive_run():
    model, grid = two_regime_model().with_maturity(0.1), GridSpec.from_spacing(0.1)
    adaptive = solve(model, grid)
    replay = solve(model, grid, schedule=[r.k_used for r in adaptive.accepted_steps])
    np.testing.assert_array_equal(replay.state.u, adaptive.state.u)
    assert all(r.accepted for r in replay.steps)


def test_partial_horizon_and_fixed_steps():
    model, grid = two_regime_model(), GridSpec.from_spacing(0.1)
    res = solve(model, grid, StepControlConfig(adaptive=False, initial_dt=1e-3), t_end=0.0105)
    assert res.state.tau == pytest.approx(0.0105)
    ks = [r.k_used for r in res.accepted_steps]
    assert ks[:10] == [1e-3] * 10 and ks[-1] == pytest.approx(5e-4)


def test_gamma_is_integrated_on_request(coarse_two_regime):
    assert coarse_two_regime.state.has_gamma
    res = solve(two_regime_model().with_maturity(0.05), GridSpec.from_spacing(0.1))
    assert not res.state.has_gamma


def test_stage_coupling_stays_close_to_joint():
    # the stage splitting freezes the fields inside the boundary stages, so it
    # agrees with the joint integration only to the splitting error
    model, grid = two_regime_model().with_maturity(0.05), GridSpec.from_spacing(0.1)
    joint = solve(model, grid)
    stage = solve(model, grid, StepControlConfig(coupling="stage"))
    np.testing.assert_allclose(stage.state.sf, joint.state.sf, rtol=1e-2)


def test_extrapolation_offset_must_fit_the_grid():
    with pytest.raises(ValueError):
        solve(two_regime_model(), GridSpec(0.5, 10), StepControlConfig(xbar_cells=4))
