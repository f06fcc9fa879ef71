"""Asset-space queries on a solved surface and the convergence helpers."""

from __future__ import annotations

import math

import numpy as np
import pytest

from regime_rkf import (GammaNotComputed, GridSpec, PriceSurface, delta_at, gamma_at, price_at,
                        solve, table, two_regime_model)
from regime_rkf.pricing import (convergence_study, format_table, observed_orders, restricted_error,
                                w_at, xbar_cells_for)

SWEEP = np.linspace(2.0, 30.0, 400)


def test_price_dominates_payoff_and_falls_with_spot(coarse_surface):
    for m in range(2):
        prices = np.array([price_at(coarse_surface, m, s) for s in SWEEP])
        assert np.all(prices >= np.maximum(9.0 - SWEEP, 0.0) - 1e-12)
        assert np.all(np.diff(prices) <= 1e-12)


def test_price_is_continuous_at_the_boundary(coarse_surface):
    for m, sf in enumerate(coarse_surface.boundaries):
        left = price_at(coarse_surface, m, sf * (1 - 1e-10))
        right = price_at(coarse_surface, m, sf * (1 + 1e-10))
        assert abs(left - right) <= 1e-8 * 9.0


def test_delta_pastes_smoothly(coarse_surface):
    for m, sf in enumerate(coarse_surface.boundaries):
        assert delta_at(coarse_surface, m, sf * (1 - 1e-9)) == -1.0
        assert delta_at(coarse_surface, m, sf * (1 + 1e-9)) == pytest.approx(-1.0, abs=1e-4)
        assert w_at(coarse_surface, m, sf * 0.9) == pytest.approx(-sf * 0.9)


def test_delta_matches_finite_differences(coarse_surface):
    for S in (6.0, 9.0, 12.0):
        d = 1e-4 * S
        fd = (price_at(coarse_surface, 1, S + d) - price_at(coarse_surface, 1, S - d)) / (2 * d)
        assert delta_at(coarse_surface, 1, S) == pytest.approx(fd, abs=1e-4)


def test_gamma_is_convex_and_vanishes_in_exercise_region(coarse_surface):
    for m, sf in enumerate(coarse_surface.boundaries):
        assert gamma_at(coarse_surface, m, sf * 0.8) == 0.0
        gam = [gamma_at(coarse_surface, m, s) for s in SWEEP if s > sf]
        assert min(gam) > -1e-6


def test_volatile_regime_is_worth_more(coarse_surface):
    rows = table(coarse_surface, (6.0, 9.0, 12.0))
    assert all(row[1] > row[2] for row in rows)


def test_far_field_and_bad_spot(coarse_surface):
    assert price_at(coarse_surface, 0, 1e6) == 0.0
    with pytest.raises(ValueError):
        price_at(coarse_surface, 0, 0.0)


def test_gamma_needs_the_gamma_field():
    res = solve(two_regime_model().with_maturity(0.02), GridSpec.from_spacing(0.1))
    surface = PriceSurface.from_result(res)
    assert not surface.has_gamma
    with pytest.raises(GammaNotComputed):
        gamma_at(surface, 0, 9.0)


def test_table_formatting(coarse_surface):
    rows = table(coarse_surface, (3.5, 9.0))
    assert rows[0] == (3.5, 5.5, 5.5)
    text = format_table(rows, digits=3)
    assert text.splitlines()[0] == "3.500  5.500  5.500"


def test_observed_orders_and_missing_values():
    orders = observed_orders([float("nan"), 1.6e-3, 1e-4, 0.0, 1e-6])
    assert math.isnan(orders[0]) and math.isnan(orders[1])
    assert orders[2] == pytest.approx(4.0)
    assert math.isnan(orders[3]) and math.isnan(orders[4])


def test_restricted_error_uses_coarse_nodes():
    coarse = np.array([1.0, 2.0, 3.0])
    fine = np.array([9.0, 1.0, 9.0, 2.5, 9.0, 3.0, 9.0])
    assert restricted_error(coarse, fine) == 0.5


def test_extrapolation_offset_rule():
    assert [xbar_cells_for(h) for h in (0.2, 0.1, 0.05, 0.025, 0.0125)] == [2, 4, 4, 4, 4]
    assert xbar_cells_for(0.5) == 1 and xbar_cells_for(0.1, x_max=1.0) == 1


def test_convergence_study_shape_and_validation():
    model = two_regime_model()
    with pytest.raises(ValueError):
        convergence_study(model, (0.1, 0.04))
    report = convergence_study(model, (0.1, 0.05), fixed_k=1e-4, t_short=0.002)
    assert report.hs == (0.1, 0.05)
    assert math.isnan(report.err_u[0]) and report.err_u[1] > 0
    assert all(math.isnan(o) for o in report.order_u)
