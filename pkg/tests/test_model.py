"""Model validation, grid construction and step-control settings."""

from __future__ import annotations

import numpy as np
import pytest

from regime_rkf import (DimensionMismatch, GridSpec, GridTooSmall, InvalidGenerator, InvalidRegime,
                        ModelError, StepControlConfig, four_regime_model, initial_state,
                        make_model, two_regime_model, validate_model)


def test_benchmarks_validate():
    for model in (two_regime_model(), four_regime_model()):
        assert validate_model(model) is model


def test_four_regime_generator_rows_sum_to_zero():
    q = four_regime_model().generator.entries
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-15)
    assert q[0, 1] == pytest.approx(1.0 / 3.0)


def test_generator_is_read_only():
    with pytest.raises(ValueError):
        two_regime_model().generator.entries[0, 0] = 1.0


@pytest.mark.parametrize("generator, kind", [
    ([[-1.0, 2.0], [1.0, -1.0]], InvalidGenerator),
    ([[1.0, -1.0], [1.0, -1.0]], InvalidGenerator),
    ([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]], DimensionMismatch),
    ([[-1.0, 1.0]], DimensionMismatch),
])
def test_bad_generators_are_rejected(generator, kind):
    with pytest.raises(kind):
        validate_model(make_model(9, 1, [0.1, 0.05], [0.8, 0.3], generator))


def test_every_violation_is_reported():
    model = make_model(-1, 0, [0.1, -0.05], [0.0, 0.3], [[-6, 6], [9, -8]])
    with pytest.raises(ModelError) as info:
        validate_model(model)
    fields = {v.field for v in info.value.violations}
    assert {"strike", "maturity", "regimes[0].sigma", "regimes[1].rate", "generator[1]"} <= fields
    assert isinstance(info.value, InvalidRegime)


def test_mismatched_rate_and_sigma_lengths():
    with pytest.raises(DimensionMismatch):
        make_model(9, 1, [0.1, 0.2], [0.3], [[0.0]])


def test_grid_from_spacing():
    g = GridSpec.from_spacing(0.0125)
    assert g.m == 240 and g.h == pytest.approx(0.0125)
    assert g.nodes[-1] == pytest.approx(3.0) and g.interior.size == 239


@pytest.mark.parametrize("build", [lambda: GridSpec(3.0, 7), lambda: GridSpec(0.0, 20),
                                   lambda: GridSpec.from_spacing(0.07)])
def test_bad_grids(build):
    with pytest.raises(GridTooSmall):
        build()


def test_initial_state_sits_on_the_payoff():
    s = initial_state(two_regime_model(), GridSpec(3.0, 20), with_gamma=True)
    assert s.tau == 0.0 and np.all(s.sf == 9.0)
    assert s.u.shape == (2, 19) and not s.u.any() and s.has_gamma


def test_state_copy_is_deep():
    s = initial_state(two_regime_model(), GridSpec(3.0, 20))
    c = s.copy()
    c.u[0, 0] = 1.0
    assert s.u[0, 0] == 0.0 and c.y is None


@pytest.mark.parametrize("kwargs", [dict(tol=0.0), dict(safety=1.0), dict(phi=0.9),
                                    dict(xbar_cells=0), dict(initial_dt=-1.0),
                                    dict(coupling="loose"), dict(gamma_boundary="zero")])
def test_step_control_rejects_bad_settings(kwargs):
    with pytest.raises(ValueError):
        StepControlConfig(**kwargs)


def test_controller_exponents_and_first_step():
    cfg = StepControlConfig()
    assert cfg.exponents == (0.25, 0.2)
    assert StepControlConfig(standard_controller=True).exponents == (0.2, 0.25)
    assert cfg.first_dt(GridSpec(3.0, 60)) == pytest.approx(0.05 ** 2)
    assert StepControlConfig(initial_dt=1e-3).first_dt(GridSpec(3.0, 60)) == 1e-3
