"""Shared fixtures: a few solves small enough to reuse across modules."""

from __future__ import annotations

import pytest

from regime_rkf import GridSpec, PriceSurface, make_model, solve, two_regime_model


@pytest.fixture(scope="session")
def coarse_two_regime():
    """The two-regime benchmark on ``h = 0.05`` with gamma, about a second of work."""
    return solve(two_regime_model(), GridSpec.from_spacing(0.05), with_gamma=True)


@pytest.fixture(scope="session")
def coarse_surface(coarse_two_regime):
    return PriceSurface.from_result(coarse_two_regime)


@pytest.fixture(scope="session")
def single_regime_model():
    return make_model(9.0, 1.0, [0.05], [0.3], [[0.0]])


#: One line per acceptance criterion, repeated in the terminal summary.
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
