"""Asset-space prices and Greeks from a finished solve, plus table and convergence helpers.

Each regime's solution lives on its own log-moneyness grid ``x = ln(S / s_f)``.
Values between nodes come from cubic Hermite interpolation: prices use the
nodal pair ``(U, W)``, delta uses ``(W, U_xx)`` and gamma uses ``(Y, U_xxx)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import GammaNotComputed
from .hermite import cubic_hermite
from .model import GridSpec, MarketModel, StepControlConfig
from .rkf import SolveResult, solve

#: Order reported when two consecutive errors cannot be compared.
ORDER_UNDEFINED = float("nan")


@dataclass(frozen=True)
class RegimeSlice:
    """Nodal data of one regime on the full grid ``x_0 .. x_m``.

    ``uxx`` and ``uxxx`` are the nodal slopes used to interpolate ``w`` and
    ``y``; ``y`` is ``None`` when gamma was not integrated.
    """

    sf: float
    u: np.ndarray
    w: np.ndarray
    uxx: np.ndarray
    y: Optional[np.ndarray] = None
    uxxx: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PriceSurface:
    """Option value of every regime at one time-to-expiry ``tau``."""

    strike: float
    tau: float
    grid: GridSpec
    regimes: tuple[RegimeSlice, ...]

    @property
    def n_regimes(self) -> int:
        return len(self.regimes)

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([r.sf for r in self.regimes])

    @property
    def has_gamma(self) -> bool:
        return all(r.y is not None for r in self.regimes)

    @classmethod
    def from_result(cls, result: SolveResult) -> "PriceSurface":
        """Build the surface for the final state of ``result``."""
        problem, state = result.problem, result.state
        model, grid = problem.model, problem.grid
        evaluation = problem.speed(state)
        ctx = problem.context(state.sf, evaluation)
        K = model.strike

        def full(interior, left):
            return np.concatenate(([left], interior, [0.0]))

        u_all = np.stack([full(state.u[m], K - state.sf[m]) for m in range(state.n_regimes)])
        w_all = np.stack([full(state.w[m], -state.sf[m]) for m in range(state.n_regimes)])
        d2 = problem.op.second_derivative_full(np.concatenate([u_all, w_all]))
        n = state.n_regimes
        slices = []
        for m in range(n):
            y = uxxx = None
            if state.y is not None:
                y = full(state.y[m], ctx.y0[m])
                uxxx = full(d2[n + m], ctx.uxxx0[m])
            slices.append(RegimeSlice(float(state.sf[m]), u_all[m], w_all[m],
                                      full(d2[m], ctx.uxx0[m]), y, uxxx))
        return cls(K, state.tau, grid, tuple(slices))


def _locate(surface: PriceSurface, m: int, S: float):
    """``(x, j, t)``: log-moneyness, bracketing cell and local coordinate."""
    if not S > 0:
        raise ValueError(f"spot must be positive, got {S}")
    x = math.log(S / surface.regimes[m].sf)
    h = surface.grid.h
    j = min(int(math.floor(x / h)), surface.grid.m - 1)
    return x, j, x / h - j


def price_at(surface: PriceSurface, m: int, S: float) -> float:
    """Option value of regime ``m`` at spot ``S``."""
    x, j, t = _locate(surface, m, S)
    if x <= 0.0:
        return surface.strike - S
    if x >= surface.grid.x_max:
        return 0.0
    r = surface.regimes[m]
    return float(cubic_hermite(r.u[j], r.u[j + 1], r.w[j], r.w[j + 1], surface.grid.h, t))


def w_at(surface: PriceSurface, m: int, S: float) -> float:
    """Delta in log-moneyness, ``dU/dx``; equals ``-S`` in the exercise region."""
    x, j, t = _locate(surface, m, S)
    if x <= 0.0:
        return -S
    if x >= surface.grid.x_max:
        return 0.0
    r = surface.regimes[m]
    return float(cubic_hermite(r.w[j], r.w[j + 1], r.uxx[j], r.uxx[j + 1], surface.grid.h, t))


def y_at(surface: PriceSurface, m: int, S: float) -> float:
    """Second log-moneyness derivative ``d2U/dx2``; equals ``-S`` in the exercise region."""
    r = surface.regimes[m]
    if r.y is None:
        raise GammaNotComputed("solve with with_gamma=True to query gamma")
    x, j, t = _locate(surface, m, S)
    if x <= 0.0:
        return -S
    if x >= surface.grid.x_max:
        return 0.0
    return float(cubic_hermite(r.y[j], r.y[j + 1], r.uxxx[j], r.uxxx[j + 1], surface.grid.h, t))


def delta_at(surface: PriceSurface, m: int, S: float) -> float:
    """``dV/dS = W / S``; exactly ``-1`` where exercise is optimal."""
    if math.log(S / surface.regimes[m].sf) <= 0.0:
        return -1.0
    return w_at(surface, m, S) / S


def gamma_at(surface: PriceSurface, m: int, S: float) -> float:
    """``d2V/dS2 = (Y - W) / S^2``; zero where exercise is optimal.

    Raises
    ------
    GammaNotComputed
        If the surface carries no gamma field.
    """
    if surface.regimes[m].y is None:
        raise GammaNotComputed("solve with with_gamma=True to query gamma")
    if math.log(S / surface.regimes[m].sf) <= 0.0:
        return 0.0
    return (y_at(surface, m, S) - w_at(surface, m, S)) / (S * S)


def table(surface: PriceSurface, spots: Sequence[float]) -> list[tuple[float, ...]]:
    """Rows ``(S, V_1, ..., V_I)`` at full precision."""
    return [(float(S),) + tuple(price_at(surface, m, S) for m in range(surface.n_regimes))
            for S in spots]


def format_table(rows, digits: int = 4) -> str:
    """Fixed-point rendering of :func:`table` rows, one line per spot."""
    return "\n".join("  ".join(f"{v:.{digits}f}" for v in row) for row in rows)


@dataclass(frozen=True)
class ConvergenceReport:
    """Grid-halving study. ``err_*[i]`` compares grid ``i`` with grid ``i - 1``.

    The first entry of every list is NaN because the coarsest grid has no
    predecessor; orders need two errors and so start at index 2.
    """

    hs: tuple[float, ...]
    err_u: tuple[float, ...]
    err_w: tuple[float, ...]
    order_u: tuple[float, ...]
    order_w: tuple[float, ...]


def observed_orders(errors: Sequence[float]) -> tuple[float, ...]:
    """``log2(e[i-1] / e[i])``, NaN where either error is missing or zero."""
    out = [ORDER_UNDEFINED]
    for prev, cur in zip(errors[:-1], errors[1:]):
        ok = prev > 0 and cur > 0 and math.isfinite(prev) and math.isfinite(cur)
        out.append(math.log2(prev / cur) if ok else ORDER_UNDEFINED)
    return tuple(out)


def restricted_error(coarse: np.ndarray, fine: np.ndarray) -> float:
    """Max difference over the coarse nodes; ``fine`` has twice as many cells."""
    return float(np.max(np.abs(fine[..., 1::2] - coarse)))


def xbar_cells_for(h: float, x_max: float = 3.0, preferred: int = 4) -> int:
    """Extrapolation offset in cells, reduced so the samples stay in ``[0, x_max / 2]``.

    The boundary update samples ``Q`` at ``xbar, 2 xbar, 3 xbar``. On a coarse
    grid the preferred offset pushes the last sample toward the far boundary,
    where the quadratic for the boundary speed loses its real root.
    """
    return max(1, min(preferred, int(math.floor(x_max / (6.0 * h) + 1e-9))))


def convergence_study(model: MarketModel, hs: Sequence[float], fixed_k: float = 2.5e-6,
                      t_short: float = 0.2, x_max: float = 3.0,
                      regime: int = 0) -> ConvergenceReport:
    """Spatial convergence of ``u`` and ``w`` under fixed-step RK5.

    ``hs`` must halve at every entry. Each solve runs to ``t_short`` with
    constant step ``fixed_k``; consecutive solutions are compared on the
    coarser grid's interior nodes for regime ``regime``.
    """
    hs = tuple(float(h) for h in hs)
    for a, b in zip(hs[:-1], hs[1:]):
        if not math.isclose(a, 2 * b, rel_tol=1e-9):
            raise ValueError(f"grid sequence must halve: {a} then {b}")
    short = model.with_maturity(t_short)
    fields = []
    for h in hs:
        cfg = StepControlConfig(adaptive=False, initial_dt=fixed_k,
                                xbar_cells=xbar_cells_for(h, x_max))
        res = solve(short, GridSpec.from_spacing(h, x_max), cfg)
        fields.append((res.state.u[regime], res.state.w[regime]))
    err_u, err_w = [float("nan")], [float("nan")]
    for (uc, wc), (uf, wf) in zip(fields[:-1], fields[1:]):
        err_u.append(restricted_error(uc, uf))
        err_w.append(restricted_error(wc, wf))
    return ConvergenceReport(hs, tuple(err_u), tuple(err_w),
                             observed_orders(err_u), observed_orders(err_w))
