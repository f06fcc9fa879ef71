"""Reference pricers that share no code path with the transformed solver.

``psor_price`` works directly in the asset price on a uniform grid. Each time
level is fully implicit in ``S``, with every switching term taken from the
previous level, so identical regimes stay identical to round-off. The linear
complementarity problem is solved by projected SOR, or by policy iteration
with a direct tridiagonal solve, which reaches the same discrete solution in a
handful of iterations. ``binomial_put`` is a
Cox-Ross-Rubinstein tree for a single regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import NoConvergence
from .model import MarketModel, validate_model


@dataclass(frozen=True)
class PsorConfig:
    """Grid, time stepping and relaxation settings for :func:`psor_price`.

    ``s_max=None`` places the far boundary at four strikes. ``method`` picks
    the complementarity solver: ``"psor"`` (projected SOR, sweep count grows
    with the node count on stiff grids) or ``"policy"`` (policy iteration).
    """

    s_max: float | None = None
    nodes: int = 1201
    steps: int = 4000
    omega: float = 1.5
    tol: float = 1e-10
    max_sweeps: int = 10_000
    method: str = "policy"

    def __post_init__(self):
        if self.method not in ("psor", "policy"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if self.nodes < 5 or self.steps < 1:
            raise ValueError("need at least 5 nodes and 1 time step")
        if self.nodes > 2001 or self.steps > 20_000:
            raise ValueError("oracle sizes are capped at 2001 nodes and 20000 steps")


@dataclass(frozen=True)
class PsorResult:
    spots: np.ndarray
    prices: np.ndarray        # (I, len(spots))
    boundary: np.ndarray      # (I,)
    grid: np.ndarray
    values: np.ndarray        # (I, nodes), values on the grid at expiry horizon
    sweeps: int               # total sweeps (psor) or policy iterations over all levels


def _operator_bands(model: MarketModel, S: np.ndarray, dt: float):
    """Sub-, main and super-diagonal of ``I - dt L_m`` for every regime, interior nodes.

    ``L_m`` is the Black-Scholes operator of regime ``m`` without the switching terms.
    """
    dS = S[1] - S[0]
    r = model.rates[:, None]
    sig2 = model.sigmas[:, None] ** 2
    Si = S[None, 1:-1]
    diff = 0.5 * sig2 * Si ** 2 / dS ** 2
    conv = 0.5 * r * Si / dS
    lower = -dt * (diff - conv)
    upper = -dt * (diff + conv)
    main = 1.0 + dt * (2.0 * diff + r)
    return lower, main, upper


def psor_price(model: MarketModel, cfg: PsorConfig = PsorConfig(),
               spots: Sequence[float] = ()) -> PsorResult:
    """American put prices for every regime by projected SOR.

    Raises
    ------
    NoConvergence
        If a time level needs more than ``cfg.max_sweeps`` sweeps.
    """
    validate_model(model)
    K, T = model.strike, model.maturity
    s_max = 4.0 * K if cfg.s_max is None else cfg.s_max
    S = np.linspace(0.0, s_max, cfg.nodes)
    dt = T / cfg.steps
    payoff = np.maximum(K - S, 0.0)
    n = model.n_regimes
    q = model.generator.entries
    lower, main, upper = _operator_bands(model, S, dt)

    V = np.tile(payoff, (n, 1))
    solver = _psor_level if cfg.method == "psor" else _policy_level
    total = 0
    for level in range(cfg.steps):
        rhs = V[:, 1:-1] + dt * (q @ V)[:, 1:-1]
        X = V.copy()
        X[:, 0], X[:, -1] = K, 0.0
        try:
            total += solver(X, rhs, lower, main, upper, payoff[1:-1], cfg)
        except NoConvergence as exc:
            raise NoConvergence(f"time level {level}: {exc}") from None
        V = X

    spots = np.asarray(spots, dtype=float)
    prices = np.array([np.interp(spots, S, V[m]) for m in range(n)]) if spots.size \
        else np.empty((n, 0))
    boundary = np.empty(n)
    for m in range(n):
        exercised = np.nonzero(V[m] <= payoff + 1e-9 * K)[0]
        exercised = exercised[S[exercised] < K]
        boundary[m] = S[exercised.max()] if exercised.size else 0.0
    return PsorResult(spots, prices, boundary, S, V, total)


def _psor_level(X, rhs, lower, main, upper, floor, cfg: PsorConfig) -> int:
    """Red-black projected SOR on all regimes at once, updating ``X`` in place."""
    red = np.arange(1, X.shape[1] - 1) % 2 == 1
    for sweep in range(1, cfg.max_sweeps + 1):
        change = 0.0
        for mask in (red, ~red):
            inner = X[:, 1:-1]
            gs = (rhs - lower * X[:, :-2] - upper * X[:, 2:]) / main
            new = np.maximum(inner + cfg.omega * (gs - inner), floor)
            step = np.where(mask, new - inner, 0.0)
            change = max(change, float(np.max(np.abs(step))))
            inner += step
        if change < cfg.tol:
            return sweep
    raise NoConvergence(f"PSOR still moving after {cfg.max_sweeps} sweeps")


def _policy_level(X, rhs, lower, main, upper, floor, cfg: PsorConfig) -> int:
    """Howard policy iteration per regime, updating ``X`` in place."""
    iterations = 0
    n_in = X.shape[1] - 2
    for m in range(X.shape[0]):
        b = rhs[m].copy()
        b[0] -= lower[m, 0] * X[m, 0]
        b[-1] -= upper[m, -1] * X[m, -1]
        x = X[m, 1:-1]
        active = x <= floor
        for it in range(1, cfg.max_sweeps + 1):
            ab = np.zeros((3, n_in))
            ab[0, 1:] = np.where(active[:-1], 0.0, upper[m, :-1])
            ab[1] = np.where(active, 1.0, main[m])
            ab[2, :-1] = np.where(active[1:], 0.0, lower[m, 1:])
            x = solve_banded((1, 1), ab, np.where(active, floor, b))
            residual = main[m] * x - b
            residual[1:] += lower[m, 1:] * x[:-1]
            residual[:-1] += upper[m, :-1] * x[1:]
            new_active = x - floor < residual
            if np.array_equal(new_active, active):
                break
            active = new_active
        else:
            raise NoConvergence(f"policy iteration did not settle in {cfg.max_sweeps} passes")
        iterations += it
        X[m, 1:-1] = x
    return iterations


def binomial_put(strike: float, maturity: float, rate: float, sigma: float, spot: float,
                 steps: int = 10_000) -> float:
    """American put on a Cox-Ross-Rubinstein tree."""
    dt = maturity / steps
    up = math.exp(sigma * math.sqrt(dt))
    down = 1.0 / up
    disc = math.exp(-rate * dt)
    p = (math.exp(rate * dt) - down) / (up - down)
    j = np.arange(steps + 1)
    prices = spot * up ** (steps - 2 * j)
    value = np.maximum(strike - prices, 0.0)
    for level in range(steps - 1, -1, -1):
        prices = prices[:-1] * down
        cont = disc * (p * value[:-1] + (1.0 - p) * value[1:])
        value = np.maximum(cont, strike - prices)
    return float(value[0])
