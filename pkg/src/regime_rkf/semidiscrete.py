"""Right-hand sides of the method-of-lines system for value, delta and gamma.

For regime ``m`` on the interior nodes::

    du/dt = s2 D2u + xi w   - (r - q_mm) u + sum_l q_ml u~_l
    dw/dt = s2 D2w + xi D2u - (r - q_mm) w + sum_l q_ml w~_l
    dy/dt = s2 D2y + xi D2w - (r - q_mm) y + sum_l q_ml y~_l

with ``s2 = sigma^2 / 2``, ``D2`` the compact second derivative and ``~``
marking a foreign field resampled onto regime ``m``'s nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compact_fd import CompactOperator
from .freeboundary import BoundaryEvaluation
from .hermite import cubic_hermite
from .model import GridSpec, MarketModel, SolverState


@dataclass(frozen=True)
class RhsContext:
    """Boundary data held fixed while the field right-hand side is evaluated.

    ``shifts[m, l] = ln(s_f(m) / s_f(l))`` maps regime-``m`` nodes into
    regime ``l``'s coordinate. ``pairs`` lists the ``(m, l)`` with
    ``q_ml != 0``.
    """

    sf: np.ndarray
    slopes: np.ndarray
    xi: np.ndarray
    u0: np.ndarray
    w0: np.ndarray
    y0: np.ndarray
    uxx0: np.ndarray
    uxxx0: np.ndarray
    shifts: np.ndarray
    pairs: tuple[np.ndarray, np.ndarray]


def coupled_pairs(model: MarketModel) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays ``(m, l)`` of the nonzero off-diagonal generator entries."""
    q = model.generator.entries
    return np.nonzero((q != 0.0) & ~np.eye(q.shape[0], dtype=bool))


def build_context(sf: np.ndarray, model: MarketModel, boundary: BoundaryEvaluation,
                  gamma_boundary: str = "consistent", pairs=None) -> RhsContext:
    """Freeze ``xi``, the Dirichlet data and the inter-regime shifts for boundary ``sf``.

    ``boundary`` must be the evaluation at the same ``sf``; its ``Q'(0)`` and
    ``Q''(0)`` give the exact second and third derivatives at ``x = 0``, used
    as nodal slopes when resampling delta and gamma.
    """
    sf = np.asarray(sf, dtype=float)
    rates, sigmas = model.rates, model.sigmas
    xi = rates - 0.5 * sigmas ** 2 + boundary.slopes / sf
    uxx0 = boundary.uxx0(sf)
    y0 = uxx0 if gamma_boundary == "consistent" else -sf
    logs = np.log(sf)
    return RhsContext(
        sf=sf,
        slopes=np.asarray(boundary.slopes, dtype=float),
        xi=xi,
        u0=model.strike - sf,
        w0=-sf,
        y0=np.asarray(y0, dtype=float),
        uxx0=uxx0,
        uxxx0=boundary.uxxx0(sf),
        shifts=logs[:, None] - logs[None, :],
        pairs=coupled_pairs(model) if pairs is None else pairs,
    )


def _pad(field: np.ndarray, left: np.ndarray) -> np.ndarray:
    full = np.zeros((field.shape[0], field.shape[1] + 2))
    full[:, 1:-1] = field
    full[:, 0] = left
    return full


def resample_pairs(ctx: RhsContext, strike: float, grid: GridSpec, values: np.ndarray,
                   slopes: np.ndarray, value_rows: int = 1) -> np.ndarray:
    """Resample foreign fields for every coupled pair in ``ctx.pairs``.

    ``values`` and ``slopes`` are ``(F, I, m + 1)`` nodal arrays for ``F``
    stacked fields; the first ``value_rows`` are option values (payoff
    closure ``K - e^x s_f``), the rest derivatives (closure ``-e^x s_f``).
    Returns ``(F, P, m + 1)``: field ``f`` of regime ``l`` sampled at the
    nodes of regime ``m`` for pair ``p = (m, l)``.

    This is :func:`regime_rkf.hermite.cubic_shift_resample` applied to all
    pairs at once.
    """
    pm, pl = ctx.pairs
    h, M = grid.h, grid.m
    out = np.zeros((values.shape[0], pm.size, M + 1))
    for p, (m, l) in enumerate(zip(pm.tolist(), pl.tolist())):
        cells = ctx.shifts[m, l] / h
        base = math.floor(cells)
        frac = cells - base
        if frac > 1.0 - 1e-13:  # snap roundoff to the next node
            base, frac = base + 1, 0.0
        # node i reads cell i + base; cells at or past M give the far-field zero
        lo, hi = max(0, -base), min(M + 1, M - base)
        if hi > lo:
            a, b = lo + base, hi + base
            out[:, p, lo:hi] = cubic_hermite(values[:, l, a:b], values[:, l, a + 1:b + 1],
                                             slopes[:, l, a:b], slopes[:, l, a + 1:b + 1], h, frac)
        if lo > 0:
            e = np.exp((np.arange(min(lo, M + 1)) + base + frac) * h) * ctx.sf[l]
            out[:, p, :lo] = -e
            out[:value_rows, p, :lo] += strike
    return out


def rhs(fields: SolverState, ctx: RhsContext, op: CompactOperator, model: MarketModel,
        grid: GridSpec, coupling_scale: float = 1.0):
    """Time derivatives ``(du, dw, dy)`` of the interior fields.

    ``fields`` supplies ``u``, ``w`` and optionally ``y``; its boundary is
    ignored in favour of ``ctx``. ``coupling_scale`` multiplies the
    off-diagonal generator terms (1 for the model as given).
    """
    n = ctx.sf.shape[0]
    with_gamma = fields.y is not None
    U = _pad(fields.u, ctx.u0)
    W = _pad(fields.w, ctx.w0)
    blocks = [U, W] + ([_pad(fields.y, ctx.y0)] if with_gamma else [])
    d2 = op.second_derivative_full(np.concatenate(blocks, axis=0))
    d2u, d2w = d2[:n], d2[n:2 * n]
    d2y = d2[2 * n:] if with_gamma else None

    q = model.generator.entries
    half_var = 0.5 * model.sigmas ** 2
    decay = model.rates - np.diag(q)
    du = half_var[:, None] * d2u + ctx.xi[:, None] * fields.w - decay[:, None] * fields.u
    dw = half_var[:, None] * d2w + ctx.xi[:, None] * d2u - decay[:, None] * fields.w
    dy = None
    if with_gamma:
        dy = half_var[:, None] * d2y + ctx.xi[:, None] * d2w - decay[:, None] * fields.y

    pm, pl = ctx.pairs
    if pm.size:
        # nodal slopes: d/dx u = w, d/dx w = u_xx, d/dx y = u_xxx
        vals = np.stack(blocks)
        slps = [W, _pad(d2u, ctx.uxx0)] + ([_pad(d2w, ctx.uxxx0)] if with_gamma else [])
        res = resample_pairs(ctx, model.strike, grid, vals, np.stack(slps))
        weight = np.zeros((n, pm.size))
        weight[pm, np.arange(pm.size)] = coupling_scale * q[pm, pl]
        coupled = np.einsum("mp,fpi->fmi", weight, res[:, :, 1:-1])
        du += coupled[0]
        dw += coupled[1]
        if with_gamma:
            dy += coupled[2]
    return du, dw, dy

