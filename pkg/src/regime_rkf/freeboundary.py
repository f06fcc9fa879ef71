"""Speed of the optimal exercise boundary in each regime.

Near the boundary the option value is written as
``U = Q^2 + K - e^x s_f`` with ``Q(0) = 0``. Evaluating the PDE and its
``x``-derivative at ``x = 0`` yields ``Q'(0)``, ``Q''(0)`` and ``Q'''(0)`` in
terms of the boundary speed ``s_f'``; matching them against grid values of
``Q`` at ``xbar, 2 xbar, 3 xbar`` through an extrapolated Taylor identity
closes a quadratic equation for ``s_f'``.

The foreign-regime values ``U_l, U_l', U_l''`` at the point ``S = s_f(m)``
enter every derivative and come from a quintic Hermite fit of regime ``l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import ComplexRoot, DegenerateSqrtArgument, NegativeRadicand
from .hermite import quintic_fit, quintic_eval012
from .model import GridSpec, MarketModel, SolverState

DEGENERACY_FLOOR = 1e-12


@dataclass(frozen=True)
class ExtrapolationWeights:
    """Weights of ``a1 Q(x) + a2 Q(2x) + a3 Q(3x) = b1 x Q'(0) + b2 x^2 Q''(0) + b3 x^3 Q'''(0) + O(x^6)``.

    Valid when ``Q(0) = 0``, so the weight on ``Q(0)`` never enters.
    """

    xbar: float
    a: tuple[Fraction, Fraction, Fraction] = (Fraction(81), Fraction(-81, 8), Fraction(1))
    b: tuple[Fraction, Fraction, Fraction] = (Fraction(255, 4), Fraction(99, 4), Fraction(9, 2))

    @classmethod
    def for_grid(cls, grid: GridSpec, xbar_cells: int = 4) -> "ExtrapolationWeights":
        return cls(xbar_cells * grid.h)

    def moment(self, k: int) -> Fraction:
        """``sum_j a_j j^k / k!``; equals ``b_k`` for ``k = 1..3`` and 0 for ``k = 4, 5``."""
        return sum((aj * Fraction(j) ** k for j, aj in enumerate(self.a, start=1)),
                   Fraction(0)) / math.factorial(k)

    @cached_property
    def a_float(self) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.a)

    @cached_property
    def b_float(self) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.b)

    def lhs(self, q_at) -> float:
        """``sum_j a_j q_at(j)``, where ``q_at(j)`` is ``Q(j xbar)``."""
        return sum(float(aj) * q_at(j) for j, aj in enumerate(self.a, start=1))

    def rhs(self, d1: float, d2: float, d3: float) -> float:
        x = self.xbar
        b1, b2, b3 = (float(v) for v in self.b)
        return b1 * x * d1 + b2 * x * x * d2 + b3 * x ** 3 * d3


@dataclass(frozen=True)
class BoundaryCoupling:
    """Foreign-regime data at ``S = s_f(m)``; entry ``m`` itself is unused (NaN)."""

    regime: int
    x: np.ndarray
    value: np.ndarray
    slope: np.ndarray
    curvature: np.ndarray

    def weighted(self, q_row: np.ndarray) -> tuple[float, float, float]:
        """``sum_{l != m} q_ml * (U_l, U_l', U_l'')``."""
        mask = np.arange(len(q_row)) != self.regime
        q = q_row[mask]
        return (float(q @ self.value[mask]), float(q @ self.slope[mask]),
                float(q @ self.curvature[mask]))


@dataclass(frozen=True)
class QuadraticCoeffs:
    qa: float
    qb: float
    qc: float

    @property
    def discriminant(self) -> float:
        return self.qb * self.qb - 4.0 * self.qa * self.qc


#: Log-distance below which a foreign point counts as on its boundary.
BOUNDARY_SNAP = 1e-12


def _node_value(row, i: int, boundary: float) -> float:
    if i == 0:
        return boundary
    if i > len(row):
        return 0.0
    return float(row[i - 1])


def foreign_values(x: float, sl: float, u_row, w_row, K: float, grid: GridSpec,
                   stencil: str = "floor",
                   edge_curvature: Optional[float] = None) -> tuple[float, float, float]:
    """Value, slope and curvature of a regime with boundary ``sl`` at its coordinate ``x``.

    Left of the boundary the payoff closure applies. The curvature jumps at
    the boundary itself, so points within ``BOUNDARY_SNAP`` of it take
    ``edge_curvature``, the limit from the continuation side (``2 Q'(0)^2 - s``
    for that regime); without it they fall back to the payoff curvature.
    """
    if x <= BOUNDARY_SNAP:
        e = math.exp(x) * sl
        if x >= -BOUNDARY_SNAP and edge_curvature is not None:
            return K - e, -e, edge_curvature
        return K - e, -e, -e
    if x >= grid.x_max:
        return 0.0, 0.0, 0.0
    h, M = grid.h, grid.m
    if stencil == "floor":
        j = int(x / h)
    else:
        j = int(math.floor(x / h + 0.5)) - 1
    j = min(max(j, 0), M - 2)
    uu = [_node_value(u_row, i, K - sl) for i in (j, j + 1, j + 2)]
    ww = [_node_value(w_row, i, -sl) for i in (j, j + 1, j + 2)]
    return quintic_eval012(quintic_fit(j * h, h, uu, ww), x)


def _value_couplings(state: SolverState, model: MarketModel, grid: GridSpec,
                     stencil: str) -> list[float]:
    """``sum_{l != m} q_ml U_l`` at ``x_m = 0`` for every regime ``m``."""
    n = state.n_regimes
    K = model.strike
    q = model.generator.entries.tolist()
    sf = state.sf.tolist()
    out = []
    for m in range(n):
        c0 = 0.0
        for l in range(n):
            if l != m and q[m][l] != 0.0:
                x = math.log(sf[m] / sf[l])
                if x <= BOUNDARY_SNAP:
                    c0 += q[m][l] * (K - math.exp(x) * sf[l])
                elif x < grid.x_max:
                    c0 += q[m][l] * foreign_values(x, sf[l], state.u[l], state.w[l], K,
                                                   grid, stencil)[0]
        out.append(c0)
    return out


def boundary_q_primes(state: SolverState, model: MarketModel, grid: GridSpec,
                      stencil: str = "floor") -> np.ndarray:
    """``Q'(0)`` of every regime; these need only foreign values, not curvatures."""
    K = model.strike
    c0 = _value_couplings(state, model, grid, stencil)
    return np.array([_q_prime(K, reg.rate, reg.sigma, float(model.generator[m, m]),
                              float(state.sf[m]), c0[m], state.tau, m)
                     for m, reg in enumerate(model.regimes)])


def boundary_coupling(m: int, state: SolverState, model: MarketModel, grid: GridSpec,
                      stencil: str = "floor",
                      q_primes: Optional[np.ndarray] = None) -> BoundaryCoupling:
    """Evaluate every foreign regime ``l`` at ``x_l = ln(s_f(m) / s_f(l))``.

    Left of the foreign boundary the payoff closure is exact; beyond the far
    boundary everything is zero; in between a quintic Hermite fit over three
    nodes of regime ``l`` supplies value, slope and curvature.
    """
    n = state.n_regimes
    if q_primes is None:
        q_primes = boundary_q_primes(state, model, grid, stencil)
    out = np.full((4, n), np.nan)
    sm = float(state.sf[m])
    for l in range(n):
        if l == m:
            continue
        sl = float(state.sf[l])
        x = math.log(sm / sl)
        out[0, l] = x
        out[1:, l] = foreign_values(x, sl, state.u[l], state.w[l], model.strike, grid, stencil,
                                    2.0 * q_primes[l] ** 2 - sl)
    return BoundaryCoupling(m, *out)


def _q_prime(K, rate, sigma, qmm, s, c0, tau=float("nan"), m=-1) -> float:
    arg = (rate - qmm) * K + qmm * s - c0
    if not arg >= DEGENERACY_FLOOR * K:
        raise DegenerateSqrtArgument(
            f"regime {m}: radicand {arg:.3e} of Q'(0) below floor at tau={tau:.6g}")
    return math.sqrt(arg) / sigma


def q_prime0(m: int, state: SolverState, coupling: BoundaryCoupling, model: MarketModel) -> float:
    """``Q'(0)`` from the value equation at the boundary; independent of ``s_f'``."""
    reg = model.regimes[m]
    c0, _, _ = coupling.weighted(model.generator[m])
    return _q_prime(model.strike, reg.rate, reg.sigma, float(model.generator[m, m]),
                    float(state.sf[m]), c0, state.tau, m)


def _q_samples(m: int, state: SolverState, model: MarketModel, grid: GridSpec,
               xbar_cells: int) -> tuple[float, float, float]:
    K = model.strike
    s = float(state.sf[m])
    h = grid.h
    out = []
    for j in (1, 2, 3):
        i = j * xbar_cells
        u = float(state.u[m, i - 1]) if i < grid.m else 0.0
        rad = u - K + math.exp(i * h) * s
        if rad < 0.0:
            raise NegativeRadicand(
                f"regime {m}: Q^2 = {rad:.3e} < 0 at node {i}, tau={state.tau:.6g}")
        out.append(math.sqrt(rad))
    return tuple(out)


def _derivative_polys(rate, sigma, qmm, s, c1, c2, qp):
    sig2 = sigma * sigma
    d1 = qmm * s - c1
    d2 = qmm * s - c2
    q2 = (d1 / (3.0 * sig2 * qp), -2.0 * qp / (3.0 * sig2))
    q3 = (-d1 * d1 / (12.0 * sig2 * sig2 * qp ** 3)
          + (rate - qmm) * qp / (2.0 * sig2)
          + d2 / (4.0 * sig2 * qp),
          -d1 / (6.0 * sig2 * sig2 * qp),
          2.0 * qp / (3.0 * sig2 * sig2))
    return q2, q3


def derivative_polynomials(m: int, state: SolverState, coupling: BoundaryCoupling,
                           model: MarketModel, qp: float):
    """Coefficients of ``Q''(0)`` and ``Q'''(0)`` as polynomials in ``xi``.

    ``xi = r - sigma^2/2 + s_f'/s_f``. Returns ``(c2, c3)`` with
    ``Q'' = c2[0] + c2[1] xi`` and ``Q''' = c3[0] + c3[1] xi + c3[2] xi^2``.
    """
    reg = model.regimes[m]
    _, c1, c2 = coupling.weighted(model.generator[m])
    return _derivative_polys(reg.rate, reg.sigma, float(model.generator[m, m]),
                             float(state.sf[m]), c1, c2, qp)


def _quadratic(rate, sigma, s, qp, q2, q3, samples, weights: ExtrapolationWeights):
    v = rate - 0.5 * sigma * sigma
    b1, b2, b3 = weights.b_float
    a1, a2, a3 = weights.a_float
    x = weights.xbar
    # identity as a polynomial in xi: k2 xi^2 + k1 xi + k0 = lhs
    k2 = b3 * x ** 3 * q3[2]
    k1 = b2 * x * x * q2[1] + b3 * x ** 3 * q3[1]
    k0 = b1 * x * qp + b2 * x * x * q2[0] + b3 * x ** 3 * q3[0]
    lhs = a1 * samples[0] + a2 * samples[1] + a3 * samples[2]
    # substitute xi = v + p / s
    return QuadraticCoeffs(k2 / (s * s), (2.0 * v * k2 + k1) / s, k2 * v * v + k1 * v + k0 - lhs)


def quadratic_coeffs(m: int, state: SolverState, coupling: BoundaryCoupling, model: MarketModel,
                     grid: GridSpec, weights: ExtrapolationWeights, xbar_cells: int = 4,
                     qp: float | None = None) -> QuadraticCoeffs:
    """Collect the extrapolated Taylor identity into ``qa s'^2 + qb s' + qc = 0``.

    ``Q'(0)``, ``Q''(0)`` and ``Q'''(0)`` are substituted as functions of
    ``xi = r - sigma^2/2 + s'/s_f``; the left side uses grid samples
    ``Q(j xbar) = sqrt(u - K + e^{j xbar} s_f)``.
    """
    if qp is None:
        qp = q_prime0(m, state, coupling, model)
    reg = model.regimes[m]
    q2, q3 = derivative_polynomials(m, state, coupling, model, qp)
    samples = _q_samples(m, state, model, grid, xbar_cells)
    return _quadratic(reg.rate, reg.sigma, float(state.sf[m]), qp, q2, q3, samples, weights)


def boundary_slope(coeffs: QuadraticCoeffs) -> float:
    """Smaller-``xi`` root of the boundary quadratic (the put boundary falls with ``tau``)."""
    qa, qb, qc = coeffs.qa, coeffs.qb, coeffs.qc
    disc = coeffs.discriminant
    if not disc >= 0.0:
        raise ComplexRoot(f"discriminant {disc:.3e} < 0")
    root = math.sqrt(disc)
    if qb >= 0.0:
        return (-qb - root) / (2.0 * qa)
    return 2.0 * qc / (root - qb)


@dataclass(frozen=True)
class BoundaryEvaluation:
    """Per-regime boundary speed with ``Q'(0)`` and ``Q''(0)`` at that speed."""

    slopes: np.ndarray
    q_prime: np.ndarray
    q_second: np.ndarray

    def uxx0(self, sf: np.ndarray) -> np.ndarray:
        """``U_xx(0) = 2 Q'(0)^2 - s_f``."""
        return 2.0 * self.q_prime ** 2 - sf

    def uxxx0(self, sf: np.ndarray) -> np.ndarray:
        """``U_xxx(0) = 6 Q'(0) Q''(0) - s_f``."""
        return 6.0 * self.q_prime * self.q_second - sf


def boundary_speed(state: SolverState, model: MarketModel, grid: GridSpec,
                   weights: ExtrapolationWeights, xbar_cells: int = 4,
                   stencil: str = "floor") -> BoundaryEvaluation:
    """``s_f'`` for every regime at the given state.

    Same pipeline as ``boundary_coupling`` -> ``q_prime0`` ->
    ``quadratic_coeffs`` -> ``boundary_slope``, on plain floats.
    """
    n = state.n_regimes
    K = model.strike
    q = model.generator.entries.tolist()
    sf = state.sf.tolist()
    slopes = np.empty(n)
    qps = np.empty(n)
    qpps = np.empty(n)
    c0s = _value_couplings(state, model, grid, stencil)
    for m in range(n):
        reg = model.regimes[m]
        qps[m] = _q_prime(K, reg.rate, reg.sigma, q[m][m], sf[m], c0s[m], state.tau, m)
    for m in range(n):
        sm = sf[m]
        c1 = c2 = 0.0
        for l in range(n):
            if l == m or q[m][l] == 0.0:
                continue
            _, v1, v2 = foreign_values(math.log(sm / sf[l]), sf[l], state.u[l], state.w[l],
                                       K, grid, stencil, 2.0 * qps[l] ** 2 - sf[l])
            c1 += q[m][l] * v1
            c2 += q[m][l] * v2
        reg = model.regimes[m]
        qmm = q[m][m]
        qp = qps[m]
        q2, q3 = _derivative_polys(reg.rate, reg.sigma, qmm, sm, c1, c2, qp)
        samples = _q_samples(m, state, model, grid, xbar_cells)
        p = boundary_slope(_quadratic(reg.rate, reg.sigma, sm, qp, q2, q3, samples, weights))
        xi = reg.rate - 0.5 * reg.sigma ** 2 + p / sm
        slopes[m] = p
        qpps[m] = q2[0] + q2[1] * xi
    return BoundaryEvaluation(slopes, qps, qpps)
