"""Embedded Cash-Karp 5(4) integration of the boundary and field ODEs.

In the default ``"joint"`` coupling the boundaries and the fields share the
six stages, so every field stage sees the boundary of that stage. A stage
whose boundary quadratic has no real root shrinks the step and retries.
The step is accepted or rejected on the embedded error of the option value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction as F
from typing import Callable, Optional, Sequence

import numpy as np

from .compact_fd import CompactOperator, build_operator
from .errors import NumericalFailure, StepStalled
from .freeboundary import BoundaryEvaluation, ExtrapolationWeights, boundary_speed
from .model import (GridSpec, MarketModel, SolverState, StepControlConfig, initial_state,
                    validate_model)
from .semidiscrete import RhsContext, build_context, coupled_pairs, rhs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ButcherTableau:
    c: tuple
    a: tuple
    b5: tuple
    b4: tuple

    def check(self, tol: float = 1e-15) -> None:
        for name, w in (("b5", self.b5), ("b4", self.b4)):
            if abs(float(sum(w)) - 1.0) > tol:
                raise ValueError(f"{name} weights sum to {sum(w)}")
        for i, row in enumerate(self.a):
            if sum(row) != self.c[i]:
                raise ValueError(f"row {i} of a does not sum to c[{i}]")

    def floats(self):
        a = [np.array([float(x) for x in row]) for row in self.a]
        return (np.array([float(x) for x in self.c]), a,
                np.array([float(x) for x in self.b5]), np.array([float(x) for x in self.b4]))


CASH_KARP = ButcherTableau(
    c=(F(0), F(1, 5), F(3, 10), F(3, 5), F(1), F(7, 8)),
    a=((),
       (F(1, 5),),
       (F(3, 40), F(9, 40)),
       (F(3, 10), F(-9, 10), F(6, 5)),
       (F(-11, 54), F(5, 2), F(-70, 27), F(35, 27)),
       (F(1631, 55296), F(175, 512), F(575, 13824), F(44275, 110592), F(253, 4096))),
    b5=(F(37, 378), F(0), F(250, 621), F(125, 594), F(0), F(512, 1771)),
    b4=(F(2825, 27648), F(0), F(18575, 48384), F(13525, 55296), F(277, 14336), F(1, 4)),
)
CASH_KARP.check()
_C, _A, _B5, _B4 = CASH_KARP.floats()
_A_ARR = np.zeros((6, 6))
for _i, _row in enumerate(_A):
    _A_ARR[_i, :_i] = _row


def embedded_step(f: Callable, y: np.ndarray, t: float, k: float):
    """One Cash-Karp step of ``y' = f(t, y)``; returns ``(y5, y4)``."""
    stages = []
    for i in range(6):
        yi = y + k * sum(a * s for a, s in zip(_A[i], stages)) if i else y
        stages.append(np.asarray(f(t + _C[i] * k, yi)))
    y5 = y + k * sum(b * s for b, s in zip(_B5, stages))
    y4 = y + k * sum(b * s for b, s in zip(_B4, stages))
    return y5, y4


@dataclass
class StepRecord:
    t_start: float
    k_used: float
    e_u: float
    accepted: bool
    shrink_retries: int = 0
    k_next: float = float("nan")


@dataclass
class BoundaryStages:
    sf5: np.ndarray
    sf4: np.ndarray
    stage_sf: list
    evaluations: list


@dataclass
class Problem:
    """Everything fixed for one solve: model, grid, operator, weights, controls."""

    model: MarketModel
    grid: GridSpec
    cfg: StepControlConfig = field(default_factory=StepControlConfig)
    op: Optional[CompactOperator] = None
    weights: Optional[ExtrapolationWeights] = None
    stencil: str = "floor"
    coupling_scale: float = 1.0

    def __post_init__(self):
        if self.op is None:
            self.op = build_operator(self.grid.m, self.grid.h)
        if self.weights is None:
            self.weights = ExtrapolationWeights.for_grid(self.grid, self.cfg.xbar_cells)
        self._pairs = coupled_pairs(self.model)
        if 3 * self.cfg.xbar_cells >= self.grid.m:
            raise ValueError(f"extrapolation reaches node {3 * self.cfg.xbar_cells} "
                             f"but the grid has only {self.grid.m} cells")

    def speed(self, state: SolverState) -> BoundaryEvaluation:
        return boundary_speed(state, self.model, self.grid, self.weights,
                              self.cfg.xbar_cells, self.stencil)

    def context(self, sf, evaluation: BoundaryEvaluation) -> RhsContext:
        return build_context(sf, self.model, evaluation, self.cfg.gamma_boundary, self._pairs)

    def field_rhs(self, fields: SolverState, ctx: RhsContext):
        return rhs(fields, ctx, self.op, self.model, self.grid, self.coupling_scale)


def boundary_stages(state: SolverState, problem: Problem, k: float) -> BoundaryStages:
    """Six stages of the boundary ODE with the fields frozen at ``state``.

    Foreign-regime coupling is re-evaluated at every intermediate boundary.
    Raises a :class:`NumericalFailure` subclass if any stage cannot be evaluated.
    """
    sf0 = state.sf
    R, stage_sf, evals = [], [], []
    for i in range(6):
        s = sf0 + sum(a * r for a, r in zip(_A[i], R)) if i else sf0.copy()
        ev = problem.speed(SolverState(state.tau + _C[i] * k, s, state.u, state.w, state.y))
        stage_sf.append(s)
        evals.append(ev)
        R.append(k * ev.slopes)
    sf5 = sf0 + sum(b * r for b, r in zip(_B5, R))
    sf4 = sf0 + sum(b * r for b, r in zip(_B4, R))
    return BoundaryStages(sf5, sf4, stage_sf, evals)


def field_stages(state: SolverState, problem: Problem, contexts, k: float):
    """Advance ``u, w`` (and ``y``) one step; returns the order-5 and order-4 candidates.

    ``contexts`` is either one :class:`RhsContext` used by all six stages or
    a sequence of six, one per stage.
    """
    if isinstance(contexts, RhsContext):
        contexts = [contexts] * 6
    with_gamma = state.y is not None
    L = []
    for i in range(6):
        if i:
            comb = [sum(a * s[j] for a, s in zip(_A[i], L)) for j in range(3 if with_gamma else 2)]
            stage = SolverState(state.tau, state.sf, state.u + comb[0], state.w + comb[1],
                                state.y + comb[2] if with_gamma else None)
        else:
            stage = state
        du, dw, dy = problem.field_rhs(stage, contexts[i])
        L.append((k * du, k * dw, k * dy) if with_gamma else (k * du, k * dw))

    def combine(b):
        parts = [sum(bi * s[j] for bi, s in zip(b, L) if bi != 0.0) for j in range(len(L[0]))]
        return SolverState(state.tau + k, state.sf, state.u + parts[0], state.w + parts[1],
                           state.y + parts[2] if with_gamma else None)

    return combine(_B5), combine(_B4)


def joint_stages(state: SolverState, problem: Problem, k: float):
    """Fully coupled variant: boundary and fields share every stage.

    Returns ``(cand5, cand4)`` with the boundary already advanced.
    """
    with_gamma = state.y is not None
    y0 = np.stack((state.u, state.w, state.y) if with_gamma else (state.u, state.w))
    L = np.empty((6,) + y0.shape)
    R = np.empty((6, state.sf.shape[0]))
    stage = state
    for i in range(6):
        if i:
            a = _A_ARR[i, :i]
            fields = y0 + np.tensordot(a, L[:i], axes=1)
            stage = SolverState(state.tau + _C[i] * k, state.sf + a @ R[:i], fields[0], fields[1],
                                fields[2] if with_gamma else None)
        ev = problem.speed(stage)
        du, dw, dy = problem.field_rhs(stage, problem.context(stage.sf, ev))
        L[i, 0], L[i, 1] = k * du, k * dw
        if with_gamma:
            L[i, 2] = k * dy
        R[i] = k * ev.slopes

    def combine(b):
        fields = y0 + np.tensordot(b, L, axes=1)
        return SolverState(state.tau + k, state.sf + b @ R, fields[0], fields[1],
                           fields[2] if with_gamma else None)

    return combine(_B5), combine(_B4)


def error_and_propose(u5: np.ndarray, u4: np.ndarray, k: float, cfg: StepControlConfig):
    """Embedded error on the option value, acceptance flag and next step size."""
    e_u = float(np.max(np.abs(u5 - u4))) if u5.size else 0.0
    accepted = e_u < cfg.tol
    return e_u, accepted, propose_step(e_u, accepted, k, cfg)


def propose_step(e_u: float, accepted: bool, k: float, cfg: StepControlConfig) -> float:
    if e_u == 0.0:
        return cfg.growth_cap * k
    accept_exp, reject_exp = cfg.exponents
    factor = cfg.safety * (cfg.tol / e_u) ** (accept_exp if accepted else reject_exp)
    return k * min(cfg.growth_cap, max(cfg.shrink_floor, factor))


def advance(state: SolverState, problem: Problem, k: float, t_end: Optional[float] = None):
    """Take one accepted step from ``state`` starting with trial size ``k``.

    Returns ``(new_state, records, k_next)``; ``records`` lists every attempt,
    rejected ones included.
    """
    cfg = problem.cfg
    T = problem.model.maturity if t_end is None else t_end
    t = state.tau
    floor = 1e-14 * problem.model.maturity
    records = []
    while True:
        if t + k > T:
            k = T - t
        retries = 0
        while True:
            if k < floor:
                raise StepStalled(f"step size {k:.3e} fell below {floor:.1e} at tau={t:.6g}")
            try:
                cand5, cand4 = _trial(state, problem, k)
                break
            except NumericalFailure as exc:
                log.debug("tau=%.6g k=%.3e: %s; shrinking", t, k, exc)
                k *= cfg.phi
                retries += 1
        if not cfg.adaptive:
            e_u = float(np.max(np.abs(cand5.u - cand4.u)))
            k_next = cfg.first_dt(problem.grid)
            records.append(StepRecord(t, k, e_u, True, retries, k_next))
            return _commit(cand5, t, k, T), records, k_next
        e_u, ok, k_next = error_and_propose(cand5.u, cand4.u, k, cfg)
        records.append(StepRecord(t, k, e_u, ok, retries, k_next))
        if ok:
            return _commit(cand5, t, k, T), records, k_next
        k = k_next


def _commit(cand: SolverState, t: float, k: float, T: float) -> SolverState:
    # land exactly on T when the step was clamped
    cand.tau = T if abs((t + k) - T) <= 1e-12 * max(1.0, T) else t + k
    return cand


def _trial(state: SolverState, problem: Problem, k: float):
    mode = problem.cfg.coupling
    if mode == "joint":
        return joint_stages(state, problem, k)
    bs = boundary_stages(state, problem, k)
    if mode == "frozen":
        ctxs = problem.context(state.sf, bs.evaluations[0])
    else:
        ctxs = [problem.context(s, ev) for s, ev in zip(bs.stage_sf, bs.evaluations)]
    c5, c4 = field_stages(state, problem, ctxs, k)
    c5.sf, c4.sf = bs.sf5, bs.sf4
    return c5, c4


@dataclass
class SolveResult:
    state: SolverState
    trajectory: list
    steps: list
    problem: Problem

    @property
    def accepted_steps(self) -> list:
        return [s for s in self.steps if s.accepted]


def solve(model: MarketModel, grid: GridSpec, cfg: Optional[StepControlConfig] = None,
          with_gamma: bool = False, t_end: Optional[float] = None,
          schedule: Optional[Sequence[float]] = None, **problem_kw) -> SolveResult:
    """Integrate from expiry (``tau = 0``) to ``t_end`` (default: the maturity).

    Returns the final state, the accepted ``(tau, s_f)`` trajectory starting
    at ``tau = 0`` and a record of every attempted step.

    ``schedule`` replays a given sequence of step sizes with the controller
    off, for example the accepted steps of another run. Accept/reject
    decisions are discontinuous in the error estimate, so two runs that
    should agree can only be compared to roundoff on a shared schedule.
    """
    validate_model(model)
    cfg = cfg or StepControlConfig()
    if schedule is not None:
        cfg = replace(cfg, adaptive=False)
    problem = Problem(model, grid, cfg, **problem_kw)
    T = model.maturity if t_end is None else float(t_end)
    state = initial_state(model, grid, with_gamma)
    trajectory = [(0.0, state.sf.copy())]
    steps: list[StepRecord] = []
    k = cfg.first_dt(grid)
    planned = iter(schedule) if schedule is not None else None
    while state.tau < T:
        if planned is not None:
            k = next(planned, T - state.tau)
        try:
            state, recs, k = advance(state, problem, k, T)
        except NumericalFailure as exc:
            exc.args = (f"{exc.args[0] if exc.args else exc} (tau={state.tau:.6g})",)
            raise
        steps.extend(recs)
        trajectory.append((state.tau, state.sf.copy()))
    return SolveResult(state, trajectory, steps, problem)
