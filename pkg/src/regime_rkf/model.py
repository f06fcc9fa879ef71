"""Market model, grid and solver-state types for the regime-switching put."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    GridTooSmall,
    InvalidGenerator,
    InvalidRegime,
)

ROW_SUM_TOL = 1e-12


class Violation(NamedTuple):
    field: str
    rule: str
    kind: type

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class GeneratorMatrix:
    """Transition intensities of the Markov chain driving the regime.

    Off-diagonal entries are switching rates per year, each row sums to zero.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, idx):
        return self.entries[idx]

    def violations(self) -> list[Violation]:
        q = self.entries
        out = []
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            out.append(Violation("generator", f"must be a non-empty square matrix, got shape {q.shape}",
                                 DimensionMismatch))
            return out
        n = q.shape[0]
        for m in range(n):
            for l in range(n):
                if l != m and q[m, l] < 0:
                    out.append(Violation(f"generator[{m}][{l}]", f"off-diagonal rate {q[m, l]} < 0",
                                         InvalidGenerator))
            s = q[m].sum()
            if not abs(s) <= ROW_SUM_TOL:
                out.append(Violation(f"generator[{m}]", f"row sums to {s!r}, expected 0",
                                     InvalidGenerator))
        return out


@dataclass(frozen=True)
class RegimeParams:
    rate: float
    sigma: float


@dataclass(frozen=True)
class MarketModel:
    """American put written on an asset whose ``(r, sigma)`` switch with the regime."""

    strike: float
    maturity: float
    regimes: tuple[RegimeParams, ...]
    generator: GeneratorMatrix

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))
        if not isinstance(self.generator, GeneratorMatrix):
            object.__setattr__(self, "generator", GeneratorMatrix(self.generator))

    @property
    def n_regimes(self) -> int:
        return len(self.regimes)

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.regimes])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p.sigma for p in self.regimes])

    def with_maturity(self, maturity: float) -> "MarketModel":
        return replace(self, maturity=maturity)


def make_model(strike, maturity, rates, sigmas, generator) -> MarketModel:
    """Convenience constructor from parallel rate/volatility sequences."""
    regimes = tuple(RegimeParams(float(r), float(s)) for r, s in zip(rates, sigmas))
    if len(rates) != len(sigmas):
        raise DimensionMismatch([Violation("regimes", "rates and sigmas differ in length",
                                           DimensionMismatch)])
    return MarketModel(float(strike), float(maturity), regimes, GeneratorMatrix(generator))


def validate_model(model: MarketModel) -> MarketModel:
    """Check every invariant of ``model`` and return it unchanged.

    Raises
    ------
    ModelError
        Subclass chosen from the first violation found; ``.violations`` lists
        all of them.
    """
    found: list[Violation] = []
    if not model.strike > 0:
        found.append(Violation("strike", f"must be > 0, got {model.strike}", InvalidRegime))
    if not model.maturity > 0:
        found.append(Violation("maturity", f"must be > 0, got {model.maturity}", InvalidRegime))
    for i, p in enumerate(model.regimes):
        if not p.sigma > 0:
            found.append(Violation(f"regimes[{i}].sigma", f"must be > 0, got {p.sigma}", InvalidRegime))
        if not p.rate > 0:
            found.append(Violation(f"regimes[{i}].rate", f"must be > 0, got {p.rate}", InvalidRegime))
    gen_problems = model.generator.violations()
    found.extend(gen_problems)
    if not any(v.kind is DimensionMismatch for v in gen_problems):
        if model.generator.size != model.n_regimes:
            found.append(Violation("regimes", f"{model.n_regimes} regimes but generator is "
                                   f"{model.generator.size}x{model.generator.size}", DimensionMismatch))
    if found:
        raise found[0].kind(found)
    return model


def two_regime_model() -> MarketModel:
    """Two-regime benchmark: K = 9, T = 1, r = (0.10, 0.05), sigma = (0.80, 0.30)."""
    return make_model(9.0, 1.0, (0.10, 0.05), (0.80, 0.30), [[-6.0, 6.0], [9.0, -9.0]])


def four_regime_model(strike: float = 9.0, maturity: float = 1.0) -> MarketModel:
    """Four-regime benchmark with symmetric switching at rate 1/3.

    Strike and maturity are not published with this example; 9 and 1 are assumed.
    """
    third = 1.0 / 3.0
    q = np.full((4, 4), third)
    np.fill_diagonal(q, -1.0)
    return make_model(strike, maturity, (0.02, 0.10, 0.06, 0.15), (0.90, 0.50, 0.70, 0.20), q)


@dataclass(frozen=True)
class GridSpec:
    """Uniform log-moneyness grid ``x_i = i*h`` on ``[0, x_max]``, shared by all regimes."""

    x_max: float
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 8:
            raise GridTooSmall(f"need at least 8 cells, got m={self.m}")
        if not self.x_max > 0:
            raise GridTooSmall(f"x_max must be > 0, got {self.x_max}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def from_spacing(cls, h: float, x_max: float = 3.0) -> "GridSpec":
        m = int(round(x_max / h))
        if not math.isclose(m * h, x_max, rel_tol=1e-9):
            raise GridTooSmall(f"h={h} does not divide x_max={x_max}")
        return cls(x_max, m)

    @property
    def h(self) -> float:
        return self.x_max / self.m

    @property
    def nodes(self) -> np.ndarray:
        """All ``m + 1`` nodes including both boundaries."""
        return np.arange(self.m + 1) * self.h

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass
class SolverState:
    """Per-regime boundaries and interior fields at time-to-expiry ``tau``.

    ``u``, ``w`` and ``y`` are ``(I, m - 1)`` arrays holding the option value,
    its first and its second derivative in log-moneyness at the interior nodes.
    """

    tau: float
    sf: np.ndarray
    u: np.ndarray
    w: np.ndarray
    y: Optional[np.ndarray] = None

    @property
    def n_regimes(self) -> int:
        return self.sf.shape[0]

    @property
    def has_gamma(self) -> bool:
        return self.y is not None

    def copy(self) -> "SolverState":
        return SolverState(self.tau, self.sf.copy(), self.u.copy(), self.w.copy(),
                           None if self.y is None else self.y.copy())


def initial_state(model: MarketModel, grid: GridSpec, with_gamma: bool = False) -> SolverState:
    """State at expiry: every boundary sits at the strike and all fields vanish."""
    n = model.n_regimes
    shape = (n, grid.m - 1)
    return SolverState(
        tau=0.0,
        sf=np.full(n, float(model.strike)),
        u=np.zeros(shape),
        w=np.zeros(shape),
        y=np.zeros(shape) if with_gamma else None,
    )


@dataclass(frozen=True)
class StepControlConfig:
    """Adaptive step control.

    ``initial_dt=None`` means ``h**2`` for the grid in use. ``coupling`` picks
    how boundary and field stages interact inside one step: ``"joint"``
    integrates boundaries and fields as one system, ``"stage"`` first
    integrates the boundary with frozen fields and then feeds each field
    stage the boundary of that stage, ``"frozen"`` evaluates every field
    stage with the boundary data of the step's entry state.
    ``gamma_boundary`` selects the Dirichlet datum of the gamma field at the
    boundary: ``"consistent"`` uses ``2 Q'(0)^2 - s_f``, ``"simple"`` uses
    ``-s_f``.
    """

    tol: float = 1e-6
    safety: float = 0.9
    phi: float = 0.5
    accept_exponent: float = 0.25
    reject_exponent: float = 0.2
    initial_dt: Optional[float] = None
    xbar_cells: int = 4
    standard_controller: bool = False
    growth_cap: float = 5.0
    shrink_floor: float = 0.1
    adaptive: bool = True
    coupling: str = "joint"
    gamma_boundary: str = "consistent"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if not 0 < self.safety < 1:
            raise ValueError(f"safety must lie in (0, 1), got {self.safety}")
        if not 0.1 <= self.phi <= 0.5:
            raise ValueError(f"phi must lie in [0.1, 0.5], got {self.phi}")
        if int(self.xbar_cells) != self.xbar_cells or self.xbar_cells < 1:
            raise ValueError(f"xbar_cells must be a positive integer, got {self.xbar_cells}")
        if self.initial_dt is not None and not self.initial_dt > 0:
            raise ValueError(f"initial_dt must be > 0, got {self.initial_dt}")
        if self.coupling not in ("frozen", "stage", "joint"):
            raise ValueError(f"unknown coupling mode {self.coupling!r}")
        if self.gamma_boundary not in ("consistent", "simple"):
            raise ValueError(f"unknown gamma_boundary {self.gamma_boundary!r}")

    @property
    def exponents(self) -> tuple[float, float]:
        """(accept, reject) exponents actually applied by the controller."""
        if self.standard_controller:
            return self.reject_exponent, self.accept_exponent
        return self.accept_exponent, self.reject_exponent

    def first_dt(self, grid: GridSpec) -> float:
        return grid.h ** 2 if self.initial_dt is None else float(self.initial_dt)
