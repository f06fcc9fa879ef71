"""American put pricing under Markov regime switching.

Front-fixed log-moneyness grid, compact fourth-order differences in space and
embedded Cash-Karp Runge-Kutta steps in time, with the exercise boundaries
advanced alongside the value, delta and (optionally) gamma fields.
"""

from .errors import (ComplexRoot, DegenerateSqrtArgument, DimensionMismatch, GammaNotComputed,
                     GridTooSmall, InvalidGenerator, InvalidRegime, ModelError, NegativeRadicand,
                     NoConvergence, NumericalFailure, OutOfSpan, RegimeRKFError, SchemaError,
                     StepStalled)
from .model import (GeneratorMatrix, GridSpec, MarketModel, RegimeParams, SolverState,
                    StepControlConfig, four_regime_model, initial_state, make_model,
                    two_regime_model, validate_model)
from .oracle import PsorConfig, PsorResult, binomial_put, psor_price
from .pricing import (ConvergenceReport, PriceSurface, convergence_study, delta_at, format_table,
                      gamma_at, price_at, table)
from .rkf import SolveResult, solve

__version__ = "0.1.0"

__all__ = [
    "ComplexRoot", "ConvergenceReport", "DegenerateSqrtArgument", "DimensionMismatch",
    "GammaNotComputed", "GeneratorMatrix", "GridSpec", "GridTooSmall", "InvalidGenerator",
    "InvalidRegime", "MarketModel", "ModelError", "NegativeRadicand", "NoConvergence",
    "NumericalFailure", "OutOfSpan", "PriceSurface", "PsorConfig", "PsorResult", "RegimeParams", "RegimeRKFError",
    "SchemaError", "SolveResult", "SolverState", "StepControlConfig", "StepStalled",
    "binomial_put", "convergence_study", "delta_at", "format_table", "four_regime_model", "gamma_at", "initial_state",
    "make_model", "price_at", "psor_price", "solve", "table", "two_regime_model", "validate_model",
]
