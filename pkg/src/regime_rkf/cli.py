"""Batch front end: JSON run configs in, CSV tables out.

Commands::

    regime-rkf price CONFIG [--out DIR] [--digits N] [--h H]
    regime-rkf converge CONFIG --h-list 0.2,0.1,... [--fixed-k K] [--t-short T]
    regime-rkf collapse-check CONFIG

``CONFIG`` is a path or the name of a bundled config (``two_regime``,
``four_regime``). Exit status is 0 on success, 2 for a bad config and 3 for a
numerical failure or a failed check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ModelError, NumericalFailure, SchemaError
from .model import (GridSpec, MarketModel, StepControlConfig, make_model, validate_model)
from .pricing import PriceSurface, convergence_study, delta_at, gamma_at, price_at, w_at, y_at
from .rkf import solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COLLAPSE_DT = 1e-3
COLLAPSE_TOL = 1e-8
THREADS_ENV = "REGIME_RKF_THREADS"

Rate = Union[float, Fraction]

_TOP_KEYS = {"strike", "maturity", "regimes", "generator", "grid", "control", "outputs"}
_CONTROL_KEYS = {"tol", "phi", "safety", "initial_dt", "xbar_cells", "accept_exponent",
                 "reject_exponent", "standard_controller", "coupling", "gamma_boundary"}
_OUTPUT_KEYS = {"spots", "gamma", "digits"}


@dataclass(frozen=True)
class RunConfig:
    """A parsed run: model data, grid, step control and output requests.

    Generator entries keep the exact :class:`~fractions.Fraction` when they
    were written as ``"p/q"`` so that the config can be emitted unchanged.
    """

    strike: float
    maturity: float
    regimes: tuple[tuple[float, float], ...]
    generator: tuple[tuple[Rate, ...], ...]
    grid: GridSpec
    control: StepControlConfig = field(default_factory=StepControlConfig)
    spots: tuple[float, ...] = ()
    gamma: bool = False
    digits: Optional[int] = None

    def model(self) -> MarketModel:
        rates = [r for r, _ in self.regimes]
        sigmas = [s for _, s in self.regimes]
        gen = [[float(v) for v in row] for row in self.generator]
        return validate_model(make_model(self.strike, self.maturity, rates, sigmas, gen))


def _number(value: Any, path: str, *, integer: bool = False) -> Union[int, float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise SchemaError(path, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise SchemaError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _rate(value: Any, path: str) -> Rate:
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise SchemaError(path, f"expected a number or 'p/q', got {value!r}") from None
    return _number(value, path)


def _object(value: Any, path: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected an object, got {type(value).__name__}")
    extra = sorted(set(value) - allowed)
    if extra:
        raise SchemaError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")
    return value


def _required(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required key")
    return obj[key]


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(path, f"expected a list, got {type(value).__name__}")
    return value


def _parse_control(raw: dict) -> StepControlConfig:
    c = _object(raw, "control", _CONTROL_KEYS)
    kw: dict[str, Any] = {}
    for key in ("tol", "phi", "safety", "accept_exponent", "reject_exponent"):
        if key in c:
            kw[key] = _number(c[key], f"control.{key}")
    if "xbar_cells" in c:
        kw["xbar_cells"] = _number(c["xbar_cells"], "control.xbar_cells", integer=True)
    if "initial_dt" in c:
        dt = c["initial_dt"]
        if dt != "h^2":
            kw["initial_dt"] = _number(dt, "control.initial_dt")
    for key in ("standard_controller",):
        if key in c:
            if not isinstance(c[key], bool):
                raise SchemaError(f"control.{key}", f"expected true/false, got {c[key]!r}")
            kw[key] = c[key]
    for key in ("coupling", "gamma_boundary"):
        if key in c:
            if not isinstance(c[key], str):
                raise SchemaError(f"control.{key}", f"expected a string, got {c[key]!r}")
            kw[key] = c[key]
    try:
        return StepControlConfig(**kw)
    except ValueError as exc:
        raise SchemaError("control", str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run config.

    Raises
    ------
    SchemaError
        Malformed JSON or a missing, unknown or ill-typed key; ``.path``
        names the offending key.
    ModelError
        Well-formed config whose model breaks an invariant.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    top = _object(raw, "", _TOP_KEYS)
    strike = _number(_required(top, "strike", ""), "strike")
    maturity = _number(_required(top, "maturity", ""), "maturity")

    regimes = []
    for i, reg in enumerate(_list(_required(top, "regimes", ""), "regimes")):
        path = f"regimes[{i}]"
        reg = _object(reg, path, {"rate", "sigma"})
        regimes.append((_number(_required(reg, "rate", path), f"{path}.rate"),
                        _number(_required(reg, "sigma", path), f"{path}.sigma")))

    generator = []
    for i, row in enumerate(_list(_required(top, "generator", ""), "generator")):
        row = _list(row, f"generator[{i}]")
        generator.append(tuple(_rate(v, f"generator[{i}][{j}]") for j, v in enumerate(row)))

    g = _object(_required(top, "grid", ""), "grid", {"x_max", "m"})
    x_max = _number(_required(g, "x_max", "grid"), "grid.x_max")
    cells = _number(_required(g, "m", "grid"), "grid.m", integer=True)
    try:
        grid = GridSpec(x_max, cells)
    except ValueError as exc:
        raise SchemaError("grid", str(exc)) from None

    control = _parse_control(top.get("control", {}))

    out = _object(top.get("outputs", {}), "outputs", _OUTPUT_KEYS)
    spots = tuple(_number(s, f"outputs.spots[{i}]")
                  for i, s in enumerate(_list(out.get("spots", []), "outputs.spots")))
    gamma = out.get("gamma", False)
    if not isinstance(gamma, bool):
        raise SchemaError("outputs.gamma", f"expected true/false, got {gamma!r}")
    digits = out.get("digits")
    if digits is not None:
        digits = _number(digits, "outputs.digits", integer=True)

    cfg = RunConfig(strike, maturity, tuple(regimes), tuple(generator), grid, control,
                    spots, gamma, digits)
    cfg.model()
    return cfg


def emit_config(cfg: RunConfig) -> str:
    """Normalized JSON text that :func:`parse_config` maps back to ``cfg``."""
    def rate(v):
        if isinstance(v, Fraction):
            return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
        return v

    c = cfg.control
    data = {
        "strike": cfg.strike,
        "maturity": cfg.maturity,
        "regimes": [{"rate": r, "sigma": s} for r, s in cfg.regimes],
        "generator": [[rate(v) for v in row] for row in cfg.generator],
        "grid": {"x_max": cfg.grid.x_max, "m": cfg.grid.m},
        "control": {
            "tol": c.tol, "phi": c.phi, "safety": c.safety,
            "initial_dt": "h^2" if c.initial_dt is None else c.initial_dt,
            "xbar_cells": c.xbar_cells,
            "accept_exponent": c.accept_exponent, "reject_exponent": c.reject_exponent,
            "standard_controller": c.standard_controller,
            "coupling": c.coupling, "gamma_boundary": c.gamma_boundary,
        },
        "outputs": {"spots": list(cfg.spots), "gamma": cfg.gamma},
    }
    if cfg.digits is not None:
        data["outputs"]["digits"] = cfg.digits
    return json.dumps(data, indent=2) + "\n"


def load_config(source: str) -> RunConfig:
    """Parse ``source``, either a file path or a bundled config name."""
    path = Path(source)
    if path.exists():
        return parse_config(path.read_text(encoding="utf-8"))
    bundled = resources.files("regime_rkf") / "data" / f"{source}.json"
    if bundled.is_file():
        return parse_config(bundled.read_text(encoding="utf-8"))
    raise SchemaError("", f"no config file or bundled config named {source!r}")


def _plain(v: float) -> str:
    """Shortest round-tripping text, without a trailing ``.0``."""
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _value(v: float, digits: Optional[int]) -> str:
    return repr(float(v)) if digits is None else f"{v:.{digits}f}"


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(out: Path, command: str, started: float, extra: dict) -> None:
    meta = {"command": command, "argv": sys.argv[1:],
            "started_unix": started, "elapsed_s": time.time() - started}
    meta.update(extra)
    (out / "run.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def cmd_price(cfg: RunConfig, out: Path, digits: Optional[int] = None) -> int:
    """Solve to maturity and write ``prices.csv``, ``boundary.csv`` and ``steps.csv``."""
    started = time.time()
    digits = cfg.digits if digits is None else digits
    result = solve(cfg.model(), cfg.grid, cfg.control, with_gamma=cfg.gamma)
    surface = PriceSurface.from_result(result)
    n = surface.n_regimes
    out.mkdir(parents=True, exist_ok=True)

    header = ["S"] + [f"regime_{m + 1}" for m in range(n)]
    if cfg.gamma:
        header += [f"delta_{m + 1}" for m in range(n)] + [f"gamma_{m + 1}" for m in range(n)]
        header += [f"w_{m + 1}" for m in range(n)] + [f"y_{m + 1}" for m in range(n)]
    rows = []
    for S in cfg.spots:
        row = [repr(float(S))] + [_value(price_at(surface, m, S), digits) for m in range(n)]
        if cfg.gamma:
            for fn in (delta_at, gamma_at, w_at, y_at):
                row += [_value(fn(surface, m, S), digits) for m in range(n)]
        rows.append(row)
    _write_csv(out / "prices.csv", header, rows)

    _write_csv(out / "boundary.csv", ["tau"] + [f"sf_{m + 1}" for m in range(n)],
               ([_plain(t)] + [_plain(v) for v in sf] for t, sf in result.trajectory))
    _write_csv(out / "steps.csv", ["t", "k", "e_u", "accepted"],
               ([_plain(r.t_start), repr(r.k_used), repr(r.e_u), int(r.accepted)]
                for r in result.steps))
    _write_sidecar(out, "price", started, {"accepted_steps": len(result.accepted_steps),
                                           "attempts": len(result.steps)})
    return EXIT_OK


def parse_h_list(text: str) -> tuple[float, ...]:
    """Comma-separated grid spacings that halve at every entry."""
    try:
        hs = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise SchemaError("h_list", f"not a list of numbers: {text!r}") from None
    if not hs:
        raise SchemaError("h_list", "empty")
    for a, b in zip(hs[:-1], hs[1:]):
        if not math.isclose(a, 2.0 * b, rel_tol=1e-9):
            raise SchemaError("h_list", f"{b} does not halve {a}")
    return hs


def cmd_converge(cfg: RunConfig, hs: Sequence[float], fixed_k: float, t_short: float,
                 out: Path) -> int:
    """Grid-halving study; writes ``converge.csv``."""
    started = time.time()
    report = convergence_study(cfg.model(), hs, fixed_k, t_short, cfg.grid.x_max)
    out.mkdir(parents=True, exist_ok=True)

    def cell(v):
        return "" if not math.isfinite(v) else repr(v)

    rows = [[repr(h), cell(eu), cell(ou), cell(ew), cell(ow)]
            for h, eu, ou, ew, ow in zip(report.hs, report.err_u, report.order_u,
                                         report.err_w, report.order_w)]
    _write_csv(out / "converge.csv", ["h", "max_error_u", "order_u", "max_error_w", "order_w"],
               rows)
    _write_sidecar(out, "converge", started, {"fixed_k": fixed_k, "t_short": t_short})
    return EXIT_OK


def collapse_discrepancy(cfg: RunConfig, coupling_scale: float = 1.0) -> float:
    """Max field difference between ``I`` copies of regime 0 and a lone regime 0.

    Both runs take the same constant step, ``min(first_dt, COLLAPSE_DT)``.
    The adaptive controller only watches the field error, so on long steps
    it does not see the mode that separates identical boundaries; a round-off
    gap there grows until it crosses into the one-sided foreign data.
    ``coupling_scale`` other than 1 perturbs the inter-regime terms and is
    there to confirm that the check can fail.
    """
    if len(cfg.regimes) < 2:
        raise SchemaError("regimes", "collapse check needs at least two regimes")
    base = cfg.model()
    r0, s0 = cfg.regimes[0]
    n = len(cfg.regimes)
    clones = make_model(base.strike, base.maturity, [r0] * n, [s0] * n,
                        base.generator.entries)
    single = make_model(base.strike, base.maturity, [r0], [s0], [[0.0]])
    k = min(cfg.control.first_dt(cfg.grid), COLLAPSE_DT)
    fixed = replace(cfg.control, adaptive=False, initial_dt=k)
    many = solve(clones, cfg.grid, fixed, coupling_scale=coupling_scale)
    one = solve(single, cfg.grid, fixed)
    gap = max(float(np.max(np.abs(many.state.u - one.state.u))),
              float(np.max(np.abs(many.state.w - one.state.w))),
              float(np.max(np.abs(many.state.sf - one.state.sf))))
    return gap


def cmd_collapse_check(cfg: RunConfig, coupling_scale: float = 1.0) -> int:
    gap = collapse_discrepancy(cfg, coupling_scale)
    ok = gap <= COLLAPSE_TOL
    print(f"collapse discrepancy {gap:.3e} ({'ok' if ok else 'FAIL'}, limit {COLLAPSE_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def _thread_limit() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise SchemaError(THREADS_ENV, f"expected an integer, got {raw!r}") from None
    return None if n <= 0 else n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regime-rkf",
                                description="American puts under regime switching.")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("price", help="solve to maturity and tabulate prices")
    pr.add_argument("config")
    pr.add_argument("--out", type=Path, default=Path("."))
    pr.add_argument("--digits", type=int, default=None,
                    help="round values to this many decimals when writing")
    pr.add_argument("--h", type=float, default=None, help="override the grid spacing")

    cv = sub.add_parser("converge", help="fixed-step spatial convergence study")
    cv.add_argument("config")
    cv.add_argument("--h-list", required=True, help="comma-separated, each half the last")
    cv.add_argument("--fixed-k", type=float, default=2.5e-6)
    cv.add_argument("--t-short", type=float, default=0.2)
    cv.add_argument("--out", type=Path, default=Path("."))

    cc = sub.add_parser("collapse-check", help="identical regimes must match one regime")
    cc.add_argument("config")
    cc.add_argument("--coupling-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _thread_limit()
        cfg = load_config(args.config)
        with threadpool_limits(limits=threads):
            if args.command == "price":
                if args.h is not None:
                    cfg = replace(cfg, grid=GridSpec.from_spacing(args.h, cfg.grid.x_max))
                return cmd_price(cfg, args.out, args.digits)
            if args.command == "converge":
                hs = parse_h_list(args.h_list)
                return cmd_converge(cfg, hs, args.fixed_k, args.t_short, args.out)
            return cmd_collapse_check(cfg, args.coupling_scale)
    except (SchemaError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
