"""Config parsing, CSV emission and exit codes of the command-line front end."""

from __future__ import annotations

import csv
import json
from fractions import Fraction

import pytest

from regime_rkf import GridSpec, SchemaError
from regime_rkf.cli import (EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, emit_config, load_config, main,
                            parse_config, parse_h_list)

SMALL = {
    "strike": 9, "maturity": 0.25,
    "regimes": [{"rate": 0.1, "sigma": 0.8}, {"rate": 0.05, "sigma": 0.3}],
    "generator": [[-6, 6], [9, -9]],
    "grid": {"x_max": 3, "m": 30},
    "outputs": {"spots": [4.0, 9.0, 12.0]},
}


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("name", ["two_regime", "four_regime"])
def test_bundled_configs_round_trip(name):
    cfg = load_config(name)
    assert parse_config(emit_config(cfg)) == cfg


def test_fraction_rates_are_kept_exact():
    cfg = load_config("four_regime")
    assert cfg.generator[0][1] == Fraction(1, 3)
    assert '"1/3"' in emit_config(cfg)
    assert cfg.model().generator[0, 1] == pytest.approx(1 / 3)


def test_defaults_and_h_squared_initial_step(tmp_path):
    cfg = load_config(_write(tmp_path, SMALL))
    assert cfg.control.initial_dt is None and cfg.grid == GridSpec(3.0, 30)
    assert cfg.spots == (4.0, 9.0, 12.0) and not cfg.gamma


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("strike"), "strike"),
    (lambda d: d["regimes"][1].pop("sigma"), "regimes[1].sigma"),
    (lambda d: d.update(colour="red"), "colour"),
    (lambda d: d["grid"].update(m=12.5), "grid.m"),
    (lambda d: d["grid"].update(m=4), "grid"),
    (lambda d: d.update(generator=[["x", 1], [1, -1]]), "generator[0][0]"),
    (lambda d: d.update(control={"tol": "tight"}), "control.tol"),
    (lambda d: d.update(control={"phi": 0.9}), "control"),
    (lambda d: d.update(outputs={"gamma": "yes"}), "outputs.gamma"),
    (lambda d: d.update(maturity=True), "maturity"),
])
def test_schema_errors_name_the_offending_key(mutate, path):
    data = json.loads(json.dumps(SMALL))
    mutate(data)
    with pytest.raises(SchemaError) as info:
        parse_config(json.dumps(data))
    assert info.value.path == path


def test_invalid_json_and_unknown_source():
    with pytest.raises(SchemaError):
        parse_config("{not json")
    with pytest.raises(SchemaError):
        load_config("no_such_config")


def test_h_list_must_halve():
    assert parse_h_list("0.2,0.1,0.05") == (0.2, 0.1, 0.05)
    for bad in ("0.2,0.15", "", "a,b"):
        with pytest.raises(SchemaError):
            parse_h_list(bad)


def test_price_command_writes_tables(tmp_path):
    out = tmp_path / "out"
    assert main(["price", _write(tmp_path, SMALL), "--out", str(out), "--digits", "4"]) == EXIT_OK
    prices = _rows(out / "prices.csv")
    assert prices[0] == ["S", "regime_1", "regime_2"]
    assert prices[1][0] == "4.0" and len(prices[1][1].split(".")[1]) == 4
    boundary = _rows(out / "boundary.csv")
    assert boundary[1] == ["0", "9", "9"]
    steps = _rows(out / "steps.csv")
    assert steps[0] == ["t", "k", "e_u", "accepted"] and {r[3] for r in steps[1:]} <= {"0", "1"}
    meta = json.loads((out / "run.json").read_text())
    assert meta["command"] == "price" and meta["accepted_steps"] > 0


def test_price_command_with_greeks(tmp_path):
    data = dict(SMALL, outputs={"spots": [9.0, 12.0], "gamma": True})
    out = tmp_path / "g"
    assert main(["price", _write(tmp_path, data), "--out", str(out)]) == EXIT_OK
    header = _rows(out / "prices.csv")[0]
    assert header[3:] == ["delta_1", "delta_2", "gamma_1", "gamma_2", "w_1", "w_2", "y_1", "y_2"]


def test_converge_command_leaves_missing_orders_blank(tmp_path):
    out = tmp_path / "c"
    argv = ["converge", _write(tmp_path, SMALL), "--h-list", "0.1,0.05", "--fixed-k", "1e-4",
            "--t-short", "0.002", "--out", str(out)]
    assert main(argv) == EXIT_OK
    rows = _rows(out / "converge.csv")
    assert rows[0] == ["h", "max_error_u", "order_u", "max_error_w", "order_w"]
    assert rows[1][1:] == ["", "", "", ""] and rows[2][1] != "" and rows[2][2] == ""


def test_collapse_check_passes_and_negative_control_fails(tmp_path, capsys):
    data = dict(SMALL, maturity=0.2)
    path = _write(tmp_path, data)
    assert main(["collapse-check", path]) == EXIT_OK
    assert "ok" in capsys.readouterr().out
    assert main(["collapse-check", path, "--coupling-scale", "0.5"]) == EXIT_NUMERIC
    assert "FAIL" in capsys.readouterr().out


def test_collapse_check_needs_two_regimes(tmp_path):
    data = dict(SMALL, regimes=[{"rate": 0.1, "sigma": 0.8}], generator=[[0]])
    assert main(["collapse-check", _write(tmp_path, data)]) == EXIT_CONFIG


def test_bad_configs_exit_with_config_status(tmp_path, capsys):
    data = json.loads(json.dumps(SMALL))
    del data["regimes"][1]["sigma"]
    assert main(["price", _write(tmp_path, data)]) == EXIT_CONFIG
    assert "regimes[1].sigma" in capsys.readouterr().err
    bad_model = dict(SMALL, generator=[[-6, 6], [9, -8]])
    assert main(["price", _write(tmp_path, bad_model, "m.json")]) == EXIT_CONFIG


def test_thread_variable_is_validated(tmp_path, monkeypatch):
    monkeypatch.setenv("REGIME_RKF_THREADS", "many")
    assert main(["collapse-check", _write(tmp_path, SMALL)]) == EXIT_CONFIG
