import csv
import json
import math

import pytest

from mistake_pressure import cli


def run(tmp_path, config, *extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "out"
    code = cli.main(["--config", str(path), "--out", str(out), *extra])
    return code, out


def read_rows(out):
    with open(out / "results.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def test_pressure_rows(tmp_path):
    code, out = run(tmp_path, {"command": "pressure", "grid": {"n_list": [4, 8, 12]}})
    assert code == 0
    rows = read_rows(out)
    assert [int(r["n"]) for r in rows] == [4, 8, 12]
    assert list(rows[0]) == list(cli.CSV_COLUMNS)
    for r in rows:
        assert float(r["normalized"]) == pytest.approx(math.log(2), abs=1e-15)
        assert r["method"] == "exact-cylinder"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["series"][0]["extrapolated"] == pytest.approx(math.log(2), abs=1e-12)
    assert summary["version"] == "0.1.0"


def test_invalid_delta_names_field(tmp_path, capsys):
    cfg = {"command": "katok", "grid": {"deltas": [1.5]}, "measure": {"kind": "bernoulli", "p": [0.5, 0.5]}}
    code, _ = run(tmp_path, cfg)
    assert code == 1
    assert "delta" in capsys.readouterr().err


@pytest.mark.parametrize("cfg,field", [
    ({"command": "nope"}, "command"),
    ({"command": "pressure", "grid": {"n_list": [4, 4]}}, "grid.n_list[1]"),
    ({"command": "pressure", "grid": {"windows": [0]}}, "grid.windows[0]"),
    ({"command": "pressure", "potential": {"kind": "cocycle", "matrices": [[[1, 0], [0, 1]]]}}, "potential.matrices"),
    ({"command": "pressure", "system": {"alphabet_size": 2, "forbidden": [[0, 1]]}}, "system"),
    ({"command": "pressure", "schema_version": 7}, "schema_version"),
    ({"command": "katok"}, "measure"),
])
def test_validation_errors(tmp_path, capsys, cfg, field):
    code, _ = run(tmp_path, cfg)
    assert code == 1
    assert f"error: {field}" in capsys.readouterr().err


def test_rerun_is_byte_identical(tmp_path):
    cfg = {"command": "mistake-pressure", "mistake": {"kind": "constant", "c": 1},
           "grid": {"n_list": [4, 6, 8], "windows": [1, 2]}, "potential": {"kind": "additive", "values": [0.1, 0.5]}}
    _, out = run(tmp_path, cfg, "--threads", "3")
    first = [{k: v for k, v in r.items() if k != "runtime_ms"} for r in read_rows(out)]
    summary = (out / "summary.json").read_bytes()
    _, out = run(tmp_path, cfg, "--threads", "1")
    assert [{k: v for k, v in r.items() if k != "runtime_ms"} for r in read_rows(out)] == first
    assert (out / "summary.json").read_bytes() == summary
    assert [(int(r["window"]), int(r["n"])) for r in first] == [(1, 4), (1, 6), (1, 8), (2, 4), (2, 6), (2, 8)]


def test_katok_command(tmp_path):
    cfg = {"command": "katok", "measure": {"kind": "bernoulli", "p": [0.5, 0.5]},
           "grid": {"n_list": [4, 6], "deltas": [0.5, 0.25]}}
    code, out = run(tmp_path, cfg)
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 4
    assert float(rows[0]["normalized"]) == pytest.approx(math.log(2**3 + 1) / 4)
    assert rows[0]["delta"] == "0.5"


def test_budget_errors_are_reported(tmp_path, capsys, monkeypatch):
    from mistake_pressure import pressure
    from mistake_pressure.symbolic import BudgetExceeded

    real = pressure.best_estimate

    def flaky(system, F, n, eps, g, method):
        if n == 8:
            raise BudgetExceeded("too big")
        return real(system, F, n, eps, g, method)

    monkeypatch.setattr(cli, "best_estimate", flaky)
    code, out = run(tmp_path, {"command": "pressure", "grid": {"n_list": [4, 8]}})
    assert code == 0
    assert [int(r["n"]) for r in read_rows(out)] == [4]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["errors"][0]["n"] == 8
    assert "too big" in capsys.readouterr().err
    code, out = run(tmp_path, {"command": "pressure", "grid": {"n_list": [8]}})
    assert code == 3


def test_variational_command(tmp_path):
    cfg = {"command": "variational", "potential": {"kind": "additive", "values": [math.log(2), math.log(3)]}}
    code, out = run(tmp_path, cfg)
    assert code == 0
    info = json.loads((out / "summary.json").read_text())["variational"]
    assert info["value"] == pytest.approx(math.log(5), abs=1e-4)
    assert info["transfer_pressure"] == pytest.approx(math.log(5), abs=1e-12)


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from mistake_pressure.invariants import Check

    monkeypatch.setattr(cli, "run_all", lambda seed: [Check("x", "forced", False)])
    code, out = run(tmp_path, {"command": "verify", "grid": {"n_list": [3]}})
    assert code == 2
    assert read_rows(out) == []
