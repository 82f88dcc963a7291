import csv
import json

import pytest

from formalpowers.cli import (
    CSV_FIELDS,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_TOLERANCE,
    EXIT_USAGE,
    ResultRow,
    main,
    parse_config,
    reference_table,
    run_table,
)
from formalpowers.exceptions import ConfigError


def write_config(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


BVP = """
[equation]
tag = "yukawa"
c = 1.0

[domain]
kind = "disk"

[solver]
N = 32

[reference]
tag = "exp_cx"
tolerance = 1e-12
"""


def test_parse_minimal_config():
    cfg = parse_config({"equation": {"tag": "laplace"}})
    assert cfg.N == 14
    assert cfg.domain == "disk"
    assert cfg.rule.nodes_per_segment == 24


@pytest.mark.parametrize(
    "tbl, key",
    [
        ({}, "equation.tag"),
        ({"equation": {"tag": "heat"}}, "equation.tag"),
        ({"equation": {"tag": "laplace"}, "domain": {"kind": "square"}}, "domain.kind"),
        ({"equation": {"tag": "laplace"}, "solver": {"N": "many"}}, "solver.N"),
        ({"equation": {"tag": "laplace"}, "solver": {"N": 10, "points": 5}}, "solver.points"),
        ({"equation": {"tag": "laplace"}, "bc": {"operator": "robin"}}, "bc.operator"),
        ({"equation": {"tag": "laplace"}, "reference": {"tag": "exp_cx"}}, "reference.tag"),
        ({"equation": {"tag": "laplace", "lambda_range": [3.0, 1.0]}}, "equation.lambda_range"),
        ({"equation": {"tag": "laplace"}, "quadrature": {"mode": "trapezoid"}}, "quadrature.mode"),
    ],
)
def test_config_errors_name_the_key(tbl, key):
    with pytest.raises(ConfigError) as info:
        parse_config(tbl)
    assert key in str(info.value)


def test_result_row_tolerance():
    assert ResultRow("t", "err", 1e-9, tolerance=1e-8).passed is True
    assert ResultRow("t", "err", 1e-7, tolerance=1e-8).passed is False
    assert ResultRow("t", "err", 1e-7).passed is None


def test_reference_tables_are_packaged():
    rows = reference_table("table2")
    assert [int(r["N"]) for r in rows][:2] == [8, 14]
    roots = [r["reference"] for r in reference_table("eigen")]
    assert roots[0] == pytest.approx(2.404825557695773)


def test_unknown_table():
    with pytest.raises(ConfigError):
        run_table("4")


def test_table_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--quiet", "table", "1", "--output", str(a)]) == EXIT_OK
    assert main(["--quiet", "table", "1", "--output", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(CSV_FIELDS)
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert "numpy" in meta["versions"]
    assert all(r["passed"] != "false" for r in read_rows(a))


def test_bvp_run(tmp_path):
    out = tmp_path / "bvp.csv"
    assert main(["--quiet", "bvp", "--config", write_config(tmp_path, BVP), "--output", str(out)]) == EXIT_OK
    rows = read_rows(out)
    err = [r for r in rows if r["quantity"] == "max_abs_error"][0]
    assert float(err["value"]) < 1e-12
    assert sum(r["quantity"] == "coefficient" for r in rows) == 33


def test_bvp_tolerance_failure(tmp_path):
    cfg = BVP.replace("N = 32", "N = 6")
    out = tmp_path / "bvp.csv"
    assert main(["--quiet", "bvp", "--config", write_config(tmp_path, cfg), "--output", str(out)]) == EXIT_TOLERANCE


def test_harmonic_neumann(tmp_path):
    cfg = """
[equation]
tag = "laplace"
[domain]
kind = "ellipse"
e = 0.5
[solver]
N = 12
[bc]
operator = "neumann"
[reference]
tag = "harmonic_x"
tolerance = 1e-12
"""
    out = tmp_path / "h.csv"
    assert main(["--quiet", "bvp", "--config", write_config(tmp_path, cfg), "--output", str(out)]) == EXIT_OK


def test_usage_errors(tmp_path):
    bad = write_config(tmp_path, "[equation]\ntag = 'heat'\n")
    assert main(["--quiet", "bvp", "--config", bad]) == EXIT_USAGE
    assert main(["--quiet", "bvp", "--config", str(tmp_path / "missing.toml")]) == EXIT_USAGE
    broken = write_config(tmp_path, "[equation\n", "broken.toml")
    assert main(["--quiet", "bvp", "--config", broken]) == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["table", "42"])
    assert info.value.code == EXIT_USAGE


def test_numerical_error(tmp_path):
    # an ill-conditioned collocation matrix is a numerical error
    cfg = BVP.replace('kind = "disk"', 'kind = "peaked"\nheight = 3.0').replace("N = 32", "N = 80")
    out = tmp_path / "p.csv"
    assert main(["--quiet", "bvp", "--config", write_config(tmp_path, cfg), "--output", str(out)]) == EXIT_NUMERICAL


def test_eigen_run(tmp_path):
    cfg = """
[equation]
tag = "laplace"
lambda_range = [2.2, 2.6]
[solver]
N = 15
"""
    out = tmp_path / "e.csv"
    assert main(["--quiet", "eigen", "--config", write_config(tmp_path, cfg), "--output", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 1
    assert float(rows[0]["lambda"]) == pytest.approx(2.404825557695773, abs=1e-6)


def test_eigen_needs_range(tmp_path):
    cfg = write_config(tmp_path, "[equation]\ntag = 'laplace'\n")
    assert main(["--quiet", "eigen", "--config", cfg, "--output", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_basis_dump(tmp_path):
    cfg = write_config(tmp_path, "[equation]\ntag = 'yukawa'\nc = 2.0\n[solver]\nN = 5\n")
    dump = tmp_path / "basis.csv"
    assert main(["--quiet", "basis", "--config", cfg, "--dump", str(dump), "--output", str(tmp_path / "o.csv")]) == EXIT_OK
    lines = dump.read_text().splitlines()
    assert lines[0] == "x,y,u0,u1,u2,u3,u4,u5"
    assert len(lines) > 500
