import json

import numpy as np
import pytest

from nonlocal_kinetics import cli
from nonlocal_kinetics.cli import load_config, main
from nonlocal_kinetics.errors import ConfigError


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def test_table_command(tmp_path):
    assert main(["table", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "coeffs.csv")
    assert header == ["eps", "n1", "n2", "k", "source", "abs_diff"]
    closed = {(float(r[0]), int(r[1]), int(r[2])): float(r[3]) for r in rows if r[4] == "closed_form"}
    assert closed[(0.85, 0, 0)] == pytest.approx(0.337, rel=5e-3)
    assert all(closed[(e, 1, j)] == 0.0 for e in (0.85, 1.0) for j in range(5))
    assert max(float(r[5]) for r in rows) < 1e-5 * 0.34
    manifest = (tmp_path / "run_manifest").read_text()
    assert "command=table" in manifest and "numerics.D=0.01" in manifest


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["sigma", "--out", str(out)]) == 0
    assert (a / "sigma.csv").read_bytes() == (b / "sigma.csv").read_bytes()
    header, rows = read_csv(a / "sigma.csv")
    assert header == ["eps", "t", "sigma", "sigma_ode_oracle", "rel_diff"]
    first = {float(r[0]): float(r[2]) for r in rows if float(r[1]) == 0.0}
    assert first[0.85] == pytest.approx(4.08407, abs=5e-6)
    assert first[1.0] == pytest.approx(3.14159, abs=5e-6)
    assert max(float(r[4]) for r in rows) < 1e-8


@pytest.mark.parametrize("command, files", [
    ("field", ["field.csv"]),
    ("germ", ["germ.csv"]),
    ("residual", ["residual.csv"]),
    ("modes", ["modes.csv", "moments_check.csv"]),
])
def test_pipeline_commands(tmp_path, command, files):
    assert main([command, "--out", str(tmp_path), "--override", "numerics.times=0, 1"]) == 0
    for name in files:
        header, rows = read_csv(tmp_path / name)
        assert rows and all(len(r) == len(header) for r in rows)


def test_field_section_symmetric_with_dip(tmp_path):
    main(["field", "--out", str(tmp_path), "--override", "numerics.times=0", "--override", "grid.x1_points=201"])
    _, rows = read_csv(tmp_path / "field.csv")
    v = np.array([float(r[3]) for r in rows])
    np.testing.assert_allclose(v, v[::-1], rtol=1e-12, atol=1e-300)
    assert v[100] < v[99]


def test_germ_columns(tmp_path):
    main(["germ", "--out", str(tmp_path)])
    header, rows = read_csv(tmp_path / "germ.csv")
    assert header[:5] == ["t", "W1p", "W1m", "Z1p", "Z1m"]
    assert float(rows[0][2]) < 0  # W(-) is written without the sign flip
    assert max(abs(float(r[-1])) for r in rows) < 1e-8


def test_check_linear_case_passes(tmp_path):
    assert main(["check", "--out", str(tmp_path), "--override", "numerics.kappa=0"]) == 0
    summary = json.loads((tmp_path / "check_summary.json").read_text())
    assert {s["suite"] for s in summary} >= {"skew_product", "ladder", "ale_residual", "exact_linear"}
    assert all(s["passed"] for s in summary)


def test_check_coarse_step_fails(tmp_path, capsys):
    assert main(["check", "--out", str(tmp_path), "--override", "numerics.dt=0.2"]) == cli.EXIT_CHECK
    out = capsys.readouterr().out
    assert "FAIL skew_product" in out


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[numerics]\nD = 0.01\ntypo_key = 3\n")
    assert main(["table", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "bad.ini:3" in capsys.readouterr().err
    bad.write_text("[numerics]\n\nD = -1\n")
    with pytest.raises(ConfigError, match="bad.ini:3"):
        load_config(str(bad))
    bad.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError, match="bad.ini:1"):
        load_config(str(bad))
    with pytest.raises(ConfigError):
        load_config(None, ["numerics.D"])
    with pytest.raises(ConfigError):
        load_config(None, ["numerics.n_max=two"])


def test_numerical_error_exit(tmp_path):
    assert main(["sigma", "--out", str(tmp_path), "--override", "numerics.D=0.04"]) == cli.EXIT_NUMERICAL


def test_config_file_and_tabulated_inputs(tmp_path):
    t = np.linspace(0, 5, 201)
    table = tmp_path / "rates.csv"
    np.savetxt(table, np.column_stack([t, np.exp(-t), 0.4 - 0.2 * np.exp(-t), 0.5 * np.exp(-t)]),
               delimiter=",", header="t,a,b,diffusion", comments="")
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[coefficients]\nkind = tabulated\ntable = {table}\n[output]\ndir = {tmp_path / 'o'}\n")
    assert main(["sigma", "--config", str(cfg)]) == 0
    _, rows = read_csv(tmp_path / "o" / "sigma.csv")
    # the default exponential coefficients give sigma(5) = 0.82982 for eps = 0.85
    last = [r for r in rows if r[0] == "0.85"][-1]
    assert float(last[2]) == pytest.approx(0.82982, abs=2e-4)


def test_gridded_initial_file(tmp_path):
    from nonlocal_kinetics.hermite import double_gaussian
    cfg = load_config(None, ["grid.x1_points=201", "grid.x2_points=201"])
    X = np.stack(cfg.grid().mesh(), -1)
    phi = double_gaussian(X, 1, 1.3, 1, 0.0, 0.01)
    path = tmp_path / "ic.csv"
    np.savetxt(path, np.column_stack([X[..., 0].ravel(), X[..., 1].ravel(), phi.ravel()]), delimiter=",",
               header="x1,x2,phi", comments="")
    args = ["field", "--out", str(tmp_path), "--override", "initial.kind=file", "--override", f"initial.path={path}",
            "--override", "grid.x1_points=201", "--override", "grid.x2_points=201", "--override", "numerics.times=0"]
    assert main(args) == 0
    _, rows = read_csv(tmp_path / "field.csv")
    np.testing.assert_allclose([float(r[3]) for r in rows], phi[:, 100], rtol=1e-5, atol=1e-12)
