import csv
import json
import os
import subprocess
import sys

import pytest

from obversim import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_check_density_ok(tmp_path):
    code, out = run(tmp_path, "check-density", "--case", "3")
    assert code == cli.EXIT_OK
    report = json.loads((out / "density_check.json").read_text())
    assert abs(report["normalization_integral"] - 1) < 1e-12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "check-density"
    assert manifest["config"]["case"] == "3"
    assert manifest["outputs"][0]["path"] == "density_check.json"


def test_check_density_flags_unnormalized_custom(tmp_path):
    code, _ = run(tmp_path, "check-density", "--case", "custom", "--harmonics", "0:1:0;1:0.5:0",
                  "--normalization", "1.0")
    assert code == cli.EXIT_CHECK
    code, _ = run(tmp_path, "check-density", "--case", "custom", "--harmonics", "0:1:0;1:0.5:0",
                  "--polar-exponent", "2", name="ok")
    assert code == cli.EXIT_OK


def test_omega_hist(tmp_path):
    code, out = run(tmp_path, "omega-hist", "--case", "2a", "--axis", "0,1,0", "--n", "5000", "--seed", "3")
    assert code == 0
    rows = read_csv(out / "omega_hist.csv")
    assert rows[0] == ["bin_center", "count", "probability_density"]
    assert sum(int(r[1]) for r in rows[1:]) == 5000
    assert rows[1][0] == repr(float(rows[1][0]))


def test_esft_holds(tmp_path):
    code, out = run(tmp_path, "esft", "--case", "1a", "--axis", "1,0,0", "--angle", "2.1",
                    "--n", "1000000", "--seed", "7")
    assert code == 0
    report = json.loads((out / "esft_report.json").read_text())
    assert report["verdict"] == "holds"
    assert 0.95 <= report["slope"] <= 1.05
    assert read_csv(out / "log_ratio.csv")[0] == ["omega", "log_ratio", "weight"]


def test_esft_quadrature_mode(tmp_path):
    code, out = run(tmp_path, "esft", "--case", "2a", "--axis", "0,1,0", "--mode", "quadrature")
    assert code == 0
    report = json.loads((out / "esft_report.json").read_text())
    assert report["verdict"] == "violated"
    assert report["mode"] == "quadrature"


def test_mean_curve_uniform(tmp_path):
    code, out = run(tmp_path, "mean-curve", "--case", "uniform", "--axis", "0,0,1",
                    "--t-grid", "-6.283:6.283:101")
    assert code == 0
    rows = read_csv(out / "mean_curve.csv")
    assert rows[0] == ["t", "mean_omega", "ifr_value"]
    assert len(rows) == 102
    assert all(float(r[1]) == 0.0 for r in rows[1:])
    assert float(rows[1][0]) == -6.283


def test_asymmetry(tmp_path):
    code, out = run(tmp_path, "asymmetry", "--case", "3", "--axis", "0,0,1", "--t-grid", "0:3:7")
    assert code == 0
    rows = read_csv(out / "asymmetry.csv")
    assert len(rows) == 8
    assert max(abs(float(r[-1])) for r in rows[1:]) > 0.01


def test_symmetry(tmp_path):
    code, out = run(tmp_path, "symmetry", "--case", "2b", "--axis", "0,0,1")
    assert code == 0
    assert json.loads((out / "symmetry.json").read_text())["predicted"] is True


def test_table2_small(tmp_path):
    code, out = run(tmp_path, "table2", "--n", "10000000", "--mode", "quadrature")
    rows = read_csv(out / "table2.csv")
    assert rows[0][:4] == ["case", "axis", "predicted", "empirical"]
    assert len(rows) == 16
    assert all(r[-1] == "true" for r in rows[1:])
    assert code == cli.EXIT_OK


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\ncase = 2b\naxis = 0, 0, 1   # z\nn = 2000\nseed = 5\n")
    code, out = run(tmp_path, "omega-hist", "--config", str(cfg), "--seed", "6")
    assert code == 0
    conf = json.loads((out / "manifest.json").read_text())["config"]
    assert conf["case"] == "2b" and conf["seed"] == 6 and conf["n"] == 2000


def test_config_round_trip():
    c = cli.ExperimentConfig.from_mapping({"case": "1b", "u": "0,1,0", "beta": "0.5", "t_grid": "-1:1:5"})
    mapping = {k: v for k, v in c.to_mapping().items() if v is not None}
    text = {k: ",".join(map(str, v)) if isinstance(v, list) else str(v) for k, v in mapping.items()}
    text["t_grid"] = ":".join(map(str, mapping["t_grid"]))
    assert cli.ExperimentConfig.from_mapping(text) == c


@pytest.mark.parametrize(
    "args",
    [
        ["omega-hist", "--n", "-1"],
        ["omega-hist", "--axis", "0,0,0"],
        ["omega-hist", "--axis", "1,0"],
        ["omega-hist", "--bin-width", "0"],
        ["omega-hist", "--case", "7"],
        ["omega-hist", "--frobnicate", "1"],
        ["mean-curve", "--t-grid", "0:1:0"],
        ["check-density", "--case", "custom"],
        ["check-density", "--case", "custom", "--harmonics", "0:1:0;1:3:0"],
        ["nonsense"],
    ],
)
def test_validation_errors_exit_1(tmp_path, args, capsys):
    code, _ = run(tmp_path, *args)
    assert code == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("cases = 1a\n")
    code, _ = run(tmp_path, "esft", "--config", str(cfg))
    assert code == cli.EXIT_CONFIG
    assert "cases" in capsys.readouterr().err


def test_pathological_density_exits_2(tmp_path):
    harmonics = ";".join(["0:1:0"] + [f"{k}:{2 * (1 - k / 21)}:0" for k in range(1, 21)])
    code, _ = run(tmp_path, "omega-hist", "--case", "custom", "--polar-exponent", "1020",
                  "--harmonics", harmonics, "--n", "10")
    assert code == cli.EXIT_RUNTIME


def _data(path):
    return path.read_bytes()


def test_outputs_independent_of_thread_count(tmp_path):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, OBVERSIM_THREADS=threads)
        subprocess.run(
            [sys.executable, "-m", "obversim", "omega-hist", "--case", "3", "--axis", "0,1,0",
             "--n", "800000", "--seed", "11", "--out", str(out)],
            check=True, env=env,
        )
        outs.append(_data(out / "omega_hist.csv"))
    assert outs[0] == outs[1]


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 2.0943951023931953, -1e-300):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(True) == "true"
    assert cli.fmt(float("inf")) == "inf"
