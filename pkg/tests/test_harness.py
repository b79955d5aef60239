import json
import math
from pathlib import Path

import numpy as np
import pytest

from gradflow import harness, rates
from gradflow.harness import cli

SMOOTH = """
[defaults]
output = out
seed = 7

[quad]
kind = smooth-ls
preset = quadratic
n = 3000
alpha_lo = 0.45
alpha_hi = 0.55
"""


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_parse_values():
    assert harness.parse_value("3") == 3
    assert harness.parse_value("2.5e-4") == 2.5e-4
    assert harness.parse_value("yes") is True
    assert harness.parse_value("disc") == "disc"
    assert harness.parse_value("0.25, 0.5,1") == [0.25, 0.5, 1]


def test_config_defaults_and_paths(tmp_path):
    cfgs = harness.loads_config(SMOOTH + "\n[cert]\nkind = certify-kl\ncloud = c.csv ; relative\n",
                                tmp_path)
    quad, cert = cfgs
    assert quad.kind == "smooth-ls" and quad.seed == 7
    assert quad.get("n") == 3000
    assert quad.directory == tmp_path / "out" / "quad"
    assert cert.get("cloud") == str(tmp_path / "c.csv")


@pytest.mark.parametrize("text", [
    "[a]\nkind = nonsense\n",
    "[a]\npreset = disc\n",
    "[a]\nkind = tv-dirichlet\npreset = square\n",
    "[a]\nkind = certify-kl\n",
    "[a]\nkind = wflow\nseed = 1.5\n",
    "[defaults]\nseed = 1\n",
    "kind = wflow\n",
])
def test_config_errors(text):
    with pytest.raises(harness.ConfigError):
        harness.loads_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(harness.ConfigError):
        harness.load_config(tmp_path / "absent.ini")


def test_gradient_check_catches_wrong_gradient():
    with pytest.raises(harness.GradientCheckError):
        harness.SmoothEnergy(2, lambda x: float(x @ x), lambda x: x, np.zeros(2))


def test_registry():
    assert {"quadratic", "quartic", "coscup", "polynomial"} <= set(harness.ENERGIES)
    with pytest.raises(ValueError):
        harness.make_energy("rosenbrock")
    E = harness.make_energy("polynomial", coeffs=[0.0, -1.0, 0.0, 1.0 / 3.0])
    np.testing.assert_allclose(E.phi, 1.0)


@pytest.mark.parametrize("v0", [[1.0, 0.0], [0.3, -2.0]])
def test_line_talweg_quadratic(v0):
    E = harness.make_energy("quadratic")
    tal = harness.smooth_line_talweg(E, E.phi, v0, 0.5)
    r = tal.r
    np.testing.assert_allclose(tal.h, 0.5 * r ** 2 * float(np.dot(v0, v0)), rtol=1e-12)
    # sqrt(h) / |E'| = sqrt(r^2 |v0|^2 / 2) / (r |v0|) on the line and in the ball
    assert tal.C == pytest.approx(1 / math.sqrt(2), rel=0.01)


def test_line_talweg_taylor_table():
    E = harness.make_energy("coscup")
    tal = harness.smooth_line_talweg(E, E.phi, [0.6, 0.8], 0.5)
    errs = [abs(row["ratio"] - row["limit"]) for row in tal.taylor]
    assert tal.taylor[0]["limit"] == pytest.approx(0.5)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-4


def test_line_talweg_rejects_degenerate_direction():
    E = harness.make_energy("quadratic")
    with pytest.raises(ValueError):
        harness.smooth_line_talweg(E, E.phi, E.phi, 0.5)


def test_line_talweg_rejects_descent_direction():
    E = harness.make_energy("saddle")
    with pytest.raises(ValueError):
        harness.smooth_line_talweg(E, E.phi, [0.0, 1.0], 0.5)


@pytest.mark.parametrize("name", ["quadratic", "quartic", "coscup"])
def test_stability_of_minima(name):
    E = harness.make_energy(name)
    rep = harness.stability_probe(E, E.phi, eps=[0.2, 0.4], deltas=[0.05, 0.1, 0.2], horizon=1.0)
    assert rep.local_min
    assert all(v["verdict"] == "STABLE" for v in rep.verdicts.values())
    if name == "quadratic":
        assert rep.verdicts[0.2]["delta"] >= 0.1


def test_saddle_is_unstable():
    E = harness.make_energy("saddle")
    rep = harness.stability_probe(E, E.phi, eps=[0.2], deltas=[0.01, 0.05], horizon=3.0)
    assert not rep.local_min
    assert rep.verdicts[0.2]["verdict"] == "UNSTABLE"


def test_rates_table_run(tmp_path):
    cfg = harness.loads_config("[tbl]\nkind = rates-table\np = 2, 3\nalpha = 0.25, 0.5, 1\n",
                               tmp_path)[0]
    res = harness.run_experiment(cfg)
    assert res["passed"]
    table = json.loads((Path(res["directory"]) / "report.json").read_text())["table"]
    assert len(table) == 6
    for row in table:
        assert row["regime"] == rates.classify(row["p"], row["alpha"])


def test_smooth_ls_run(tmp_path):
    res = harness.run_experiment(harness.loads_config(SMOOTH, tmp_path)[0])
    assert res["passed"], res["criteria"]
    rep = json.loads((Path(res["directory"]) / "report.json").read_text())
    assert rep["alpha_regression"] == pytest.approx(0.5, abs=0.05)
    assert rep["line_talweg"]["C"] == pytest.approx(1 / math.sqrt(2), rel=0.01)
    for c in rep["criteria"]:
        assert isinstance(c["slack"], float)
    assert (Path(res["directory"]) / "slope_vs_entropy.svg").read_text().startswith("<?xml")


def test_runs_are_bit_identical(tmp_path):
    a = harness.run_experiment(harness.loads_config(SMOOTH, tmp_path / "a")[0])
    b = harness.run_experiment(harness.loads_config(SMOOTH, tmp_path / "b")[0])
    assert tree_bytes(Path(a["directory"])) == tree_bytes(Path(b["directory"]))


def test_no_scratch_left_behind(tmp_path):
    cfg = harness.loads_config(SMOOTH, tmp_path)[0]
    harness.run_experiment(cfg)
    harness.run_experiment(cfg)
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["quad"]


def test_failed_runner_cleans_up(tmp_path):
    cfg = harness.ExperimentConfig("bad", "certify-kl", {"cloud": str(tmp_path / "none.csv")},
                                   str(tmp_path / "out"))
    with pytest.raises(FileNotFoundError):
        harness.run_experiment(cfg)
    assert list((tmp_path / "out").iterdir()) == []


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("GRADFLOW_WORKERS", "2")
    assert harness.worker_cap(5) == 2
    assert harness.worker_cap(1) == 1
    monkeypatch.setenv("GRADFLOW_WORKERS", "0")
    assert harness.worker_cap(3) == 1


def test_batch_keeps_order(tmp_path, monkeypatch):
    monkeypatch.setenv("GRADFLOW_WORKERS", "2")
    text = "".join(f"[t{i}]\nkind = rates-table\nalpha = {a}\n" for i, a in enumerate((0.3, 0.5, 1)))
    res = harness.run_batch(harness.loads_config(text, tmp_path))
    assert [r["name"] for r in res] == ["t0", "t1", "t2"]
    assert all(r["passed"] for r in res)


def test_cli_rates(capsys):
    assert cli.main(["rates", "--p", "2", "--alpha", "1", "--c", "1", "--e0", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regime"] == "extinction" and out["t_hat"] == pytest.approx(0.5)


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text(SMOOTH)
    assert cli.main(["run", str(good)]) == 0
    assert "PASS  quad:" in capsys.readouterr().out
    bad = tmp_path / "bad.ini"
    bad.write_text(SMOOTH.replace("alpha_lo = 0.45", "alpha_lo = 0.9").replace("0.55", "1.0"))
    assert cli.main(["run", str(bad)]) == 1
    assert "FAIL  quad: alpha_regression" in capsys.readouterr().out
    broken = tmp_path / "broken.ini"
    broken.write_text("[x]\nkind = teleport\n")
    assert cli.main(["run", str(broken)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == 2


def test_cli_certify_kl(tmp_path, capsys):
    r = np.geomspace(1e-4, 1e-1, 200)
    cloud = tmp_path / "cloud.csv"
    cloud.write_text("r,g\n" + "".join(f"{float(a)!r},{math.sqrt(2 * a)!r}\n" for a in r))
    code = cli.main(["certify-kl", str(cloud), "--C", "2", "--bins", "16",
                     "--out", str(tmp_path / "out")])
    assert code == 0
    assert "PASS  certify-cloud: KL certificate margin >= 0" in capsys.readouterr().out


def test_cli_tv_neumann(tmp_path, capsys):
    cfg = tmp_path / "tv.ini"
    cfg.write_text("[half]\nkind = tv-neumann\npreset = half\nn = 64\ntau = 0.001\nhorizon = 0.5\n")
    assert cli.main(["tv", "neumann", str(cfg)]) == 0
    d = tmp_path / "out" / "half"
    assert {"report.json", "energy.svg", "distance.svg"} <= {p.name for p in d.iterdir()}


def test_smooth_ls_cloud_reloads(tmp_path):
    res = harness.run_experiment(harness.loads_config(SMOOTH, tmp_path)[0])
    from gradflow.klcert import read_cloud_csv
    cloud = read_cloud_csv(Path(res["directory"]) / "cloud.csv")
    assert len(cloud) == 3000 and cloud.dist is not None
