import csv
import subprocess
import sys

import numpy as np
import pytest

from snetfdr import experiments as E
from snetfdr.cli import main
from snetfdr.config import ConfigError, parse_config
from snetfdr.distributions import Gaussian
from snetfdr.snet import Scenario, Sensing

SMALL_INI = """
[scenario]
grid_width = 20
grid_height = 20
num_objects = 1
sensing = ideal
alt_noise = gaussian(0, 0.05)

[experiment]
procedure = dtbh
gamma = 0.15
trials = 3
master_seed = 4
"""


def _read(path):
    raw = path.read_bytes()
    assert b"\r" not in raw
    return list(csv.reader(raw.decode("utf-8").splitlines()))


def test_parse_config():
    cfg = parse_config(SMALL_INI)
    assert cfg.scenario.grid_width == 20 and cfg.scenario.alt_noise == Gaussian(0, 0.05)
    assert cfg.procedure == "dtbh" and cfg.trials == 3 and cfg.budget is None
    cfg = parse_config("[scenario]\nsensing = nonideal\nnonideal_xi_range = 0, 0.2\n[experiment]\nbudget = 40\n")
    assert cfg.scenario.sensing is Sensing.NONIDEAL and cfg.scenario.nonideal_xi_range == (0.0, 0.2)
    assert cfg.budget == 40


@pytest.mark.parametrize(
    "text",
    [
        "[scenario]\ncolour = red\n",
        "[weird]\nx = 1\n",
        "[experiment]\nprocedure = magic\n",
        "[experiment]\ntrials = 0\n",
        "[scenario]\nnull_noise = gaussian(0)\n",
        "[scenario]\ngrid_width = many\n",
        "no section header",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_experiment_config_validation(tmp_path):
    with pytest.raises(ValueError):
        E.ExperimentConfig(procedure="nope")
    with pytest.raises(ValueError):
        E.ExperimentConfig(trials=0)


@pytest.mark.parametrize("proc", E.PROCEDURES)
def test_run_experiment_outputs(proc, tmp_path):
    sc = Scenario(grid_width=15, grid_height=15, num_objects=1)
    cfg = E.ExperimentConfig(scenario=sc, procedure=proc, trials=2, output_path=str(tmp_path), budget=30)
    summary = E.run_experiment(cfg)
    agg = _read(tmp_path / "aggregate.csv")
    assert agg[0] == E.AGGREGATE_COLUMNS and len(agg) == 2
    assert _read(tmp_path / "trials.csv")[0] == E.TRIAL_COLUMNS
    assert _read(tmp_path / "map_trial0.csv")[0] == ["x", "y", "label", "observation", "selected"]
    assert summary["trials"] == 2 and summary["m"] == 225
    if proc.startswith("distributed"):
        assert summary["mean_messages"] <= 30


def test_parallel_matches_serial(tmp_path):
    sc = Scenario(grid_width=15, grid_height=15, num_objects=1)
    a = E.run_experiment(E.ExperimentConfig(scenario=sc, trials=4, output_path=str(tmp_path / "a")))
    b = E.run_experiment(E.ExperimentConfig(scenario=sc, trials=4, output_path=str(tmp_path / "b"), jobs=2))
    assert a == b
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()


def test_simulate_is_byte_identical(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text(SMALL_INI)
    for d in ("r1", "r2"):
        assert main(["simulate", "--config", str(ini), "--trials", "1", "--seed", "7", "--out", str(tmp_path / d),
                     "--jobs", "1"]) == 0
    for name in ("trials.csv", "aggregate.csv", "map_trial0.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_exit_codes(tmp_path):
    out = str(tmp_path)
    assert main(["simulate", "--gamma", "1.5", "--out", out]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.ini"), "--out", out]) == 2
    assert main(["reproduce", "fig99", "--out", out]) == 2
    assert main(["reproduce", "fig2", "--scale", "2", "--out", out]) == 2
    assert main(["sweep", "--epsilons", "0,x", "--out", out]) == 2
    assert main(["sweep", "--epsilons", "2", "--shape", "smooth", "--out", out]) == 2
    assert main(["transform-dump", "--alternative", "uniform(2,3)", "--out", out]) == 3
    assert main(["transform-dump", "--alternative", "bogus(1)", "--out", out]) == 2


def test_transform_dump(tmp_path):
    assert main(["transform-dump", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "transform.csv")
    assert rows[0] == ["breakpoint", "fhat"]
    fh = np.array([float(r[1]) for r in rows[1:]])
    assert np.all(np.diff(fh) <= 0)
    assert main(["transform-dump", "--null", "gaussian(0,1)", "--alternative", "gaussian(0,3)",
                 "--out", str(tmp_path / "g")]) == 0


def test_sweep(tmp_path):
    assert main(["sweep", "--epsilons", "0,0.1", "--trials", "200", "--seed", "1", "--out", str(tmp_path)]) == 0
    rows = _read(tmp_path / "sweep.csv")
    assert rows[0] == E.SWEEP_COLUMNS and len(rows) == 3
    assert float(rows[2][1]) == pytest.approx(0.1 / 1.1)


def test_help_documents_columns():
    res = subprocess.run([sys.executable, "-m", "snetfdr.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for header in (",".join(E.AGGREGATE_COLUMNS), ",".join(E.SWEEP_COLUMNS), "breakpoint,fhat", "x,y,label,observation"):
        assert header in res.stdout


def test_reproduce_small(tmp_path):
    for fig in ("fig2", "fig10", "fig11"):
        assert main(["reproduce", fig, "--trials", "60", "--seed", "3", "--out", str(tmp_path)]) == 0
        assert _read(tmp_path / f"{fig}.csv")[0][0] == "sparsity"
    rows = E.reproduce("fig12", 0.09, tmp_path, seed=1)
    assert {r["budget"] for r in rows} == {15, 20}
    assert rows[0]["grid"] == 30
    for proc in ("bh", "dtbh"):
        assert (tmp_path / f"fig12_{proc}_budget15.csv").exists()
    with pytest.raises(ValueError):
        E.reproduce("fig7")


def test_null_epsilon_of_nonideal_model():
    sc = E.map_scenario("fig13", 1.0)
    eps = E.null_epsilon(sc)
    assert 0.0 < eps < 0.5
    # no offset, no band
    from dataclasses import replace

    assert E.null_epsilon(replace(sc, nonideal_xi_range=(0.0, 0.0))) == pytest.approx(0.0, abs=1e-12)
