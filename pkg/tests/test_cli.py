import json
import os

import numpy as np
import pytest
import sympy as sp

from chargechaos import cli
from chargechaos.config import read_flat, resolve, validate
from chargechaos.series import ObservableSeries
from chargechaos.weingarten import OperatorWord, haar_moment


def _cfg(**raw):
    raw = {k: str(v) for k, v in raw.items()}
    cfg, diags = resolve(raw)
    return cfg, diags


def _fields(diags):
    return {f for f, _ in diags}


# ---------------------------------------------------------------- validation

def test_validate_examples():
    _, d = _cfg(experiment="sff", t_min=0, spacing="log")
    assert "time_grid.t_min" in _fields(d)
    _, d = _cfg(experiment="sff", ensemble="csyk", n=7)
    assert _fields(d) == {"ensemble.n"}
    cfg, d = _cfg(experiment="sff", ensemble="csyk", n=8)
    assert d == [] and validate(cfg) == []


def test_validate_other_fields():
    assert "time_grid.points" in _fields(_cfg(experiment="fp", points=1)[1])
    assert "ensemble.kind" in _fields(_cfg(experiment="sff", ensemble="goe")[1])
    assert "params.operators" in _fields(_cfg(experiment="otoc", operators="ZZ,II")[1])
    assert "params.wiring" in _fields(_cfg(experiment="moment", wiring="p=2 wiring {1,2,2}")[1])
    assert "params.m_a" in _fields(_cfg(experiment="hp", m_a=5)[1])
    assert "experiment" in _fields(_cfg(experiment="nope")[1])
    assert "ensemble.n" in _fields(_cfg(experiment="sff", n="eight")[1])
    assert "bogus" in _fields(_cfg(experiment="sff", bogus=1)[1])
    # parameters of other experiments are not checked
    assert _cfg(experiment="sff", m_a=5)[1] == []


def test_exit_code_for_invalid_config(capsys):
    assert cli.main(["sff", "--t", "0:100:log:64"]) == 2
    assert "time_grid.t_min" in capsys.readouterr().err
    assert cli.main(["sff", "--ensemble", "csyk", "--n", "9"]) == 2
    assert "ensemble.n" in capsys.readouterr().err
    assert cli.main(["sff", "--set", "nonsense"]) == 2
    assert cli.main(["run"]) == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(run):
        raise np.linalg.LinAlgError("eigensolver did not converge")
    monkeypatch.setitem(cli.EXPERIMENT_FUNCS, "sff", boom)
    assert cli.main(["sff", "--output", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# desk run\nexperiment = sff\nensemble = gue_per_sector\nn = 5   # qubits\n"
                 "t = 1:10:linear:5\nrealizations = 7\n")
    raw = read_flat(f)
    assert raw["t_min"] == "1" and raw["spacing"] == "linear"
    args = cli.build_parser().parse_args(["run", "--config", str(f), "--n", "6"])
    cfg, d = cli.config_from_args(args)
    assert d == []
    assert cfg.ensemble.kind == "gue_per_sector" and cfg.ensemble.size == 6
    assert cfg.ensemble.realizations == 7 and cfg.time_grid.points == 5


def test_large_flag():
    args = cli.build_parser().parse_args(["sff", "--large", "--check"])
    cfg, _ = cli.config_from_args(args)
    assert (cfg.ensemble.size, cfg.ensemble.realizations) == (12, 2000)
    args = cli.build_parser().parse_args(["fp", "--large", "--n", "8"])
    cfg, _ = cli.config_from_args(args)
    assert (cfg.ensemble.size, cfg.ensemble.realizations) == (8, 1500)


def test_output_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CHARGECHAOS_OUTPUT", str(tmp_path))
    cfg, _ = _cfg(experiment="ek-scan")
    assert cfg.output == os.path.join(str(tmp_path), "ek-scan")


# ---------------------------------------------------------------- moment

def test_moment_subcommand(capsys):
    assert cli.main(["moment", "p=2 wiring {1,2,1,2}"]) == 0
    out = capsys.readouterr().out.strip()
    d = sp.Symbol("d", positive=True, integer=True)
    word = OperatorWord.from_pattern([1, 2, 1, 2], ["X1", "Y1", "X2", "Y2"])
    res = haar_moment(word, d)
    assert out == res.format()
    assert "X1.X2" in out and "Tr[Y1]*Tr[Y2]*d" in out
    # coefficient of X1.X2 Tr[Y1] Tr[Y2] is d / (d (d^2 - 1))
    c = res.coefficient(("X1", "X2"), (("Y1",), ("Y2",)))
    assert sp.simplify(c - d / (d * (d**2 - 1))) == 0


def test_parse_wiring():
    assert cli.parse_wiring("p=1 wiring {1,2}") == (1, (1, 2))
    with pytest.raises(ValueError):
        cli.parse_wiring("p=2 wiring {1,3,1,2}")


# ---------------------------------------------------------------- runs

def _run(tmp_path, name, *args, workers=1):
    out = tmp_path / name
    assert cli.main([*args, "--output", str(out), "--workers", str(workers)]) == 0
    return out


def _csv_bytes(out):
    return {p: (out / p).read_bytes() for p in sorted(os.listdir(out)) if p.endswith(".csv")}


def test_sff_run_morphology(tmp_path):
    out = _run(tmp_path, "sff", "sff", "--ensemble", "csyk", "--n", "8", "--realizations", "200",
               "--t", "0.1:100:log:64")
    s = ObservableSeries.from_csv(out / "sff_R2.csv")
    assert len(s) == 64 and s.realizations == 200
    assert (out / "sff_R2.csv").read_text().splitlines()[0] == "t,value,std_error,n"
    m = json.loads((out / "manifest.json").read_text())["summary"]["morphology"]
    assert m["dip_before_plateau"]
    assert m["plateau_relative_error"] < 0.2


def test_manifest_contents(tmp_path):
    out = _run(tmp_path, "ek", "ek-scan")
    text = (out / "manifest.json").read_text()
    m = json.loads(text)
    assert text == json.dumps(m, sort_keys=True, indent=2) + "\n"
    assert m["config"]["experiment"] == "ek-scan" and m["seed"] == 0
    assert set(m["files"]) == {"ek_scan.csv"}
    assert m["summary"]["violations"] > 0


@pytest.mark.parametrize("args", [
    ("sff", "--n", "6", "--realizations", "40", "--t", "0.1:50:log:12"),
    ("kinv", "--n", "4", "--realizations", "12", "--t", "0.5:20:log:6"),
    ("otoc", "--n", "4", "--realizations", "10", "--t", "0.5:20:log:6"),
    ("dos", "--n", "6", "--realizations", "30"),
    ("hp-scan", "--samples", "50"),
])
def test_byte_identical_across_workers_and_reruns(tmp_path, args):
    a = _run(tmp_path, "a", *args, workers=1)
    b = _run(tmp_path, "b", *args, workers=4)
    assert _csv_bytes(a) == _csv_bytes(b)
    # the manifest alone reproduces the run
    c = tmp_path / "c"
    assert cli.main(["run", "--config", str(a / "manifest.json"), "--output", str(c),
                     "--workers", "3"]) == 0
    assert _csv_bytes(c) == _csv_bytes(a)
    ma = json.loads((a / "manifest.json").read_text())
    mc = json.loads((c / "manifest.json").read_text())
    assert ma["files"] == mc["files"]


def test_seed_changes_output(tmp_path):
    a = _run(tmp_path, "a", "sff", "--n", "4", "--realizations", "5", "--t", "0.1:1:log:4")
    b = _run(tmp_path, "b", "sff", "--n", "4", "--realizations", "5", "--t", "0.1:1:log:4",
             "--seed", "1")
    assert _csv_bytes(a) != _csv_bytes(b)


def test_plots_are_optional_extras(tmp_path):
    pytest.importorskip("matplotlib")
    out = _run(tmp_path, "p", "sff", "--n", "4", "--realizations", "5", "--t", "0.1:1:log:4",
               "--plot")
    assert (out / "sff_R2.png").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert all(name.endswith(".csv") for name in m["files"])


def test_table_outputs(tmp_path):
    out = _run(tmp_path, "page", "page", "--samples", "200")
    rows = (out / "page.csv").read_text().splitlines()
    assert rows[0] == "q,d_q,analytic,mc,mc_std_error,one_norm_bound"
    assert len(rows) == 1 + 7
    out = _run(tmp_path, "kl", "kl", "--samples", "500")
    rows = (out / "kl.csv").read_text().splitlines()
    assert len(rows) == 5 and rows[1].startswith("8,8,")
