import csv
import json

import numpy as np
import pytest

from dcsnn import cli, harness
from dcsnn import optimizer
from dcsnn.harness import RunConfig
from dcsnn.network import ShallowNetParams, num_params


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_resolution_from_preset():
    cfg = RunConfig(preset="ex2").resolved()
    assert cfg.neurons == 50 and cfg.dist == "random"
    assert cfg.n_test == 40000
    assert cfg.lm == {"loss_tol": 1e-10, "max_iters": 3500}
    cfg = RunConfig(preset="ex2", lm={"max_iters": 3}).resolved()
    assert cfg.lm["max_iters"] == 3


@pytest.mark.parametrize("bad", [{"preset": "ex9"}, {"preset": "ex1", "lm": {"damping": 1}},
                                 {"preset": "ex1", "colour": "red"}])
def test_config_rejects_unknown(bad):
    with pytest.raises(ValueError):
        RunConfig.from_dict(bad)


def test_run_with_zero_iterations_reports_initial_state(tmp_path):
    rec = harness.run(RunConfig(preset="ex1", neurons=10, lm={"max_iters": 0}, out=str(tmp_path)))
    assert rec.iterations == 0 and rec.stop_reason == "max_iters"
    assert rec.final_loss == rec.initial_loss
    assert rec.n_params == 51
    data = json.loads((tmp_path / "record.json").read_text())
    assert data["config"]["neurons"] == 10 and data["status"] == "ok"
    p = ShallowNetParams.from_json(data["params"])
    assert p.N == 10 and p.d == 2


def test_run_outputs(tmp_path):
    cfg = RunConfig(preset="ex1", neurons=6, lm={"max_iters": 20}, error_every=5, out=str(tmp_path))
    rec = harness.run(cfg)
    loss = _read_csv(tmp_path / "loss_history.csv")
    assert len(loss) == rec.iterations + 1
    assert float(loss[-1]["loss"]) == rec.final_loss
    accepted = [float(r["loss"]) for r in loss if r["accepted"] == "1"]
    assert all(b < a for a, b in zip(accepted, accepted[1:]))
    errs = _read_csv(tmp_path / "error_history.csv")
    assert [int(r["iteration"]) for r in errs] == [0, 5, 10, 15, 20]
    assert float(errs[-1]["l_inf"]) == rec.errors["l_inf"]
    pts = _read_csv(tmp_path / "points.csv")
    assert len(pts) == 64 + 32 + 32
    assert {r["role"] for r in pts} == {"interior", "boundary", "interface"}


def test_fit_run_writes_dataset(tmp_path):
    harness.run(RunConfig(preset="fit1d", lm={"max_iters": 2}, out=str(tmp_path)))
    pts = _read_csv(tmp_path / "points.csv")
    assert len(pts) == 100 and set(pts[0]) == {"role", "x1", "z", "target"}


def test_run_is_reproducible():
    cfg = RunConfig(preset="ex3", neurons=5, lm={"max_iters": 15}, error_every=0)
    a, b = harness.run(cfg), harness.run(cfg)
    assert a.loss_history == b.loss_history
    assert a.errors == b.errors and a.params == b.params


def test_seeds_change_the_run():
    a = harness.run(RunConfig(preset="ex1", neurons=5, lm={"max_iters": 0}, init_seed=1, error_every=0))
    b = harness.run(RunConfig(preset="ex1", neurons=5, lm={"max_iters": 0}, init_seed=2, error_every=0))
    assert a.initial_loss != b.initial_loss


def test_sweep_table(tmp_path):
    configs = [
        RunConfig(preset="ex1", neurons=4, lm={"max_iters": 3}, error_every=0),
        RunConfig(preset="ex5", neurons=3, lm={"max_iters": 3}, error_every=0),
        # grid distributions are undefined on a polar domain: this row must fail alone
        RunConfig(preset="ex3", neurons=4, dist="chebyshev", lm={"max_iters": 3}),
    ]
    rows = harness.sweep(configs, out=str(tmp_path))
    assert [r["status"] for r in rows] == ["ok", "ok", "error"]
    table = _read_csv(tmp_path / "sweep.csv")
    assert list(table[0]) == list(harness.SWEEP_COLUMNS)
    for row in table:
        d = {"ex1": 2, "ex3": 2, "ex5": 6}[row["preset"]]
        assert int(row["N_p"]) == num_params(d, int(row["N"]))
    assert table[2]["stop_reason"] == "ValueError"
    with pytest.raises(ValueError):
        harness.sweep([])


def test_threads_env(monkeypatch):
    monkeypatch.setenv("DCSNN_THREADS", "3")
    assert harness.threads() == 3
    monkeypatch.setenv("DCSNN_THREADS", "zero")
    assert harness.threads() == 1
    monkeypatch.delenv("DCSNN_THREADS")
    assert harness.threads() == 1


def test_parallel_sweep_matches_serial(monkeypatch):
    configs = [RunConfig(preset="ex1", neurons=n, lm={"max_iters": 4}, error_every=0) for n in (3, 4)]
    serial = harness.sweep(configs)
    monkeypatch.setenv("DCSNN_THREADS", "2")
    parallel = harness.sweep(configs)
    drop = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]
    assert drop(serial) == drop(parallel)


def test_load_sweep_grid(tmp_path):
    data = {"out": str(tmp_path / "s"), "base": {"preset": "ex1", "lm": {"max_iters": 1}},
            "grid": {"neurons": [10, 20], "dist": ["chebyshev", "random"]}}
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(data))
    configs, out = harness.load_sweep(path)
    assert out == str(tmp_path / "s")
    assert [(c.neurons, c.dist) for c in configs] == [
        (10, "chebyshev"), (10, "random"), (20, "chebyshev"), (20, "random")]
    assert configs[0].out.endswith("ex1_N10_chebyshev")


# -- cli --------------------------------------------------------------------------

def test_cli_run(tmp_path, capsys):
    code = cli.main(["run", "--preset", "ex1", "--neurons", "5", "--dist", "chebyshev", "--seed", "7",
                     "--max-iters", "5", "--out", str(tmp_path)])
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["config"]["init_seed"] == 7 and printed["config"]["test_seed"] == 7
    assert printed["lm"]["max_iters"] == 5
    for name in ("record.json", "loss_history.csv", "error_history.csv", "points.csv"):
        assert (tmp_path / name).exists()


def test_cli_config_file_with_override(tmp_path, capsys):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"preset": "ex1", "neurons": 4, "lm": {"max_iters": 2}}))
    assert cli.main(["run", "--config", str(path), "--neurons", "3", "--error-every", "0"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["config"]["neurons"] == 3 and printed["iterations"] == 2


def test_cli_sweep(tmp_path, capsys):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({"runs": [{"preset": "ex1", "neurons": 3, "lm": {"max_iters": 2}},
                                         {"preset": "ex3", "dist": "uniform", "lm": {"max_iters": 2}}]}))
    code = cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 1  # one row errored
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("preset,N,N_p") and len(lines) == 3
    assert (tmp_path / "o" / "sweep.csv").exists()


def test_cli_preset_and_validate(capsys):
    assert cli.main(["preset", "ex4"]) == 0
    assert json.loads(capsys.readouterr().out)["counts"]["M"] == 216
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out


def test_cli_bad_input_exit_code(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run", "--preset", "ex1", "--mu0", "-1"]) == 2


def test_cli_numerical_failure_exit_code(monkeypatch, capsys):
    def broken(model, p0, cfg=None, callback=None):
        return optimizer.TrainReport(np.asarray(p0), [float("nan")], stop_reason="nonfinite",
                                     message="non-finite loss")

    monkeypatch.setattr(harness, "train", broken)
    assert cli.main(["run", "--preset", "ex1", "--neurons", "3", "--error-every", "0"]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "failed"


def test_stall_is_not_a_clean_exit(monkeypatch, capsys):
    def stalled(model, p0, cfg=None, callback=None):
        return optimizer.TrainReport(np.asarray(p0), [1.0], [1e12], [False], 0, "stall")

    monkeypatch.setattr(harness, "train", stalled)
    assert cli.main(["run", "--preset", "ex1", "--neurons", "3", "--error-every", "0"]) == 1
    assert json.loads(capsys.readouterr().out)["status"] == "stalled"
