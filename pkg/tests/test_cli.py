import csv
import json
import time

import pytest

from gradix import cli, special


def tiny_config(tmp_path, **over):
    cfg = {
        "name": "tiny",
        "case": "1d-gaussian",
        "physics": {"ke": 1.0, "alpha": 0.2},
        "counts": {"N_int": 64, "N_sb": 1},
        "architecture": {"hidden_layers": 2, "width": 6},
        "loss": {"lambda": 1.0},
        "optimizer": {"adam": {"max_iters": 20}, "lbfgs": {"max_iters": 30}},
        "seed": 0,
    }
    cfg.update(over)
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", tiny_config(tmp_path), "--out", str(out)]) == 0
    for name in ("run.json", "field.csv", "loss.csv", "model.params.json"):
        assert (out / name).is_file()
    rows = read_csv(out / "field.csv")
    assert rows[0] == ["x", "I_exact", "I_pred", "abs_err"]
    assert len(rows) - 1 == 512
    doc = json.loads((out / "run.json").read_text())
    assert doc["report"]["E_G"]["abs"] >= 0
    assert "L2 abs" in capsys.readouterr().out


def test_csv_round_trips_at_full_precision(tmp_path):
    out = tmp_path / "out"
    cli.main(["run", "--config", tiny_config(tmp_path), "--out", str(out)])
    for row in read_csv(out / "field.csv")[1:50]:
        for cell in row:
            assert cli._fmt(float(cell)) == cell


def test_run_is_deterministic(tmp_path):
    cfg = tiny_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", "--config", cfg, "--out", str(a)])
    cli.main(["run", "--config", cfg, "--out", str(b)])
    assert (a / "field.csv").read_bytes() == (b / "field.csv").read_bytes()

    def strip_clock(path):
        doc = json.loads(path.read_text())
        doc["report"].pop("seconds")
        doc["train"].pop("seconds")
        return doc

    assert strip_clock(a / "run.json") == strip_clock(b / "run.json")


def test_bad_config_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", tiny_config(tmp_path, colour="blue")]) == 2
    assert cli.main(["run"]) == 2
    assert "gradix:" in capsys.readouterr().err


def test_unknown_case_exit_2(tmp_path):
    assert cli.main(["run", "--config", tiny_config(tmp_path, case="nope")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_abort_exit_3(tmp_path, capsys):
    cfg = tiny_config(tmp_path, physics={"ke": 1.0, "alpha": 0.2},
                      optimizer={"adam": {"max_iters": 20, "lr": 1e300}, "lbfgs": {"max_iters": 5}})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "aborted" in capsys.readouterr().err


def test_sweep_single_run_leaderboard(tmp_path):
    ens = {"hidden_layers": [2], "widths": [6], "lambdas": [1.0], "n_theta": 1}
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", tiny_config(tmp_path, ensemble=ens), "--out", str(out)]) == 0
    rows = read_csv(out / "leaderboard.csv")
    assert rows[0] == ["rank", "hidden_layers", "width", "lambda", "seed", "final_loss", "status"]
    assert len(rows) == 2
    assert (out / "field.csv").is_file()


def test_sweep_leaderboard_sorted(tmp_path):
    ens = {"hidden_layers": [1, 2], "widths": [4], "lambdas": [0.1, 10.0], "n_theta": 2}
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", tiny_config(tmp_path, ensemble=ens), "--out", str(out)]) == 0
    rows = read_csv(out / "leaderboard.csv")[1:]
    assert len(rows) == 8
    losses = [float(r[5]) for r in rows]
    assert losses == sorted(losses)
    assert [int(r[0]) for r in rows] == list(range(1, 9))


def test_sweep_without_grid_exit_2(tmp_path):
    assert cli.main(["sweep", "--config", tiny_config(tmp_path), "--out", str(tmp_path / "s")]) == 2


def test_bundled_grid_cardinality():
    setup = cli.RunSetup(cli.load_config("table2_case1"))
    e = setup.ensemble
    assert len(e.hidden_layers) * len(e.widths) * len(e.lams) * e.n_theta == 48


def test_bundled_configs_load():
    names = cli.bundled_configs()
    assert "table2_case1.json" in names
    for name in names:
        setup = cli.RunSetup(cli.load_config(name), desk=True)
        assert setup.counts["N_int"] == 2048
        assert setup.counts["N_sb"] in (0, 512)


def test_desk_halves_iterations():
    full = cli.RunSetup(cli.load_config("table2_case1"))
    desk = cli.RunSetup(cli.load_config("table2_case1"), desk=True)
    assert desk.opt_cfg.adam.max_iters == full.opt_cfg.adam.max_iters // 2
    assert desk.opt_cfg.lbfgs.max_iters == full.opt_cfg.lbfgs.max_iters // 2


def test_verify_passes_quickly(capsys):
    start = time.perf_counter()
    assert cli.main(["verify"]) == 0
    assert time.perf_counter() - start < 60
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_verify_catches_erf_sign_flip(monkeypatch, capsys):
    good = special.erf
    monkeypatch.setattr(special, "erf", lambda x: -good(x))
    assert cli.main(["verify"]) == 1
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert "failed" in last and "erf" in last


def test_oracle_1d(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["oracle", "--case", "1d-gaussian", "--ke", "0.1", "--out", str(out)]) == 0
    rows = read_csv(out / "oracle.csv")
    assert len(rows) - 1 == 20
    assert max(float(r[-1]) for r in rows[1:]) < 1e-6


def test_oracle_2d_with_points(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x,y\n0.1,0.2\n0.5,0.5\n0.9,0.3\n")
    out = tmp_path / "o"
    assert cli.main(["oracle", "--case", "2d-gaussian", "--ke", "1", "--points", str(pts), "--out", str(out)]) == 0
    rows = read_csv(out / "oracle.csv")
    assert len(rows) == 4
    assert max(float(r[-1]) for r in rows[1:]) < 1e-5


def test_oracle_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert cli.main(["oracle", "--case", "1d-gaussian", "--points", str(empty), "--out", str(tmp_path)]) == 2
    assert cli.main(["oracle", "--case", "manufactured-graded-linear", "--out", str(tmp_path)]) == 2
    assert cli.main(["oracle", "--out", str(tmp_path)]) == 2


def test_argparse_rejects_unknown_command():
    with pytest.raises(SystemExit) as exc:
        cli.main(["bake"])
    assert exc.value.code == 2
