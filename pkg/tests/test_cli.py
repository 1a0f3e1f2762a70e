import json

import numpy as np
import pytest

from gneselect import ExperimentConfig, generate_instance, save_game
from gneselect.cli import main
from gneselect.game import game_to_obj


@pytest.fixture()
def game_file(tmp_path):
    game, sel = generate_instance(
        0, ExperimentConfig(n_instances=1, n_agents=4, agent_dim=2, n_constraints=2)
    )
    path = tmp_path / "game.json"
    save_game(path, game, sel)
    return path


def test_validate_ok(game_file, capsys):
    assert main(["validate", "--config", str(game_file)]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out


def test_validate_indefinite_QF_exits_1(tmp_path, capsys):
    game, sel = generate_instance(
        1, ExperimentConfig(n_instances=1, n_agents=4, agent_dim=2, n_constraints=2)
    )
    obj = game_to_obj(game, sel)
    obj["Q_F"] = (-np.eye(game.n)).tolist()
    bad = tmp_path / "bad_qf.json"
    bad.write_text(json.dumps(obj))
    assert main(["validate", "--config", str(bad)]) == 1
    assert "monotonicity check failed" in capsys.readouterr().out


def test_solve_happy_path_writes_trace(game_file, tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "solve", "--config", str(game_file), "--xi", "0.6", "--zeta", "2", "--alpha", "1",
        "--budget", "500", "--out", str(out), "--stride", "50",
    ])
    assert code == 0
    assert (out / "solve_trace.csv").exists()
    line = capsys.readouterr().out.strip()
    assert line.startswith("residual=") and "trace=" in line


def test_solve_from_seed_without_config(tmp_path, capsys):
    code = main(["solve", "--seed", "5", "--budget", "300", "--out", str(tmp_path),
                 "--stride", "50"])
    assert code == 0
    assert (tmp_path / "solve_trace.csv").exists()


def test_solve_requires_config_or_seed(tmp_path, capsys):
    assert main(["solve", "--budget", "100", "--out", str(tmp_path)]) == 1
    assert "validation error" in capsys.readouterr().err


def test_fbf_and_hsdm_subcommands(game_file, tmp_path):
    assert main(["fbf", "--config", str(game_file), "--budget", "400",
                 "--out", str(tmp_path), "--stride", "50"]) == 0
    assert (tmp_path / "fbf_trace.csv").exists()
    assert main(["hsdm", "--config", str(game_file), "--budget", "400",
                 "--out", str(tmp_path), "--stride", "50"]) == 0
    assert (tmp_path / "hsdm_trace.csv").exists()


def test_unknown_flag_rejected(game_file, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--config", str(game_file), "--frobnicate", "1"])
    assert exc.value.code != 0


def test_sweep_and_compare_subcommands(tmp_path):
    cfg = ExperimentConfig(
        n_instances=1, n_agents=4, agent_dim=2, n_constraints=2,
        budget=200, trace_stride=50, xi_values=(0.4, 0.8),
    )
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(cfg.to_json())
    assert main(["sweep", "--config", str(cfg_path), "--sweep", "xi",
                 "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "aggregate" / "xi.csv").exists()
    assert main(["compare", "--config", str(cfg_path), "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "aggregate" / "comparison.csv").exists()


def test_oracle_check_emits_json_report(capsys):
    assert main(["oracle-check", "--seed", "7", "--scenario", "zero"]) == 0
    report = json.loads(capsys.readouterr().out.strip())
    assert "rel_error" in report and report["seed"] == 7
    assert report["scenario"] == "zero_pseudogradient"


def test_hsdm_invalid_eta_is_solver_error(game_file, capsys):
    assert main(["hsdm", "--config", str(game_file), "--eta", "0.4",
                 "--budget", "100", "--out", "/tmp"]) == 2
    assert "solver error" in capsys.readouterr().err


def test_cli_solve_reproducible_csv_bytes(game_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--config", str(game_file), "--budget", "300",
                     "--out", str(out), "--stride", "50"]) == 0
    la = (a / "solve_trace.csv").read_text().splitlines()
    lb = (b / "solve_trace.csv").read_text().splitlines()
    assert len(la) == len(lb)
    for x, y in zip(la, lb):
        if not x.startswith("#"):
            assert x.rsplit(",", 1)[0] == y.rsplit(",", 1)[0]  # all but wall_s
