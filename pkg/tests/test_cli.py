import json

import pandas as pd
import pytest

from main import EXIT_CONFIG, EXIT_OK, EXIT_STALL, run
from schemas import VerifySettings
from utils.scenario_loader import get_default_scenario


@pytest.fixture
def quick_toy(tmp_path):
    """Cenário toy com suítes de verificação pequenas"""
    cfg = get_default_scenario("toy").model_copy(
        update={
            "verify": VerifySettings(
                potential_draws=20, contingency_draws=20, jacobian_points=10, gradient_points=5, inner_instances=3
            )
        }
    )
    path = tmp_path / "toy_rapido.json"
    path.write_text(cfg.model_dump_json(), encoding="utf-8")
    return path


def test_verify_passes_and_writes_table(quick_toy, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["verify", "--config", str(quick_toy), "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out / "verify.csv")
    assert set(table["name"]) == {
        "potential_identity",
        "contingency_identity",
        "jacobians",
        "gauss_newton_gradients",
        "inner_exactness",
        "lambda_sum",
    }
    assert table["passed"].all()
    assert "FAIL" not in capsys.readouterr().out


def test_invalid_config_exits_with_code_2(tmp_path, capsys):
    path = tmp_path / "ruim.json"
    path.write_text(json.dumps({"name": "ruim"}), encoding="utf-8")
    assert run(["solve", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "campo" in capsys.readouterr().err


def test_invalid_solver_override_exits_with_code_2(tmp_path):
    assert run(["solve", "--config", "toy", "--sigma", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_worker_count_exits_with_code_2(tmp_path):
    assert run(["solve", "--config", "toy", "--workers", "0", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_solve_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(["solve", "--config", "toy", "--out", str(first), "--workers", "1"]) == EXIT_OK
    assert run(["solve", "--config", "toy", "--out", str(second), "--workers", "2"]) == EXIT_OK
    assert (first / "trajectory.csv").read_bytes() == (second / "trajectory.csv").read_bytes()
    diagnostics = pd.read_csv(first / "diagnostics.csv")
    assert list(diagnostics["iteration"]) == list(range(len(diagnostics)))


def test_json_diagnostics_are_written(tmp_path):
    assert run(["solve", "--config", "toy", "--out", str(tmp_path), "--json-diagnostics"]) == EXIT_OK
    lines = (tmp_path / "diagnostics.jsonl").read_text(encoding="utf-8").splitlines()
    assert lines
    assert "potential" in json.loads(lines[0])


def test_contingency_writes_one_plan_per_hypothesis(tmp_path, capsys):
    assert run(["contingency", "--config", "toy", "--out", str(tmp_path)]) in (EXIT_OK, EXIT_STALL)
    assert (tmp_path / "plan_h0.csv").exists()
    assert (tmp_path / "plan_h1.csv").exists()
    assert "hipóteses" in capsys.readouterr().out


def test_bench_writes_both_tables(tmp_path):
    args = ["bench", "--config", "toy", "--out", str(tmp_path), "--samples-per-mode", "1", "2"]
    assert run(args + ["--hypotheses", "2", "--repetitions", "1"]) == EXIT_OK
    scalability = pd.read_csv(tmp_path / "bench.csv")
    assert list(scalability["variant"]) == ["centralized", "distributed-1", "distributed-2"]
    contingency = pd.read_csv(tmp_path / "bench_contingency.csv")
    assert list(contingency["hypotheses"]) == [2]


@pytest.mark.slow
def test_simulate_single_setting(tmp_path):
    assert run(["simulate", "--config", "toy", "--setting", "BNE-Update", "--out", str(tmp_path)]) == EXIT_OK
    metrics = pd.read_csv(tmp_path / "metrics.csv")
    assert list(metrics["setting"]) == ["BNE-Update"]
    assert (tmp_path / "trace_BNE-Update.csv").exists()
