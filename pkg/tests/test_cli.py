import json

import pytest

from collabcal.cli import main


@pytest.fixture
def config_path(tmp_path):
    config = {
        "labels": {"size": 10},
        "days": 80,
        "epsilon": 0.1,
        "delta": 0.4,
        "eta": 0.1,
        "oracle": {"truth_mass": 0.6, "concentration": 0.8, "truth_kappa": 8.0,
                   "confusion_rate": 0.2},
        "policy": {"policy": "stationary", "set_size": 2,
                   "initial_accuracy": 0.6, "trust": 0.7,
                   "stubbornness": 0.2, "max_rounds": 3},
        "seed": 5,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestSimulate:
    def test_writes_three_artifacts_and_exits_zero(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(config_path), "--out", str(out)])
        assert code == 0
        assert (out / "runlog.jsonl").exists()
        assert (out / "summary.json").exists()
        assert (out / "plot.csv").exists()
        assert "bound audit: pass" in capsys.readouterr().out

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path)]) == 2

    def test_seed_flag_changes_run(self, config_path, tmp_path):
        out1, out2, out3 = (tmp_path / n for n in ("a", "b", "c"))
        main(["simulate", "--config", str(config_path), "--out", str(out1)])
        main(["simulate", "--config", str(config_path), "--out", str(out2),
              "--seed", "99"])
        main(["simulate", "--config", str(config_path), "--out", str(out3),
              "--seed", "99"])
        base = (out1 / "runlog.jsonl").read_text()
        reseeded = (out2 / "runlog.jsonl").read_text()
        repeat = (out3 / "runlog.jsonl").read_text()
        assert base != reseeded
        assert reseeded == repeat


class TestAuditAndReplay:
    def test_pristine_log_passes_both(self, config_path, tmp_path):
        out = tmp_path / "out"
        main(["simulate", "--config", str(config_path), "--out", str(out)])
        log = str(out / "runlog.jsonl")
        assert main(["audit", "--log", log]) == 0
        assert main(["replay", "--log", log]) == 0

    def test_flipped_error_bit_fails_replay(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        main(["simulate", "--config", str(config_path), "--out", str(out)])
        path = out / "runlog.jsonl"
        lines = path.read_text().splitlines()
        day = json.loads(lines[10])
        day["e_ch"] = 1 - day["e_ch"]
        lines[10] = json.dumps(day)
        path.write_text("\n".join(lines) + "\n")
        capsys.readouterr()
        assert main(["replay", "--log", str(path)]) == 1
        assert f"day {day['day_index']}" in capsys.readouterr().out

    def test_truncated_log_exits_two(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        main(["simulate", "--config", str(config_path), "--out", str(out)])
        path = out / "runlog.jsonl"
        path.write_text(path.read_text()[:-40])
        capsys.readouterr()
        assert main(["replay", "--log", str(path)]) == 2
        assert "line" in capsys.readouterr().err

    def test_audit_flags_tampered_log(self, tmp_path, capsys):
        # hand-build a log whose errors exceed the certificate
        meta = {"epsilon": 0.05, "delta": 0.5, "eta": 100.0}
        lines = [json.dumps({"run_meta": meta})]
        for t in range(1, 101):
            lines.append(json.dumps({
                "day_index": t, "problem_id": f"d{t}", "labels": [0, 1],
                "rounds": [{"human_set": [0], "human_message": "",
                            "ai_set": [0], "ai_message": ""}],
                "ground_truth": 0, "tau": 0.0, "lambda": 0.0,
                "e_ch": 1 if t <= 7 else 0, "e_comp": 0,
            }))
        path = tmp_path / "tampered.jsonl"
        path.write_text("\n".join(lines) + "\n")
        assert main(["audit", "--log", str(path)]) == 1
        assert "FAIL" in capsys.readouterr().out


class TestCheckRules:
    def test_builtin_rule_holds(self, capsys):
        assert main(["check-rules", "--rule", "ch_current_round",
                     "--labels", "3", "--rounds", "3"]) == 0
        assert "dominance holds" in capsys.readouterr().out

    def test_window_rule_with_params(self):
        assert main(["check-rules", "--rule", "ch_intersection_window",
                     "--params", '{"k": 2}', "--labels", "3", "--rounds", "3"]) == 0

    def test_cap_exceeded_exits_two(self):
        assert main(["check-rules", "--rule", "ch_current_round",
                     "--labels", "10", "--rounds", "20"]) == 2

    def test_unknown_rule_exits_two(self):
        assert main(["check-rules", "--rule", "nonexistent"]) == 2

    def test_violating_rule_exits_one_with_counterexample(self, capsys):
        # registered by the rules test module pattern: use a fresh kind here
        from collabcal.rules import register_custom_predicate
        register_custom_predicate(
            "cli_absent_before_end",
            lambda y, H, r: y not in H[r - 1] and r < len(H))
        assert main(["check-rules", "--rule", "cli_absent_before_end",
                     "--labels", "2", "--rounds", "2"]) == 1
        out = capsys.readouterr().out
        assert "VIOLATED" in out and "transcript" in out


class TestSweepCommand:
    def test_sweep_writes_table(self, tmp_path, capsys):
        config = {
            "labels": {"size": 8},
            "days": 40,
            "epsilon": 0.1, "delta": 0.4, "eta": 0.1,
            "oracle": {"truth_mass": 0.6, "truth_kappa": 6.0},
            "policy": {"policy": "stationary", "set_size": 2, "max_rounds": 2},
            "seed": 3,
            "sweep": {"epsilon": [0.05, 0.2], "delta": [0.4], "seeds": 2},
        }
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps(config))
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(path), "--out", str(out),
                     "--jobs", "1"])
        assert code == 0
        table = json.loads((out / "sweep.json").read_text())
        assert len(table) == 2
        assert {cell["epsilon"] for cell in table} == {0.05, 0.2}
        assert all(len(cell["runs"]) == 2 for cell in table)

    def test_sweep_without_grid_exits_two(self, config_path, tmp_path):
        assert main(["sweep", "--config", str(config_path),
                     "--out", str(tmp_path)]) == 2


def test_usage_error_exits_two():
    assert main(["simulate"]) == 2  # missing required --config
