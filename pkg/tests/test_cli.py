"""End-to-end command line runs, in process via main(argv)."""

import json
import shutil

import pytest

from adalloc.cli import main
from conftest import MICRO

GOLDEN_FILES = ["campaigns.csv", "requests.jsonl"]


def copy_micro_inputs(dst):
    for name in ("campaigns.csv", "requests.jsonl", "spec.json"):
        shutil.copy(MICRO / name, dst / name)


def write_config(path, **overrides):
    doc = {"log": "requests.jsonl", "campaigns": "campaigns.csv",
           "duals": "duals_out.json", "P": 2}
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return path


class TestGen:
    def test_regenerates_the_committed_fixture(self, tmp_path, capsys):
        rc = main(["gen", "--spec", str(MICRO / "spec.json"), "--out", str(tmp_path)])
        assert rc == 0
        for name in GOLDEN_FILES:
            assert (tmp_path / name).read_text() == (MICRO / name).read_text()
        out = capsys.readouterr().out
        assert "4 campaigns" in out and "5 requests" in out

    def test_seed_override_changes_the_output(self, tmp_path):
        assert main(["gen", "--spec", str(MICRO / "spec.json"), "--seed", "99",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "requests.jsonl").read_text() != \
            (MICRO / "requests.jsonl").read_text()

    def test_missing_spec_file(self, tmp_path, capsys):
        rc = main(["gen", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
        assert rc == 4
        assert "i/o error" in capsys.readouterr().err

    def test_malformed_spec_json(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text("{nope")
        assert main(["gen", "--spec", str(spec), "--out", str(tmp_path)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_unknown_spec_key(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"seed": 1, "n_campaign": 4}))
        assert main(["gen", "--spec", str(spec), "--out", str(tmp_path)]) == 2

    def test_invalid_spec_value(self, tmp_path, capsys):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"n_campaigns": 0}))
        assert main(["gen", "--spec", str(spec), "--out", str(tmp_path)]) == 2
        assert "n_campaigns" in capsys.readouterr().err


class TestTrain:
    def test_small_logs_are_solved_exactly(self, tmp_path, capsys):
        from adalloc.core import ProblemConfig, read_campaigns_csv, read_requests_jsonl
        from adalloc.duals import (TrainResult, build_offline_lp, dumps_duals,
                                   solve_exact)

        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json")
        assert main(["train", "--config", str(cfg)]) == 0
        assert "exact solve" in capsys.readouterr().out

        campaigns = read_campaigns_csv(MICRO / "campaigns.csv")
        requests = read_requests_jsonl(MICRO / "requests.jsonl")
        lp = build_offline_lp(requests, campaigns, ProblemConfig.make(P=2))
        expected = TrainResult(duals=solve_exact(lp).duals, trace=(),
                               converged=True, epochs_run=0)
        assert (tmp_path / "duals_out.json").read_text() == dumps_duals(expected)

    def test_slack_budgets_train_to_zero_duals(self, tmp_path):
        from adalloc.duals import loads_duals

        copy_micro_inputs(tmp_path)
        rows = (tmp_path / "campaigns.csv").read_text().splitlines()
        rich = [rows[0]] + [",".join(["1000000.0" if i == 1 else cell
                                      for i, cell in enumerate(r.split(","))])
                            for r in rows[1:]]
        (tmp_path / "campaigns.csv").write_text("\n".join(rich) + "\n")
        cfg = write_config(tmp_path / "run.json")
        assert main(["train", "--config", str(cfg)]) == 0
        result = loads_duals((tmp_path / "duals_out.json").read_text())
        assert all(a == 0.0 for a in result.duals.alpha.values())
        assert result.duals.gamma == 0.0 and result.duals.delta == 0.0

    def test_unreachable_targets_report_whats_attainable(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", t_cy_uplift=10.0)
        assert main(["train", "--config", str(cfg)]) == 3
        assert "not attainable" in capsys.readouterr().err
        doc = json.loads((tmp_path / "attainable.json").read_text())
        assert set(doc) == {"status", "t_cy", "t_vy", "attainable"}
        assert doc["status"] == "infeasible"
        assert doc["attainable"]["clk"] < doc["t_cy"]

    def test_large_logs_fall_back_to_iterative_training(self, tmp_path, capsys,
                                                        monkeypatch):
        from adalloc.duals import loads_duals

        monkeypatch.setattr("adalloc.cli.LP_COLUMN_GUARD", 10)
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", trainer={"epochs": 3, "tol": 0.01})
        assert main(["train", "--config", str(cfg)]) == 0
        assert "iterative training" in capsys.readouterr().out
        result = loads_duals((tmp_path / "duals_out.json").read_text())
        assert result.epochs_run <= 3 and len(result.trace) == result.epochs_run

    def test_train_needs_a_duals_path(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", duals=None)
        assert main(["train", "--config", str(cfg)]) == 2
        assert "duals" in capsys.readouterr().err


class TestRunConfig:
    def test_unknown_keys_are_rejected(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", reserve=0.5)
        assert main(["train", "--config", str(cfg)]) == 2
        assert "unknown config keys ['reserve']" in capsys.readouterr().err

    def test_log_and_campaigns_are_required(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"campaigns": "campaigns.csv"}))
        assert main(["train", "--config", str(cfg)]) == 2
        assert "'log' and 'campaigns'" in capsys.readouterr().err

    def test_bad_policy_in_config(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", policy="greedy")
        assert main(["replay", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "unknown policy" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        rc = main(["replay", "--config", str(tmp_path / "run.json"),
                   "--out", str(tmp_path)])
        assert rc == 4

    def test_missing_log_file(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        (tmp_path / "requests.jsonl").unlink()
        cfg = write_config(tmp_path / "run.json")
        assert main(["replay", "--config", str(cfg), "--out", str(tmp_path)]) == 4


class TestReplay:
    @pytest.mark.parametrize("policy", ["ghp", "ot", "lp"])
    def test_reproduces_the_golden_artifacts(self, policy, tmp_path, capsys):
        rc = main(["replay", "--config", str(MICRO / "run.json"),
                   "--policy", policy, "--out", str(tmp_path)])
        assert rc == 0
        report = f"report_{policy}.json"
        buckets = f"buckets_{policy}.csv"
        assert (tmp_path / report).read_text() == (MICRO / report).read_text()
        assert (tmp_path / buckets).read_text() == (MICRO / buckets).read_text()
        assert f"wrote {tmp_path / report}" in capsys.readouterr().out

    def test_policy_flag_overrides_the_config(self, tmp_path):
        # config says ghp; the flag redirects the run to ot
        assert main(["replay", "--config", str(MICRO / "run.json"),
                     "--policy", "ot", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "report_ot.json").exists()
        assert not (tmp_path / "report_ghp.json").exists()

    def test_lp_needs_duals(self, tmp_path, capsys):
        copy_micro_inputs(tmp_path)
        cfg = write_config(tmp_path / "run.json", policy="lp", duals=None)
        assert main(["replay", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "needs a 'duals' path" in capsys.readouterr().err

    def test_unknown_policy_flag_exits_via_argparse(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            main(["replay", "--config", str(MICRO / "run.json"),
                  "--policy", "greedy", "--out", str(tmp_path)])

    def test_unknown_flag_exits_via_argparse(self, capsys):
        with pytest.raises(SystemExit):
            main(["replay", "--confg", "x.json", "--out", "y"])


class TestCompare:
    def test_reproduces_the_golden_csv(self, tmp_path, capsys):
        out = tmp_path / "comparison.csv"
        rc = main(["compare", str(MICRO / "report_lp.json"),
                   str(MICRO / "report_ot.json"),
                   "--baseline", str(MICRO / "report_ghp.json"),
                   "--out", str(out)])
        assert rc == 0
        assert out.read_text() == (MICRO / "comparison.csv").read_text()

    def test_self_comparison_is_all_zeros(self, tmp_path):
        out = tmp_path / "cmp.csv"
        assert main(["compare", str(MICRO / "report_ghp.json"),
                     "--baseline", str(MICRO / "report_ghp.json"),
                     "--out", str(out)]) == 0
        row = out.read_text().splitlines()[1].split(",")
        assert row[0] == "ghp"
        assert all(cell == "0.0000" for cell in row[1:])

    def test_stdout_mode(self, capsys):
        assert main(["compare", str(MICRO / "report_lp.json"),
                     "--baseline", str(MICRO / "report_ghp.json")]) == 0
        out = capsys.readouterr().out
        assert out.startswith("algorithm,")
        assert out.splitlines()[1].startswith("lp,")

    def test_mismatched_fingerprints(self, tmp_path, capsys):
        doc = json.loads((MICRO / "report_lp.json").read_text())
        doc["fingerprint"] = "f" * len(doc["fingerprint"])
        doctored = tmp_path / "report_lp.json"
        doctored.write_text(json.dumps(doc))
        rc = main(["compare", str(doctored),
                   "--baseline", str(MICRO / "report_ghp.json")])
        assert rc == 2
        assert "different inputs" in capsys.readouterr().err

    def test_missing_baseline(self, tmp_path):
        assert main(["compare", str(MICRO / "report_lp.json"),
                     "--baseline", str(tmp_path / "nope.json")]) == 4


class TestPipeline:
    def run_pipeline(self, root):
        data = root / "data"
        data.mkdir(parents=True)
        assert main(["gen", "--spec", str(MICRO / "spec.json"),
                     "--out", str(data)]) == 0
        cfg = write_config(data / "run.json", duals="duals.json", policy="lp")
        assert main(["train", "--config", str(cfg)]) == 0
        for policy in ("ghp", "ot", "lp"):
            assert main(["replay", "--config", str(cfg), "--policy", policy,
                         "--out", str(data)]) == 0
        assert main(["compare", str(data / "report_lp.json"),
                     str(data / "report_ot.json"),
                     "--baseline", str(data / "report_ghp.json"),
                     "--out", str(data / "comparison.csv")]) == 0
        return {p.name: p.read_bytes() for p in sorted(data.iterdir())
                if p.name != "run.json"}

    def test_two_runs_are_byte_identical(self, tmp_path, capsys):
        first = self.run_pipeline(tmp_path / "one")
        second = self.run_pipeline(tmp_path / "two")
        assert set(first) == set(second)
        assert first == second
        assert len(first) >= 10  # inputs, duals, three reports, buckets, comparison
