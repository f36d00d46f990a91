import json

import pytest

from finprog.cli import cli_dispatch
from finprog.dsl import render_program


@pytest.fixture()
def gold_preds_path(tmp_path, sample_records):
    path = tmp_path / "preds.jsonl"
    with path.open("w", encoding="utf-8") as handle:
        for record in sample_records:
            handle.write(
                json.dumps({"id": record.id, "program": render_program(record.gold_program)}) + "\n"
            )
    return path


class TestEquivCommand:
    def test_equivalent_pair(self, capsys):
        code = cli_dispatch(["equiv", "add(1, 2)", "add(2, 1)"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.splitlines()[0] == "equivalent"

    def test_not_equivalent(self, capsys):
        code = cli_dispatch(["equiv", "subtract(1, 2)", "subtract(2, 1)"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.splitlines()[0] == "not equivalent"

    def test_unparseable_program_is_usage_error(self, capsys):
        assert cli_dispatch(["equiv", "add(1, 2)", "nope("]) == 2

    def test_flagship_pair(self, capsys):
        code = cli_dispatch(
            [
                "equiv",
                "add(a_1, a_2), add(a_3, a_4), subtract(#0, #1)",
                "add(a_4, a_3), add(a_1, a_2), subtract(#1, #0)",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0 and "equivalent" in out and "canonical-match" in out


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert cli_dispatch(["frobnicate"]) == 2

    def test_no_arguments(self, capsys):
        assert cli_dispatch([]) == 2

    def test_missing_records_file(self, capsys, tmp_path):
        code = cli_dispatch(["stats", "--records", str(tmp_path / "absent.jsonl")])
        assert code == 2


class TestEvalCommand:
    def test_gold_predictions_score_perfectly(self, capsys, sample_path, gold_preds_path):
        code = cli_dispatch(
            ["eval", "--records", str(sample_path), "--preds", str(gold_preds_path)]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "execution accuracy  100.00%" in out
        assert "program accuracy    100.00%" in out

    def test_machine_format(self, capsys, sample_path, gold_preds_path):
        code = cli_dispatch(
            [
                "eval",
                "--records", str(sample_path),
                "--preds", str(gold_preds_path),
                "--format", "machine",
            ]
        )
        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["execution_accuracy"] == 1.0
        assert payload["rejects"] == []

    def test_out_file(self, tmp_path, sample_path, gold_preds_path):
        out_path = tmp_path / "report.json"
        code = cli_dispatch(
            [
                "eval",
                "--records", str(sample_path),
                "--preds", str(gold_preds_path),
                "--format", "machine",
                "--out", str(out_path),
            ]
        )
        assert code == 0
        assert json.loads(out_path.read_text())["program_accuracy"] == 1.0

    def test_rejects_exit_code(self, capsys, tmp_path, gold_preds_path, sample_path):
        records_path = tmp_path / "records.jsonl"
        lines = sample_path.read_text().splitlines()
        bad = json.loads(lines[0])
        bad["id"] = "broken-0"
        bad["qa"] = dict(bad["qa"], program="subtract(#3, 1)")
        records_path.write_text("\n".join(lines + [json.dumps(bad)]) + "\n")
        code = cli_dispatch(
            ["eval", "--records", str(records_path), "--preds", str(gold_preds_path)]
        )
        out = capsys.readouterr().out
        assert code == 1
        assert "rejected records" in out


class TestExecCommand:
    def test_pure_arithmetic(self, capsys):
        assert cli_dispatch(["exec", "subtract(100, 25), divide(#0, 100)"]) == 0
        assert capsys.readouterr().out.strip() == "0.75"

    def test_with_record_context(self, capsys, sample_path):
        code = cli_dispatch(
            [
                "exec",
                "table-sum(net sales)",
                "--records", str(sample_path),
                "--id", "bravo/2017/page_45.pdf-0",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "3251"

    def test_execution_error_exit_one(self, capsys):
        assert cli_dispatch(["exec", "divide(1, 0)"]) == 1


class TestValidateCommand:
    def test_valid(self, capsys):
        assert cli_dispatch(["validate", "greater(5, 3)"]) == 0
        assert "valid" in capsys.readouterr().out

    def test_diagnostics_exit_one(self, capsys):
        code = cli_dispatch(["validate", "add(a, b)"])
        out = capsys.readouterr().out
        assert code == 1 and "bad-argument-kind" in out

    def test_symbolic_mode(self, capsys):
        assert cli_dispatch(["validate", "add(a, b)", "--symbolic"]) == 0

    def test_grounding_against_record(self, capsys, sample_path):
        code = cli_dispatch(
            [
                "validate",
                "divide(123456, 2)",
                "--records", str(sample_path),
                "--id", "alpha/2019/page_12.pdf-0",
            ]
        )
        out = capsys.readouterr().out
        assert code == 1 and "ungrounded-number" in out


class TestStatsCommand:
    def test_table_output(self, capsys, sample_path):
        assert cli_dispatch(["stats", "--records", str(sample_path)]) == 0
        assert "operations" in capsys.readouterr().out

    def test_machine_output(self, capsys, sample_path):
        code = cli_dispatch(["stats", "--records", str(sample_path), "--format", "machine"])
        payload = json.loads(capsys.readouterr().out)
        assert code == 0 and payload["examples"] == 20


class TestRetrieveCommand:
    def test_recall_report(self, capsys, sample_path):
        code = cli_dispatch(["retrieve", "--records", str(sample_path), "--k", "3"])
        out = capsys.readouterr().out
        assert code == 0 and "recall@3" in out

    def test_machine_payload(self, capsys, sample_path):
        code = cli_dispatch(
            ["retrieve", "--records", str(sample_path), "--k", "5", "--format", "machine"]
        )
        payload = json.loads(capsys.readouterr().out)
        assert code == 0
        assert payload["k"] == 5
        assert len(payload["per_record"]) == 20
        assert all(len(entry["fact"]) > 0 for r in payload["rankings"].values() for entry in r)


class TestLinearizeCommand:
    def test_single_record(self, capsys, sample_path):
        code = cli_dispatch(
            ["linearize", "--records", str(sample_path), "--id", "bravo/2017/page_45.pdf-0"]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "the net sales of q1 is 1200.5 ;" in out

    def test_unknown_id(self, capsys, sample_path):
        assert cli_dispatch(["linearize", "--records", str(sample_path), "--id", "zz"]) == 2


class TestMaskCommand:
    def test_start_state(self, capsys):
        code = cli_dispatch(["mask"])
        out = capsys.readouterr().out.split()
        assert code == 0
        assert "add" in out and "table-sum" not in out  # empty context has no rows

    def test_with_context_and_prefix(self, capsys, sample_path):
        code = cli_dispatch(
            [
                "mask",
                "--records", str(sample_path),
                "--id", "bravo/2017/page_45.pdf-0",
                "--prefix", "table-sum (",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "net sales" in out and "gross profit" in out

    def test_illegal_prefix(self, capsys):
        assert cli_dispatch(["mask", "--prefix", ") ("]) == 1
