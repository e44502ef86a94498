import json

import pytest

from treecert.analyzer import RowResult, SoundnessError, Verdict
from treecert.cli import build_parser, main
from treecert.model import Label


def base_args(mode, files, *extra):
    return [
        mode,
        "--tree", files["tree"],
        "--attacker", files["attacker"],
        "--data", files["data"],
        *extra,
    ]


class TestVerify:
    def test_exit_zero_and_report(self, running_files, capsys):
        assert main(base_args("verify", running_files)) == 0
        out = capsys.readouterr().out
        assert "treecert verify report" in out
        assert "PossiblyVulnerable" in out
        assert "CertifiedRobust" in out

    def test_dump_ir(self, running_files, capsys):
        assert main(base_args("verify", running_files, "--dump-ir")) == 0
        out = capsys.readouterr().out
        assert "xp0 := x0" in out
        assert "branch 1:" in out

    def test_dump_summary(self, running_files, capsys):
        assert main(base_args("verify", running_files, "--dump-summary")) == 0
        assert "B" in capsys.readouterr().out

    def test_per_instance_summary(self, running_files, capsys):
        args = base_args("verify", running_files, "--per-instance-summary")
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "PossiblyVulnerable" in out

    def test_out_files_written(self, running_files, tmp_path, capsys):
        out_json = tmp_path / "report.json"
        out_csv = tmp_path / "rows.csv"
        args = base_args(
            "verify", running_files,
            "--out-json", str(out_json), "--out-csv", str(out_csv),
        )
        assert main(args) == 0
        capsys.readouterr()
        doc = json.loads(out_json.read_text())
        assert doc["mode"] == "verify"
        assert len(doc["rows"]) == 2
        assert out_csv.read_text().startswith("row,clean_label,predicted,verdict")

    def test_json_byte_identical_without_timing(self, running_files, tmp_path, capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            args = base_args(
                "verify", running_files, "--no-timing", "--out-json", str(path)
            )
            assert main(args) == 0
        capsys.readouterr()
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_log_env_respected(self, running_files, monkeypatch, capsys):
        monkeypatch.setenv("TREECERT_LOG", "debug")
        assert main(base_args("verify", running_files)) == 0
        capsys.readouterr()


class TestCompare:
    def test_exit_zero_and_oracle_columns(self, running_files, capsys):
        assert main(base_args("compare", running_files, "--jobs", "1")) == 0
        out = capsys.readouterr().out
        assert "treecert compare report" in out
        assert "oracle loss" in out
        assert "confusion" in out
        assert "[attack found]" in out

    def test_parallel_rows_match_serial(self, running_files, tmp_path, capsys):
        reports = []
        for jobs, name in (("1", "serial.json"), ("2", "parallel.json")):
            path = tmp_path / name
            args = base_args(
                "compare", running_files,
                "--jobs", jobs, "--no-timing", "--out-json", str(path),
            )
            assert main(args) == 0
            doc = json.loads(path.read_text())
            del doc["config"]["jobs"]
            reports.append(doc)
        capsys.readouterr()
        assert reports[0] == reports[1]

    def test_oracle_max_states_echoed(self, running_files, tmp_path, capsys):
        path = tmp_path / "r.json"
        args = base_args(
            "compare", running_files,
            "--oracle-max-states", "500", "--out-json", str(path),
        )
        assert main(args) == 0
        capsys.readouterr()
        assert json.loads(path.read_text())["config"]["oracle_max_states"] == 500


class TestFailurePaths:
    def test_missing_file_exits_two(self, running_files, capsys):
        files = dict(running_files, tree=running_files["tree"] + ".nope")
        assert main(base_args("verify", files)) == 2
        assert "cannot read tree file" in capsys.readouterr().err

    def test_malformed_json_exits_two(self, running_files, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        files = dict(running_files, attacker=str(bad))
        assert main(base_args("verify", files)) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_label_exits_two(self, running_files, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2,label\n6,8,maybe\n")
        files = dict(running_files, data=str(bad))
        assert main(base_args("verify", files)) == 2
        assert "maybe" in capsys.readouterr().err

    def test_missing_subcommand_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([])
        assert exc.value.code == 2
        capsys.readouterr()

    def test_summary_failure_exits_three(self, running_files, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise SoundnessError("attacker summary is not inductive")

        monkeypatch.setattr("treecert.cli.attacker_summary", boom)
        assert main(base_args("verify", running_files)) == 3
        assert "internal soundness error" in capsys.readouterr().err

    def test_certified_but_attackable_exits_three(
        self, running_files, monkeypatch, capsys
    ):
        # Force every verdict to CertifiedRobust; the oracle cross-check in
        # compare mode must then trip on the attackable first row.
        def always_certified(tree, summary, program, x, y):
            return RowResult(
                predicted=y, verdict=Verdict.CERTIFIED_ROBUST, reachable=frozenset({y})
            )

        monkeypatch.setattr("treecert.cli.classify", always_certified)
        assert main(base_args("compare", running_files, "--jobs", "1")) == 3
        err = capsys.readouterr().err
        assert "certified robust but the oracle found an attack" in err

    def test_no_report_written_on_failure(self, running_files, tmp_path, capsys):
        out_json = tmp_path / "report.json"
        files = dict(running_files, tree=running_files["tree"] + ".nope")
        args = base_args("verify", files, "--out-json", str(out_json))
        assert main(args) == 2
        capsys.readouterr()
        assert not out_json.exists()
