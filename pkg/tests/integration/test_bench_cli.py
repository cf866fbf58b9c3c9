"""Integration tests for the basq-bench command line."""

import csv
import json
from pathlib import Path

import pytest

from batch_quadrature.cli import TRACE_HEADER, main

SMALL_RUN = [
    "--batch", "4",
    "--n-recombination", "1000",
    "--n-nystrom", "20",
    "--supersample", "20",
]  # fmt: skip


def read_trace(path: Path) -> list[list[str]]:
    """Read a trace CSV as rows of strings, header included."""
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


class TestListing:
    """Tests for --list."""

    @pytest.mark.parametrize("argv", [["--list"], ["run", "--list"]])
    def test_lists_problems(self, argv: list[str], capsys: pytest.CaptureFixture[str]) -> None:
        """Both spellings print the four registered problems."""
        assert main(argv) == 0
        assert capsys.readouterr().out.split() == ["branin", "ackley", "oscillatory", "gaussmix"]


class TestErrors:
    """Tests for invalid invocations."""

    def test_unknown_problem(self, capsys: pytest.CaptureFixture[str]) -> None:
        """An unregistered problem exits nonzero with usage text."""
        assert main(["run", "--problem", "rosenbrock"]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err
        assert "rosenbrock" in err

    def test_missing_problem(self, capsys: pytest.CaptureFixture[str]) -> None:
        """run without --problem exits nonzero."""
        assert main(["run"]) == 2
        assert "usage:" in capsys.readouterr().err

    def test_no_command(self) -> None:
        """No command at all exits nonzero."""
        assert main([]) == 2

    def test_unknown_flag(self) -> None:
        """Unknown flags are rejected by the parser."""
        with pytest.raises(SystemExit) as excinfo:
            main(["run", "--problem", "branin", "--frobnicate"])
        assert excinfo.value.code == 2


class TestRun:
    """Tests for benchmark runs."""

    def test_trace_rows_match_budget(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """budget / batch data rows follow the fixed header."""
        out = tmp_path / "t.csv"
        argv = ["run", "--problem", "oscillatory", "--budget", "12", "--out", str(out), *SMALL_RUN]
        assert main(argv) == 0

        rows = read_trace(out)
        assert tuple(rows[0]) == TRACE_HEADER
        assert len(rows) == 1 + 3
        assert [int(row[0]) for row in rows[1:]] == [1, 2, 3]
        assert [int(row[1]) for row in rows[1:]] == [6, 10, 14]
        assert all(row[5] != "" and row[6] != "" for row in rows[1:])
        assert b"\r\n" not in out.read_bytes()

        summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        assert summary["problem"] == "oscillatory"
        assert summary["seeds"] == [0]
        assert summary["z_true"] == 1.0
        assert "seed=0" in capsys.readouterr().out

    def test_repeats_and_baseline(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Each seed writes its own trace and Monte-Carlo trace; the summary aggregates."""
        out = tmp_path / "runs" / "gm.csv"
        argv = [
            "run", "--problem", "gaussmix", "--budget", "8", "--repeats", "2", "--seed", "5",
            "--baseline", "mc", "--out", str(out), *SMALL_RUN,
        ]  # fmt: skip
        assert main(argv) == 0

        for seed in (5, 6):
            assert len(read_trace(out.with_name(f"gm_seed{seed}.csv"))) == 1 + 2
            assert len(read_trace(out.with_name(f"gm_seed{seed}_mc.csv"))) == 1 + 10
        summary = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
        assert summary["seeds"] == [5, 6]
        assert len(summary["final_mae"]) == 2
        assert summary["median_mae"] is not None
        assert summary["iqr_mae"] is not None
        assert summary["baseline_mae"] is not None
        assert "median mae=" in capsys.readouterr().out

    def test_seeded_rows_reproduce(self, tmp_path: Path) -> None:
        """Two runs with one seed agree on every column except overhead."""
        traces = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            argv = ["run", "--problem", "branin", "--budget", "8", "--out", str(out), *SMALL_RUN]
            assert main(argv) == 0
            traces.append([row[:2] + row[3:] for row in read_trace(out)])
        assert traces[0] == traces[1]

    def test_checkpoint_resume(self, tmp_path: Path) -> None:
        """A finished checkpoint is resumed without further steps."""
        checkpoint = tmp_path / "state.json"
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        base = ["run", "--problem", "oscillatory", "--budget", "8", "--checkpoint", str(checkpoint)]
        assert main([*base, "--out", str(first), *SMALL_RUN]) == 0
        assert checkpoint.exists()
        assert main([*base, "--out", str(second), *SMALL_RUN]) == 0
        assert [row[:2] + row[3:] for row in read_trace(first)] == [
            row[:2] + row[3:] for row in read_trace(second)
        ]
