import csv
import io
from fractions import Fraction
from pathlib import Path

import pytest

from tndsim.cli import PAPER_EXAMPLES, exact_paper_ve, fmt_num, main, paper_examples

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestReproducePaper:
    def test_matches_golden(self, capsys):
        code, out, _ = run(capsys, "reproduce-paper")
        assert code == 0
        assert out == (GOLDEN / "reproduce_paper.txt").read_text()

    def test_csv_matches_golden(self, capsys):
        code, out, _ = run(capsys, "reproduce-paper", "--format", "csv")
        assert code == 0 and out == (GOLDEN / "reproduce_paper.csv").read_text()

    def test_repeatable(self, capsys):
        assert run(capsys, "reproduce-paper") == run(capsys, "reproduce-paper")

    def test_golden_tables_hold_paper_counts(self):
        text = (GOLDEN / "reproduce_paper.txt").read_text()
        for cell in ("A = 565", "B = 9,435", "G = 1,150", "H = 8,850",
                     "A = 100", "G = 1,000", "A = 3,065", "G = 3,650"):
            assert cell in text
        summary = text.split("Summary")[1].splitlines()
        assert [line.split()[-1] for line in summary[2:5]] == ["0.90000", "0.50870", "0.16027"]

    def test_references_are_exact(self):
        assert [exact_paper_ve(se, sp) for _, se, sp, _ in PAPER_EXAMPLES] == [
            Fraction(9, 10), Fraction(117, 230), 1 - Fraction(3065, 3650)]
        _, failures = paper_examples()
        assert failures == []

    def test_self_check_failure_exits_nonzero(self, capsys, monkeypatch):
        import tndsim.cli as cli
        monkeypatch.setattr(cli, "PAPER_EXAMPLES", (("1", "1", "1", "1 - 100/999"),))
        code, out, err = run(capsys, "reproduce-paper")
        assert code == 1 and out == "" and "self-check failed" in err


class TestSweepCommand:
    def test_golden(self, capsys, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "paper_sweep", "--output", str(out)]) == 0
        assert out.read_bytes() == (GOLDEN / "paper_sweep.csv").read_bytes()

    def test_golden_ve_column_from_exact_fractions(self):
        rows = list(csv.DictReader(io.StringIO((GOLDEN / "paper_sweep.csv").read_text())))
        exact = [Fraction(9, 10), Fraction(117, 230), 1 - Fraction(3065, 3650)]
        assert [r["ve"] for r in rows] == [fmt_num(float(x)) for x in exact]
        assert [r["ve"] for r in rows] == ["0.900000", "0.508696", "0.160274"]

    def test_header_and_line_endings(self):
        raw = (GOLDEN / "paper_sweep.csv").read_bytes()
        assert b"\r" not in raw
        assert raw.split(b"\n")[0] == (
            b"sensitivity,specificity,ve,method,control_group,mc_mean,mc_sd,q025,q50,q975,"
            b"error_rate,assumption_gap,clamped,error")

    def test_rerun_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            main(["sweep", "paper_sweep", "--output", str(path), "--seed", "11"])
        assert a.read_bytes() == b.read_bytes()

    def test_stochastic_sweep_repeatable(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text((GOLDEN.parent.parent / "src/tndsim/configs/paper_sweep.cfg").read_text()
                       + "mode = stochastic\nseed = 4\nreplications = 40\n")
        outs = []
        for name in ("a.csv", "b.csv"):
            main(["sweep", str(cfg), "--output", str(tmp_path / name)])
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
        rows = list(csv.DictReader(io.StringIO(outs[0].decode())))
        assert all(r["mc_mean"] != "NA" for r in rows)

    def test_scenario_config_rejected(self, capsys):
        code, _, err = run(capsys, "sweep", "paper_baseline")
        assert code == 2 and "axis" in err

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, err = run(capsys, "sweep", "paper_sweep", "--output", str(tmp_path / "no" / "x.csv"))
        assert code == 1 and "cannot write" in err

    def test_undefined_rows_render_na(self, capsys, tmp_path):
        cfg = tmp_path / "z.cfg"
        cfg.write_text("schema = 1\nkind = sweep\nn_vax = 100\nn_unvax = 100\np_vax = 0\n"
                       "p_unvax = 0.1\nsensitivity = 1\nspecificity = 1\n"
                       "axis.1 = p_unvax\naxis.1.values = 0.1; 0\n")
        code, out, _ = run(capsys, "sweep", str(cfg))
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[1]["ve"] == "NA" and rows[1]["error"] == "undefined-estimate"


class TestEstimate:
    PAPER = ["--a", "100", "--b", "0", "--c", "9900", "--g", "1000", "--h", "0", "--i", "9000"]

    def test_paper_counts(self, capsys):
        code, out, _ = run(capsys, "estimate", *self.PAPER)
        assert code == 0
        lines = {tuple(line.split()[:2]): line.split()[2] for line in out.splitlines()[2:6]}
        assert lines["risk-ratio", "not-applicable"] == "0.90000"
        assert lines["odds-ratio", "combined"] == "0.90909"
        assert lines["odds-ratio", "other-pathogen"] == "empty-control-group"
        assert "assumption gap: 0.00000" in out

    def test_equal_arms_give_zero(self, capsys):
        code, out, _ = run(capsys, "estimate", "--format", "csv", "--a", "5", "--b", "7", "--c", "9",
                           "--g", "5", "--h", "7", "--i", "9")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 4
        assert all(r["ve"] == "0.00000" for r in rows)

    def test_undefined_is_not_a_tool_error(self, capsys):
        code, out, _ = run(capsys, "estimate", "--a", "1", "--b", "1", "--c", "1",
                           "--g", "0", "--h", "1", "--i", "1")
        assert code == 0 and "undefined-estimate" in out

    def test_csv_input(self, capsys, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("a,b,c,g,h,i\n100,0,9900,1000,0,9000\n565,0,9435,1150,0,8850\n")
        code, out, _ = run(capsys, "estimate", "--csv", str(path), "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 8
        assert rows[4]["ve"] == "0.508696"

    @pytest.mark.parametrize("argv", [["--a", "x"], ["--a", "-1"], ["--a", "1"]])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as info:
            main(["estimate", *argv])
        assert info.value.code == 2

    def test_bad_csv(self, capsys, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("a,b,c\n1,2,3\n")
        code, _, err = run(capsys, "estimate", "--csv", str(path))
        assert code == 2 and "lacks column" in err


class TestSimulate:
    def test_deterministic_text(self, capsys):
        code, out, _ = run(capsys, "simulate", "paper_baseline")
        assert code == 0 and "VE-hat = 0.90000" in out

    def test_monte_carlo_seed_flag(self, capsys):
        a = run(capsys, "simulate", "paper_monte_carlo", "--replications", "50", "--seed", "1")
        b = run(capsys, "simulate", "paper_monte_carlo", "--replications", "50", "--seed", "1")
        c = run(capsys, "simulate", "paper_monte_carlo", "--replications", "50", "--seed", "2")
        assert a == b and a != c and "master seed 1" in a[1]

    def test_csv_row(self, capsys):
        code, out, _ = run(capsys, "simulate", "paper_monte_carlo", "--replications", "20",
                           "--format", "csv")
        (row,) = csv.DictReader(io.StringIO(out))
        assert row["ve"] == "0.508696" and row["mc_mean"] != "NA"

    def test_global_flags_before_command(self, capsys):
        code, out, _ = run(capsys, "--format", "csv", "simulate", "paper_baseline")
        assert code == 0 and out.startswith("ve,method")

    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "simulate", "no_such_config")
        assert code == 2 and "paper_baseline" in err

    def test_invalid_config(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("schema = 1\nsensitivity = 1.3\n")
        code, _, err = run(capsys, "simulate", str(cfg))
        assert code == 2 and "sensitivity" in err and "missing-key" in err
