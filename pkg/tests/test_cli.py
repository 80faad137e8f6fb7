import math

import numpy as np
import pytest

from naive_mv.cli import main

BASE = """\
horizon       = 1.0
risk_free     = 0.02
drift         = 0.08
volatility    = 0.2
target.kind   = case1_alpha
target.alpha  = 1.0
seed          = 42
"""


@pytest.fixture
def cfg_file(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text(BASE)
    return str(f)


class TestValidate:
    def test_ok_market_exits_zero(self, cfg_file, capsys):
        assert main(["validate", cfg_file]) == 0
        out = capsys.readouterr().out
        assert "(A1)" in out and "(A2)" in out and "(A3)" in out

    def test_degenerate_market_exits_one(self, tmp_path):
        f = tmp_path / "flat.cfg"
        f.write_text(BASE.replace("drift         = 0.08", "drift         = 0.02"))
        assert main(["validate", str(f)]) == 1

    def test_unparseable_config_exits_two(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("horizon = 1.0\nwat = 1\n")
        assert main(["validate", str(f)]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main(["validate", str(tmp_path / "none.cfg")]) == 2


class TestWeights:
    def test_writes_csv_and_passes(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "w.csv"
        assert main(["weights", cfg_file, "--out", str(out),
                     "--points", "101"]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,c_na,c_we,c_re,margin_we,margin_re"
        assert len(lines) == 102
        assert "PASS" in capsys.readouterr().out

    def test_case_override(self, cfg_file, tmp_path):
        out = tmp_path / "w2.csv"
        assert main(["weights", cfg_file, "--out", str(out), "--case", "2",
                     "--points", "51"]) == 0
        last = out.read_text().splitlines()[-1].split(",")
        # case 2 regular weight is (k - r)/(b - r) = 0.5 at every t
        assert float(last[3]) == pytest.approx(0.5, rel=1e-12)

    def test_plot_svg(self, cfg_file, tmp_path):
        out = tmp_path / "w.csv"
        svg = tmp_path / "w.svg"
        assert main(["weights", cfg_file, "--out", str(out), "--points", "21",
                     "--plot", str(svg)]) == 0
        text = svg.read_text()
        assert text.startswith("<svg") and "polyline" in text


class TestSimulate:
    def test_zero_policy_matches_closed_form(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "sim.csv"
        code = main(["simulate", cfg_file, "--policy", "zero", "--paths", "64",
                     "--steps", "32", "--out", str(out)])
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        assert lines[0] == "t,mean,second_moment,variance,stderr"
        assert len(lines) == 34

    def test_naive_policy_small_run(self, cfg_file, tmp_path):
        out = tmp_path / "sim.csv"
        code = main(["simulate", cfg_file, "--policy", "naive",
                     "--paths", "20000", "--steps", "128", "--out", str(out)])
        assert code == 0

    def test_csv_deterministic_across_runs(self, cfg_file, tmp_path, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["simulate", cfg_file, "--policy", "naive", "--paths", "5000",
                "--steps", "64"]
        monkeypatch.setenv("NAIVE_MV_THREADS", "1")
        assert main(argv + ["--out", str(a)]) == 0
        monkeypatch.setenv("NAIVE_MV_THREADS", "4")
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConverge:
    def test_small_run_exits_zero(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "c.csv"
        code = main(["converge", cfg_file, "--paths", "4096", "--steps", "128",
                     "--nmin", "2", "--nmax", "4", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n,d_n,increment_mc,increment_bound"
        assert [int(l.split(",")[0]) for l in lines[1:]] == [2, 3, 4]
        printed = capsys.readouterr().out
        assert printed.count("PASS") == 2

    def test_misaligned_grid_exits_three(self, cfg_file, tmp_path):
        code = main(["converge", cfg_file, "--paths", "64", "--steps", "100",
                     "--nmin", "5", "--nmax", "5",
                     "--out", str(tmp_path / "c.csv")])
        assert code == 3


class TestFrontier:
    def test_value_matches_formula(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "f.csv"
        assert main(["frontier", cfg_file, "--expected", "1.2",
                     "--out", str(out)]) == 0
        row = out.read_text().splitlines()[1].split(",")
        want = (1.2 - math.exp(0.02)) ** 2 / (math.exp(0.09) - 1)
        assert float(row[3]) == pytest.approx(want, rel=1e-10)

    def test_degenerate_market_exits_one(self, tmp_path):
        f = tmp_path / "flat.cfg"
        f.write_text(BASE.replace("drift         = 0.08", "drift         = 0.02"))
        assert main(["frontier", str(f), "--expected", "1.2",
                     "--out", str(tmp_path / "f.csv")]) == 1


class TestInefficiency:
    def test_naive_gap_positive(self, cfg_file, tmp_path, capsys):
        out = tmp_path / "i.csv"
        code = main(["inefficiency", cfg_file, "--policy", "naive",
                     "--paths", "30000", "--steps", "128", "--out", str(out)])
        assert code == 0
        header, row = out.read_text().splitlines()
        assert header == "policy,mean,mean_se,variance,frontier_var,gap,gap_se,z"
        vals = row.split(",")
        assert vals[0] == "naive"
        assert float(vals[5]) > 0

    def test_precommitted_on_frontier(self, cfg_file, tmp_path):
        code = main(["inefficiency", cfg_file, "--policy", "pre_committed",
                     "--paths", "30000", "--steps", "128",
                     "--out", str(tmp_path / "i.csv")])
        assert code == 0
