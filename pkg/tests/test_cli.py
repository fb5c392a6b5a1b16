import json

import numpy as np
import pytest

from rsbc import cli
from rsbc.channel import load_channel, rayleigh, save_channel


def run(argv):
    return cli.main(argv)


class TestExitCodes:
    def test_missing_p_db_is_config_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["sumrate", "--k", "3", "--m", "3"])
        assert exc.value.code == 2

    def test_fig_gap_guard(self, capsys):
        assert run(["fig-gap", "--k", "6", "--trials", "1"]) == 2
        assert "K=4 and K=5" in capsys.readouterr().err

    def test_capacity_guard_maps_to_config_error(self, capsys):
        assert run(["sumrate", "--k", "7", "--m", "7", "--p-db", "10"]) == 2

    def test_missing_file(self, capsys):
        assert run(["channel", "show", "--file", "/nonexistent/x.csv"]) == 2

    def test_bad_channel_file(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,1\n0.5,1.0:0.0\n")
        assert run(["channel", "show", "--file", str(p)]) == 2

    def test_success(self, tmp_path):
        out = tmp_path / "r.json"
        assert (
            run(
                ["sumrate", "--k", "2", "--m", "2", "--seed", "1",
                 "--p-db", "10", "--out", str(out)]
            )
            == 0
        )
        payload = json.loads(out.read_text())
        assert payload["schema"] == 1
        assert len(payload["records"]) == 1


class TestSumrateCommand:
    def test_record_fields_and_cross_checks(self, tmp_path):
        out = tmp_path / "r.json"
        run(
            ["sumrate", "--channel", "rayleigh", "--k", "3", "--m", "3",
             "--seed", "1", "--p-db", "20", "--out", str(out)]
        )
        rec = json.loads(out.read_text())["records"][0]
        assert rec["P"] == pytest.approx(100.0)
        assert rec["rs_best_subset"] <= rec["upper_bound"] + 1e-8
        assert rec["rs_best_subset"] <= rec["dpc_sum_capacity"] + 1e-8
        assert "closed_form" in rec
        assert 1 <= rec["active_subset"] <= 7

    def test_csv_format(self, tmp_path):
        out = tmp_path / "r.csv"
        run(
            ["sumrate", "--k", "2", "--m", "2", "--seed", "3",
             "--p-db", "10", "--format", "csv", "--out", str(out)]
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "# schema: 1"
        header = lines[1].split(",")
        assert "rs_best_subset" in header
        row = lines[2].split(",")
        value = row[header.index("rs_best_subset")]
        # 17 significant digits survive a parse round trip exactly.
        assert f"{float(value):.17g}" == value
        assert len(value.replace(".", "").replace("-", "").lstrip("0")) >= 16

    def test_multiple_powers_and_trials(self, tmp_path):
        out = tmp_path / "r.json"
        run(
            ["sumrate", "--k", "2", "--m", "2", "--seed", "0", "--trials", "2",
             "--p-db", "0", "--p-db", "10", "--out", str(out)]
        )
        recs = json.loads(out.read_text())["records"]
        assert len(recs) == 4
        assert {r["trial"] for r in recs} == {0, 1}


class TestRegionCommand:
    def test_constraint_export_schema(self, tmp_path):
        out = tmp_path / "region.json"
        run(["region", "--k", "3", "--m", "3", "--seed", "2",
             "--p-db", "20", "--out", str(out)])
        recs = json.loads(out.read_text())["records"]
        assert len(recs) == 15
        for r in recs:
            assert set(r) >= {"pivot", "streams", "rhs_bits", "provenance"}
            assert r["rhs_bits"] >= 0.0


class TestChannelCommands:
    def test_gen_show_round_trip(self, tmp_path, capsys):
        path = tmp_path / "ch.csv"
        run(["channel", "gen", "--k", "2", "--m", "2", "--seed", "7",
             "--out", str(path)])
        ch = load_channel(path)
        assert np.array_equal(ch.H, rayleigh(2, 2, seed=7).H)
        assert run(["channel", "show", "--file", str(path)]) == 0
        shown = capsys.readouterr().out
        assert shown.startswith("K=2 M=2")

    def test_gen_file_source(self, tmp_path):
        src = tmp_path / "src.csv"
        save_channel(rayleigh(2, 3, seed=5), src)
        dst = tmp_path / "dst.csv"
        run(["channel", "gen", "--channel", "file", "--file", str(src),
             "--out", str(dst)])
        assert np.array_equal(load_channel(dst).H, load_channel(src).H)

    def test_pathological_needs_power(self, capsys):
        assert run(["channel", "gen", "--channel", "pathological",
                    "--alpha", "0.5"]) == 2


class TestStreamsCommands:
    def test_order_schema(self, tmp_path):
        out = tmp_path / "o.json"
        run(["streams", "order", "--k", "4", "--m", "4", "--seed", "3",
             "--out", str(out)])
        recs = json.loads(out.read_text())["records"]
        assert len(recs) == 2**4 - 1 - 4
        assert [r["rank"] for r in recs] == list(range(len(recs)))

    def test_eliminate_schema(self, tmp_path):
        out = tmp_path / "e.json"
        run(["streams", "eliminate", "--k", "4", "--m", "4", "--seed", "3",
             "--out", str(out)])
        rec = json.loads(out.read_text())["records"][0]
        assert rec["threshold"] == "inf"
        assert rec["surviving"] == [1, 2, 4, 8]


class TestFigureCommands:
    def test_fig_gap_bound_dominates(self, tmp_path):
        out = tmp_path / "g.json"
        run(["fig-gap", "--k", "4", "--m", "6", "--trials", "3",
             "--p-db", "0", "--p-db", "20", "--seed", "1", "--out", str(out)])
        recs = json.loads(out.read_text())["records"]
        assert len(recs) == 4  # two models x two powers
        for r in recs:
            assert r["mean_upper_bound"] >= r["mean_rs"] - 1e-8
        for model in ("rayleigh", "onering"):
            series = [r for r in recs if r["model"] == model]
            series.sort(key=lambda r: r["p_db"])
            assert series[0]["mean_rs"] <= series[1]["mean_rs"]

    def test_fig_ordering_monotone_and_full_set(self, tmp_path):
        out = tmp_path / "o.json"
        run(["fig-ordering", "--k", "3", "--m", "3", "--trials", "4",
             "--p-db", "20", "--seed", "2", "--out", str(out)])
        recs = json.loads(out.read_text())["records"]
        ns = [r["n_streams"] for r in recs]
        assert ns == list(range(3, 8))
        vals = [r["mean_sum_rate"] for r in recs]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))

    def test_gdof_three_user_slopes(self, tmp_path):
        out = tmp_path / "gd.json"
        run(["gdof", "--family", "three-user", "--alpha", "0.5",
             "--out", str(out)])
        payload = json.loads(out.read_text())
        slopes = payload["slopes"]
        assert slopes["dpc_sum_capacity"] == pytest.approx(3.0, abs=0.05)
        assert slopes["rs_closed_form"] <= 2.75 + 0.05

    def test_gdof_degenerate_exponents_agree(self, tmp_path):
        out = tmp_path / "gd.json"
        run(["gdof", "--family", "two-user-triangular", "--alpha-f", "0.0",
             "--alpha-g", "0.0", "--out", str(out)])
        slopes = json.loads(out.read_text())["slopes"]
        assert slopes["dpc_sum_capacity"] == pytest.approx(
            slopes["lp_bound"], abs=0.1
        )


class TestDeterminism:
    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["fig-ordering", "--k", "3", "--m", "3", "--trials", "3",
                "--p-db", "20", "--seed", "9"]
        run(argv + ["--out", str(a)])
        run(argv + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = ["sumrate", "--k", "2", "--m", "2", "--trials", "4",
                "--p-db", "10", "--seed", "4"]
        monkeypatch.delenv("RSBC_THREADS", raising=False)
        run(argv + ["--out", str(a)])
        monkeypatch.setenv("RSBC_THREADS", "3")
        run(argv + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_csv_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["region", "--k", "2", "--m", "2", "--seed", "5",
                "--p-db", "15", "--format", "csv"]
        run(argv + ["--out", str(a)])
        run(argv + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
