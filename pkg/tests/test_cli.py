"""Tests for the experiment command line: files, schemas, reproducibility and exit codes."""

import csv
import json
from pathlib import Path

import pytest

from rateadapt.cli import build_parser, main, parse_n_range, parse_schemes, parse_vary
from rateadapt.errors import ConfigurationError
from rateadapt.params import Scheme
from rateadapt.reporting import KPI_COLUMNS, SIM_EXTRA_COLUMNS

SMALL = ["--set", "analysis.class_count=3"]
SIM_BUDGET = [
    "--set", "analysis.realizations=60",
    "--set", "analysis.packets=400",
    "--set", "analysis.window_radius=1000m",
]


def read_csv(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def test_parse_n_range():
    assert parse_n_range("2..4", 15) == (2, 3, 4)
    assert parse_n_range("3", 15) == (3,)
    assert parse_n_range(None, 4) == (1, 2, 3, 4)
    for bad in ("0..3", "4..2", "1..16", "x"):
        with pytest.raises(ConfigurationError) as excinfo:
            parse_n_range(bad, 15)
        assert excinfo.value.key_path == "--n-range"


def test_parse_schemes():
    assert parse_schemes(["olra,olra-es"], ()) == (Scheme.OLRA, Scheme.OLRA_ES)
    assert parse_schemes(["clra", "CLRA"], ()) == (Scheme.CLRA,)
    assert parse_schemes(None, (Scheme.OLRA,)) == (Scheme.OLRA,)
    with pytest.raises(ConfigurationError):
        parse_schemes(["arq"], ())


def test_parse_vary():
    assert parse_vary("spatial.density=100/km2,300/km2") == (
        "spatial.density",
        ("100/km2", "300/km2"),
    )
    assert parse_vary("radio.deadline=10,20") == ("radio.deadline", (10, 20))
    with pytest.raises(ConfigurationError):
        parse_vary("radio.deadline")


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_analyze_writes_files(tmp_path, capsys):
    code = main(
        ["analyze", "--scheme", "olra,olra-es", "--n-range", "1..3", "--out", str(tmp_path), *SMALL]
    )
    assert code == 0
    for n in (1, 2, 3):
        rows = read_csv(tmp_path / f"meta_{n}.csv")
        assert list(rows[0]) == ["delta", "ccdf_analytic"]
        assert len(rows) == 101
        assert float(rows[0]["ccdf_analytic"]) == pytest.approx(1.0)

    kpi = read_csv(tmp_path / "kpi.csv")
    assert len(kpi) == 6
    header = list(kpi[0])
    assert header[: len(KPI_COLUMNS)] == list(KPI_COLUMNS)
    assert header[len(KPI_COLUMNS):] == [
        "psd_c1", "psd_c2", "psd_c3", "latency_slots_c1", "latency_slots_c2", "latency_slots_c3"
    ]
    assert {row["scheme"] for row in kpi} == {"olra", "olra-es"}

    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["command"] == "analyze"
    assert report["schemes"] == ["olra", "olra-es"]
    assert len(report["reports"]) == 6
    assert report["config"]["radio"]["deadline"] == 15
    assert "OLRA" in capsys.readouterr().out


def test_analyze_single_class_collapses_columns(tmp_path):
    code = main(
        ["analyze", "--scheme", "clra", "--n-range", "2", "--out", str(tmp_path),
         "--set", "analysis.class_count=1", "--output", "simple"]
    )
    assert code == 0
    header = list(read_csv(tmp_path / "kpi.csv")[0])
    assert header[len(KPI_COLUMNS):] == ["psd_c1", "latency_slots_c1"]


def test_analyze_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    args = ["analyze", "--scheme", "clra", "--n-range", "1..2", *SMALL]
    assert main([*args, "--out", str(first)]) == 0
    assert main([*args, "--out", str(second)]) == 0
    for name in ("kpi.csv", "report.json", "meta_1.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_marginal_outputs(tmp_path):
    code = main(
        ["simulate", "--scheme", "clra", "--n-range", "2", "--seed", "5",
         "--out", str(tmp_path), *SMALL, *SIM_BUDGET]
    )
    assert code == 0
    samples = (tmp_path / "samples_2.txt").read_text(encoding="utf-8").splitlines()
    assert len(samples) == 60
    assert all(0.0 <= float(v) <= 1.0 for v in samples)

    meta = read_csv(tmp_path / "meta_2.csv")
    assert list(meta[0]) == ["delta", "ccdf_analytic", "ccdf_empirical"]

    rows = read_csv(tmp_path / "kpi_sim.csv")
    assert list(rows[0]) == list(KPI_COLUMNS) + list(SIM_EXTRA_COLUMNS)
    row = rows[0]
    assert int(row["packets"]) == 400 * 3
    assert abs(float(row["psd"]) - float(row["psd_analytic"])) < 5 * float(row["psd_stderr"]) + 0.01

    report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert report["mode"] == "marginal"
    assert "ks_distance" in report["meta"]["2"]


def test_simulate_same_seed_is_byte_identical(tmp_path):
    args = ["simulate", "--scheme", "olra", "--n-range", "3", "--seed", "9", *SMALL, *SIM_BUDGET]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("kpi_sim.csv", "samples_3.txt", "meta_3.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_physical_mode(tmp_path):
    code = main(
        ["simulate", "--scheme", "olra-es", "--n-range", "2", "--mode", "physical",
         "--out", str(tmp_path), *SMALL,
         "--set", "analysis.realizations=10", "--set", "analysis.physical_packets=100",
         "--set", "analysis.window_radius=1000m"]
    )
    assert code == 0
    row = read_csv(tmp_path / "kpi_sim.csv")[0]
    assert int(row["packets"]) == 1000


def test_sweep_writes_one_row_per_value(tmp_path):
    code = main(
        ["sweep", "--scheme", "olra", "--n-range", "2", "--vary",
         "spatial.density=100/km2,300/km2", "--out", str(tmp_path), *SMALL]
    )
    assert code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert [r["value"] for r in rows] == ["100/km2", "300/km2"]
    assert float(rows[0]["psd"]) > float(rows[1]["psd"])


def test_compare_orders_feedback_quality(tmp_path):
    code = main(
        ["compare", "--n-range", "3", "--p-ack", "1,0.7,0.5", "--out", str(tmp_path), *SMALL]
    )
    assert code == 0
    rows = read_csv(tmp_path / "compare.csv")
    variants = [r["variant"] for r in rows]
    assert variants == ["clra(p_ack=1)", "clra(p_ack=0.7)", "clra(p_ack=0.5)", "olra", "olra-es"]
    psd = [float(r["psd"]) for r in rows[:3]]
    assert psd[0] > psd[1] > psd[2]
    assert (tmp_path / "report.json").exists()


def test_optimize_writes_json(tmp_path):
    code = main(
        ["optimize", "--scheme", "olra", "--n-range", "1..4", "--objective", "max-psd",
         "--out", str(tmp_path), *SMALL]
    )
    assert code == 0
    data = json.loads((tmp_path / "optimize.json").read_text(encoding="utf-8"))
    result = data["results"][0]
    assert result["feasible"] is True
    assert 1 <= result["n_opt"] <= 4
    assert len(result["scanned"]) == 4


def test_optimize_infeasible_is_reported(tmp_path, capsys):
    code = main(
        ["optimize", "--scheme", "olra-es", "--n-range", "1", "--target", "0.999999",
         "--out", str(tmp_path), *SMALL]
    )
    assert code == 0
    data = json.loads((tmp_path / "optimize.json").read_text(encoding="utf-8"))
    assert data["results"][0]["feasible"] is False
    assert "infeasible" in capsys.readouterr().out


def test_invalid_config_exits_2_with_key_path(tmp_path, capsys):
    code = main(["analyze", "--out", str(tmp_path), "--set", "spatial.path_loss_exponent=2"])
    assert code == 2
    assert "error: spatial.path_loss_exponent:" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    code = main(["analyze", "--out", str(tmp_path), "--set", "radio.slots=3"])
    assert code == 2
    assert "radio.slots" in capsys.readouterr().err


def test_bad_n_range_exits_2(tmp_path, capsys):
    code = main(["analyze", "--n-range", "1..40", "--out", str(tmp_path)])
    assert code == 2
    assert "--n-range" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "nope.yml"), "--out", str(tmp_path)]) == 2


def test_config_file_is_used(tmp_path):
    path = tmp_path / "exp.yml"
    path.write_text("radio:\n  deadline: 6\nanalysis:\n  class_count: 2\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(path), "--scheme", "olra", "--out", str(out)]) == 0
    rows = read_csv(out / "kpi.csv")
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4, 5, 6]
    assert {r["T"] for r in rows} == {"6"}


DATA_DIR = Path(__file__).parent / "data"
INTERFERENCE_FREE = [
    "--set", "spatial.density=0",
    "--set", "analysis.class_count=2",
    "--set", "analysis.meta_points=5",
]


def test_interference_free_outputs_match_golden(tmp_path):
    code = main(
        ["analyze", "--scheme", "clra,olra,olra-es", "--n-range", "1..3",
         "--out", str(tmp_path), *INTERFERENCE_FREE]
    )
    assert code == 0
    for n in (1, 2, 3):
        text = (tmp_path / f"meta_{n}.csv").read_text(encoding="utf-8")
        assert text == "delta,ccdf_analytic\n0,1\n0.25,1\n0.5,1\n0.75,1\n1,0\n"

    actual = read_csv(tmp_path / "kpi.csv")
    golden = read_csv(DATA_DIR / "kpi_interference_free.csv")
    assert list(actual[0]) == list(golden[0])
    assert len(actual) == len(golden)
    for got, want in zip(actual, golden):
        assert (got["scheme"], got["n"], got["T"]) == (want["scheme"], want["n"], want["T"])
        assert float(got["theta"]) == pytest.approx(float(want["theta"]), rel=1e-6)
        for column in list(want)[4:]:
            assert float(got[column]) == pytest.approx(float(want[column]), rel=1e-12), column
