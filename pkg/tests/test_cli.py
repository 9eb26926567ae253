import json
import subprocess

import pytest

from fanobench.cli import main
from fanobench.codec import ChannelCondition
from fanobench.dtmc import write_rd_curve
from fanobench.montecarlo import TsDistribution, load_distribution, save_distribution

from oracles import pareto_counts


def save_synthetic(tmp_path, counts, frame_length, t_min, name="syn.csv"):
    dist = TsDistribution(
        counts=counts, samples=sum(counts.values()),
        condition=ChannelCondition.noiseless(), decoder_kind="ufa",
        frame_errors=0, cap_hits=0, frame_length=frame_length, t_min=t_min,
    )
    path = tmp_path / name
    save_distribution(dist, path)
    return path


def test_campaign_end_to_end(tmp_path, capsys):
    out = tmp_path / "ts.csv"
    rc = main(["campaign", "--decoder", "bfa", "--ebn0", "4.0",
               "--frames", "200", "--seed", "9", "--out", str(out)])
    assert rc == 0
    assert "bfa at 4 dB" in capsys.readouterr().out
    dist = load_distribution(out)
    assert dist.samples == 200
    assert dist.decoder_kind == "bfa"
    assert dist.t_min == 103
    sidecar = json.loads(out.with_suffix(".json").read_text())
    assert sidecar["schema"] == "ts-dist/1"
    assert sidecar["code"]["generators"] == ["133", "171", "165"]
    manifest = json.loads((tmp_path / "ts.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "campaign"
    assert "--decoder" in manifest["argv"]
    assert manifest["options"]["seed"] == 9


def test_campaign_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "ts.csv"
    argv = ["campaign", "--decoder", "ufa", "--ebn0", "4.5",
            "--frames", "150", "--seed", "3", "--out", str(out)]
    assert main(argv) == 0
    first_csv = out.read_bytes()
    first_side = out.with_suffix(".json").read_bytes()
    first_manifest = json.loads((tmp_path / "ts.csv.manifest.json").read_text())
    assert main(argv) == 0
    assert out.read_bytes() == first_csv
    assert out.with_suffix(".json").read_bytes() == first_side
    second_manifest = json.loads((tmp_path / "ts.csv.manifest.json").read_text())
    first_manifest.pop("timestamp_utc")
    second_manifest.pop("timestamp_utc")
    assert first_manifest == second_manifest


def test_worker_count_does_not_change_results(tmp_path):
    single = tmp_path / "w1.csv"
    double = tmp_path / "w2.csv"
    base = ["campaign", "--decoder", "bfa", "--ebn0", "4.0",
            "--frames", "300", "--seed", "21"]
    assert main(base + ["--out", str(single), "--workers", "1"]) == 0
    assert main(base + ["--out", str(double), "--workers", "2"]) == 0
    assert single.read_bytes() == double.read_bytes()


def test_fit_pareto_cli(tmp_path, capsys):
    counts = pareto_counts(beta=1.8, t_min=206, n_draws=200_000, seed=4)
    ts = save_synthetic(tmp_path, counts, frame_length=206, t_min=206)
    out = tmp_path / "fit.json"
    rc = main(["fit-pareto", "--ts", str(ts), "--out", str(out)])
    assert rc == 0
    assert "exponent=" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["schema"] == "pareto-fit/1"
    assert doc["exponent"] == pytest.approx(1.8, abs=0.1)
    assert doc["fit_window"][0] == 412


def test_fit_pareto_point_mass_exits_4(tmp_path, capsys):
    ts = save_synthetic(tmp_path, {206: 5000}, frame_length=206, t_min=206)
    rc = main(["fit-pareto", "--ts", str(ts)])
    assert rc == 4
    assert "error:" in capsys.readouterr().err


def test_analyze_artifacts(tmp_path):
    ts = save_synthetic(tmp_path, {1: 9000, 2: 800, 30: 200},
                        frame_length=2, t_min=1)
    prefix = tmp_path / "an"
    rc = main(["analyze", "--ts", str(ts), "--buffer", "3",
               "--target-pf", "0.01", "--out-prefix", str(prefix),
               "--occupancy", "--rd-buffers", "2,4",
               "--mu-grid", "1:8:0.5", "--compare-sim",
               "--sim-codewords", "20000", "--mu-hi", "20"])
    assert rc == 0
    summary = json.loads((tmp_path / "an_summary.json").read_text())
    assert summary["schema"] == "analyze-summary/1"
    assert summary["mu_star"] > 1.0
    assert summary["data_rate_bps"] == pytest.approx(1e9 / summary["mu_star"])
    assert "mean_occupancy_pct" in summary

    occ_rows = (tmp_path / "an_occupancy.csv").read_text().splitlines()
    assert occ_rows[0] == "bucket,probability"
    assert len(occ_rows) == 4  # header + one row per buffer slot
    probs = [float(r.split(",")[1]) for r in occ_rows[1:]]
    assert sum(probs) == pytest.approx(1.0, abs=1e-9)

    pf_rows = (tmp_path / "an_pf.csv").read_text().splitlines()
    assert pf_rows[0] == "mu,pf_dtmc,pf_sim"
    assert all(len(r.split(",")) == 3 and r.split(",")[2] != "" for r in pf_rows[1:])

    from fanobench.planner import load_rd_curve
    curve = load_rd_curve(tmp_path / "an_rd.csv")
    assert [b for b, _ in curve] == [2, 4]
    assert (tmp_path / "an.manifest.json").exists()


def test_analyze_unattainable_exits_4(tmp_path, capsys):
    ts = save_synthetic(tmp_path, {206: 1, 10_000_000: 999},
                        frame_length=206, t_min=206)
    rc = main(["analyze", "--ts", str(ts), "--buffer", "2",
               "--target-pf", "0.001", "--out-prefix", str(tmp_path / "x"),
               "--mu-hi", "2"])
    assert rc == 4
    assert "error:" in capsys.readouterr().err


def test_simulate_cli(tmp_path, capsys):
    ts = save_synthetic(tmp_path, {1: 9000, 2: 800, 30: 200},
                        frame_length=2, t_min=1)
    out = tmp_path / "sim.json"
    rc = main(["simulate", "--ts", str(ts), "--buffer", "3", "--mu", "2.0",
               "--codewords", "5000", "--seed", "2", "--out", str(out)])
    assert rc == 0
    assert "simulated 5000 codewords" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["schema"] == "sim-report/1"
    assert doc["n_total"] == 5000
    assert doc["queue"]["buffer_codewords"] == 3


def test_plan_cli(tmp_path, capsys):
    rd = tmp_path / "rd.csv"
    write_rd_curve(rd, [(5, 167e6), (10, 250e6)], {})
    prefix = tmp_path / "pl"
    rc = main(["plan", "--rd-curve", str(rd), "--alpha", "16",
               "--target", "1e9", "--compare", "5,10",
               "--out-prefix", str(prefix)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "optimal buffer size: B=10" in out
    doc = json.loads((tmp_path / "pl_design.json").read_text())
    assert doc["optimal_buffer_codewords"] == 10
    assert doc["comparisons"][0]["area_excess_pct"] == pytest.approx(21.1538, abs=1e-3)
    rows = (tmp_path / "pl_design.csv").read_text().splitlines()
    assert len(rows) == 3


def test_invalid_argument_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["campaign", "--decoder", "ufa", "--ebn0", "4", "--frames", "0",
              "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2


def test_missing_input_exits_3(tmp_path, capsys):
    rc = main(["fit-pareto", "--ts", str(tmp_path / "nope.csv")])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_corrupt_input_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("cycles,count\n206,5\n")
    (tmp_path / "bad.json").write_text('{"schema": "other/1"}\n')
    rc = main(["fit-pareto", "--ts", str(bad)])
    assert rc == 3
    assert "error:" in capsys.readouterr().err


def test_plan_bad_compare_exits_2(tmp_path, capsys):
    rd = tmp_path / "rd.csv"
    write_rd_curve(rd, [(5, 167e6), (10, 250e6)], {})
    rc = main(["plan", "--rd-curve", str(rd), "--alpha", "16",
               "--target", "1e9", "--compare", "5,7",
               "--out-prefix", str(tmp_path / "pl")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_console_script_installed():
    proc = subprocess.run(["fanobench", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("campaign", "fit-pareto", "analyze", "simulate", "plan"):
        assert name in proc.stdout
