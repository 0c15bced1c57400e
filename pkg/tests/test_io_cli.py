import json

import pytest

import voltesim as v
from voltesim.cli import main
from voltesim.config import load_preset, scenario_hash
from voltesim.io import (InputDataError, read_radio_trace_csv,
                         read_rtp_trace_csv, write_radio_trace_csv,
                         write_rtp_trace_csv)


@pytest.fixture(scope="module")
def sim_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = main(["simulate", "--preset", "volte_only_rohc_on", "--seed", "3",
               "--out", str(out)])
    assert rc == 0
    return out


def test_rtp_trace_round_trip(tmp_path):
    log = v.run_scenario(load_preset("volte_only_rohc_on", seed_override=1))
    path = tmp_path / "trace.csv"
    write_rtp_trace_csv(path, log.packets)
    back = read_rtp_trace_csv(path)
    assert len(back) == len(log.packets)
    for a, b in zip(log.packets, back):
        assert (a.seq, a.payload_bytes, a.talkspurt_start) == \
            (b.seq, b.payload_bytes, b.talkspurt_start)
        if a.arrival_ms is None:
            assert b.arrival_ms is None
        else:
            assert b.arrival_ms == pytest.approx(a.arrival_ms, abs=1e-3)


def test_rtp_trace_schema_errors_carry_row_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("stream_id,seq,media_ts_ms,departure_ms,arrival_ms,"
                    "payload_bytes,talkspurt_start\n"
                    "dl,0,0.0,0.0,10.0,33,0\n"
                    "dl,not_an_int,20.0,20.0,30.0,33,0\n", encoding="utf-8")
    with pytest.raises(InputDataError, match="row 3"):
        read_rtp_trace_csv(path)
    path.write_text("wrong,header\n", encoding="utf-8")
    with pytest.raises(InputDataError, match="row 1"):
        read_rtp_trace_csv(path)


def test_radio_trace_round_trip(tmp_path):
    trace = v.synth_drive_trace(v.RouteParams(duration_ms=1000), seed=0)
    path = tmp_path / "radio.csv"
    write_radio_trace_csv(path, trace)
    back = read_radio_trace_csv(path)
    assert len(back) == len(trace)
    assert back.rsrp_dbm[0] == pytest.approx(trace.rsrp_dbm[0], abs=1e-3)


def test_simulate_outputs_exist(sim_out):
    for name in ("manifest.json", "rtp_trace.csv", "radio_trace.csv",
                 "events.json", "report.json"):
        assert (sim_out / name).exists(), name
    manifest = json.loads((sim_out / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert set(manifest["outputs"]) == {"rtp_trace.csv", "radio_trace.csv",
                                        "events.json", "report.json"}


def test_simulate_deterministic_manifest(sim_out, tmp_path):
    rc = main(["simulate", "--preset", "volte_only_rohc_on", "--seed", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "manifest.json").read_bytes() == \
        (sim_out / "manifest.json").read_bytes()


def test_rerun_from_manifest_bit_exact(sim_out, tmp_path):
    rc = main(["simulate", "--from-manifest", str(sim_out / "manifest.json"),
               "--out", str(tmp_path)])
    assert rc == 0
    for name in ("manifest.json", "rtp_trace.csv", "radio_trace.csv",
                 "events.json", "report.json"):
        assert (tmp_path / name).read_bytes() == \
            (sim_out / name).read_bytes(), name


def test_from_manifest_rejects_non_manifest(sim_out, tmp_path):
    rc = main(["simulate", "--from-manifest", str(sim_out / "report.json"),
               "--out", str(tmp_path / "x")])
    assert rc == 3


def test_simulate_csv_format(tmp_path):
    rc = main(["simulate", "--preset", "volte_only_rohc_on", "--seed", "2",
               "--out", str(tmp_path), "--format", "csv"])
    assert rc == 0
    assert (tmp_path / "events.csv").exists()
    assert (tmp_path / "report_summary.csv").exists()
    header = (tmp_path / "events.csv").read_text().splitlines()[0]
    assert header.startswith("record,t_ms,seq")


def test_malformed_config_exit_2_no_outputs(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[scheduler]\ntarget_bler = nope\n", encoding="utf-8")
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert rc == 2
    assert not out.exists()


def test_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[scheduler]\ntypo_key = 1\n", encoding="utf-8")
    rc = main(["simulate", "--config", str(cfg), "--out",
               str(tmp_path / "out")])
    assert rc == 2


def test_missing_radio_trace_exit_3(tmp_path):
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[radio]\ntrace_csv = /nonexistent/radio.csv\n",
                   encoding="utf-8")
    rc = main(["simulate", "--config", str(cfg), "--out",
               str(tmp_path / "out")])
    assert rc == 3


def test_analyze_without_radio(sim_out, tmp_path):
    rc = main(["analyze", str(sim_out / "rtp_trace.csv"),
               "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["rf_binned"] is None
    assert report["jitter_avg_ms"] is not None


def test_analyze_matches_simulated_report(sim_out, tmp_path):
    rc = main(["analyze", str(sim_out / "rtp_trace.csv"),
               "--radio", str(sim_out / "radio_trace.csv"),
               "--out", str(tmp_path)])
    assert rc == 0
    sim_report = json.loads((sim_out / "report.json").read_text())
    ana_report = json.loads((tmp_path / "report.json").read_text())
    assert ana_report["rtp_error_rate"] == sim_report["rtp_error_rate"]
    assert ana_report["jitter_avg_ms"] == pytest.approx(
        sim_report["jitter_avg_ms"], abs=1e-6)
    assert ana_report["rf_binned"] is not None


def test_analyze_known_gap_census(tmp_path):
    from conftest import make_trace
    trace = make_trace(list(range(100)), [i * 20.0 for i in range(100)],
                       [None if i == 7 else 100.0 + i * 20 for i in range(100)])
    path = tmp_path / "t.csv"
    write_rtp_trace_csv(path, trace)
    rc = main(["analyze", str(path), "--out", str(tmp_path / "out")])
    assert rc == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["rtp_error_rate"] == pytest.approx(0.01)


def test_analyze_hand_computed_jitter_series(tmp_path):
    from conftest import make_trace
    trace = make_trace([0, 1, 2, 3], [0, 20, 40, 60], [100, 122, 139, 161])
    path = tmp_path / "t.csv"
    write_rtp_trace_csv(path, trace)
    rc = main(["analyze", str(path), "--out", str(tmp_path / "out")])
    assert rc == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["jitter_series_ms"] == [2.0, 3.0, 2.0]
    assert report["jitter_avg_ms"] == pytest.approx(7.0 / 3.0)


def test_compare_self_all_zero(sim_out, capsys):
    rc = main(["compare", str(sim_out / "report.json"),
               str(sim_out / "report.json")])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()[1:]
    assert lines and all("A=B" in line for line in lines)


def test_compare_direction_rohc(sim_out, tmp_path, capsys):
    rc = main(["simulate", "--preset", "volte_only_rohc_off", "--seed", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    rc = main(["compare", str(sim_out / "report.json"),
               str(tmp_path / "report.json"), "--out", str(tmp_path)])
    assert rc == 0
    delta = json.loads((tmp_path / "compare.json").read_text())
    assert delta["rtp_error_rate"]["delta"] > 0  # off is worse
    assert delta["rtp_error_rate"]["verdict"] == "A<B"


def test_compare_direction_concurrent_data(sim_out, tmp_path):
    rc = main(["simulate", "--preset", "volte_data_rohc_on", "--seed", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    rc = main(["compare", str(sim_out / "report.json"),
               str(tmp_path / "report.json"), "--out", str(tmp_path)])
    assert rc == 0
    delta = json.loads((tmp_path / "compare.json").read_text())
    assert delta["jitter_avg_ms"]["delta"] > 0  # data-on jitters more


def test_compare_schema_mismatch_exit_3(sim_out, tmp_path):
    other = tmp_path / "other.json"
    data = json.loads((sim_out / "report.json").read_text())
    data["schema_version"] = 99
    other.write_text(json.dumps(data), encoding="utf-8")
    rc = main(["compare", str(sim_out / "report.json"), str(other)])
    assert rc == 3


def test_sweep_writes_summary(tmp_path):
    rc = main(["sweep", "--preset", "volte_only_rohc_on", "--seeds", "2",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep_summary.csv").read_text().splitlines()
    assert lines[0].startswith("seed,")
    assert len(lines) == 3
    assert (tmp_path / "seed_0000" / "manifest.json").exists()


def test_scenario_hash_stable_and_sensitive():
    a = load_preset("volte_only_rohc_on", seed_override=1)
    b = load_preset("volte_only_rohc_on", seed_override=1)
    c = load_preset("volte_only_rohc_on", seed_override=2)
    assert scenario_hash(a) == scenario_hash(b)
    assert scenario_hash(a) != scenario_hash(c)
