"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
complete.  Directional criteria use 20 paired seeds and demand the stated
sign on at least 19 of them (95%).
"""

import dataclasses
import json
import time

import numpy as np
import pytest

import voltesim as v
from conftest import make_trace
from oracles import error_oracle, jitter_oracle
from voltesim.bundling import BundlingConfig, bundle_delay_ms, bundles_needed, \
    validate_bundle_grant
from voltesim.cli import main
from voltesim.codec import amr_wb, rtp_total_packet_bits
from voltesim.config import load_preset
from voltesim.kpi import (error_counts, handover_kpis, mos_estimate,
                          relative_jitter, rtp_error_rate, windowed_kpis)
from voltesim.rohc import RateInputs, compression_efficiency, \
    required_channel_rate

N_SEEDS = 20
MIN_AGREE = 19  # 95% of 20

_run_cache: dict = {}


def _run(preset: str, seed: int, **overrides) -> v.EventLog:
    key = (preset, seed, tuple(sorted(overrides)))
    if key not in _run_cache:
        cfg = load_preset(preset, seed_override=seed)
        if overrides:
            policy = dataclasses.replace(cfg.policy,
                                         **overrides.pop("policy", {}))
            cfg = dataclasses.replace(cfg, policy=policy, **overrides)
        _run_cache[key] = v.run_scenario(cfg)
    return _run_cache[key]


def _line(criterion: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_rate_math():
    eq4 = required_channel_rate(RateInputs(33, 40, 8, 20))
    eq5 = required_channel_rate(RateInputs(33, 5.3, 8, 20))
    ok = abs(eq4 - 32.4) <= 0.01 and abs(eq5 - 18.52) <= 0.01
    table = [(3.9, 18.0), (7.5, 19.4), (3.2, 17.68), (6.5, 19.0)]
    deltas = [abs(required_channel_rate(RateInputs(33, h, 8, 20)) - want)
              for h, want in table]
    ok = ok and max(deltas) <= 0.05
    _line("1 rate math", ok,
          f"eq4={eq4:.3f} eq5={eq5:.3f} table max delta={max(deltas):.4f}")


def test_criterion_2_packetization():
    a = rtp_total_packet_bits(amr_wb(12.65))
    b = rtp_total_packet_bits(amr_wb(23.85))
    _line("2 packetization", a == 424 and b == 648, f"12.65->{a} 23.85->{b}")


def test_criterion_3_bundling_feasibility():
    cfg = BundlingConfig()
    ok = bundles_needed(424, cfg) == 1 and bundles_needed(648, cfg) == 2
    d1 = bundle_delay_ms(1, 0, cfg)
    d2 = bundle_delay_ms(2, 0, cfg)
    ok = ok and d1 == 4.0 and d2 >= 8.0
    log = _run("cell_edge_bundling_on", 0)
    bundled = [g for g in log.grants if g.bundled]
    valid = sum(1 for g in bundled
                if not validate_bundle_grant(g.mcs, g.prb, cfg))
    ok = ok and bundled and valid == len(bundled)
    _line("3 bundling feasibility", ok,
          f"delays {d1}/{d2} ms; {valid}/{len(bundled)} cell-edge grants legal")


def test_criterion_4_compression_efficiency():
    table = [(3.9, 90.1), (7.5, 81.2), (3.2, 91.9), (6.5, 83.6)]
    deltas = [abs(compression_efficiency(40, c) - want) for c, want in table]
    _line("4 compression efficiency", max(deltas) <= 0.3,
          f"max delta {max(deltas):.3f} pp (tol 0.3)")


def test_criterion_5_kpi_oracle_equivalence():
    t0 = time.monotonic()
    rng = np.random.default_rng(2026)
    n_traces = 1000
    for i in range(n_traces):
        n = int(np.exp(rng.uniform(np.log(2), np.log(10_000))))
        media = np.arange(n) * 20.0
        arrivals = media + 40.0 + rng.exponential(6.0, n)
        arrivals = np.maximum.accumulate(arrivals) if rng.random() < 0.5 \
            else arrivals
        lost = rng.random(n) < rng.uniform(0.0, 0.2)
        spurts = rng.random(n) < 0.05
        spurts[0] = True
        trace = make_trace(
            list(range(n)), media,
            [None if lost[k] else float(arrivals[k]) for k in range(n)],
            spurts=list(spurts))
        got = relative_jitter(trace)
        want = jitter_oracle(trace)
        assert got.values_ms.tolist() == [j for _, j in want], f"trace {i}"
        counts = error_counts(trace)
        e, nn = error_oracle(trace)
        assert (counts.lost, counts.received) == (e, nn), f"trace {i}"
        if nn:
            assert rtp_error_rate(trace) == e / (e + nn)
            wins = windowed_kpis(trace, 1000.0)
            assert sum(w.lost for w in wins) == e
            assert sum(w.received for w in wins) == nn
    elapsed = time.monotonic() - t0
    _line("5 kpi oracle equivalence", elapsed < 60.0,
          f"{n_traces} traces exact in {elapsed:.1f} s (< 60 s)")


def test_criterion_6a_rohc_off_raises_error_rate():
    agree = 0
    for seed in range(N_SEEDS):
        on = rtp_error_rate(_run("volte_only_rohc_on", seed).packets)
        off = rtp_error_rate(_run("volte_only_rohc_off", seed).packets)
        agree += off > on
    _line("6a rohc off raises error rate", agree >= MIN_AGREE,
          f"{agree}/{N_SEEDS} seeds")


def test_criterion_6b_concurrent_data_raises_jitter():
    agree = 0
    for seed in range(N_SEEDS):
        solo = relative_jitter(
            _run("volte_only_rohc_on", seed).packets).values_ms.mean()
        data = relative_jitter(
            _run("volte_data_rohc_on", seed).packets).values_ms.mean()
        agree += data > solo
    _line("6b concurrent data raises jitter", agree >= MIN_AGREE,
          f"{agree}/{N_SEEDS} seeds")


def test_criterion_6c_higher_bler_target_raises_jitter():
    agree = 0
    for seed in range(N_SEEDS):
        lo = relative_jitter(_run(
            "volte_only_rohc_on", seed,
            policy={"target_bler": 0.01}).packets).values_ms.mean()
        hi = relative_jitter(
            _run("volte_only_rohc_on", seed).packets).values_ms.mean()
        agree += hi > lo
    _line("6c bler target 1%->10% raises jitter", agree >= MIN_AGREE,
          f"{agree}/{N_SEEDS} seeds")


def test_criterion_6d_clean_scenario_error_below_1pct():
    agree = 0
    worst = 0.0
    for seed in range(N_SEEDS):
        rate = rtp_error_rate(_run("volte_only_rohc_on", seed).packets)
        agree += rate < 0.01
        worst = max(worst, rate)
    _line("6d default scenario error < 1%", agree >= MIN_AGREE,
          f"{agree}/{N_SEEDS} seeds, worst {worst:.4f}")


def test_criterion_7_scheduler_policy_directions():
    from voltesim.kpi import scheduler_stats
    signs = {"mux": 0, "tbs": 0, "padding": 0, "delay": 0}
    for seed in range(N_SEEDS):
        s1 = scheduler_stats(_run("scheduler_policy_1", seed))
        s2 = scheduler_stats(_run("scheduler_policy_2", seed))
        signs["mux"] += s2.mux_pct > s1.mux_pct
        signs["tbs"] += s2.avg_tbs_bytes > s1.avg_tbs_bytes
        signs["padding"] += s2.avg_padding_bytes < s1.avg_padding_bytes
        signs["delay"] += s2.voice_sched_delay_ms < s1.voice_sched_delay_ms
    ok = all(c >= MIN_AGREE for c in signs.values())
    _line("7 policy-2 vs policy-1 directions", ok,
          " ".join(f"{k}={c}/{N_SEEDS}" for k, c in signs.items()))


def test_criterion_8_handover():
    gaps_ok = 0
    losses = []
    for seed in range(N_SEEDS):
        cfg = v.ScenarioConfig(
            duration_ms=8000, seed=seed,
            route=v.RouteParams(duration_ms=8000, route="flat",
                                shadow_sigma_db=0, sinr_sigma_db=0),
            handover=v.HandoverModel(trigger="periodic", periodic_ms=5000,
                                     interruption_mean_ms=75.0,
                                     extra_sched_delay_ms=40.0))
        log = v.run_scenario(cfg)
        rows = handover_kpis(log)
        assert len(rows) == 1
        gap = rows[0].first_gap_ms
        gaps_ok += (gap is not None and 75.0 <= gap <= 75.0 + 40.0
                    and rows[0].max_jitter_ms >= 75.0)
        losses.append(rows[0].packets_lost)
    outage = v.run_scenario(v.ScenarioConfig(
        duration_ms=25_000, seed=0,
        route=v.RouteParams(duration_ms=25_000, route="flat",
                            mean_sinr_db=-30.0, mean_rsrp_dbm=-130.0,
                            shadow_sigma_db=0, sinr_sigma_db=0)))
    ok = gaps_ok == N_SEEDS and float(np.mean(losses)) <= 1.0 \
        and len(outage.call_drops) == 1
    _line("8 handover", ok,
          f"gap in band {gaps_ok}/{N_SEEDS}, mean loss "
          f"{float(np.mean(losses)):.2f}, drops {len(outage.call_drops)}")


def test_criterion_9_mos_surrogate():
    monotone = True
    for codec in (12.65, 23.85):
        for d in (0.0, 60.0, 180.0):
            vals = [mos_estimate(l, d, codec) for l in np.linspace(0, 0.6, 40)]
            monotone &= all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        for l in (0.0, 0.02):
            vals = [mos_estimate(l, d, codec) for d in np.linspace(0, 450, 40)]
            monotone &= all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    in_band = 0
    for seed in range(N_SEEDS):
        log = _run("volte_only_rohc_on", seed)
        arrived = [p for p in log.packets if p.arrival_ms is not None]
        delay = float(np.mean([p.arrival_ms - p.departure_ms
                               for p in arrived]))
        mos = mos_estimate(rtp_error_rate(log.packets), delay, 12.65)
        in_band += 3.6 <= mos <= 4.0
    crossing = (mos_estimate(0.0, 40, 23.85) > mos_estimate(0.0, 40, 12.65)
                and mos_estimate(0.08, 40, 23.85)
                < mos_estimate(0.08, 40, 12.65))
    ok = monotone and in_band >= MIN_AGREE and crossing
    _line("9 mos surrogate", ok,
          f"monotone={monotone} band {in_band}/{N_SEEDS} crossing={crossing}")


def test_criterion_10_determinism(tmp_path):
    digests = set()
    for rep in range(5):
        out = tmp_path / f"rep{rep}"
        rc = main(["simulate", "--preset", "volte_data_rohc_on",
                   "--seed", "11", "--out", str(out)])
        assert rc == 0
        digests.add((out / "manifest.json").read_bytes())
    _line("10 determinism", len(digests) == 1,
          f"{5 - len(digests) + 1}/5 identical manifests")
