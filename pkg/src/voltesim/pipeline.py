"""Deterministic end-to-end run: departures through ROHC, scheduling,
HARQ, handover interruptions and core delay to UE arrivals, plus the
receive-side jitter buffer.

Time is kept in integer microseconds internally; the TTI grid is 1 ms.
Every random draw comes from a named sub-stream keyed by packet sequence
number or TTI, so toggling one feature leaves all other draws in paired
runs untouched.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import substream
from .bundling import (BundlingConfig, bundles_needed, should_bundle,
                       validate_bundle_grant)
from .codec import ActivityModel, CodecConfig, RtpRecord, generate_stream
from .radio import LinkModel, RadioTrace, RouteParams, bler, max_mcs_for, \
    synth_drive_trace
from .rohc import (DecompOutcome, HeaderSizeModel, RohcContext, RohcMode,
                   RohcParams, RohcState, apply_feedback, compress,
                   decompress)
from .scheduler import (DrxConfig, OllaState, SchedulerPolicy, SpsState,
                        TbsTable, drx_gate, olla_step, sps_update)

US_PER_MS = 1000
TTI_US = 1000


class ConfigError(ValueError):
    """Scenario configuration rejected; message names the offending field."""


@dataclass(frozen=True)
class HandoverModel:
    trigger: str = "none"  # none | periodic | rsrp_crossing
    periodic_ms: float = 10_000.0
    rsrp_crossing_dbm: float = -110.0
    min_spacing_ms: float = 2_000.0
    interruption_mean_ms: float = 75.0
    interruption_jitter_ms: float = 0.0
    extra_sched_delay_ms: float = 40.0

    def __post_init__(self):
        if self.trigger not in ("none", "periodic", "rsrp_crossing"):
            raise ConfigError(f"handover.trigger: unknown value {self.trigger!r}")
        if self.interruption_mean_ms < 0 or self.extra_sched_delay_ms < 0:
            raise ConfigError("handover: interruption/extra delay must be >= 0")


@dataclass(frozen=True)
class DelayModel:
    """Core/transport one-way delay: constant base plus exponential tail."""

    base_ms: float = 15.0
    exp_mean_ms: float = 1.0

    def __post_init__(self):
        if self.base_ms < 0 or self.exp_mean_ms < 0:
            raise ConfigError("core_delay: values must be >= 0")


@dataclass(frozen=True)
class JitterBufferConfig:
    min_depth_ms: float = 20.0
    max_depth_ms: float = 100.0
    init_depth_ms: float = 40.0
    percentile: float = 95.0
    window_pkts: int = 50

    def __post_init__(self):
        if not 0 < self.min_depth_ms <= self.max_depth_ms:
            raise ConfigError("jitter_buffer: need 0 < min_depth <= max_depth")


@dataclass(frozen=True)
class ScenarioConfig:
    codec: CodecConfig = field(default_factory=lambda: CodecConfig(12.65))
    activity: ActivityModel = field(default_factory=ActivityModel)
    duration_ms: float = 30_000.0
    seed: int = 1
    rohc_enabled: bool = True
    rohc_mode: RohcMode = RohcMode.O
    rohc_sizes: HeaderSizeModel = field(default_factory=HeaderSizeModel)
    rohc_params: RohcParams = field(default_factory=RohcParams)
    l2_overhead_bytes: float = 8.0
    concurrent_data: bool = False
    data_rate_kbps: float = 0.0  # 0 means full buffer
    policy: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    link: LinkModel = field(default_factory=LinkModel)
    bundling: BundlingConfig | None = None
    route: RouteParams | None = None
    radio_trace_path: str | None = None
    handover: HandoverModel = field(default_factory=HandoverModel)
    core_delay: DelayModel = field(default_factory=DelayModel)
    jitter_buffer: JitterBufferConfig = field(default_factory=JitterBufferConfig)
    call_drop_timeout_ms: float = 10_000.0
    tbs_table_path: str | None = None
    direction: str = "dl"
    stream_id: str = "dl"

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ConfigError("run.duration_ms: must be > 0")
        if self.call_drop_timeout_ms <= 0:
            raise ConfigError("run.call_drop_timeout_ms: must be > 0")
        if self.direction not in ("dl", "ul"):
            raise ConfigError(f"run.direction: unknown value {self.direction!r}")
        if self.bundling is not None and self.direction != "ul":
            raise ConfigError("bundling requires run.direction = ul")


@dataclass(slots=True)
class GrantRecord:
    t_ms: float
    tbs_bits: int
    mcs: int
    prb: int
    carries_voice: bool
    carries_data: bool
    padding_bits: int
    mimo_rank: int = 1
    bundled: bool = False
    is_retx: bool = False
    sps_occasion: bool = False
    pdcch: int = 1


@dataclass(slots=True)
class HarqRecord:
    t_ms: float
    bearer: str
    seq: int
    attempt: int
    delivered: bool


@dataclass(slots=True)
class HandoverWindow:
    start_ms: float
    end_ms: float


@dataclass(slots=True)
class JbDiscard:
    seq: int
    arrival_ms: float
    playout_deadline_ms: float


@dataclass(slots=True)
class JbPlayout:
    seq: int
    playout_ms: float


@dataclass
class EventLog:
    """Everything the analyzer needs from one run."""

    duration_ms: float
    tti_count: int
    packets: list[RtpRecord] = field(default_factory=list)
    loss_reason: dict[int, str] = field(default_factory=dict)
    in_flight: int = 0
    grants: list[GrantRecord] = field(default_factory=list)
    harq: list[HarqRecord] = field(default_factory=list)
    handovers: list[HandoverWindow] = field(default_factory=list)
    jb_playouts: list[JbPlayout] = field(default_factory=list)
    jb_discards: list[JbDiscard] = field(default_factory=list)
    jb_depth_ms: list[float] = field(default_factory=list)
    call_drops: list[float] = field(default_factory=list)
    pdcch_count: int = 0
    data_bits_delivered: int = 0
    voice_bits_delivered: int = 0
    voice_sched_delays_ms: list[float] = field(default_factory=list)
    radio: RadioTrace | None = None
    mean_header_bytes: float = 0.0

    def arrived(self) -> list[RtpRecord]:
        return [p for p in self.packets if p.arrival_ms is not None]


# --- handover schedule ---


def _handover_windows(cfg: ScenarioConfig, radio: RadioTrace,
                      rng) -> list[HandoverWindow]:
    model = cfg.handover
    starts: list[float] = []
    if model.trigger == "periodic":
        t = model.periodic_ms
        while t < cfg.duration_ms:
            starts.append(t)
            t += model.periodic_ms
    elif model.trigger == "rsrp_crossing":
        below = radio.rsrp_dbm < model.rsrp_crossing_dbm
        crossings = np.nonzero(below[1:] & ~below[:-1])[0] + 1
        last = -math.inf
        for i in crossings:
            t = float(radio.t_ms[i])
            if t - last >= model.min_spacing_ms:
                starts.append(t)
                last = t
    windows = []
    for t in starts:
        jitter = model.interruption_jitter_ms
        dur = model.interruption_mean_ms
        if jitter > 0:
            dur = max(0.0, dur + jitter * (2.0 * rng.random() - 1.0))
        windows.append(HandoverWindow(start_ms=t, end_ms=t + dur))
    return windows


# --- voice PDU bookkeeping ---


@dataclass(slots=True)
class _VoicePdu:
    seq: int
    record: RtpRecord
    enb_us: int
    eligible_tti: int
    remaining_bits: int
    rohc_kind: RohcState | None
    first_grant_tti: int = -1
    in_flight: bool = False


class _HarqDraws:
    """Per-packet uniform draws, keyed by sequence number so paired runs
    consume identical randomness per packet regardless of timing."""

    def __init__(self, seed: int, stream: str, n_packets: int, width: int = 48):
        self._u = substream(seed, stream).random((max(1, n_packets), width))
        self._pos = np.zeros(max(1, n_packets), dtype=np.int64)
        self._seed = seed
        self._stream = stream

    def next(self, seq: int) -> float:
        row = self._u[seq]
        pos = self._pos[seq]
        if pos < row.size:
            self._pos[seq] += 1
            return float(row[pos])
        # beyond the pre-drawn budget (very long retx chains)
        extra = substream(self._seed, self._stream + "-extra", seq, int(pos))
        self._pos[seq] += 1
        return float(extra.random())


def run_scenario(cfg: ScenarioConfig) -> EventLog:
    """Simulate one scenario; deterministic for a fixed config and seed."""
    if cfg.radio_trace_path is not None:
        from .io import read_radio_trace_csv
        radio = read_radio_trace_csv(cfg.radio_trace_path)
    else:
        radio = synth_drive_trace(cfg.route or RouteParams(
            duration_ms=cfg.duration_ms), cfg.seed)

    departures = generate_stream(cfg.codec, cfg.duration_ms, cfg.activity,
                                 cfg.seed, stream_id=cfg.stream_id)
    if cfg.direction == "ul":
        log = _run_uplink(cfg, radio, departures)
    else:
        log = _run_downlink(cfg, radio, departures)
    log.radio = radio
    _run_jitter_buffer(cfg, log)
    return log


def _core_delays_us(cfg: ScenarioConfig, n: int) -> np.ndarray:
    rng = substream(cfg.seed, "core")
    tail = rng.exponential(cfg.core_delay.exp_mean_ms, size=max(1, n))
    delays_ms = cfg.core_delay.base_ms + tail[:n]
    return np.round(delays_ms * US_PER_MS).astype(np.int64)


def _tti_sinr(radio: RadioTrace, n_tti: int) -> np.ndarray:
    t = np.arange(n_tti, dtype=np.float64) + 0.5
    return radio.sinr_db[radio.nearest_indices(t)]


def _pdu_bits(cfg: ScenarioConfig, header_bytes: float) -> int:
    total_bytes = cfg.codec.amr_payload_bytes + header_bytes + cfg.l2_overhead_bytes
    return int(math.ceil(total_bytes * 8.0))


def _tbs_table(cfg: ScenarioConfig) -> TbsTable:
    if cfg.tbs_table_path:
        return TbsTable.from_csv(cfg.tbs_table_path)
    return TbsTable()


def _run_downlink(cfg: ScenarioConfig, radio: RadioTrace,
                  departures: list[RtpRecord]) -> EventLog:
    n_tti = int(math.ceil(cfg.duration_ms))
    log = EventLog(duration_ms=cfg.duration_ms, tti_count=n_tti)
    log.packets = [p.copy() for p in departures]
    n_pkts = len(log.packets)

    sinr = _tti_sinr(radio, n_tti)
    core_us = _core_delays_us(cfg, n_pkts)
    ho_rng = substream(cfg.seed, "handover")
    windows = _handover_windows(cfg, radio, ho_rng)
    log.handovers = windows
    # Target-cell scheduling ramp: fresh grants after a handover wait an
    # extra one half to three quarters of the configured delay budget;
    # in-flight HARQ (PDCP re-forwarding) resumes right at window end.
    extra = cfg.handover.extra_sched_delay_ms
    ho_resume_us = []
    for w in windows:
        ramp = ho_rng.uniform(0.5 * extra, 0.7 * extra)
        ho_resume_us.append(int(w.end_ms * US_PER_MS) + int(ramp * US_PER_MS))
    # cumulative blocked time per TTI: the RLC reassembly clock freezes
    # across interruption windows and their scheduling ramp
    blocked = np.zeros(n_tti + 1)
    for w, resume in zip(windows, ho_resume_us):
        lo = min(n_tti, int(w.start_ms))
        hi = min(n_tti, resume // TTI_US + 1)
        blocked[lo:hi] = 1.0
    blocked_cum = np.concatenate(([0.0], np.cumsum(blocked[:-1])))

    def active_elapsed_ms(first_tti: int, tti: int) -> float:
        return (tti - first_tti) - (blocked_cum[tti] - blocked_cum[first_tti])

    voice_draws = _HarqDraws(cfg.seed, "harq-voice", n_pkts)
    data_u = substream(cfg.seed, "harq-data").random(n_tti) \
        if cfg.concurrent_data else None
    rank2_u = substream(cfg.seed, "rank2").random(n_tti) \
        if cfg.policy.allow_rank2_voice_split else None

    tbs_table = _tbs_table(cfg)
    policy = cfg.policy
    link = cfg.link
    olla = OllaState()

    # ROHC state
    comp_ctx = RohcContext(mode=cfg.rohc_mode, sizes=cfg.rohc_sizes,
                           params=cfg.rohc_params) if cfg.rohc_enabled else None
    decomp_ctx = RohcContext(mode=cfg.rohc_mode, sizes=cfg.rohc_sizes,
                             params=cfg.rohc_params) if cfg.rohc_enabled else None
    feedback_delay_us = int(cfg.codec.frame_interval_ms * US_PER_MS)
    fb_queue: list[tuple[int, str]] = []

    # PDUs in eNB-ingress order; header compression happens lazily when the
    # packet actually reaches the eNB so ROHC feedback can take effect.
    order = sorted(range(n_pkts),
                   key=lambda i: (int(round(departures[i].departure_ms
                                            * US_PER_MS)) + int(core_us[i]), i))
    mux_allowed = policy.multiplex_voice_data and cfg.concurrent_data
    extra_wait = policy.pipeline_depth_tti if (cfg.concurrent_data
                                               and not mux_allowed) else 0
    pdus: list[_VoicePdu] = []
    for i in order:
        rec = log.packets[i]
        enb_us = int(round(rec.departure_ms * US_PER_MS)) + int(core_us[i])
        pdus.append(_VoicePdu(seq=rec.seq, record=rec, enb_us=enb_us,
                              eligible_tti=enb_us // TTI_US + 1 + extra_wait,
                              remaining_bits=-1, rohc_kind=None))
    header_sum = 0.0
    compressed_count = 0
    ingress_idx = 0

    def ingest_up_to(now_us: int):
        nonlocal ingress_idx, header_sum, compressed_count
        while ingress_idx < len(pdus) and pdus[ingress_idx].enb_us <= now_us:
            pdu = pdus[ingress_idx]
            if cfg.rohc_enabled:
                while fb_queue and fb_queue[0][0] <= pdu.enb_us:
                    apply_feedback(comp_ctx, heapq.heappop(fb_queue)[1])
                hdr, kind = compress(comp_ctx, pdu.seq)
            else:
                hdr, kind = cfg.rohc_sizes.full_header_bytes, None
            pdu.remaining_bits = _pdu_bits(cfg, hdr)
            pdu.rohc_kind = kind
            header_sum += hdr
            compressed_count += 1
            ingress_idx += 1

    sps_state = SpsState(config=policy.sps) if policy.sps else None
    if sps_state is not None:
        log.pdcch_count += 1  # SPS activation grant
    drx: DrxConfig | None = policy.drx
    data_backlog_bits = 0.0
    last_grant_us = 0
    last_arrival_us = 0

    # retransmission heap: (due_tti, order, bearer, payload)
    retx: list = []
    retx_counter = 0
    pdu_idx = 0
    resolved: set[int] = set()

    def resolve_delivery(pdu: _VoicePdu, tti: int):
        nonlocal last_arrival_us
        arrival_us = tti * TTI_US + 999
        if cfg.rohc_enabled:
            outcome = decompress(decomp_ctx, pdu.rohc_kind, True)
            for fb in decomp_ctx.feedback_out:
                heapq.heappush(fb_queue, (arrival_us + feedback_delay_us, fb))
            decomp_ctx.feedback_out.clear()
            if outcome is DecompOutcome.FAIL:
                log.loss_reason[pdu.seq] = "rohc_context"
                resolved.add(pdu.seq)
                return
        pdu.record.arrival_ms = arrival_us / US_PER_MS
        last_arrival_us = max(last_arrival_us, arrival_us)
        resolved.add(pdu.seq)

    def resolve_loss(pdu: _VoicePdu, reason: str):
        if cfg.rohc_enabled:
            decompress(decomp_ctx, pdu.rohc_kind, False)
        log.loss_reason[pdu.seq] = reason
        resolved.add(pdu.seq)

    win_i = 0
    block_until_us = -1

    tti = 0
    while tti < n_tti:
        now_us = tti * TTI_US

        if now_us - max(last_arrival_us, 0) > cfg.call_drop_timeout_ms * US_PER_MS:
            log.call_drops.append(now_us / US_PER_MS)
            break

        # handover interruption window
        while win_i < len(windows) and now_us >= int(windows[win_i].end_ms * US_PER_MS):
            win_i += 1
        in_window = (win_i < len(windows)
                     and int(windows[win_i].start_ms * US_PER_MS) <= now_us
                     < int(windows[win_i].end_ms * US_PER_MS))
        if in_window:
            block_until_us = max(block_until_us, ho_resume_us[win_i])
            tti += 1
            continue
        # during the post-handover ramp only in-flight HARQ may proceed
        ramp_only = now_us < block_until_us

        ingest_up_to(now_us)
        sinr_now = float(sinr[tti])
        granted = False

        # 1) due retransmissions (voice ahead of data at equal due time)
        if retx and retx[0][0] <= tti:
            due, _, bearer, payload = heapq.heappop(retx)
            if bearer == "voice":
                pdu, seg_bits, mcs, prb, attempt = payload
                if active_elapsed_ms(pdu.first_grant_tti,
                                     tti) > policy.rlc_reassembly_ms:
                    pdu.in_flight = False
                    resolve_loss(pdu, "rlc_reassembly")
                    _drop_pending_retx(retx, pdu)
                else:
                    u = voice_draws.next(pdu.seq)
                    p = bler(sinr_now + (attempt - 1) * link.harq_gain_db,
                             mcs, link)
                    ok = u >= p
                    log.grants.append(GrantRecord(
                        t_ms=tti * 1.0, tbs_bits=max(seg_bits, 16), mcs=mcs,
                        prb=prb, carries_voice=True, carries_data=False,
                        padding_bits=0, is_retx=True, pdcch=0))
                    log.harq.append(HarqRecord(tti * 1.0, "voice", pdu.seq,
                                               attempt, ok))
                    olla_step(olla, ok, policy.target_bler)
                    if ok:
                        pdu.in_flight = False
                        _advance_pdu(cfg, log, pdu, seg_bits, tti, retx,
                                     resolve_delivery)
                    elif attempt >= link.max_harq_tx:
                        pdu.in_flight = False
                        resolve_loss(pdu, "harq_exhausted")
                    else:
                        retx_counter += 1
                        heapq.heappush(retx, (
                            tti + int(link.harq_rtt_ms), retx_counter,
                            "voice", (pdu, seg_bits, mcs, prb, attempt + 1)))
            else:
                tbs, carried, mcs, prb, attempt = payload
                u = float(data_u[tti])
                p = bler(sinr_now + (attempt - 1) * link.harq_gain_db, mcs, link)
                ok = u >= p
                log.grants.append(GrantRecord(
                    t_ms=tti * 1.0, tbs_bits=tbs, mcs=mcs, prb=prb,
                    carries_voice=False, carries_data=True,
                    padding_bits=tbs - carried, is_retx=True, pdcch=0))
                log.harq.append(HarqRecord(tti * 1.0, "data", -1, attempt, ok))
                olla_step(olla, ok, policy.target_bler)
                if ok:
                    log.data_bits_delivered += carried
                elif attempt < link.max_harq_tx:
                    retx_counter += 1
                    heapq.heappush(retx, (tti + int(link.harq_rtt_ms),
                                          retx_counter, "data",
                                          (tbs, carried, mcs, prb, attempt + 1)))
            last_grant_us = now_us
            tti += 1
            continue

        # 2) head-of-line voice PDU (strict in-order, stop-and-wait per PDU)
        while pdu_idx < len(pdus) and pdus[pdu_idx].seq in resolved:
            pdu_idx += 1
        hol = pdus[pdu_idx] if (pdu_idx < len(pdus)
                                and not ramp_only) else None
        if hol is not None and (hol.in_flight or hol.remaining_bits < 0):
            hol = None  # waiting on a pending retransmission or not ingested
        if hol is not None:
            eligible_tti = hol.eligible_tti
            if drx is not None and (now_us - last_grant_us
                                    > drx.inactivity_timer_ms * US_PER_MS):
                gated = drx_gate(hol.enb_us / US_PER_MS, drx)
                eligible_tti = max(eligible_tti,
                                   int(math.ceil(gated - 1e-9)))
            if eligible_tti > tti:
                hol = None
        if hol is not None and sps_state is not None and sps_state.active:
            if not sps_state.is_occasion(tti):
                hol = None

        if hol is not None:
            if hol.first_grant_tti < 0:
                hol.first_grant_tti = tti
                log.voice_sched_delays_ms.append(
                    tti - hol.enb_us / US_PER_MS)
            elif active_elapsed_ms(hol.first_grant_tti,
                                   tti) > policy.rlc_reassembly_ms:
                resolve_loss(hol, "rlc_reassembly")
                tti += 1
                continue
            mcs = max_mcs_for(sinr_now + olla.offset_db, policy.target_bler, link)
            cap = min(policy.max_prb_per_grant, tbs_table.max_prb)
            mux = mux_allowed
            rank = 1
            if rank2_u is not None and mux and rank2_u[tti] < policy.rank2_split_prob:
                rank = 2
            want = hol.remaining_bits
            prb = tbs_table.min_prb_for(mcs, want, cap)
            if prb is None:
                prb = cap
            tbs = tbs_table.tbs(mcs, prb) * rank
            if mux:
                prb = cap
                tbs = tbs_table.tbs(mcs, prb) * rank
            seg_bits = min(want, tbs)
            data_fill = 0
            if mux:
                data_fill = tbs - seg_bits
                if cfg.data_rate_kbps > 0:
                    data_fill = min(data_fill, int(data_backlog_bits))
            padding = tbs - seg_bits - data_fill
            sps_occ = sps_state is not None and sps_state.active \
                and sps_state.is_occasion(tti)
            pdcch = 0 if sps_occ else 1
            log.grants.append(GrantRecord(
                t_ms=tti * 1.0, tbs_bits=tbs, mcs=mcs, prb=prb,
                carries_voice=True, carries_data=data_fill > 0,
                padding_bits=padding, mimo_rank=rank,
                sps_occasion=sps_occ, pdcch=pdcch))
            log.pdcch_count += pdcch
            u = voice_draws.next(hol.seq)
            p = bler(sinr_now, mcs, link)
            ok = u >= p
            log.harq.append(HarqRecord(tti * 1.0, "voice", hol.seq, 1, ok))
            olla_step(olla, ok, policy.target_bler)
            if data_fill > 0:
                data_backlog_bits -= data_fill
                if ok:
                    log.data_bits_delivered += data_fill
            if ok:
                _advance_pdu(cfg, log, hol, seg_bits, tti, retx,
                             resolve_delivery)
            elif link.max_harq_tx <= 1:
                resolve_loss(hol, "harq_exhausted")
            else:
                hol.in_flight = True
                retx_counter += 1
                heapq.heappush(retx, (tti + int(link.harq_rtt_ms),
                                      retx_counter, "voice",
                                      (hol, seg_bits, mcs, prb, 2)))
            if sps_state is not None and sps_state.active \
                    and sps_state.is_occasion(tti):
                sps_update(sps_state, tti, had_payload=True)
            last_grant_us = now_us
            granted = True
        elif sps_state is not None and sps_state.active \
                and sps_state.is_occasion(tti):
            sps_update(sps_state, tti, had_payload=False)

        # 3) background data (full buffer, or the constant-rate profile)
        rate_limited = cfg.data_rate_kbps > 0
        if not granted and not ramp_only and cfg.concurrent_data \
                and (not rate_limited or data_backlog_bits >= 8):
            mcs = max_mcs_for(sinr_now + olla.offset_db, policy.target_bler, link)
            cap = min(policy.max_prb_per_grant, tbs_table.max_prb)
            if rate_limited:
                prb = tbs_table.min_prb_for(mcs, int(data_backlog_bits),
                                            cap) or cap
            else:
                prb = cap
            tbs = tbs_table.tbs(mcs, prb)
            carried = min(tbs, int(data_backlog_bits)) if rate_limited else tbs
            log.grants.append(GrantRecord(
                t_ms=tti * 1.0, tbs_bits=tbs, mcs=mcs, prb=prb,
                carries_voice=False, carries_data=True,
                padding_bits=tbs - carried))
            log.pdcch_count += 1
            if rate_limited:
                data_backlog_bits -= carried
            u = float(data_u[tti])
            p = bler(sinr_now, mcs, link)
            ok = u >= p
            log.harq.append(HarqRecord(tti * 1.0, "data", -1, 1, ok))
            olla_step(olla, ok, policy.target_bler)
            if ok:
                log.data_bits_delivered += carried
            elif link.max_harq_tx > 1:
                retx_counter += 1
                heapq.heappush(retx, (tti + int(link.harq_rtt_ms),
                                      retx_counter, "data",
                                      (tbs, carried, mcs, prb, 2)))
            last_grant_us = now_us

        if cfg.concurrent_data and cfg.data_rate_kbps > 0:
            data_backlog_bits += cfg.data_rate_kbps  # kbps == bits per ms
        tti += 1

    log.in_flight = sum(1 for p in log.packets
                        if p.arrival_ms is None and p.seq not in log.loss_reason)
    log.mean_header_bytes = (header_sum / compressed_count
                             if compressed_count else 0.0)
    return log


def _advance_pdu(cfg, log, pdu: _VoicePdu, seg_bits: int, tti: int, retx,
                 resolve_delivery) -> None:
    log.voice_bits_delivered += seg_bits
    pdu.remaining_bits -= seg_bits
    if pdu.remaining_bits <= 0:
        resolve_delivery(pdu, tti)
    else:
        # continuation segment carries resegmentation overhead
        pdu.remaining_bits += cfg.policy.seg_overhead_bits


def _drop_pending_retx(retx, pdu: _VoicePdu) -> None:
    stale = [e for e in retx if e[2] == "voice" and e[3][0] is pdu]
    for e in stale:
        retx.remove(e)
    heapq.heapify(retx)


# --- uplink with TTI bundling ---


def _run_uplink(cfg: ScenarioConfig, radio: RadioTrace,
                departures: list[RtpRecord]) -> EventLog:
    n_tti = int(math.ceil(cfg.duration_ms))
    log = EventLog(duration_ms=cfg.duration_ms, tti_count=n_tti)
    log.packets = [p.copy() for p in departures]
    n_pkts = len(log.packets)
    bcfg = cfg.bundling
    link = cfg.link
    policy = cfg.policy
    tbs_table = _tbs_table(cfg)
    sinr = _tti_sinr(radio, n_tti)
    core_us = _core_delays_us(cfg, n_pkts)
    draws = _HarqDraws(cfg.seed, "harq-ul", n_pkts)

    comp_ctx = RohcContext(mode=cfg.rohc_mode, sizes=cfg.rohc_sizes,
                           params=cfg.rohc_params) if cfg.rohc_enabled else None
    decomp_ctx = RohcContext(mode=cfg.rohc_mode, sizes=cfg.rohc_sizes,
                             params=cfg.rohc_params) if cfg.rohc_enabled else None
    pending_fb: list[str] = []
    bundling_on = False
    header_sum = 0.0
    free_tti = 0
    last_arrival_us = 0
    dropped = False

    for i, rec in enumerate(log.packets):
        dep_us = int(round(rec.departure_ms * US_PER_MS))
        start_tti = max(dep_us // TTI_US + 1, free_tti)
        if dropped:
            break
        if cfg.rohc_enabled:
            # feedback from the previous packet reaches the compressor first
            for fb in pending_fb:
                apply_feedback(comp_ctx, fb)
            pending_fb.clear()
            hdr, kind = compress(comp_ctx, i)
        else:
            hdr, kind = cfg.rohc_sizes.full_header_bytes, None
        header_sum += hdr
        pdu_bits = _pdu_bits(cfg, hdr)

        if start_tti >= n_tti:
            break
        sinr_now = float(sinr[start_tti])
        bundling_on = (bcfg is not None
                       and should_bundle(sinr_now, 0.5, bcfg, bundling_on))

        if (start_tti * TTI_US - max(last_arrival_us, 0)
                > cfg.call_drop_timeout_ms * US_PER_MS):
            log.call_drops.append(start_tti * 1.0)
            dropped = True
            break

        if bundling_on:
            sinr_eff = sinr_now + bcfg.coverage_gain_db
            mcs = min(max_mcs_for(sinr_eff, policy.target_bler, link),
                      bcfg.max_mcs)
            prb = bcfg.max_prb
            # the bundled TBS cap is what the paper's feasibility math uses
            tbs = bcfg.max_tbs_bits
            n_bundles = bundles_needed(pdu_bits, bcfg)
            t = start_tti
            delivered = True
            remaining = pdu_bits
            for b in range(n_bundles):
                seg_bits = min(remaining, tbs)
                attempts = 0
                ok = False
                while attempts < link.max_harq_tx:
                    p = bler(sinr_eff + attempts * link.harq_gain_db, mcs, link)
                    u = draws.next(rec.seq)
                    attempts += 1
                    ok = u >= p
                    assert not validate_bundle_grant(mcs, prb, bcfg)
                    log.grants.append(GrantRecord(
                        t_ms=t * 1.0, tbs_bits=tbs, mcs=mcs, prb=prb,
                        carries_voice=True, carries_data=False,
                        padding_bits=tbs - seg_bits,
                        bundled=True, is_retx=attempts > 1,
                        pdcch=1 if (b == 0 and attempts == 1) else 0))
                    log.harq.append(HarqRecord(t * 1.0, "voice", rec.seq,
                                               attempts, ok))
                    if ok:
                        t += bcfg.bundle_size
                        break
                    t += int(bcfg.bundle_harq_rtt_ms)
                if not ok:
                    delivered = False
                    break
                remaining -= seg_bits
            finish_us = t * TTI_US
        else:
            mcs = max_mcs_for(sinr_now, policy.target_bler, link)
            cap = min(policy.max_prb_per_grant, tbs_table.max_prb)
            prb = tbs_table.min_prb_for(mcs, pdu_bits, cap) or cap
            tbs = tbs_table.tbs(mcs, prb)
            remaining = pdu_bits
            t = start_tti
            delivered = True
            while remaining > 0:
                seg_bits = min(remaining, tbs)
                attempts = 0
                ok = False
                while attempts < link.max_harq_tx:
                    p = bler(sinr_now + attempts * link.harq_gain_db, mcs, link)
                    u = draws.next(rec.seq)
                    attempts += 1
                    ok = u >= p
                    log.grants.append(GrantRecord(
                        t_ms=t * 1.0, tbs_bits=tbs, mcs=mcs, prb=prb,
                        carries_voice=True, carries_data=False,
                        padding_bits=tbs - seg_bits, is_retx=attempts > 1,
                        pdcch=1 if attempts == 1 else 0))
                    log.harq.append(HarqRecord(t * 1.0, "voice", rec.seq,
                                               attempts, ok))
                    if ok:
                        t += 1
                        break
                    t += int(link.harq_rtt_ms)
                if not ok:
                    delivered = False
                    break
                remaining -= seg_bits
                if remaining > 0:
                    remaining += policy.seg_overhead_bits
            finish_us = t * TTI_US

        log.pdcch_count += 1
        free_tti = t
        if delivered and finish_us // TTI_US < n_tti:
            arrival_us = finish_us + int(core_us[i])
            if cfg.rohc_enabled:
                outcome = decompress(decomp_ctx, kind, True)
                pending_fb.extend(decomp_ctx.feedback_out)
                decomp_ctx.feedback_out.clear()
                if outcome is DecompOutcome.FAIL:
                    log.loss_reason[rec.seq] = "rohc_context"
                    continue
            rec.arrival_ms = arrival_us / US_PER_MS
            last_arrival_us = max(last_arrival_us, arrival_us)
        elif not delivered:
            if cfg.rohc_enabled:
                decompress(decomp_ctx, kind, False)
                pending_fb.extend(decomp_ctx.feedback_out)
                decomp_ctx.feedback_out.clear()
            log.loss_reason[rec.seq] = "harq_exhausted"

    log.in_flight = sum(1 for p in log.packets
                        if p.arrival_ms is None and p.seq not in log.loss_reason)
    log.mean_header_bytes = header_sum / n_pkts if n_pkts else 0.0
    return log


# --- receive-side jitter buffer ---


def jitter_buffer_playout(cfg: JitterBufferConfig,
                          arrivals: list[RtpRecord]
                          ) -> tuple[list[JbPlayout], list[JbDiscard], list[float]]:
    """Fixed-cadence playout of time-ordered arrivals.

    The first received packet of each talkspurt anchors playout at
    arrival + depth; every later packet of the spurt plays exactly at the
    anchor plus its media offset, or is discarded when it shows up after
    that instant.  Depth re-adapts at spurt starts to a percentile of the
    recent lateness history, clamped to [min, max].
    """
    playouts: list[JbPlayout] = []
    discards: list[JbDiscard] = []
    depth_series: list[float] = []
    depth = min(max(cfg.init_depth_ms, cfg.min_depth_ms), cfg.max_depth_ms)
    lateness: list[float] = []

    anchor_media = None
    anchor_play = None
    for rec in sorted(arrivals, key=lambda r: (r.arrival_ms, r.seq)):
        if rec.arrival_ms is None:
            continue
        if rec.talkspurt_start or anchor_media is None:
            if lateness:
                recent = lateness[-cfg.window_pkts:]
                est = float(np.percentile(recent, cfg.percentile))
                depth = min(max(est + 1.0, cfg.min_depth_ms), cfg.max_depth_ms)
            anchor_media = rec.media_ts_ms
            anchor_play = rec.arrival_ms + depth
            depth_series.append(depth)
        deadline = anchor_play + (rec.media_ts_ms - anchor_media)
        expected_arrival = anchor_play - depth + (rec.media_ts_ms - anchor_media)
        lateness.append(max(0.0, rec.arrival_ms - expected_arrival))
        if rec.arrival_ms > deadline:
            discards.append(JbDiscard(seq=rec.seq, arrival_ms=rec.arrival_ms,
                                      playout_deadline_ms=deadline))
        else:
            playouts.append(JbPlayout(seq=rec.seq, playout_ms=deadline))
    return playouts, discards, depth_series


def _run_jitter_buffer(cfg: ScenarioConfig, log: EventLog) -> None:
    playouts, discards, depths = jitter_buffer_playout(
        cfg.jitter_buffer, log.arrived())
    log.jb_playouts = playouts
    log.jb_discards = discards
    log.jb_depth_ms = depths
