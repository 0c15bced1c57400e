"""Downlink MAC scheduling: grant sizing, OLLA, SPS, RLC segmentation, DRX.

The TBS lookup is a documented monotone approximation of the 36.213
shapes (QPSK/16QAM/64QAM efficiency bands, ~120 resource elements per
PRB); an exact table can be loaded from CSV instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .radio import LinkModel, max_mcs_for

RE_PER_PRB = 120.0


def _spectral_efficiency(mcs: int) -> float:
    if mcs <= 9:          # QPSK band
        return 0.15 + 0.125 * mcs
    if mcs <= 16:         # 16QAM band
        return 1.4 + 0.18 * (mcs - 10)
    return 2.6 + 0.23 * (mcs - 17)  # 64QAM band


class TbsTable:
    """Monotone tbs(mcs, prb) lookup in bits, byte-quantized."""

    def __init__(self, max_mcs: int = 28, max_prb: int = 100,
                 entries: dict[tuple[int, int], int] | None = None):
        self.max_mcs = max_mcs
        self.max_prb = max_prb
        if entries is not None:
            self._entries = dict(entries)
        else:
            self._entries = {
                (m, p): max(16, int(_spectral_efficiency(m) * RE_PER_PRB * p)
                            // 8 * 8)
                for m in range(max_mcs + 1)
                for p in range(1, max_prb + 1)
            }

    @classmethod
    def from_csv(cls, path) -> "TbsTable":
        entries = {}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "mcs,prb,tbs_bits":
                raise ValueError(f"bad TBS table header: {header!r}")
            for line in fh:
                if not line.strip():
                    continue
                m, p, t = (int(x) for x in line.strip().split(","))
                entries[(m, p)] = t
        max_mcs = max(m for m, _ in entries)
        max_prb = max(p for _, p in entries)
        return cls(max_mcs=max_mcs, max_prb=max_prb, entries=entries)

    def tbs(self, mcs: int, prb: int) -> int:
        return self._entries[(mcs, prb)]

    def min_prb_for(self, mcs: int, bits: int, prb_cap: int) -> int | None:
        """Smallest PRB count covering ``bits``, or None if it won't fit."""
        for p in range(1, prb_cap + 1):
            if self.tbs(mcs, p) >= bits:
                return p
        return None


@dataclass
class ScheduleGrant:
    tti_index: int
    tbs_bits: int
    mcs: int
    prb_count: int
    carries_voice: bool
    carries_data: bool
    mimo_rank: int = 1
    padding_bits: int = 0
    bundled: bool = False
    is_retx: bool = False
    sps_occasion: bool = False

    def __post_init__(self):
        if self.tbs_bits <= 0:
            raise ValueError("tbs_bits must be > 0")
        if not (self.carries_voice or self.carries_data):
            raise ValueError("a grant must carry voice or data")
        if self.padding_bits >= self.tbs_bits:
            raise ValueError("padding_bits must be < tbs_bits")


@dataclass(frozen=True)
class SpsConfig:
    period_subframes: int = 20
    release_empty_count: int = 3

    ALLOWED_PERIODS = (10, 20, 32, 40, 64, 80, 128, 160, 320, 640)

    def __post_init__(self):
        if self.period_subframes not in self.ALLOWED_PERIODS:
            raise ValueError(
                f"SPS period must be one of {self.ALLOWED_PERIODS}")
        if self.release_empty_count < 1:
            raise ValueError("release_empty_count must be >= 1")


@dataclass(frozen=True)
class DrxConfig:
    long_cycle_ms: float = 40.0
    on_duration_ms: float = 10.0
    inactivity_timer_ms: float = 100.0

    def __post_init__(self):
        if not 0 < self.on_duration_ms < self.long_cycle_ms:
            raise ValueError("need 0 < on_duration_ms < long_cycle_ms")


@dataclass(frozen=True)
class SchedulerPolicy:
    multiplex_voice_data: bool = False
    allow_rank2_voice_split: bool = False
    rank2_split_prob: float = 0.05
    qci_priority: dict = field(default_factory=lambda: {1: 10, 5: 5, 9: 1})
    target_bler: float = 0.10
    max_prb_per_grant: int = 12
    pipeline_depth_tti: int = 3
    rlc_reassembly_ms: float = 60.0
    seg_overhead_bits: int = 16
    sps: SpsConfig | None = None
    drx: DrxConfig | None = None

    def __post_init__(self):
        if not 0.0 < self.target_bler < 1.0:
            raise ValueError("target_bler must be in (0, 1)")
        if self.max_prb_per_grant < 1:
            raise ValueError("max_prb_per_grant must be >= 1")


def select_grant(voice_queue_bits: int, data_queue_bits: int, sinr_db: float,
                 policy: SchedulerPolicy, link: LinkModel | None = None,
                 tbs_table: TbsTable | None = None, olla_offset_db: float = 0.0,
                 tti_index: int = 0) -> ScheduleGrant | None:
    """Pick one transport block for this TTI, or None when idle.

    Voice has QCI-1 priority: whenever voice bits are queued the grant
    carries them.  With multiplexing disabled a voice grant never carries
    data; with it enabled, queued data tops the block up to the PRB cap.
    The TBS is the minimal covering size, so padding stays below one PRB
    step.
    """
    if voice_queue_bits < 0 or data_queue_bits < 0:
        raise ValueError("queue sizes must be >= 0")
    if voice_queue_bits == 0 and data_queue_bits == 0:
        return None
    link = link or LinkModel()
    tbs_table = tbs_table or TbsTable()
    mcs = max_mcs_for(sinr_db + olla_offset_db, policy.target_bler, link)
    cap = min(policy.max_prb_per_grant, tbs_table.max_prb)

    if voice_queue_bits > 0:
        mux = policy.multiplex_voice_data and data_queue_bits > 0
        want = voice_queue_bits + (data_queue_bits if mux else 0)
        prb = tbs_table.min_prb_for(mcs, want, cap)
        if prb is None:
            prb = cap
        tbs = tbs_table.tbs(mcs, prb)
        carried = min(want, tbs)
        return ScheduleGrant(
            tti_index=tti_index, tbs_bits=tbs, mcs=mcs, prb_count=prb,
            carries_voice=True,
            carries_data=mux and carried > voice_queue_bits,
            padding_bits=tbs - carried,
        )

    prb = tbs_table.min_prb_for(mcs, data_queue_bits, cap) or cap
    tbs = tbs_table.tbs(mcs, prb)
    return ScheduleGrant(
        tti_index=tti_index, tbs_bits=tbs, mcs=mcs, prb_count=prb,
        carries_voice=False, carries_data=True,
        padding_bits=max(0, tbs - data_queue_bits),
    )


# --- outer-loop link adaptation ---


@dataclass
class OllaState:
    offset_db: float = 0.0
    step_down_db: float = 0.5
    min_offset_db: float = -10.0
    max_offset_db: float = 10.0


def olla_step(state: OllaState, crc_ok: bool, target_bler: float) -> float:
    """ACK raises the SINR offset, NACK lowers it; the up/down ratio
    target/(1-target) makes the long-run NACK fraction converge to target.
    Returns the updated offset."""
    if not 0.0 < target_bler < 1.0:
        raise ValueError("target_bler must be in (0, 1)")
    down = state.step_down_db
    up = down * target_bler / (1.0 - target_bler)
    if crc_ok:
        state.offset_db = min(state.max_offset_db, state.offset_db + up)
    else:
        state.offset_db = max(state.min_offset_db, state.offset_db - down)
    return state.offset_db


# --- semi-persistent scheduling ---


@dataclass
class SpsState:
    config: SpsConfig
    active: bool = True
    empty_run: int = 0
    activation_tti: int = 0

    def is_occasion(self, tti_index: int) -> bool:
        return (self.active
                and (tti_index - self.activation_tti)
                % self.config.period_subframes == 0)


def sps_update(state: SpsState, tti_index: int, had_payload: bool) -> str:
    """Track one SPS occasion; releases after the configured number of
    consecutive empty occasions. Returns "ACTIVE" or "RELEASED"."""
    if not state.active:
        return "RELEASED"
    if had_payload:
        state.empty_run = 0
    else:
        state.empty_run += 1
        if state.empty_run >= state.config.release_empty_count:
            state.active = False
            return "RELEASED"
    return "ACTIVE"


# --- RLC segmentation ---


def rlc_segment(pdu_bits: int, grant_payload_bits: int,
                seg_overhead_bits: int = 0) -> int:
    """Number of segments needed to move ``pdu_bits`` through grants of
    ``grant_payload_bits``; each segment beyond the first costs
    ``seg_overhead_bits`` extra."""
    if grant_payload_bits <= 0:
        raise ValueError("grant_payload_bits must be > 0")
    if pdu_bits <= 0:
        raise ValueError("pdu_bits must be > 0")
    k = math.ceil(pdu_bits / grant_payload_bits)
    while k * grant_payload_bits < pdu_bits + (k - 1) * seg_overhead_bits:
        k += 1
    return k


# --- connected-mode DRX ---


def drx_gate(arrival_ms: float, drx: DrxConfig) -> float:
    """Earliest schedulable time for a packet arriving while the UE follows
    the DRX pattern: unchanged inside an on-duration, else the next
    on-duration start."""
    cycle = drx.long_cycle_ms
    pos = arrival_ms % cycle
    if pos < drx.on_duration_ms:
        return arrival_ms
    return arrival_ms + (cycle - pos)
