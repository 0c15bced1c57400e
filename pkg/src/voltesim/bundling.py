"""Uplink TTI bundling: trigger hysteresis, grant limits, delay math.

A bundle is the same transport block sent in four consecutive 1 ms TTIs
under one HARQ identity; grants during bundling are capped at MCS 10 and
three PRBs, which bounds the bundled TBS at 504 bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import math


@dataclass(frozen=True)
class BundlingConfig:
    bundle_size: int = 4
    max_tbs_bits: int = 504
    max_prb: int = 3
    max_mcs: int = 10
    trigger_sinr_db: float = -2.0
    release_sinr_db: float = 2.0
    bundle_harq_rtt_ms: float = 16.0
    coverage_gain_db: float = 4.0

    def __post_init__(self):
        if self.release_sinr_db <= self.trigger_sinr_db:
            raise ValueError("release_sinr_db must exceed trigger_sinr_db")
        if self.bundle_size < 1 or self.max_tbs_bits < 1:
            raise ValueError("bundle_size and max_tbs_bits must be >= 1")


def should_bundle(sinr_db: float, prb_usage: float, cfg: BundlingConfig,
                  currently_on: bool) -> bool:
    """Hysteresis trigger: on below trigger SINR, off above release SINR,
    unchanged in between. High uplink PRB usage (> 0.9) also holds
    bundling off since there is no headroom for 4-TTI repeats."""
    if prb_usage > 0.9:
        return False
    if sinr_db < cfg.trigger_sinr_db:
        return True
    if sinr_db > cfg.release_sinr_db:
        return False
    return currently_on


def bundles_needed(pdu_bits: int, cfg: BundlingConfig) -> int:
    if pdu_bits <= 0:
        raise ValueError("pdu_bits must be > 0")
    return math.ceil(pdu_bits / cfg.max_tbs_bits)


def bundle_delay_ms(bundle_count: int, harq_retx: int,
                    cfg: BundlingConfig) -> float:
    """Sequential bundles of ``bundle_size`` 1 ms TTIs plus one bundle HARQ
    round trip per retransmission."""
    if bundle_count < 1:
        raise ValueError("bundle_count must be >= 1")
    if harq_retx < 0:
        raise ValueError("harq_retx must be >= 0")
    return bundle_count * cfg.bundle_size + harq_retx * cfg.bundle_harq_rtt_ms


def validate_bundle_grant(mcs: int, prb: int,
                          cfg: BundlingConfig) -> list[str]:
    """Empty list when the grant is legal under bundling, else the named
    violations."""
    violations = []
    if mcs > cfg.max_mcs:
        violations.append(f"MCS {mcs} exceeds bundling limit {cfg.max_mcs}")
    if prb > cfg.max_prb:
        violations.append(f"PRB {prb} exceeds bundling limit {cfg.max_prb}")
    return violations
