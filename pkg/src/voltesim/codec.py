"""AMR packetization arithmetic and RTP departure-stream generation.

Times are plain milliseconds throughout; conversion to RTP clock ticks is
a presentation concern and never happens here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from ._rng import substream

DEFAULT_FRAME_INTERVAL_MS = 20.0
DEFAULT_AMR_HEADER_BITS = 11
DEFAULT_RTP_HEADER_BITS = 96
DEFAULT_PROTO_HEADER_BITS = 64


@dataclass(frozen=True)
class CodecConfig:
    """One AMR operating point.

    ``codec_rate_kbps`` drives the bit-exact packet size; the octet-aligned
    ``amr_payload_bytes`` (33 B for 12.65 kbps) is carried separately because
    rate math and byte-level budgeting round differently.
    """

    codec_rate_kbps: float
    frame_interval_ms: float = DEFAULT_FRAME_INTERVAL_MS
    amr_header_bits: int = DEFAULT_AMR_HEADER_BITS
    rtp_header_bits: int = DEFAULT_RTP_HEADER_BITS
    proto_header_bits: int = DEFAULT_PROTO_HEADER_BITS
    amr_payload_bytes: int = 33

    def __post_init__(self):
        if self.codec_rate_kbps < 0:
            raise ValueError("codec_rate_kbps must be >= 0")
        if self.frame_interval_ms <= 0:
            raise ValueError("frame_interval_ms must be > 0")
        for name in ("amr_header_bits", "rtp_header_bits", "proto_header_bits",
                     "amr_payload_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def amr_wb(rate_kbps: float) -> CodecConfig:
    """AMR-WB config with the octet payload implied by the rate."""
    payload_bits = rate_kbps * DEFAULT_FRAME_INTERVAL_MS + DEFAULT_AMR_HEADER_BITS
    return CodecConfig(codec_rate_kbps=rate_kbps,
                       amr_payload_bytes=int(math.ceil(payload_bits / 8.0)))


AMR_WB_12_65 = amr_wb(12.65)
AMR_WB_23_85 = amr_wb(23.85)


def rtp_total_packet_bits(cfg: CodecConfig) -> int:
    """Whole RTP packet size in bits: payload plus AMR/RTP/protocol headers."""
    bits = (cfg.codec_rate_kbps * cfg.frame_interval_ms
            + cfg.amr_header_bits + cfg.rtp_header_bits + cfg.proto_header_bits)
    return int(math.ceil(bits - 1e-9))


class ActivityKind(Enum):
    CONTINUOUS = "continuous"
    ON_OFF = "on_off"


@dataclass(frozen=True)
class ActivityModel:
    kind: ActivityKind = ActivityKind.CONTINUOUS
    mean_talkspurt_ms: float = 1500.0
    mean_silence_ms: float = 800.0

    def __post_init__(self):
        if self.kind is ActivityKind.ON_OFF:
            if self.mean_talkspurt_ms <= 0 or self.mean_silence_ms <= 0:
                raise ValueError("ON_OFF activity means must be > 0")


@dataclass
class RtpRecord:
    """One RTP packet event. ``arrival_ms`` stays None while undelivered."""

    stream_id: str
    seq: int
    media_ts_ms: float
    departure_ms: float
    arrival_ms: float | None = None
    payload_bytes: int = 33
    talkspurt_start: bool = False

    def copy(self) -> "RtpRecord":
        return replace(self)


def talk_windows(duration_ms: float, activity: ActivityModel, seed: int,
                 frame_interval_ms: float) -> list[tuple[float, float]]:
    """Alternating talk windows [start, end) covering [0, duration).

    Spurt and silence lengths are exponential draws rounded up to whole
    frames (minimum one frame) so packet slots stay on the frame grid.
    """
    if activity.kind is ActivityKind.CONTINUOUS:
        return [(0.0, duration_ms)]
    rng = substream(seed, "activity")
    windows = []
    t = 0.0
    talking = True
    while t < duration_ms:
        mean = (activity.mean_talkspurt_ms if talking
                else activity.mean_silence_ms)
        frames = max(1, math.ceil(rng.exponential(mean) / frame_interval_ms))
        length = frames * frame_interval_ms
        if talking:
            windows.append((t, min(t + length, duration_ms)))
        t += length
        talking = not talking
    return windows


def generate_stream(cfg: CodecConfig, duration_ms: float,
                    activity: ActivityModel | None = None, seed: int = 0,
                    stream_id: str = "dl") -> list[RtpRecord]:
    """Departure-side RTP records at the codec cadence.

    Within a talkspurt departures sit exactly ``frame_interval_ms`` apart;
    the media clock advances one frame per packet regardless of silence.
    ``talkspurt_start`` marks the first packet after a departure gap larger
    than twice the frame interval (and the first packet overall).
    """
    if duration_ms <= 0:
        raise ValueError("duration_ms must be > 0")
    if activity is None:
        activity = ActivityModel()
    interval = cfg.frame_interval_ms
    records: list[RtpRecord] = []
    seq = 0
    prev_departure = None
    for start, end in talk_windows(duration_ms, activity, seed, interval):
        # first slot on the frame grid at or after the window start
        k0 = math.ceil(start / interval - 1e-9)
        t = k0 * interval
        while t < end - 1e-9 and t < duration_ms - 1e-9:
            is_start = (prev_departure is None
                        or t - prev_departure > 2 * interval + 1e-9)
            records.append(RtpRecord(
                stream_id=stream_id,
                seq=seq,
                media_ts_ms=seq * interval,
                departure_ms=t,
                payload_bytes=cfg.amr_payload_bytes,
                talkspurt_start=is_start,
            ))
            prev_departure = t
            seq += 1
            t += interval
    return records
