"""Header-compression state machine and the channel-rate arithmetic.

The compressor/decompressor pair is modeled at header-size and state
level: modes U/O/R, states IR/FO/SO, feedback, and context damage after
losses.  Bit-exact RFC 3095 encodings are out of scope.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class RohcMode(Enum):
    U = "U"
    O = "O"
    R = "R"


class RohcState(Enum):
    IR = "IR"
    FO = "FO"
    SO = "SO"


class DecompOutcome(Enum):
    OK = "OK"
    FAIL = "FAIL"


_UP = {RohcState.IR: RohcState.FO, RohcState.FO: RohcState.SO,
       RohcState.SO: RohcState.SO}


@dataclass(frozen=True)
class HeaderSizeModel:
    """Per-state header sizes in bytes (IPv4 default; 60 B for IPv6)."""

    full_header_bytes: float = 40.0
    ir_overhead_bytes: float = 3.0
    fo_header_bytes: float = 12.0
    so_header_bytes: float = 1.0

    def __post_init__(self):
        if self.so_header_bytes < 1:
            raise ValueError("so_header_bytes must be >= 1")
        if not (self.so_header_bytes <= self.fo_header_bytes
                <= self.full_header_bytes + self.ir_overhead_bytes):
            raise ValueError("header sizes must satisfy so <= fo <= full + ir")

    def size_for(self, state: RohcState) -> float:
        if state is RohcState.IR:
            return self.full_header_bytes + self.ir_overhead_bytes
        if state is RohcState.FO:
            return self.fo_header_bytes
        return self.so_header_bytes


@dataclass(frozen=True)
class RohcParams:
    """State-dwell tuning.

    ``fo_min_dwell`` keeps U-mode in FO long enough that the lossless
    long-run mean header lands in the observed 3.2..7.5 B band; the
    optimistic upward step itself needs ``u_repeat_k`` identical sends.
    """

    u_repeat_k: int = 3
    fo_min_dwell: int = 10
    ir_refresh_period: int = 100


@dataclass
class RohcContext:
    """Single-owner mutable state for one side of a ROHC session."""

    mode: RohcMode = RohcMode.O
    state: RohcState = RohcState.IR
    cid: int = 0
    optimistic_count: int = 0
    pending_acks: int = 0
    last_decomp_ok: bool = True
    sizes: HeaderSizeModel = field(default_factory=HeaderSizeModel)
    params: RohcParams = field(default_factory=RohcParams)
    # compressor side
    pkts_since_ir: int = 0
    # decompressor side
    context_established: bool = False
    context_damaged: bool = False
    feedback_out: list = field(default_factory=list)


def compress(ctx: RohcContext, pkt_index: int = 0) -> tuple[float, RohcState]:
    """Emit one header; returns (compressed size in bytes, packet kind).

    U-mode climbs optimistically after ``u_repeat_k`` sends per state and
    refreshes IR every ``ir_refresh_period`` packets.  O/R modes climb only
    on positive feedback (see :func:`apply_feedback`).
    """
    p = ctx.params
    if (ctx.mode is RohcMode.U and ctx.state is not RohcState.IR
            and ctx.pkts_since_ir >= p.ir_refresh_period):
        ctx.state = RohcState.IR
        ctx.optimistic_count = 0
    kind = ctx.state
    size = ctx.sizes.size_for(kind)
    if kind is RohcState.IR:
        ctx.pkts_since_ir = 0
    else:
        ctx.pkts_since_ir += 1
    ctx.optimistic_count += 1
    if ctx.mode is RohcMode.U:
        needed = p.u_repeat_k
        if ctx.state is RohcState.FO:
            needed = max(p.u_repeat_k, p.fo_min_dwell)
        if ctx.state is not RohcState.SO and ctx.optimistic_count >= needed:
            ctx.state = _UP[ctx.state]
            ctx.optimistic_count = 0
    return size, kind


def apply_feedback(ctx: RohcContext, feedback: str) -> None:
    """Feed an ACK/NACK back into the compressor. U-mode ignores feedback."""
    if ctx.mode is RohcMode.U:
        return
    if feedback == "ACK":
        if ctx.state is not RohcState.SO:
            ctx.state = _UP[ctx.state]
            ctx.optimistic_count = 0
    elif feedback == "NACK":
        ctx.state = RohcState.IR
        ctx.optimistic_count = 0
    else:
        raise ValueError(f"unknown feedback {feedback!r}")


def decompress(ctx: RohcContext, kind: RohcState,
               link_delivered: bool) -> DecompOutcome:
    """Decompressor outcome for one packet of the given kind.

    A lost context-updating packet (IR or FO) damages the context; any
    following FO/SO packet fails to decompress until a delivered IR
    rebuilds it.  Failures enqueue a NACK in O/R modes, successful context
    updates enqueue ACKs (R acknowledges every one, O only transitions).
    """
    if not link_delivered:
        if kind in (RohcState.IR, RohcState.FO):
            ctx.context_damaged = True
        ctx.last_decomp_ok = False
        return DecompOutcome.FAIL

    if kind is RohcState.IR:
        was_broken = ctx.context_damaged or not ctx.context_established
        ctx.context_established = True
        ctx.context_damaged = False
        ctx.state = RohcState.IR
        ctx.last_decomp_ok = True
        # R acknowledges every context update, O only changes of context
        if ctx.mode is RohcMode.R or (ctx.mode is RohcMode.O and was_broken):
            _queue_feedback(ctx, "ACK")
        return DecompOutcome.OK

    ok = ctx.context_established and not ctx.context_damaged
    ctx.last_decomp_ok = ok
    if not ok:
        _queue_feedback(ctx, "NACK")
        return DecompOutcome.FAIL
    if kind is RohcState.FO:
        first_fo = ctx.state is not RohcState.FO
        ctx.state = RohcState.FO
        if ctx.mode is RohcMode.R or (ctx.mode is RohcMode.O and first_fo):
            _queue_feedback(ctx, "ACK")
    else:
        ctx.state = RohcState.SO
    return DecompOutcome.OK


def _queue_feedback(ctx: RohcContext, fb: str) -> None:
    if ctx.mode is RohcMode.U:
        return
    ctx.feedback_out.append(fb)
    ctx.pending_acks += 1


class RohcLink:
    """Compressor and decompressor joined by a feedback path.

    Feedback generated at packet n reaches the compressor before packet
    ``n + feedback_delay_pkts`` is compressed (one RTP interval for the
    default of 1).
    """

    def __init__(self, mode: RohcMode = RohcMode.O,
                 sizes: HeaderSizeModel | None = None,
                 params: RohcParams | None = None,
                 feedback_delay_pkts: int = 1):
        sizes = sizes or HeaderSizeModel()
        params = params or RohcParams()
        self.compressor = RohcContext(mode=mode, sizes=sizes, params=params)
        self.decompressor = RohcContext(mode=mode, sizes=sizes, params=params)
        self.feedback_delay = feedback_delay_pkts
        self._fb_queue: deque[tuple[int, str]] = deque()
        self._index = 0
        self.feedback_count = 0

    def step(self, delivered: bool) -> tuple[float, RohcState, DecompOutcome]:
        """Compress, transfer and decompress one packet."""
        while self._fb_queue and self._fb_queue[0][0] <= self._index:
            _, fb = self._fb_queue.popleft()
            apply_feedback(self.compressor, fb)
        size, kind = compress(self.compressor, self._index)
        outcome = decompress(self.decompressor, kind, delivered)
        for fb in self.decompressor.feedback_out:
            self._fb_queue.append((self._index + self.feedback_delay, fb))
            self.feedback_count += 1
        self.decompressor.feedback_out.clear()
        self._index += 1
        return size, kind, outcome


# --- Channel rate and efficiency arithmetic ---


@dataclass(frozen=True)
class RateInputs:
    """Per-packet byte budget: AMR payload, header (original or compressed)
    and L1/MAC/RLC/PDCP overhead, at one packet every ``interval_ms``."""

    payload_bytes: float = 33.0
    header_bytes: float = 40.0
    overhead_bytes: float = 8.0
    interval_ms: float = 20.0

    def __post_init__(self):
        if self.interval_ms <= 0:
            raise ValueError("interval_ms must be > 0")
        for name in ("payload_bytes", "header_bytes", "overhead_bytes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def required_channel_rate(r: RateInputs) -> float:
    """Physical channel data rate in kbps: (P + H + O) * 8 / I."""
    return (r.payload_bytes + r.header_bytes + r.overhead_bytes) * 8.0 / r.interval_ms


def compression_efficiency(original_bytes: float, compressed_bytes: float) -> float:
    """Header shrink in percent relative to the original size."""
    if original_bytes <= 0:
        raise ValueError("original_bytes must be > 0")
    return 100.0 * (1.0 - compressed_bytes / original_bytes)
