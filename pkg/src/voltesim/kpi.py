"""KPI computation over RTP traces and simulation event logs.

Conventions (shared by the report builder and the test oracles):

* Relative jitter is the millisecond deviation between media-timestamp
  spacing and arrival spacing, |(s(t)-s(t-1)) - (r(t)-r(t-1))|, taken
  over consecutive in-sequence packet pairs inside a talkspurt, walking
  the trace in arrival order.  A sequence gap or a talkspurt start resets
  the pairing; late or duplicate packets never pair.  The dimensionless
  printed ratio (numerator over the arrival spacing) is available behind
  ``normalized=True``.
* The error rate is E/(E+N) where N counts distinct sequence numbers
  received and E the holes inside the received sequence span.  Duplicates
  are ignored; late arrivals still count toward N and are tallied in a
  separate reordered counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import jitter_pairs, window_sums
from .codec import CodecConfig
from .pipeline import EventLog
from .radio import RadioTrace


@dataclass(frozen=True)
class JitterSeries:
    values_ms: np.ndarray
    t_ms: np.ndarray  # arrival time of the pair's later packet


def _received_arrays(trace) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    recv = [r for r in trace if r.arrival_ms is not None]
    recv.sort(key=lambda r: (r.arrival_ms, r.seq))
    seq = np.array([r.seq for r in recv], dtype=np.int64)
    s = np.array([r.media_ts_ms for r in recv], dtype=np.float64)
    r_ = np.array([r.arrival_ms for r in recv], dtype=np.float64)
    spurt = np.array([r.talkspurt_start for r in recv], dtype=np.bool_)
    return seq, s, r_, spurt


def relative_jitter(trace, normalized: bool = False) -> JitterSeries:
    """Per-packet jitter series in arrival order; empty for < 2 packets."""
    seq, s, r, spurt = _received_arrays(trace)
    if seq.size < 2:
        return JitterSeries(np.empty(0), np.empty(0))
    j, t = jitter_pairs(seq, s, r, spurt, normalized)
    return JitterSeries(values_ms=j, t_ms=t)


@dataclass(frozen=True)
class ErrorCounts:
    lost: int        # E: holes in the received sequence span
    received: int    # N: distinct sequence numbers received
    reordered: int
    duplicates: int

    @property
    def error_rate(self) -> float:
        total = self.lost + self.received
        return self.lost / total if total else 0.0


def error_counts(trace) -> ErrorCounts:
    seq, _, _, _ = _received_arrays(trace)
    if seq.size == 0:
        return ErrorCounts(0, 0, 0, 0)
    unique = np.unique(seq)
    n = int(unique.size)
    e = int(unique[-1] - unique[0] + 1 - n)
    duplicates = int(seq.size - n)
    seen = set()
    run_max = -np.inf
    reordered = 0
    for v in seq:
        v = int(v)
        if v in seen:
            continue
        seen.add(v)
        if v < run_max:
            reordered += 1
        else:
            run_max = v
    return ErrorCounts(lost=e, received=n, reordered=reordered,
                       duplicates=duplicates)


def rtp_error_rate(trace) -> float:
    """Sequence-gap census error rate E/(E+N)."""
    if not trace:
        raise ValueError("empty trace")
    return error_counts(trace).error_rate


@dataclass(frozen=True)
class WindowKpi:
    t0_ms: float
    jitter_mean_ms: float | None
    jitter_count: int
    lost: int
    received: int

    @property
    def error_rate(self) -> float:
        total = self.lost + self.received
        return self.lost / total if total else 0.0


def windowed_kpis(trace, window_ms: float = 1000.0) -> list[WindowKpi]:
    """Per-window jitter mean and error counts, aligned to the first arrival.

    Each distinct received sequence number counts toward N in the window
    of its first arrival; a sequence hole counts toward E in the window
    where the next received sequence number (sorted order) first arrived.
    The whole-trace (E, N) therefore equal the per-window sums exactly.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be > 0")
    seq, s, r, spurt = _received_arrays(trace)
    if seq.size == 0:
        return []
    t0 = float(r[0])
    span = float(r[-1]) - t0
    n_windows = max(1, int(span // window_ms) + 1)

    jit = relative_jitter(trace)
    jsum, jcount = window_sums(jit.t_ms, jit.values_ms, t0, window_ms,
                               n_windows) if jit.values_ms.size else (
        np.zeros(n_windows), np.zeros(n_windows, dtype=np.int64))

    unique, first_pos = np.unique(seq, return_index=True)
    first_arrival = r[first_pos]
    widx = np.clip(((first_arrival - t0) // window_ms).astype(np.int64),
                   0, n_windows - 1)
    n_per_window = np.bincount(widx, minlength=n_windows)
    holes = np.diff(unique) - 1
    e_per_window = np.bincount(widx[1:], weights=holes,
                               minlength=n_windows).astype(np.int64)

    out = []
    for k in range(n_windows):
        count = int(jcount[k])
        mean = float(jsum[k] / count) if count else None
        out.append(WindowKpi(t0_ms=t0 + k * window_ms, jitter_mean_ms=mean,
                             jitter_count=count, lost=int(e_per_window[k]),
                             received=int(n_per_window[k])))
    return out


@dataclass(frozen=True)
class RfBin:
    lo: float
    hi: float
    mean: float | None  # None marks an empty bin
    count: int


def bin_by_radio(t_ms, values, radio: RadioTrace, edges,
                 column: str = "rsrp_dbm") -> list[RfBin]:
    """Join each KPI sample to the nearest-in-time radio sample and average
    per bin.  Bins with no samples come back with mean None, not zero."""
    t_ms = np.asarray(t_ms, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.float64)
    rf = getattr(radio, column)[radio.nearest_indices(t_ms)] if t_ms.size \
        else np.empty(0)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (rf >= lo) & (rf < hi)
        count = int(mask.sum())
        mean = float(values[mask].mean()) if count else None
        out.append(RfBin(lo=float(lo), hi=float(hi), mean=mean, count=count))
    return out


@dataclass(frozen=True)
class HandoverKpi:
    start_ms: float
    end_ms: float
    packets_lost: int
    max_jitter_ms: float | None
    first_gap_ms: float | None


def handover_kpis(log: EventLog, guard_ms: float = 100.0) -> list[HandoverKpi]:
    """Per-handover loss and jitter within [start, end + guard]."""
    if not log.handovers:
        return []
    jit = relative_jitter(log.packets)
    arrivals = np.sort(np.array(
        [p.arrival_ms for p in log.packets if p.arrival_ms is not None],
        dtype=np.float64))
    rows = []
    for ho in log.handovers:
        lo, hi = ho.start_ms, ho.end_ms + guard_ms
        lost = sum(1 for p in log.packets
                   if p.arrival_ms is None and lo <= p.departure_ms < hi
                   and p.seq in log.loss_reason)
        mask = (jit.t_ms >= lo) & (jit.t_ms < hi)
        max_j = float(jit.values_ms[mask].max()) if mask.any() else None
        before = arrivals[arrivals < ho.start_ms]
        after = arrivals[arrivals >= ho.start_ms]
        gap = float(after[0] - before[-1]) if before.size and after.size else None
        rows.append(HandoverKpi(start_ms=ho.start_ms, end_ms=ho.end_ms,
                                packets_lost=lost, max_jitter_ms=max_j,
                                first_gap_ms=gap))
    return rows


@dataclass(frozen=True)
class SchedulerTable:
    sched_rate_pct: float
    avg_tbs_bytes: float
    avg_prb: float
    avg_padding_bytes: float
    mux_pct: float
    bitrate_kbps: float
    voice_sched_delay_ms: float | None
    voice_grant_gap_ms: float | None
    pdcch_count: int


def scheduler_stats(log: EventLog) -> SchedulerTable:
    grants = log.grants
    if not grants:
        raise ValueError("event log holds no grants")
    ttis = len({g.t_ms for g in grants})
    tbs = np.array([g.tbs_bits for g in grants], dtype=np.float64)
    prb = np.array([g.prb for g in grants], dtype=np.float64)
    pad = np.array([g.padding_bits for g in grants], dtype=np.float64)
    voice = [g for g in grants if g.carries_voice]
    mux = sum(1 for g in voice if g.carries_data)
    voice_t = sorted({g.t_ms for g in voice if not g.is_retx})
    gaps = np.diff(voice_t) if len(voice_t) > 1 else np.empty(0)
    delays = log.voice_sched_delays_ms
    bits = log.voice_bits_delivered + log.data_bits_delivered
    return SchedulerTable(
        sched_rate_pct=100.0 * ttis / log.tti_count if log.tti_count else 0.0,
        avg_tbs_bytes=float(tbs.mean()) / 8.0,
        avg_prb=float(prb.mean()),
        avg_padding_bytes=float(pad.mean()) / 8.0,
        mux_pct=100.0 * mux / len(voice) if voice else 0.0,
        bitrate_kbps=bits / log.duration_ms if log.duration_ms else 0.0,
        voice_sched_delay_ms=float(np.mean(delays)) if delays else None,
        voice_grant_gap_ms=float(gaps.mean()) if gaps.size else None,
        pdcch_count=log.pdcch_count,
    )


# --- parametric MOS surrogate (E-model shaped) ---

R0 = 93.2

# rate -> (base equipment impairment, packet-loss robustness)
# 23.85 starts higher (smaller Ie) but degrades faster under loss
# (smaller Bpl), so the two curves cross as loss grows.
CODEC_IMPAIRMENT = {
    12.65: (14.0, 24.0),
    23.85: (9.0, 8.0),
}


def r_to_mos(r: float) -> float:
    """Standard R-factor to MOS cubic, clamped to [1, 4.5]."""
    if r <= 0.0:
        return 1.0
    if r >= 100.0:
        return 4.5
    mos = 1.0 + 0.035 * r + r * (r - 60.0) * (100.0 - r) * 7e-6
    return min(4.5, max(1.0, mos))


def _codec_rate(codec) -> float:
    if isinstance(codec, CodecConfig):
        return codec.codec_rate_kbps
    return float(codec)


def mos_estimate(loss_fraction: float, mean_one_way_delay_ms: float,
                 codec) -> float:
    """E-model style MOS from loss fraction, one-way delay and codec rate."""
    if not 0.0 <= loss_fraction <= 1.0:
        raise ValueError("loss_fraction must be in [0, 1]")
    if mean_one_way_delay_ms < 0:
        raise ValueError("delay must be >= 0")
    rate = _codec_rate(codec)
    ie, bpl = CODEC_IMPAIRMENT[min(CODEC_IMPAIRMENT,
                                   key=lambda k: abs(k - rate))]
    d = mean_one_way_delay_ms
    idd = 0.024 * d + 0.11 * max(0.0, d - 177.3)
    ppl = 100.0 * loss_fraction
    ie_eff = ie + (95.0 - ie) * ppl / (ppl + bpl) if ppl > 0 else ie
    return r_to_mos(R0 - idd - ie_eff)


# --- distributions ---


@dataclass(frozen=True)
class Distribution:
    bin_edges: np.ndarray
    pdf: np.ndarray  # probability mass per bin, sums to 1
    cdf: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2.0


def distribution(series, bin_width: float) -> Distribution:
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty series")
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    lo = math.floor(series.min() / bin_width) * bin_width
    n_bins = max(1, int(math.floor((series.max() - lo) / bin_width)) + 1)
    edges = lo + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(series, bins=edges)
    pdf = counts / counts.sum()
    return Distribution(bin_edges=edges, pdf=pdf, cdf=np.cumsum(pdf))


# --- report assembly ---


@dataclass
class KpiReport:
    schema_version: int = 1
    packets_sent: int = 0
    packets_received: int = 0
    packets_lost_census: int = 0
    reordered: int = 0
    duplicates: int = 0
    in_flight: int = 0
    rtp_error_rate: float = 0.0
    jitter_series_ms: list = field(default_factory=list)
    jitter_avg_ms: float | None = None
    jitter_median_ms: float | None = None
    jitter_min_ms: float | None = None
    jitter_max_ms: float | None = None
    mean_one_way_delay_ms: float | None = None
    windows: list = field(default_factory=list)
    jitter_pdf: dict | None = None
    window_error_pdf: dict | None = None
    rf_binned: dict | None = None
    handover: list | None = None
    scheduler: dict | None = None
    mos_estimate: float | None = None
    loss_reasons: dict = field(default_factory=dict)
    jb_discards: int = 0
    call_drops: int = 0

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            out[k] = v
        return out

    def scalars(self) -> dict:
        """Flat numeric view used by the compare command."""
        keep = ("packets_sent", "packets_received", "packets_lost_census",
                "reordered", "duplicates", "in_flight", "rtp_error_rate",
                "jitter_avg_ms", "jitter_median_ms", "jitter_min_ms",
                "jitter_max_ms", "mean_one_way_delay_ms", "mos_estimate",
                "jb_discards", "call_drops")
        out = {k: self.__dict__[k] for k in keep}
        if self.scheduler:
            out.update({f"scheduler.{k}": v for k, v in self.scheduler.items()})
        return out


DEFAULT_RSRP_EDGES = tuple(float(x) for x in range(-130, -55, 5))
DEFAULT_RSRQ_EDGES = tuple(float(x) for x in range(-20, -2, 1))
DEFAULT_SINR_EDGES = tuple(float(x) for x in range(-12, 34, 2))


def build_report(trace, radio: RadioTrace | None = None,
                 log: EventLog | None = None,
                 codec: CodecConfig | float | None = None,
                 window_ms: float = 1000.0,
                 jitter_bin_ms: float = 1.0) -> KpiReport:
    """Full KPI bundle from a trace, optionally enriched by radio data and
    the simulation event log."""
    trace = list(trace)
    if not trace:
        raise ValueError("empty trace")
    report = KpiReport()
    counts = error_counts(trace)
    arrived = [p for p in trace if p.arrival_ms is not None]
    report.packets_sent = len(trace)
    report.packets_received = len(arrived)
    report.packets_lost_census = counts.lost
    report.reordered = counts.reordered
    report.duplicates = counts.duplicates
    report.rtp_error_rate = counts.error_rate

    jit = relative_jitter(trace)
    report.jitter_series_ms = [float(x) for x in jit.values_ms]
    if jit.values_ms.size:
        report.jitter_avg_ms = float(np.mean(jit.values_ms))
        report.jitter_median_ms = float(np.median(jit.values_ms))
        report.jitter_min_ms = float(np.min(jit.values_ms))
        report.jitter_max_ms = float(np.max(jit.values_ms))
        dist = distribution(jit.values_ms, jitter_bin_ms)
        report.jitter_pdf = {
            "bin_edges": [float(x) for x in dist.bin_edges],
            "pdf": [float(x) for x in dist.pdf],
            "cdf": [float(x) for x in dist.cdf],
        }
    if arrived:
        delays = [p.arrival_ms - p.departure_ms for p in arrived]
        report.mean_one_way_delay_ms = float(np.mean(delays))

    wins = windowed_kpis(trace, window_ms)
    report.windows = [{
        "t0_ms": w.t0_ms, "jitter_mean_ms": w.jitter_mean_ms,
        "jitter_count": w.jitter_count, "lost": w.lost,
        "received": w.received, "error_rate": w.error_rate,
    } for w in wins]
    if wins:
        rates = [w.error_rate for w in wins]
        dist = distribution(rates, 0.01)
        report.window_error_pdf = {
            "bin_edges": [float(x) for x in dist.bin_edges],
            "pdf": [float(x) for x in dist.pdf],
            "cdf": [float(x) for x in dist.cdf],
        }

    if radio is not None and len(radio):
        # windows joined at their centers so error rates bin alongside jitter
        win_t = np.array([w.t0_ms + window_ms / 2.0 for w in wins])
        win_err = np.array([w.error_rate for w in wins])
        report.rf_binned = {}
        for column, edges in (("rsrp_dbm", DEFAULT_RSRP_EDGES),
                              ("rsrq_db", DEFAULT_RSRQ_EDGES),
                              ("sinr_db", DEFAULT_SINR_EDGES)):
            jrows = bin_by_radio(jit.t_ms, jit.values_ms, radio, edges, column)
            erows = bin_by_radio(win_t, win_err, radio, edges, column)
            report.rf_binned[column] = [
                {"lo": j.lo, "hi": j.hi, "mean_jitter_ms": j.mean,
                 "count": j.count, "mean_error_rate": e.mean,
                 "window_count": e.count}
                for j, e in zip(jrows, erows)]

    if log is not None:
        report.in_flight = log.in_flight
        report.loss_reasons = _loss_reason_counts(log)
        report.jb_discards = len(log.jb_discards)
        report.call_drops = len(log.call_drops)
        if log.handovers:
            report.handover = [{
                "start_ms": h.start_ms, "end_ms": h.end_ms,
                "packets_lost": h.packets_lost,
                "max_jitter_ms": h.max_jitter_ms,
                "first_gap_ms": h.first_gap_ms,
            } for h in handover_kpis(log)]
        if log.grants:
            report.scheduler = scheduler_stats(log).__dict__.copy()

    if codec is not None and report.mean_one_way_delay_ms is not None:
        report.mos_estimate = mos_estimate(
            report.rtp_error_rate, report.mean_one_way_delay_ms, codec)
    return report


def _loss_reason_counts(log: EventLog) -> dict:
    out: dict[str, int] = {}
    for reason in log.loss_reason.values():
        out[reason] = out.get(reason, 0) + 1
    return out
