"""File formats: RTP trace CSV, radio trace CSV, event log CSV/JSON,
KPI report JSON and flat CSV tables.

All writers produce deterministic bytes for identical inputs (sorted JSON
keys, fixed float formatting, LF line endings).
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .codec import RtpRecord
from .pipeline import EventLog
from .radio import RadioTrace

RTP_TRACE_HEADER = ("stream_id,seq,media_ts_ms,departure_ms,arrival_ms,"
                    "payload_bytes,talkspurt_start")
RADIO_TRACE_HEADER = "t_ms,rsrp_dbm,rsrq_db,sinr_db"


class InputDataError(ValueError):
    """Malformed input file; message carries the file and row number."""


def _fmt(value: float) -> str:
    return f"{value:.3f}"


# --- RTP trace CSV ---


def write_rtp_trace_csv(path, records: list[RtpRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RTP_TRACE_HEADER + "\n")
        for r in records:
            arrival = _fmt(r.arrival_ms) if r.arrival_ms is not None else ""
            fh.write(f"{r.stream_id},{r.seq},{_fmt(r.media_ts_ms)},"
                     f"{_fmt(r.departure_ms)},{arrival},{r.payload_bytes},"
                     f"{int(r.talkspurt_start)}\n")


def read_rtp_trace_csv(path) -> list[RtpRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != RTP_TRACE_HEADER:
            raise InputDataError(f"{path}: row 1: expected header "
                                 f"{RTP_TRACE_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 7:
                raise InputDataError(f"{path}: row {lineno}: expected 7 "
                                     f"fields, got {len(parts)}")
            try:
                rec = RtpRecord(
                    stream_id=parts[0],
                    seq=int(parts[1]),
                    media_ts_ms=float(parts[2]),
                    departure_ms=float(parts[3]),
                    arrival_ms=float(parts[4]) if parts[4] else None,
                    payload_bytes=int(parts[5]),
                    talkspurt_start=bool(int(parts[6])),
                )
            except ValueError as exc:
                raise InputDataError(f"{path}: row {lineno}: {exc}") from exc
            if rec.arrival_ms is not None and rec.arrival_ms < rec.departure_ms:
                raise InputDataError(f"{path}: row {lineno}: arrival "
                                     f"{rec.arrival_ms} before departure "
                                     f"{rec.departure_ms}")
            records.append(rec)
    return records


# --- radio trace CSV ---


def write_radio_trace_csv(path, radio: RadioTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(RADIO_TRACE_HEADER + "\n")
        for t, p, q, s in zip(radio.t_ms, radio.rsrp_dbm, radio.rsrq_db,
                              radio.sinr_db):
            fh.write(f"{_fmt(t)},{_fmt(p)},{_fmt(q)},{_fmt(s)}\n")


def read_radio_trace_csv(path) -> RadioTrace:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != RADIO_TRACE_HEADER:
            raise InputDataError(f"{path}: row 1: expected header "
                                 f"{RADIO_TRACE_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise InputDataError(f"{path}: row {lineno}: expected 4 "
                                     f"fields, got {len(parts)}")
            try:
                rows.append(tuple(float(x) for x in parts))
            except ValueError as exc:
                raise InputDataError(f"{path}: row {lineno}: {exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: no samples")
    arr = np.array(rows, dtype=np.float64)
    try:
        return RadioTrace(t_ms=arr[:, 0], rsrp_dbm=arr[:, 1],
                          rsrq_db=arr[:, 2], sinr_db=arr[:, 3])
    except ValueError as exc:
        raise InputDataError(f"{path}: {exc}") from exc


# --- event log ---

EVENT_CSV_COLUMNS = (
    "record,t_ms,seq,mcs,prb,tbs_bits,padding_bits,carries_voice,"
    "carries_data,mimo_rank,bundled,is_retx,sps_occasion,attempt,"
    "delivered,end_ms,reason"
)


def _event_rows(log: EventLog):
    for p in log.packets:
        yield ("departure", _fmt(p.departure_ms), p.seq, "", "", "", "", "",
               "", "", "", "", "", "", "", "", "")
        if p.arrival_ms is not None:
            yield ("arrival", _fmt(p.arrival_ms), p.seq, "", "", "", "", "",
                   "", "", "", "", "", "", "", "", "")
    for seq, reason in sorted(log.loss_reason.items()):
        yield ("loss", "", seq, "", "", "", "", "", "", "", "", "", "", "",
               "", "", reason)
    for g in log.grants:
        yield ("grant", _fmt(g.t_ms), "", g.mcs, g.prb, g.tbs_bits,
               g.padding_bits, int(g.carries_voice), int(g.carries_data),
               g.mimo_rank, int(g.bundled), int(g.is_retx),
               int(g.sps_occasion), "", "", "", "")
    for h in log.harq:
        yield ("harq", _fmt(h.t_ms), h.seq, "", "", "", "", "", "", "", "",
               "", "", h.attempt, int(h.delivered), "", h.bearer)
    for w in log.handovers:
        yield ("handover", _fmt(w.start_ms), "", "", "", "", "", "", "", "",
               "", "", "", "", "", _fmt(w.end_ms), "")
    for d in log.jb_discards:
        yield ("jb_discard", _fmt(d.arrival_ms), d.seq, "", "", "", "", "",
               "", "", "", "", "", "", "", _fmt(d.playout_deadline_ms), "")
    for t in log.call_drops:
        yield ("call_drop", _fmt(t), "", "", "", "", "", "", "", "", "", "",
               "", "", "", "", "")


def write_event_log_csv(path, log: EventLog) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EVENT_CSV_COLUMNS + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in _event_rows(log):
            writer.writerow(row)


def event_log_to_dict(log: EventLog) -> dict:
    return {
        "schema_version": 1,
        "duration_ms": log.duration_ms,
        "tti_count": log.tti_count,
        "packets": [{
            "stream_id": p.stream_id, "seq": p.seq,
            "media_ts_ms": p.media_ts_ms, "departure_ms": p.departure_ms,
            "arrival_ms": p.arrival_ms, "payload_bytes": p.payload_bytes,
            "talkspurt_start": p.talkspurt_start,
        } for p in log.packets],
        "losses": {str(k): v for k, v in sorted(log.loss_reason.items())},
        "grants": [{
            "t_ms": g.t_ms, "tbs_bits": g.tbs_bits, "mcs": g.mcs,
            "prb": g.prb, "carries_voice": g.carries_voice,
            "carries_data": g.carries_data, "padding_bits": g.padding_bits,
            "mimo_rank": g.mimo_rank, "bundled": g.bundled,
            "is_retx": g.is_retx, "sps_occasion": g.sps_occasion,
            "pdcch": g.pdcch,
        } for g in log.grants],
        "harq": [{
            "t_ms": h.t_ms, "bearer": h.bearer, "seq": h.seq,
            "attempt": h.attempt, "delivered": h.delivered,
        } for h in log.harq],
        "handovers": [{"start_ms": w.start_ms, "end_ms": w.end_ms}
                      for w in log.handovers],
        "jb_playouts": [{"seq": p.seq, "playout_ms": p.playout_ms}
                        for p in log.jb_playouts],
        "jb_discards": [{"seq": d.seq, "arrival_ms": d.arrival_ms,
                         "playout_deadline_ms": d.playout_deadline_ms}
                        for d in log.jb_discards],
        "call_drops": list(log.call_drops),
        "counters": {
            "pdcch_count": log.pdcch_count,
            "data_bits_delivered": log.data_bits_delivered,
            "voice_bits_delivered": log.voice_bits_delivered,
            "in_flight": log.in_flight,
            "mean_header_bytes": log.mean_header_bytes,
        },
    }


def write_event_log_json(path, log: EventLog) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(event_log_to_dict(log), fh, sort_keys=True, indent=1)
        fh.write("\n")


# --- KPI report ---


def write_report_json(path, report) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def read_report_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_report_csv_tables(out_dir, report, prefix: str = "report") -> list:
    """Flat CSV views: scalar summary, per-window table, PDF/CDF tables."""
    out_dir = str(out_dir)
    written = []

    path = f"{out_dir}/{prefix}_summary.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        for k, v in sorted(report.scalars().items()):
            fh.write(f"{k},{'' if v is None else v}\n")
    written.append(path)

    path = f"{out_dir}/{prefix}_windows.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t0_ms,jitter_mean_ms,jitter_count,lost,received,error_rate\n")
        for w in report.windows:
            jm = "" if w["jitter_mean_ms"] is None else _fmt(w["jitter_mean_ms"])
            fh.write(f"{_fmt(w['t0_ms'])},{jm},{w['jitter_count']},"
                     f"{w['lost']},{w['received']},{w['error_rate']:.6f}\n")
    written.append(path)

    for name, dist in (("jitter_pdf", report.jitter_pdf),
                       ("window_error_pdf", report.window_error_pdf)):
        if dist is None:
            continue
        for kind in ("pdf", "cdf"):
            path = f"{out_dir}/{prefix}_{name}_{kind}.csv"
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(f"bin_center,{kind}\n")
                edges = dist["bin_edges"]
                for i, v in enumerate(dist[kind]):
                    center = (edges[i] + edges[i + 1]) / 2.0
                    fh.write(f"{center:.6f},{v:.9f}\n")
            written.append(path)

    if report.rf_binned:
        path = f"{out_dir}/{prefix}_rf_binned.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("metric,lo,hi,mean_jitter_ms,count,"
                     "mean_error_rate,window_count\n")
            for metric, rows in sorted(report.rf_binned.items()):
                for b in rows:
                    jm = "" if b["mean_jitter_ms"] is None \
                        else f"{b['mean_jitter_ms']:.6f}"
                    em = "" if b["mean_error_rate"] is None \
                        else f"{b['mean_error_rate']:.6f}"
                    fh.write(f"{metric},{b['lo']},{b['hi']},{jm},"
                             f"{b['count']},{em},{b['window_count']}\n")
        written.append(path)
    return written
