"""Brute-force reference implementations used to check the analyzer.

These deliberately use plain-Python data walks (dicts, explicit loops,
full-range enumeration) rather than the array pipeline under test.
"""

from __future__ import annotations


def jitter_oracle(records, normalized=False):
    """Walk arrivals in order; pair each packet with the most recent
    forward-sequence packet; emit only for +1 steps inside a talkspurt."""
    arrived = [r for r in records if r.arrival_ms is not None]
    arrived.sort(key=lambda r: (r.arrival_ms, r.seq))
    out = []
    ref = None
    for rec in arrived:
        if ref is not None and rec.seq <= ref.seq:
            continue
        if ref is not None and rec.seq == ref.seq + 1 \
                and not rec.talkspurt_start:
            ds = rec.media_ts_ms - ref.media_ts_ms
            dr = rec.arrival_ms - ref.arrival_ms
            j = abs(ds - dr)
            if normalized:
                j = j / dr if dr != 0.0 else 0.0
            out.append((rec.arrival_ms, j))
        ref = rec
    return out


def error_oracle(records):
    """(E, N) by full enumeration of the received sequence span."""
    seqs = {r.seq for r in records if r.arrival_ms is not None}
    if not seqs:
        return 0, 0
    lost = 0
    for s in range(min(seqs), max(seqs) + 1):
        if s not in seqs:
            lost += 1
    return lost, len(seqs)


def window_census_oracle(records, window_ms):
    """Per-window (E, N) built packet by packet from first arrivals."""
    first_arrival = {}
    for r in sorted((r for r in records if r.arrival_ms is not None),
                    key=lambda r: (r.arrival_ms, r.seq)):
        first_arrival.setdefault(r.seq, r.arrival_ms)
    if not first_arrival:
        return {}
    t0 = min(first_arrival.values())
    windows = {}
    ordered = sorted(first_arrival)
    for prev, cur in zip([None] + ordered[:-1], ordered):
        k = int((first_arrival[cur] - t0) // window_ms)
        e, n = windows.get(k, (0, 0))
        holes = 0 if prev is None else cur - prev - 1
        windows[k] = (e + holes, n + 1)
    return windows
