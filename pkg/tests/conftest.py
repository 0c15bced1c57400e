import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from voltesim.codec import RtpRecord


def make_trace(seqs, media, arrivals, spurts=None, departures=None):
    """Compact RtpRecord list builder; arrival None means lost."""
    n = len(seqs)
    spurts = spurts or [i == 0 for i in range(n)]
    departures = departures or list(media)
    return [RtpRecord(stream_id="t", seq=seqs[i], media_ts_ms=float(media[i]),
                      departure_ms=float(departures[i]),
                      arrival_ms=None if arrivals[i] is None
                      else float(arrivals[i]),
                      payload_bytes=33, talkspurt_start=bool(spurts[i]))
            for i in range(n)]
