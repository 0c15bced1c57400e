import pytest

from voltesim.codec import (ActivityKind, ActivityModel, CodecConfig, amr_wb,
                            generate_stream, rtp_total_packet_bits)


def test_packet_bits_12_65():
    assert rtp_total_packet_bits(amr_wb(12.65)) == 424


def test_packet_bits_23_85():
    assert rtp_total_packet_bits(amr_wb(23.85)) == 648


def test_packet_bits_header_only():
    assert rtp_total_packet_bits(CodecConfig(0.0)) == 11 + 96 + 64


def test_packet_bits_strictly_increasing_in_rate():
    rates = [4.75, 5.9, 6.7, 8.85, 12.65, 15.85, 18.25, 23.05, 23.85]
    sizes = [rtp_total_packet_bits(amr_wb(r)) for r in rates]
    assert all(a < b for a, b in zip(sizes, sizes[1:]))


def test_octet_payloads():
    assert amr_wb(12.65).amr_payload_bytes == 33
    assert amr_wb(23.85).amr_payload_bytes == 61


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(12.65, frame_interval_ms=0)
    with pytest.raises(ValueError):
        CodecConfig(12.65, amr_header_bits=-1)


def test_continuous_stream_cadence():
    recs = generate_stream(amr_wb(12.65), 100, ActivityModel(), seed=0)
    assert [r.departure_ms for r in recs] == [0.0, 20.0, 40.0, 60.0, 80.0]
    assert [r.media_ts_ms for r in recs] == [0.0, 20.0, 40.0, 60.0, 80.0]
    assert [r.seq for r in recs] == [0, 1, 2, 3, 4]
    assert recs[0].talkspurt_start and not any(r.talkspurt_start
                                               for r in recs[1:])


def test_on_off_stream_hand_trace():
    # seed 5 draws a 40 ms talkspurt, 40 ms silence, then talk again:
    # silence covers [40, 80) so packets depart at 0, 20 and 80 only
    act = ActivityModel(kind=ActivityKind.ON_OFF, mean_talkspurt_ms=40,
                        mean_silence_ms=40)
    recs = generate_stream(amr_wb(12.65), 100, act, seed=5)
    assert [r.departure_ms for r in recs] == [0.0, 20.0, 80.0]
    assert [r.media_ts_ms for r in recs] == [0.0, 20.0, 40.0]
    assert [r.talkspurt_start for r in recs] == [True, False, True]


def test_zero_duration_rejected():
    with pytest.raises(ValueError):
        generate_stream(amr_wb(12.65), 0, ActivityModel(), seed=0)


def test_media_clock_within_talkspurt():
    from voltesim.codec import talk_windows
    act = ActivityModel(kind=ActivityKind.ON_OFF, mean_talkspurt_ms=500,
                        mean_silence_ms=200)
    recs = generate_stream(amr_wb(12.65), 20_000, act, seed=9)
    windows = talk_windows(20_000, act, 9, 20.0)
    for prev, cur in zip(recs, recs[1:]):
        same_spurt = any(lo <= prev.departure_ms and cur.departure_ms < hi
                         for lo, hi in windows)
        if same_spurt:
            assert cur.departure_ms - prev.departure_ms == pytest.approx(20.0)
        # the media clock advances one frame per packet regardless
        assert cur.media_ts_ms - prev.media_ts_ms == 20.0


def test_talkspurt_flag_matches_departure_gaps():
    act = ActivityModel(kind=ActivityKind.ON_OFF, mean_talkspurt_ms=300,
                        mean_silence_ms=300)
    recs = generate_stream(amr_wb(12.65), 30_000, act, seed=4)
    for prev, cur in zip(recs, recs[1:]):
        gap = cur.departure_ms - prev.departure_ms
        assert cur.talkspurt_start == (gap > 40.0)


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_stream_deterministic(seed):
    act = ActivityModel(kind=ActivityKind.ON_OFF, mean_talkspurt_ms=900,
                        mean_silence_ms=400)
    a = generate_stream(amr_wb(12.65), 10_000, act, seed=seed)
    b = generate_stream(amr_wb(12.65), 10_000, act, seed=seed)
    assert a == b


def test_seq_unique_and_media_nondecreasing():
    act = ActivityModel(kind=ActivityKind.ON_OFF, mean_talkspurt_ms=200,
                        mean_silence_ms=100)
    recs = generate_stream(amr_wb(23.85), 15_000, act, seed=2)
    seqs = [r.seq for r in recs]
    assert len(set(seqs)) == len(seqs)
    media = [r.media_ts_ms for r in recs]
    assert media == sorted(media)
