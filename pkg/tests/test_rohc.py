import numpy as np
import pytest

from voltesim.rohc import (DecompOutcome, HeaderSizeModel, RateInputs,
                           RohcContext, RohcLink, RohcMode,
                           RohcState, apply_feedback, compress,
                           compression_efficiency, decompress,
                           required_channel_rate)


def test_compress_ir_size():
    ctx = RohcContext(mode=RohcMode.U)
    size, kind = compress(ctx, 0)
    assert size == 43 and kind is RohcState.IR


def test_compress_so_one_byte():
    ctx = RohcContext(mode=RohcMode.U, state=RohcState.SO)
    size, kind = compress(ctx, 0)
    assert size == 1.0 and kind is RohcState.SO


def test_u_mode_upward_after_three_ir():
    ctx = RohcContext(mode=RohcMode.U)
    kinds = [compress(ctx, i)[1] for i in range(3)]
    assert kinds == [RohcState.IR] * 3
    assert ctx.state is RohcState.FO


def test_u_mode_periodic_ir_refresh():
    ctx = RohcContext(mode=RohcMode.U)
    kinds = [compress(ctx, i)[1] for i in range(250)]
    ir_positions = [i for i, k in enumerate(kinds) if k is RohcState.IR]
    assert ir_positions[:3] == [0, 1, 2]
    assert len(ir_positions) > 3  # refresh happened
    gap = ir_positions[3] - ir_positions[2]
    assert 95 <= gap <= 105


def test_u_mode_ignores_feedback():
    ctx = RohcContext(mode=RohcMode.U, state=RohcState.SO)
    apply_feedback(ctx, "NACK")
    assert ctx.state is RohcState.SO


def test_o_mode_climbs_only_on_ack():
    ctx = RohcContext(mode=RohcMode.O)
    for i in range(50):
        _, kind = compress(ctx, i)
        assert kind is RohcState.IR
    apply_feedback(ctx, "ACK")
    assert ctx.state is RohcState.FO
    apply_feedback(ctx, "ACK")
    assert ctx.state is RohcState.SO


def test_r_mode_requires_ack_for_so():
    ctx = RohcContext(mode=RohcMode.R)
    for i in range(200):
        compress(ctx, i)
    assert ctx.state is RohcState.IR  # no feedback, no climb


def test_decompress_ir_establishes_context():
    ctx = RohcContext(mode=RohcMode.O)
    assert decompress(ctx, RohcState.IR, True) is DecompOutcome.OK
    assert ctx.context_established


def test_lost_ir_then_so_fails():
    ctx = RohcContext(mode=RohcMode.O)
    decompress(ctx, RohcState.IR, False)
    assert decompress(ctx, RohcState.SO, True) is DecompOutcome.FAIL


def test_fail_enqueues_nack_and_compressor_falls_back():
    link = RohcLink(mode=RohcMode.O, feedback_delay_pkts=1)
    # climb to SO on a clean link
    states = [link.step(True)[1] for _ in range(20)]
    assert link.compressor.state is RohcState.SO
    # damage: drop a synthetic context update at the decompressor
    link.decompressor.context_damaged = True
    _, kind, outcome = link.step(True)
    assert outcome is DecompOutcome.FAIL
    # NACK arrives one packet later and forces IR
    _, kind, _ = link.step(True)
    assert kind is RohcState.IR


def test_o_mode_recovery_bounded_on_lossy_link():
    rng = np.random.default_rng(7)
    link = RohcLink(mode=RohcMode.O, feedback_delay_pkts=1)
    fail_run = 0
    max_fail_run = 0
    for _ in range(5000):
        delivered = rng.random() > 0.2
        _, _, outcome = link.step(delivered)
        if delivered and outcome is DecompOutcome.FAIL:
            fail_run += 1
            max_fail_run = max(max_fail_run, fail_run)
        elif delivered:
            fail_run = 0
    assert max_fail_run <= 3


def test_u_mode_recovers_only_at_refresh():
    link = RohcLink(mode=RohcMode.U, feedback_delay_pkts=1)
    outcomes = []
    for i in range(420):
        # drop the full IR refresh burst around packet 103
        delivered = not 103 <= i <= 106
        _, _, outcome = link.step(delivered)
        outcomes.append(outcome)
    failed = [i for i, o in enumerate(outcomes)
              if o is DecompOutcome.FAIL and i > 106]
    assert failed, "context damage expected after the dropped refresh"
    # recovery happens at the next IR refresh, ~one refresh period later
    recovery = next(i for i in range(failed[-1], 420)
                    if outcomes[i] is DecompOutcome.OK)
    assert 190 <= recovery <= 215


def test_lossless_long_run_mean_below_fo():
    for mode in RohcMode:
        link = RohcLink(mode=mode, feedback_delay_pkts=1)
        sizes = [link.step(True)[0] for _ in range(5000)]
        assert np.mean(sizes) < link.compressor.sizes.fo_header_bytes


def test_u_mode_long_run_mean_in_field_band():
    link = RohcLink(mode=RohcMode.U)
    sizes = [link.step(True)[0] for _ in range(20_600)]
    assert 3.2 <= np.mean(sizes) <= 7.5


def test_r_mode_more_feedback_than_o_mode():
    links = {}
    for mode in (RohcMode.O, RohcMode.R):
        link = RohcLink(mode=mode, feedback_delay_pkts=1)
        for _ in range(500):
            link.step(True)
        links[mode] = link.feedback_count
    assert links[RohcMode.R] >= links[RohcMode.O]
    assert links[RohcMode.O] >= 1


def test_header_size_model_validation():
    with pytest.raises(ValueError):
        HeaderSizeModel(fo_header_bytes=50.0)
    with pytest.raises(ValueError):
        HeaderSizeModel(so_header_bytes=0.5)


# --- rate arithmetic ---


def test_rate_uncompressed_32_4():
    assert required_channel_rate(RateInputs(33, 40, 8, 20)) == pytest.approx(32.4)


def test_rate_compressed_18_52():
    r = required_channel_rate(RateInputs(33, 5.3, 8, 20))
    assert r == pytest.approx(18.52, abs=1e-9)


def test_rate_payload_only():
    assert required_channel_rate(RateInputs(33, 0, 0, 20)) == pytest.approx(13.2)


@pytest.mark.parametrize("header,expected", [
    (3.9, 18.0), (7.5, 19.4), (3.2, 17.68), (6.5, 19.0),
])
def test_rate_table_scenarios(header, expected):
    r = required_channel_rate(RateInputs(33, header, 8, 20))
    assert r == pytest.approx(expected, abs=0.05)


def test_rate_monotone_in_header():
    rates = [required_channel_rate(RateInputs(33, h, 8, 20))
             for h in (1.0, 3.2, 5.3, 12.0, 40.0)]
    assert all(a < b for a, b in zip(rates, rates[1:]))


def test_rate_rejects_zero_interval():
    with pytest.raises(ValueError):
        RateInputs(33, 40, 8, 0)


@pytest.mark.parametrize("compressed,expected,tol", [
    (3.9, 90.1, 0.3), (7.5, 81.2, 0.3), (3.2, 91.9, 0.3), (6.5, 83.6, 0.3),
])
def test_efficiency_field_table(compressed, expected, tol):
    assert compression_efficiency(40, compressed) == pytest.approx(expected,
                                                                   abs=tol)


def test_efficiency_identity_and_errors():
    assert compression_efficiency(40, 40) == 0.0
    with pytest.raises(ValueError):
        compression_efficiency(0, 1)
