import math

import pytest
from hypothesis import given, settings, strategies as st

from roiedca.receiver import (ConsistencyError, CorruptLogError, Receiver, conceal_sequence, encoding_qualities,
                              frame_psnr, mean_psnr, summarize)
from roiedca.traffic import Region, VideoPacket, packetize_frame

from conftest import small_trace

MTU = 1024


@pytest.mark.parametrize("mse,db", [(65025, 0.0), (650.25, 20.0), (21.13, 34.88)])
def test_frame_psnr(mse, db):
    assert frame_psnr(mse) == pytest.approx(db, abs=0.005)


def test_zero_mse_hits_ceiling():
    assert frame_psnr(0.0, ceiling=99.0) == 99.0


def deliver(receiver, trace, keep=lambda e, p: True):
    n = 0
    for e in trace:
        for p in packetize_frame(e, MTU, 0):
            if keep(e, p):
                receiver.record_arrival(p)
                n += 1
    return n


def test_all_fragments_make_frame_decodable():
    trace = small_trace(1, roi_size=3000)
    rx = Receiver(trace, MTU)
    deliver(rx, trace)
    assert all(s.decodable for s in rx.status_list())


def test_missing_fragment_blocks_decoding():
    trace = small_trace(1, roi_size=3000)
    rx = Receiver(trace, MTU)
    deliver(rx, trace, lambda e, p: not (e.region is Region.ROI and p.fragment_index == 1))
    roi = rx.statuses[(0, Region.ROI)]
    assert roi.received_fragments == {0, 2} and not roi.decodable


def test_duplicate_fragment_is_idempotent():
    trace = small_trace(1)
    rx = Receiver(trace, MTU)
    p = packetize_frame(trace[0], MTU, 0)[1]
    rx.record_arrival(p)
    rx.record_arrival(p)
    assert rx.statuses[(0, Region.ROI)].received_fragments == {1}


def test_unknown_frame_is_corrupt():
    rx = Receiver(small_trace(1), MTU)
    with pytest.raises(CorruptLogError):
        rx.record_arrival(VideoPacket(0, 9, Region.ROI, 0, 1, 10, 0))


def test_freeze_accumulates_motion():
    trace = small_trace(12, enc_roi=20.0, motion_roi=50.0)
    rx = Receiver(trace, MTU)
    deliver(rx, trace, lambda e, p: e.frame_index != 10)
    q = conceal_sequence(rx.status_list(), trace)
    assert q[10].mse_roi == pytest.approx(70.0)
    assert q[10].displayed_from_roi == 9
    assert q[11].mse_roi == pytest.approx(20.0)


def test_regions_concealed_independently():
    trace = small_trace(3)
    rx = Receiver(trace, MTU)
    deliver(rx, trace, lambda e, p: not (e.frame_index == 1 and e.region is Region.ROI))
    q = conceal_sequence(rx.status_list(), trace)
    assert q[1].mse_roi == pytest.approx(20.0 + 50.0)
    assert q[1].mse_nonroi == pytest.approx(40.0)


def test_blank_before_first_decodable_frame():
    trace = small_trace(3)
    rx = Receiver(trace, MTU)
    deliver(rx, trace, lambda e, p: e.frame_index > 0)
    q = conceal_sequence(rx.status_list(), trace, blank_mse=65025.0)
    assert q[0].mse_roi == 65025.0 and q[0].psnr_roi == pytest.approx(0.0)


def test_combined_mse_is_pixel_weighted():
    trace = small_trace(1, enc_roi=20.0, enc_non=40.0, roi_px=100, non_px=300)
    q = encoding_qualities(trace)[0]
    assert q.mse_combined == pytest.approx((100 * 20 + 300 * 40) / 400)
    assert q.psnr_combined == pytest.approx(frame_psnr(35.0))


def test_lossless_run_reproduces_encoding_quality():
    trace = small_trace(8)
    rx = Receiver(trace, MTU)
    n = deliver(rx, trace)
    sent = {Region.ROI: 8 * 3, Region.NONROI: 8 * 2}
    q = conceal_sequence(rx.status_list(), trace)
    rep = summarize(rx.status_list(), q, trace, sent, dict(sent), mac_delivered=n)
    assert rep.psnr_roi == rep.enc_psnr_roi
    assert rep.psnr_nonroi == rep.enc_psnr_nonroi
    assert rep.psnr_combined == rep.enc_psnr_combined
    assert rep.total.pdr == 1.0


def test_mac_and_receiver_counts_must_agree():
    trace = small_trace(2)
    rx = Receiver(trace, MTU)
    n = deliver(rx, trace)
    sent = {Region.ROI: 6, Region.NONROI: 4}
    q = conceal_sequence(rx.status_list(), trace)
    with pytest.raises(ConsistencyError):
        summarize(rx.status_list(), q, trace, sent, dict(sent), mac_delivered=n + 1)


def test_mse_averaging_mode():
    trace = small_trace(2, enc_roi=10.0)
    q = encoding_qualities(trace)
    assert mean_psnr(q, "roi", "mse") == pytest.approx(frame_psnr(10.0))
    with pytest.raises(ValueError):
        mean_psnr(q, "roi", "median")


@settings(max_examples=50)
@given(lost=st.sets(st.integers(0, 9)), extra=st.integers(0, 9))
def test_losing_more_frames_never_improves_quality(lost, extra):
    trace = small_trace(10)

    def run(lost_frames):
        rx = Receiver(trace, MTU)
        deliver(rx, trace, lambda e, p: e.frame_index not in lost_frames)
        return conceal_sequence(rx.status_list(), trace)

    a, b = run(lost), run(lost | {extra})
    for qa, qb in zip(a, b):
        assert qb.mse_roi >= qa.mse_roi and qb.mse_nonroi >= qa.mse_nonroi


def test_more_motion_lowers_concealed_quality():
    def mean_concealed_psnr(motion):
        trace = small_trace(10, motion_roi=motion, motion_non=motion)
        rx = Receiver(trace, MTU)
        deliver(rx, trace, lambda e, p: e.frame_index not in (3, 4, 7))
        q = conceal_sequence(rx.status_list(), trace)
        return sum(q[f].psnr_roi + q[f].psnr_nonroi for f in (3, 4, 7))

    assert mean_concealed_psnr(80.0) < mean_concealed_psnr(40.0)


@given(lost=st.sets(st.integers(0, 5)))
def test_pixel_weighting_identity(lost):
    trace = small_trace(6, roi_px=123, non_px=877)
    rx = Receiver(trace, MTU)
    deliver(rx, trace, lambda e, p: e.frame_index not in lost)
    for q in conceal_sequence(rx.status_list(), trace):
        assert 123 * q.mse_roi + 877 * q.mse_nonroi == pytest.approx(1000 * q.mse_combined)
        assert min(q.mse_roi, q.mse_nonroi) <= q.mse_combined <= max(q.mse_roi, q.mse_nonroi) + 1e-9
