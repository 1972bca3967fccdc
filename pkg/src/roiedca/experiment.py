"""Wiring of one simulation run and strategy x seed sweeps."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

from .engine import US_PER_SECOND, Engine, RngStream
from .mac import AC, ChannelModel, EdcaMac, MacStats, Outcome
from .mapper import AcDecision, make_strategy, map_packet
from .receiver import FrameQuality, MetricsReport, Receiver, RegionFrameStatus, conceal_sequence, summarize
from .scenario import Scenario
from .traffic import (CrossTrafficGenerator, Region, VideoPacket, VideoTraceEntry, frame_release_schedule,
                      load_video_trace, packetize_frame, trace_frames)

log = logging.getLogger(__name__)


@dataclass
class VideoLogRow:
    packet: VideoPacket
    decision: AcDecision
    delivered_us: Optional[int] = None
    counted: bool = False


@dataclass
class RunResult:
    strategy: str
    seed: int
    report: MetricsReport
    mac_stats: MacStats
    video_log: list[VideoLogRow]
    statuses: list[RegionFrameStatus]
    qualities: list[FrameQuality]
    events_dispatched: int
    event_log: Optional[list] = None


@dataclass
class RunRecord:
    strategy: str
    seed: int
    report: Optional[MetricsReport]
    runtime_s: float
    result: Optional[RunResult] = field(default=None, repr=False)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def interleave_regions(regions: dict, mtu: int, clock: int, next_id) -> list[VideoPacket]:
    """Packetize both region-frames of one frame and merge them by position.

    The two encoders run in parallel, so their fragments are multiplexed
    in proportion rather than one region going out entirely first.
    """
    frags = []
    for rank, region in enumerate((Region.ROI, Region.NONROI)):
        for pkt in packetize_frame(regions[region], mtu, clock):
            frags.append(((pkt.fragment_index + 0.5) / pkt.fragment_count, rank, pkt))
    frags.sort(key=lambda f: (f[0], f[1]))
    return [VideoPacket(next_id(), p.frame_index, p.region, p.fragment_index, p.fragment_count,
                        p.size_bytes, p.created_at) for _, _, p in frags]


def simulate(scenario: Scenario, strategy: str, seed: int,
             trace: Optional[list[VideoTraceEntry]] = None, record_events: bool = False) -> RunResult:
    trace = trace if trace is not None else load_video_trace(scenario.trace_path)
    acs = scenario.access_categories()
    mapper = make_strategy(strategy, scenario.mapping, scenario.uniform_p, acs[AC.VI].queue_capacity)

    engine = Engine(record_log=record_events)
    ch = scenario.channel
    channel = ChannelModel(RngStream(seed, "channel"), ch.kind, ch.p_loss, ch.p_g2b, ch.p_b2g,
                           ch.loss_good, ch.loss_bad)
    mapper_rng = RngStream(seed, "mapper")
    receiver = Receiver(trace, scenario.mtu)
    video_rows: dict[int, VideoLogRow] = {}
    deadline_us = None if scenario.playout_deadline_ms is None else round(scenario.playout_deadline_ms * 1000)
    late = 0

    def on_done(packet, outcome: Outcome, t_us: int) -> None:
        nonlocal late
        row = video_rows.get(packet.packet_id)
        if row is None or outcome is not Outcome.DELIVERED:
            return
        row.delivered_us = t_us
        if deadline_us is not None and t_us - packet.created_at > deadline_us:
            late += 1
            return
        row.counted = True
        receiver.record_arrival(packet)

    mac = EdcaMac(engine, channel, RngStream(seed, "backoff"), acs,
                  slot_us=scenario.slot_us, sifs_us=scenario.sifs_us, phy_rate_bps=scenario.phy_rate_bps,
                  overhead_us=scenario.overhead_us, retry_limit=scenario.retry_limit, on_done=on_done)

    ids = itertools.count()
    next_id = ids.__next__
    end_us = round(scenario.duration_s * US_PER_SECOND)

    frames = trace_frames(trace)
    order = sorted(frames)
    release = frame_release_schedule(scenario.fps, len(order))

    def release_frame(frame_index: int) -> None:
        for pkt in interleave_regions(frames[frame_index], scenario.mtu, engine.clock, next_id):
            decision = map_packet(pkt.region, mac.snapshot_qlen(AC.VI), mapper, mapper_rng)
            video_rows[pkt.packet_id] = VideoLogRow(pkt, decision)
            mac.enqueue(pkt, decision.chosen_ac)

    for frame_index, t in zip(order, release):
        engine.schedule(t, "packet-arrival", lambda f=frame_index: release_frame(f))
    for src in scenario.cross_traffic:
        CrossTrafficGenerator(engine, src, RngStream(seed, f"source/{src.name}"), mac.enqueue,
                              next_id, stop_us=end_us).start()
    engine.schedule(end_us, "sim-end")
    engine.run_until(end_us)

    sent = {r: 0 for r in Region}
    received = {r: 0 for r in Region}
    mac_delivered = 0
    for row in video_rows.values():
        sent[row.packet.region] += 1
        if row.counted:
            received[row.packet.region] += 1
        rec = mac.stats.records[row.packet.packet_id]
        if rec.outcome is Outcome.DELIVERED:
            mac_delivered += 1

    statuses = receiver.status_list()
    qualities = conceal_sequence(statuses, trace, scenario.blank_mse, scenario.psnr_ceiling_db)
    report = summarize(statuses, qualities, trace, sent, received, mac_delivered=mac_delivered, late=late,
                       averaging=scenario.psnr_averaging, psnr_ceiling=scenario.psnr_ceiling_db)
    return RunResult(strategy, seed, report, mac.stats, list(video_rows.values()), statuses, qualities,
                     engine.dispatched, engine.log)


def run_one(scenario: Scenario, strategy: str, seed: int,
            trace: Optional[list[VideoTraceEntry]] = None) -> RunRecord:
    t0 = time.perf_counter()
    try:
        result = simulate(scenario, strategy, seed, trace)
    except Exception as exc:  # one failed run must not abort the sweep
        log.error("run %s seed=%s failed: %s", strategy, seed, exc)
        return RunRecord(strategy, seed, None, time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")
    return RunRecord(strategy, seed, result.report, time.perf_counter() - t0, result)


def run_experiment(scenario: Scenario, strategies: Optional[list[str]] = None,
                   seeds: Optional[list[int]] = None, workers: int = 1) -> list[RunRecord]:
    """Run every (strategy, seed) pair on a fresh engine.

    Records come back in (strategy, seed) order regardless of ``workers``.
    """
    strategies = strategies or scenario.strategies
    seeds = seeds or scenario.seeds
    trace = load_video_trace(scenario.trace_path)
    pairs = [(st, sd) for st in strategies for sd in seeds]
    if workers <= 1:
        return [run_one(scenario, st, sd, trace) for st, sd in pairs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_one, scenario, st, sd, trace) for st, sd in pairs]
        return [f.result() for f in futures]
