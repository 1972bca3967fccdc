"""Reassembly, frame-copy concealment and PDR/PSNR reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .traffic import Region, VideoPacket, VideoTraceEntry, trace_frames

PEAK_SQ = 255.0 ** 2
BLANK_MSE = PEAK_SQ


class CorruptLogError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    pass


def frame_psnr(mse: float, ceiling: float = 100.0) -> float:
    if mse <= 0:
        return ceiling
    return 10.0 * math.log10(PEAK_SQ / mse)


@dataclass
class RegionFrameStatus:
    frame_index: int
    region: Region
    fragment_count: int
    received_fragments: set = field(default_factory=set)
    displayed_from: Optional[int] = None

    @property
    def decodable(self) -> bool:
        return len(self.received_fragments) == self.fragment_count


@dataclass(frozen=True)
class FrameQuality:
    frame_index: int
    mse_roi: float
    mse_nonroi: float
    psnr_roi: float
    psnr_nonroi: float
    psnr_combined: float
    displayed_from_roi: Optional[int]
    displayed_from_nonroi: Optional[int]
    mse_combined: float = 0.0


class Receiver:
    """Tracks which fragments of every region-frame made it through."""

    def __init__(self, trace: list[VideoTraceEntry], mtu: int):
        self.statuses: dict[tuple[int, Region], RegionFrameStatus] = {}
        for e in trace:
            n = -(-e.size_bytes // mtu)
            self.statuses[(e.frame_index, e.region)] = RegionFrameStatus(e.frame_index, e.region, n)

    def record_arrival(self, packet: VideoPacket) -> RegionFrameStatus:
        status = self.statuses.get((packet.frame_index, packet.region))
        if status is None:
            raise CorruptLogError(
                f"packet {packet.packet_id}: frame {packet.frame_index} {packet.region.value} is not in the trace"
            )
        if not 0 <= packet.fragment_index < status.fragment_count:
            raise CorruptLogError(
                f"packet {packet.packet_id}: fragment {packet.fragment_index} out of range "
                f"for a {status.fragment_count}-fragment region-frame"
            )
        status.received_fragments.add(packet.fragment_index)
        return status

    def status_list(self) -> list[RegionFrameStatus]:
        return [self.statuses[k] for k in sorted(self.statuses, key=lambda k: (k[0], k[1] is Region.NONROI))]


def conceal_sequence(statuses: Iterable[RegionFrameStatus], trace: list[VideoTraceEntry],
                     blank_mse: float = BLANK_MSE, psnr_ceiling: float = 100.0) -> list[FrameQuality]:
    """Per-frame distortion after frame-copy concealment.

    Regions are handled independently. A lost region-frame shows the last
    decodable one, and its error grows by that frame's ``motion_mse`` for
    every frame of freeze.
    """
    frames = trace_frames(trace)
    status_map = {(s.frame_index, s.region): s for s in statuses}
    missing = [k for k in ((f, r) for f in frames for r in frames[f]) if k not in status_map]
    if missing:
        raise ValueError(f"no status for region-frames {missing[:5]}")

    per_region: dict[Region, list[tuple[float, Optional[int]]]] = {}
    for region in (Region.ROI, Region.NONROI):
        out = []
        last_good: Optional[int] = None
        frozen_mse = blank_mse
        for f in sorted(frames):
            entry = frames[f][region]
            status = status_map[(f, region)]
            if status.decodable:
                last_good = f
                frozen_mse = entry.enc_mse
                mse = entry.enc_mse
            elif last_good is None:
                mse = blank_mse
            else:
                frozen_mse += entry.motion_mse
                mse = frozen_mse
            status.displayed_from = last_good
            out.append((mse, last_good))
        per_region[region] = out

    qualities = []
    for i, f in enumerate(sorted(frames)):
        roi_px = frames[f][Region.ROI].pixel_count
        non_px = frames[f][Region.NONROI].pixel_count
        mse_roi, from_roi = per_region[Region.ROI][i]
        mse_non, from_non = per_region[Region.NONROI][i]
        mse_all = (roi_px * mse_roi + non_px * mse_non) / (roi_px + non_px)
        qualities.append(FrameQuality(
            f, mse_roi, mse_non,
            frame_psnr(mse_roi, psnr_ceiling), frame_psnr(mse_non, psnr_ceiling),
            frame_psnr(mse_all, psnr_ceiling), from_roi, from_non, mse_all,
        ))
    return qualities


def encoding_qualities(trace: list[VideoTraceEntry], psnr_ceiling: float = 100.0) -> list[FrameQuality]:
    frames = trace_frames(trace)
    out = []
    for f in sorted(frames):
        roi, non = frames[f][Region.ROI], frames[f][Region.NONROI]
        mse_all = (roi.pixel_count * roi.enc_mse + non.pixel_count * non.enc_mse) / (roi.pixel_count + non.pixel_count)
        out.append(FrameQuality(f, roi.enc_mse, non.enc_mse, frame_psnr(roi.enc_mse, psnr_ceiling),
                                frame_psnr(non.enc_mse, psnr_ceiling), frame_psnr(mse_all, psnr_ceiling),
                                f, f, mse_all))
    return out


def mean_psnr(qualities: list[FrameQuality], attr: str, averaging: str = "db",
              psnr_ceiling: float = 100.0) -> float:
    """Average a PSNR column: per-frame dB mean, or PSNR of the mean MSE."""
    if not qualities:
        return float("nan")
    if averaging == "db":
        return sum(getattr(q, f"psnr_{attr}") for q in qualities) / len(qualities)
    if averaging == "mse":
        mean_mse = sum(getattr(q, f"mse_{attr}") for q in qualities) / len(qualities)
        return frame_psnr(mean_mse, psnr_ceiling)
    raise ValueError(f"unknown averaging {averaging!r} (db or mse)")


@dataclass
class RegionCounts:
    sent: int = 0
    received: int = 0

    @property
    def pdr(self) -> float:
        return self.received / self.sent if self.sent else float("nan")


@dataclass
class MetricsReport:
    roi: RegionCounts
    nonroi: RegionCounts
    total: RegionCounts
    psnr_roi: float
    psnr_nonroi: float
    psnr_combined: float
    enc_psnr_roi: float
    enc_psnr_nonroi: float
    enc_psnr_combined: float
    frames: int
    concealed_roi: int = 0
    concealed_nonroi: int = 0

    def as_row(self) -> dict:
        return {
            "tx_roi": self.roi.sent, "rx_roi": self.roi.received, "pdr_roi": self.roi.pdr,
            "tx_nonroi": self.nonroi.sent, "rx_nonroi": self.nonroi.received, "pdr_nonroi": self.nonroi.pdr,
            "tx_total": self.total.sent, "rx_total": self.total.received, "pdr_total": self.total.pdr,
            "enc_psnr_roi": self.enc_psnr_roi, "rx_psnr_roi": self.psnr_roi,
            "enc_psnr_nonroi": self.enc_psnr_nonroi, "rx_psnr_nonroi": self.psnr_nonroi,
            "enc_psnr_combined": self.enc_psnr_combined, "rx_psnr_combined": self.psnr_combined,
            "concealed_roi": self.concealed_roi, "concealed_nonroi": self.concealed_nonroi,
        }


def summarize(statuses: list[RegionFrameStatus], qualities: list[FrameQuality],
              trace: list[VideoTraceEntry], sent: dict[Region, int], received: dict[Region, int],
              mac_delivered: Optional[int] = None, late: int = 0, averaging: str = "db",
              psnr_ceiling: float = 100.0) -> MetricsReport:
    """Collapse per-frame qualities and packet counts into one run report.

    ``sent``/``received`` are per-region packet counts. When
    ``mac_delivered`` (video packets the MAC reported delivered) is given,
    it must equal the received count plus the ``late`` packets discarded
    at the playout deadline.
    """
    frag_received = {r: 0 for r in Region}
    for s in statuses:
        frag_received[s.region] += len(s.received_fragments)
    if mac_delivered is not None and mac_delivered != sum(received.values()) + late:
        raise ConsistencyError(
            f"receiver counted {sum(received.values())} packets (+{late} late) "
            f"but the MAC delivered {mac_delivered}"
        )
    for r in Region:
        if frag_received[r] != received[r]:
            raise ConsistencyError(
                f"{r.value}: {received[r]} packets received but {frag_received[r]} fragments recorded"
            )
    enc = encoding_qualities(trace, psnr_ceiling)
    roi = RegionCounts(sent[Region.ROI], received[Region.ROI])
    non = RegionCounts(sent[Region.NONROI], received[Region.NONROI])
    return MetricsReport(
        roi=roi, nonroi=non, total=RegionCounts(roi.sent + non.sent, roi.received + non.received),
        psnr_roi=mean_psnr(qualities, "roi", averaging, psnr_ceiling),
        psnr_nonroi=mean_psnr(qualities, "nonroi", averaging, psnr_ceiling),
        psnr_combined=mean_psnr(qualities, "combined", averaging, psnr_ceiling),
        enc_psnr_roi=mean_psnr(enc, "roi", averaging, psnr_ceiling),
        enc_psnr_nonroi=mean_psnr(enc, "nonroi", averaging, psnr_ceiling),
        enc_psnr_combined=mean_psnr(enc, "combined", averaging, psnr_ceiling),
        frames=len(qualities),
        concealed_roi=sum(1 for s in statuses if s.region is Region.ROI and not s.decodable),
        concealed_nonroi=sum(1 for s in statuses if s.region is Region.NONROI and not s.decodable),
    )
