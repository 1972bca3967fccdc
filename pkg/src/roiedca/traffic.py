"""Video trace handling, MTU packetization and cross-traffic sources."""

from __future__ import annotations

import csv
import enum
import io
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from .engine import US_PER_SECOND, Engine, RngStream
from .mac import AC

TRACE_HEADER = ["frame_index", "region", "size_bytes", "enc_mse", "motion_mse", "pixel_count"]


class Region(str, enum.Enum):
    ROI = "ROI"
    NONROI = "NONROI"

    @classmethod
    def parse(cls, text: str) -> "Region":
        key = text.strip().upper().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown region {text!r} (expected ROI or NONROI)") from None


REGION_ORDER = {Region.ROI: 0, Region.NONROI: 1}


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class VideoTraceEntry:
    frame_index: int
    region: Region
    size_bytes: int
    enc_mse: float
    motion_mse: float
    pixel_count: int


@dataclass(frozen=True)
class VideoPacket:
    packet_id: int
    frame_index: int
    region: Region
    fragment_index: int
    fragment_count: int
    size_bytes: int
    created_at: int


@dataclass(frozen=True)
class CrossPacket:
    packet_id: int
    flow: str
    size_bytes: int
    created_at: int


def _parse_row(row: list[str], lineno: int) -> VideoTraceEntry:
    if len(row) != len(TRACE_HEADER):
        raise TraceError(f"line {lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
    try:
        return VideoTraceEntry(
            frame_index=int(row[0]),
            region=Region.parse(row[1]),
            size_bytes=int(row[2]),
            enc_mse=float(row[3]),
            motion_mse=float(row[4]),
            pixel_count=int(row[5]),
        )
    except ValueError as exc:
        raise TraceError(f"line {lineno}: {exc}") from None


def parse_video_trace(text: str) -> list[VideoTraceEntry]:
    entries = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = next(csv.reader([stripped]))
        if not header_seen:
            if [c.strip() for c in row] != TRACE_HEADER:
                raise TraceError(f"line {lineno}: expected header {','.join(TRACE_HEADER)}")
            header_seen = True
            continue
        entries.append(_parse_row([c.strip() for c in row], lineno))
    if not entries:
        raise TraceError("no entries")
    entries.sort(key=lambda e: (e.frame_index, REGION_ORDER[e.region]))
    validate_trace(entries)
    return entries


def load_video_trace(path) -> list[VideoTraceEntry]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"video trace not found: {path}")
    return parse_video_trace(path.read_text(encoding="utf-8"))


def validate_trace(entries: list[VideoTraceEntry]) -> None:
    by_frame: dict[int, dict[Region, VideoTraceEntry]] = {}
    for e in entries:
        if e.size_bytes <= 0:
            raise TraceError(f"frame {e.frame_index} {e.region.value}: size_bytes must be > 0")
        if e.pixel_count <= 0:
            raise TraceError(f"frame {e.frame_index} {e.region.value}: pixel_count must be > 0")
        if e.enc_mse < 0 or e.motion_mse < 0:
            raise TraceError(f"frame {e.frame_index} {e.region.value}: negative mse")
        if e.frame_index < 0:
            raise TraceError(f"frame {e.frame_index}: negative frame_index")
        regions = by_frame.setdefault(e.frame_index, {})
        if e.region in regions:
            raise TraceError(f"frame {e.frame_index}: duplicate {e.region.value} entry")
        regions[e.region] = e
    total = None
    for frame_index in sorted(by_frame):
        regions = by_frame[frame_index]
        if len(regions) != 2:
            missing = ({Region.ROI, Region.NONROI} - set(regions)).pop()
            raise TraceError(f"frame {frame_index}: missing {missing.value} entry")
        pixels = sum(r.pixel_count for r in regions.values())
        if total is None:
            total = pixels
        elif pixels != total:
            raise TraceError(f"frame {frame_index}: total pixel_count {pixels} differs from {total}")


def format_video_trace(entries: Iterable[VideoTraceEntry], comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for e in entries:
        writer.writerow([e.frame_index, e.region.value, e.size_bytes,
                         f"{e.enc_mse:.6f}", f"{e.motion_mse:.6f}", e.pixel_count])
    return buf.getvalue()


def trace_frames(entries: list[VideoTraceEntry]) -> dict[int, dict[Region, VideoTraceEntry]]:
    frames: dict[int, dict[Region, VideoTraceEntry]] = {}
    for e in entries:
        frames.setdefault(e.frame_index, {})[e.region] = e
    return frames


def fragment_sizes(size_bytes: int, mtu: int) -> list[int]:
    if mtu <= 0:
        raise ValueError("mtu must be positive")
    n = -(-size_bytes // mtu)
    return [mtu] * (n - 1) + [size_bytes - mtu * (n - 1)]


def packetize_frame(entry: VideoTraceEntry, mtu: int, clock: int,
                    next_id: Optional[Callable[[], int]] = None) -> list[VideoPacket]:
    """Split one region-frame into MTU-bounded fragments.

    ``next_id`` supplies globally unique packet ids; without it ids are
    numbered from 0 within the frame.
    """
    sizes = fragment_sizes(entry.size_bytes, mtu)
    packets = []
    for i, size in enumerate(sizes):
        pid = next_id() if next_id is not None else i
        packets.append(VideoPacket(pid, entry.frame_index, entry.region, i, len(sizes), size, clock))
    return packets


def count_packets(entries: Iterable[VideoTraceEntry], mtu: int) -> dict[Region, int]:
    counts = {Region.ROI: 0, Region.NONROI: 0}
    for e in entries:
        counts[e.region] += -(-e.size_bytes // mtu)
    return counts


def frame_release_schedule(fps: float, frames: int) -> list[int]:
    if fps <= 0:
        raise ValueError("fps must be positive")
    return [round(i * US_PER_SECOND / fps) for i in range(frames)]


@dataclass(frozen=True)
class CrossTrafficSource:
    name: str
    target_ac: AC
    packet_size_bytes: int
    rate_bps: float
    jitter_fraction: float = 0.0
    start_us: int = 0

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise ValueError(f"cross-traffic {self.name!r}: rate_bps must be > 0")
        if self.packet_size_bytes <= 0:
            raise ValueError(f"cross-traffic {self.name!r}: packet_size_bytes must be > 0")
        if not 0.0 <= self.jitter_fraction < 1.0:
            raise ValueError(f"cross-traffic {self.name!r}: jitter_fraction must be in [0, 1)")
        object.__setattr__(self, "target_ac", AC(self.target_ac))

    @property
    def mean_interval_us(self) -> float:
        return 8 * self.packet_size_bytes * US_PER_SECOND / self.rate_bps


def next_interval_us(source: CrossTrafficSource, rng: RngStream) -> int:
    mean = source.mean_interval_us
    if source.jitter_fraction == 0:
        return max(1, round(mean))
    u = rng.uniform()
    return max(1, round(mean * (1.0 + source.jitter_fraction * (2.0 * u - 1.0))))


class CrossTrafficGenerator:
    """Drives one constant-rate source on an engine.

    Packets go straight to ``sink(packet, ac)``; they never pass through
    the video mapper.
    """

    def __init__(self, engine: Engine, source: CrossTrafficSource, rng: RngStream,
                 sink: Callable[[CrossPacket, AC], None], next_id: Callable[[], int],
                 stop_us: Optional[int] = None):
        self.engine = engine
        self.source = source
        self.rng = rng
        self.sink = sink
        self.next_id = next_id
        self.stop_us = stop_us
        self.emitted = 0
        self.bytes_emitted = 0

    def start(self) -> None:
        self.engine.schedule(self.source.start_us, "source-tick", self.tick)

    def tick(self) -> None:
        cross_traffic_tick(self)


def cross_traffic_tick(gen: CrossTrafficGenerator):
    """Emit one packet and schedule the next tick; returns the next event."""
    src = gen.source
    now = gen.engine.clock
    pkt = CrossPacket(gen.next_id(), src.name, src.packet_size_bytes, now)
    gen.emitted += 1
    gen.bytes_emitted += src.packet_size_bytes
    gen.sink(pkt, src.target_ac)
    t_next = now + next_interval_us(src, gen.rng)
    if gen.stop_us is not None and t_next > gen.stop_us:
        return None
    return gen.engine.schedule(t_next, "source-tick", gen.tick)


# -- reference trace -------------------------------------------------------

WIDTH, HEIGHT = 1280, 720
ROI_PIXELS = 1280 * 192  # three 64-px CTU rows covering the overtaking lane
ROI_TARGET_PSNR = 35.30
NONROI_TARGET_PSNR = 30.40
ROI_PACKETS = 1201
NONROI_PACKETS = 2993


def _psnr_to_mse(psnr_db: float) -> float:
    return 255.0 ** 2 / 10 ** (psnr_db / 10)


def _fragment_plan(rng: random.Random, frames: int, total: int) -> list[int]:
    base, extra = divmod(total, frames)
    counts = [base] * frames
    for i in rng.sample(range(frames), extra):
        counts[i] += 1
    return counts


def _zero_mean(values: list[float]) -> list[float]:
    m = sum(values) / len(values)
    return [v - m for v in values]


def generate_reference_trace(seed: int = 2020, frames: int = 300, mtu: int = 1024) -> list[VideoTraceEntry]:
    """Deterministic stand-in for the ROI/non-ROI All-Intra encoder output.

    Per-region packet totals are fixed (1201 ROI, 2993 non-ROI at MTU 1024)
    and per-frame PSNRs average exactly to 35.30 dB (ROI) and 30.40 dB
    (non-ROI). The ROI carries the high-motion content, so freezing it
    costs far more than freezing the static background.
    """
    rng = random.Random(seed)
    scale = frames / 300
    roi_counts = _fragment_plan(rng, frames, round(ROI_PACKETS * scale))
    non_counts = _fragment_plan(rng, frames, round(NONROI_PACKETS * scale))
    roi_psnr = _zero_mean([rng.gauss(0.0, 0.35) for _ in range(frames)])
    non_psnr = _zero_mean([rng.gauss(0.0, 0.25) for _ in range(frames)])

    # overtaking vehicle: motion swells mid-sequence
    entries = []
    for i in range(frames):
        phase = math.sin(math.pi * i / max(frames - 1, 1))
        roi_motion = 360.0 + 240.0 * phase + rng.uniform(-40.0, 40.0)
        non_motion = 6.0 + rng.uniform(-2.0, 2.0)
        for region, count, psnr, motion, pixels in (
            (Region.ROI, roi_counts[i], ROI_TARGET_PSNR + roi_psnr[i], roi_motion, ROI_PIXELS),
            (Region.NONROI, non_counts[i], NONROI_TARGET_PSNR + non_psnr[i], non_motion,
             WIDTH * HEIGHT - ROI_PIXELS),
        ):
            size = (count - 1) * mtu + rng.randint(mtu // 4, mtu)
            entries.append(VideoTraceEntry(i, region, size, round(_psnr_to_mse(psnr), 6),
                                           round(motion, 6), pixels))
    validate_trace(entries)
    return entries
