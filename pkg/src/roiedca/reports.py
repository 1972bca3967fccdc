"""Output files: summary CSV, per-run logs, comparison tables and manifest.

Nothing written here depends on wall-clock time or absolute paths, so the
same scenario and seeds always produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from statistics import mean
from typing import Optional

from .experiment import RunRecord
from .mac import Outcome
from .receiver import (FrameQuality, MetricsReport, Receiver, conceal_sequence, summarize)
from .traffic import Region, VideoPacket, format_video_trace, load_video_trace

SUMMARY_COLUMNS = [
    "strategy", "seed", "status",
    "tx_roi", "rx_roi", "pdr_roi", "tx_nonroi", "rx_nonroi", "pdr_nonroi",
    "tx_total", "rx_total", "pdr_total",
    "enc_psnr_roi", "rx_psnr_roi", "enc_psnr_nonroi", "rx_psnr_nonroi",
    "enc_psnr_combined", "rx_psnr_combined", "concealed_roi", "concealed_nonroi", "error",
]
MAC_LOG_COLUMNS = ["packet_id", "ac", "enqueue_us", "outcome", "dequeue_us", "retries"]
VIDEO_LOG_COLUMNS = ["packet_id", "frame_index", "region", "fragment_index", "fragment_count",
                     "size_bytes", "created_us", "ac", "p_new", "qlen_seen", "outcome", "delivered_us", "counted"]
FRAME_COLUMNS = ["frame_index", "mse_roi", "mse_nonroi", "psnr_roi", "psnr_nonroi", "psnr_combined",
                 "displayed_from_roi", "displayed_from_nonroi"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def run_dirname(strategy: str, seed: int) -> str:
    return f"{strategy}_seed{seed}"


def summary_rows(records: list[RunRecord]) -> list[list]:
    rows = []
    for rec in records:
        if rec.ok:
            d = rec.report.as_row()
            rows.append([rec.strategy, rec.seed, "ok"] + [d[c] for c in SUMMARY_COLUMNS[3:-1]] + [""])
        else:
            rows.append([rec.strategy, rec.seed, "failed"] + [None] * (len(SUMMARY_COLUMNS) - 4) + [rec.error])
    for strategy in dict.fromkeys(r.strategy for r in records):
        ok = [r for r in records if r.strategy == strategy and r.ok]
        if not ok:
            continue
        means = [mean(r.report.as_row()[c] for r in ok) for c in SUMMARY_COLUMNS[3:-1]]
        rows.append([strategy, "mean", f"ok({len(ok)})"] + means + [""])
    return rows


def mean_reports(records: list[RunRecord]) -> dict[str, dict]:
    out = {}
    for strategy in dict.fromkeys(r.strategy for r in records):
        ok = [r for r in records if r.strategy == strategy and r.ok]
        if ok:
            cols = ok[0].report.as_row().keys()
            out[strategy] = {c: mean(r.report.as_row()[c] for r in ok) for c in cols}
    return out


STRATEGY_LABELS = {"edca": "EDCA", "uniform": "Uniform adaptive", "roi": "ROI adaptive"}


def comparison_table(records: list[RunRecord]) -> str:
    means = mean_reports(records)
    seeds = sorted({r.seed for r in records if r.ok})
    lines = [f"Mean over seeds {', '.join(map(str, seeds))}", "",
             "Number of received packets for each mapping algorithm", ""]
    head = ["Mapping algorithm", "Tx ROI", "Rx ROI", "Tx non-ROI", "Rx non-ROI", "Tx", "Rx", "PDR"]
    rows = [[STRATEGY_LABELS.get(s, s), f"{m['tx_roi']:.0f}", f"{m['rx_roi']:.1f}", f"{m['tx_nonroi']:.0f}",
             f"{m['rx_nonroi']:.1f}", f"{m['tx_total']:.0f}", f"{m['rx_total']:.1f}", f"{m['pdr_total']:.4f}"]
            for s, m in means.items()]
    lines += _grid(head, rows) + ["", "Average PSNR (dB) for each mapping algorithm", ""]
    head = ["Mapping algorithm", "Enc ROI", "Rx ROI", "Enc non-ROI", "Rx non-ROI", "Enc", "Rx"]
    rows = [[STRATEGY_LABELS.get(s, s)] + [f"{m[c]:.2f}" for c in (
        "enc_psnr_roi", "rx_psnr_roi", "enc_psnr_nonroi", "rx_psnr_nonroi", "enc_psnr_combined", "rx_psnr_combined")]
        for s, m in means.items()]
    lines += _grid(head, rows)
    failed = [r for r in records if not r.ok]
    if failed:
        lines += ["", "Failed runs:"] + [f"  {r.strategy} seed {r.seed}: {r.error}" for r in failed]
    return "\n".join(lines) + "\n"


def _grid(head: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(x)) for x in col) for col in zip(head, *rows)]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    fmt = lambda r: "| " + " | ".join(str(x).ljust(w) for x, w in zip(r, widths)) + " |"
    return [sep, fmt(head), sep] + [fmt(r) for r in rows] + [sep]


def mac_log_text(result) -> str:
    recs = sorted(result.mac_stats.records.values(), key=lambda r: r.packet_id)
    return _csv_text(MAC_LOG_COLUMNS, ([r.packet_id, r.ac.label, r.enqueue_us, r.outcome.value,
                                        r.dequeue_us, r.retries] for r in recs))


def video_log_text(result) -> str:
    rows = []
    for row in sorted(result.video_log, key=lambda r: r.packet.packet_id):
        p, d = row.packet, row.decision
        rec = result.mac_stats.records[p.packet_id]
        rows.append([p.packet_id, p.frame_index, p.region.value, p.fragment_index, p.fragment_count,
                     p.size_bytes, p.created_at, d.chosen_ac.label, d.p_new_used, d.qlen_seen,
                     rec.outcome.value, row.delivered_us, int(row.counted)])
    return _csv_text(VIDEO_LOG_COLUMNS, rows)


def frames_text(qualities: list[FrameQuality]) -> str:
    return _csv_text(FRAME_COLUMNS, ([q.frame_index, q.mse_roi, q.mse_nonroi, q.psnr_roi, q.psnr_nonroi,
                                      q.psnr_combined, q.displayed_from_roi, q.displayed_from_nonroi]
                                     for q in qualities))


def write_reports(records: list[RunRecord], out_dir, trace_path=None, config: Optional[dict] = None) -> list[dict]:
    """Write every output file under ``out_dir``; return the manifest entries."""
    if not records:
        raise ValueError("no run records to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None

    files: dict[str, str] = {
        "summary.csv": _csv_text(SUMMARY_COLUMNS, summary_rows(records)),
        "comparison.txt": comparison_table(records),
    }
    if trace_path is not None:
        files["trace.csv"] = format_video_trace(load_video_trace(trace_path))
    if config is not None:
        files["run_config.json"] = json.dumps(config, indent=2, sort_keys=True) + "\n"
    for rec in records:
        if rec.result is None:
            continue
        d = f"runs/{run_dirname(rec.strategy, rec.seed)}"
        files[f"{d}/mac_log.csv"] = mac_log_text(rec.result)
        files[f"{d}/video_packets.csv"] = video_log_text(rec.result)
        files[f"{d}/frames.csv"] = frames_text(rec.result.qualities)

    manifest = []
    for rel in sorted(files):
        data = files[rel].encode("utf-8")
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        manifest.append({"path": rel, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest_text = _csv_text(["path", "bytes", "sha256"], ([m["path"], m["bytes"], m["sha256"]] for m in manifest))
    (out / "manifest.csv").write_bytes(manifest_text.encode("utf-8"))
    return manifest


def rederive_report(run_dir, trace, mtu: int, averaging: str = "db", blank_mse: float = 255.0 ** 2,
                    psnr_ceiling: float = 100.0) -> tuple[MetricsReport, list[FrameQuality]]:
    """Rebuild a run's report from its ``video_packets.csv`` alone."""
    receiver = Receiver(trace, mtu)
    sent = {r: 0 for r in Region}
    received = {r: 0 for r in Region}
    delivered = late = 0
    with open(Path(run_dir) / "video_packets.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            region = Region.parse(row["region"])
            sent[region] += 1
            if row["outcome"] == Outcome.DELIVERED.value:
                delivered += 1
                if row["counted"] == "1":
                    received[region] += 1
                    receiver.record_arrival(VideoPacket(int(row["packet_id"]), int(row["frame_index"]), region,
                                                        int(row["fragment_index"]), int(row["fragment_count"]),
                                                        int(row["size_bytes"]), int(row["created_us"])))
                else:
                    late += 1
    statuses = receiver.status_list()
    qualities = conceal_sequence(statuses, trace, blank_mse, psnr_ceiling)
    report = summarize(statuses, qualities, trace, sent, received, mac_delivered=delivered, late=late,
                       averaging=averaging, psnr_ceiling=psnr_ceiling)
    return report, qualities
