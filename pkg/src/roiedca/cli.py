"""Command line entry point: ``roiedca run|gen-trace|validate|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiment import RunRecord, run_experiment
from .reports import comparison_table, rederive_report, run_dirname, write_reports
from .scenario import Scenario, ScenarioError, load_scenario, validate_scenario
from .traffic import TraceError, format_video_trace, generate_reference_trace, load_video_trace

log = logging.getLogger("roiedca")

EXIT_OK, EXIT_USAGE, EXIT_FAILED_RUN = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="roiedca", description="ROI-aware video mapping over an 802.11p EDCA MAC")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a strategy x seed sweep")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--out", type=Path, help="output directory (default: output_dir from the scenario)")
    run.add_argument("--seeds", type=_int_list)
    run.add_argument("--strategies", type=_str_list)
    run.add_argument("--playout-deadline-ms", type=float)
    run.add_argument("--workers", type=int, default=1)

    gen = sub.add_parser("gen-trace", help="write the reference video trace")
    gen.add_argument("--seed", type=int, default=2020)
    gen.add_argument("--frames", type=int, default=300)
    gen.add_argument("--mtu", type=int, default=1024)
    gen.add_argument("--out", type=Path, required=True)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--scenario", required=True, type=Path)

    rep = sub.add_parser("report", help="re-derive the comparison tables from run logs")
    rep.add_argument("--out", required=True, type=Path, help="directory written by 'run'")
    return p


def scenario_config(s: Scenario) -> dict:
    """Run parameters worth keeping next to the logs (no absolute paths)."""
    return {
        "strategies": s.strategies, "seeds": s.seeds, "mtu": s.mtu, "fps": s.fps, "duration_s": s.duration_s,
        "p_roi": s.mapping.p_roi, "p_nonroi": s.mapping.p_nonroi, "qth_low": s.mapping.qth_low,
        "qth_high": s.mapping.qth_high, "uniform_p": s.uniform_p, "queue_capacity": s.queue_capacity,
        "phy_rate_bps": s.phy_rate_bps, "slot_us": s.slot_us, "sifs_us": s.sifs_us,
        "overhead_us": s.overhead_us, "retry_limit": s.retry_limit,
        "channel": vars(s.channel) if not hasattr(s.channel, "__dataclass_fields__") else
        {k: getattr(s.channel, k) for k in s.channel.__dataclass_fields__},
        "cross_traffic": [{"name": c.name, "ac": int(c.target_ac), "packet_size_bytes": c.packet_size_bytes,
                           "rate_bps": c.rate_bps, "jitter_fraction": c.jitter_fraction, "start_us": c.start_us}
                          for c in s.cross_traffic],
        "playout_deadline_ms": s.playout_deadline_ms, "psnr_averaging": s.psnr_averaging,
        "blank_mse": s.blank_mse, "psnr_ceiling_db": s.psnr_ceiling_db,
    }


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.strategies is not None:
        changes["strategies"] = args.strategies
    if args.playout_deadline_ms is not None:
        changes["playout_deadline_ms"] = args.playout_deadline_ms
    if changes:
        scenario = scenario.replace(**changes)
        validate_scenario(scenario)
    out = args.out or scenario.output_dir
    if out is None:
        raise UsageError("no output directory: pass --out or set output_dir in the scenario")
    records = run_experiment(scenario, workers=args.workers)
    write_reports(records, out, scenario.trace_path, scenario_config(scenario))
    sys.stdout.write(comparison_table(records))
    failed = [r for r in records if not r.ok]
    for r in failed:
        log.error("run %s seed %s failed: %s", r.strategy, r.seed, r.error)
    return EXIT_FAILED_RUN if failed else EXIT_OK


def cmd_gen_trace(args) -> int:
    entries = generate_reference_trace(args.seed, args.frames, args.mtu)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    comment = (f"reference ROI/non-ROI trace: {args.frames} frames, 1280x720 @ 30 fps\n"
               f"regenerate with: roiedca gen-trace --seed {args.seed}")
    args.out.write_text(format_video_trace(entries, comment), encoding="utf-8")
    print(f"wrote {len(entries)} entries to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(f"ok: {len(s.strategies)} strategies x {len(s.seeds)} seeds, trace {s.trace_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = args.out
    config = json.loads((out / "run_config.json").read_text(encoding="utf-8"))
    trace = load_video_trace(out / "trace.csv")
    records = []
    for strategy in config["strategies"]:
        for seed in config["seeds"]:
            run_dir = out / "runs" / run_dirname(strategy, seed)
            if not run_dir.is_dir():
                records.append(RunRecord(strategy, seed, None, 0.0, error="no logs"))
                continue
            report, _ = rederive_report(run_dir, trace, config["mtu"], config["psnr_averaging"],
                                        config["blank_mse"], config["psnr_ceiling_db"])
            records.append(RunRecord(strategy, seed, report, 0.0))
    sys.stdout.write(comparison_table(records))
    return EXIT_OK if all(r.ok for r in records) else EXIT_FAILED_RUN


COMMANDS = {"run": cmd_run, "gen-trace": cmd_gen_trace, "validate": cmd_validate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ScenarioError, TraceError, FileNotFoundError) as exc:
        print(f"roiedca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
