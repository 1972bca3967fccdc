"""Scenario configuration (TOML) and its validation.

Every key is optional except ``trace``. Omitted keys take the defaults
of the reference scenario, see ``README.md`` for the full key list.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .mac import AC, _as_ac, check_priority_order, default_access_categories
from .mapper import MappingConfig, Strategy
from .traffic import CrossTrafficSource

try:
    from importlib.resources import files as _resource_files
except ImportError:  # pragma: no cover
    _resource_files = None


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "gilbert_elliott"
    p_loss: float = 0.0
    p_g2b: float = 0.03
    p_b2g: float = 0.1
    loss_good: float = 0.3
    loss_bad: float = 0.5


def reference_cross_traffic() -> list[CrossTrafficSource]:
    return [
        CrossTrafficSource("voice", AC.VO, 500, 600_000.0, 0.1),
        CrossTrafficSource("tcp", AC.BE, 1500, 200_000.0, 0.2),
        CrossTrafficSource("udp", AC.BK, 1000, 2_000_000.0, 0.2),
    ]


@dataclass
class Scenario:
    trace_path: Path
    strategies: list[str] = field(default_factory=lambda: ["edca", "uniform", "roi"])
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    mapping: MappingConfig = field(default_factory=MappingConfig)
    uniform_p: float = 0.8
    queue_capacity: int = 50
    edca_overrides: dict = field(default_factory=dict)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    cross_traffic: list[CrossTrafficSource] = field(default_factory=reference_cross_traffic)
    phy_rate_bps: float = 6e6
    slot_us: int = 13
    sifs_us: int = 32
    overhead_us: int = 100
    retry_limit: int = 4
    mtu: int = 1024
    fps: float = 30.0
    duration_s: float = 11.0
    output_dir: Optional[Path] = None
    playout_deadline_ms: Optional[float] = None
    psnr_averaging: str = "db"
    blank_mse: float = 255.0 ** 2
    psnr_ceiling_db: float = 100.0

    def access_categories(self):
        return default_access_categories(self.queue_capacity, self.edca_overrides)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


_SCALARS = {
    "strategies": list, "seeds": list, "uniform_p": float, "queue_capacity": int,
    "phy_rate_bps": float, "slot_us": int, "sifs_us": int, "overhead_us": int,
    "retry_limit": int, "mtu": int, "fps": float, "duration_s": float,
    "playout_deadline_ms": float, "psnr_averaging": str, "blank_mse": float,
    "psnr_ceiling_db": float,
}
_MAPPING_KEYS = {"p_roi": float, "p_nonroi": float, "qth_low": int, "qth_high": int}
_CHANNEL_KEYS = {"kind": str, "p_loss": float, "p_g2b": float, "p_b2g": float,
                 "loss_good": float, "loss_bad": float}
_EDCA_KEYS = {"aifsn": int, "cw_min": int, "cw_max": int, "queue_capacity": int}
_CROSS_KEYS = {"name": str, "ac": int, "packet_size_bytes": int, "rate_bps": float,
               "jitter_fraction": float, "start_us": int}


def _coerce(value: Any, kind: type, path: str, problems: list[str]):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    if kind is list and isinstance(value, list):
        return value
    problems.append(f"{path}: expected {kind.__name__}, got {type(value).__name__} {value!r}")
    return None


def _table(raw: dict, keys: dict, prefix: str, problems: list[str]) -> dict:
    out = {}
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in keys:
            problems.append(f"{path}: unknown key")
            continue
        v = _coerce(value, keys[key], path, problems)
        if v is not None:
            out[key] = v
    return out


def scenario_from_dict(raw: dict, base_dir: Path = Path(".")) -> Scenario:
    problems: list[str] = []
    raw = dict(raw)
    trace = raw.pop("trace", None)
    if trace is None:
        problems.append("trace: required key missing")
        trace_path = Path("")
    elif not isinstance(trace, str):
        problems.append(f"trace: expected str, got {type(trace).__name__}")
        trace_path = Path("")
    else:
        trace_path = resolve_path(trace, base_dir)

    kwargs: dict[str, Any] = {"trace_path": trace_path}
    mapping = _table({k: raw.pop(k) for k in list(raw) if k in _MAPPING_KEYS}, _MAPPING_KEYS, "", problems)
    channel = _table(raw.pop("channel", {}), _CHANNEL_KEYS, "channel.", problems)
    edca_raw = raw.pop("edca", {})
    cross_raw = raw.pop("cross_traffic", None)
    out_dir = raw.pop("output_dir", None)
    kwargs.update(_table(raw, _SCALARS, "", problems))

    if out_dir is not None:
        kwargs["output_dir"] = resolve_path(str(out_dir), base_dir)
    kwargs["mapping"] = MappingConfig(**mapping)
    kwargs["channel"] = ChannelConfig(**channel)

    overrides = {}
    for ac_key, table in edca_raw.items():
        try:
            ac = _as_ac(ac_key)
        except (KeyError, ValueError):
            problems.append(f"edca.{ac_key}: unknown access category")
            continue
        overrides[ac] = _table(table, _EDCA_KEYS, f"edca.{ac_key}.", problems)
    kwargs["edca_overrides"] = overrides

    if cross_raw is not None:
        sources = []
        for i, table in enumerate(cross_raw):
            entry = _table(table, _CROSS_KEYS, f"cross_traffic[{i}].", problems)
            missing = [k for k in ("ac", "packet_size_bytes", "rate_bps") if k not in entry]
            if missing:
                problems.append(f"cross_traffic[{i}]: missing {', '.join(missing)}")
                continue
            try:
                sources.append(CrossTrafficSource(
                    name=entry.get("name", f"flow{i}"), target_ac=AC(entry["ac"]),
                    packet_size_bytes=entry["packet_size_bytes"], rate_bps=entry["rate_bps"],
                    jitter_fraction=entry.get("jitter_fraction", 0.0), start_us=entry.get("start_us", 0)))
            except ValueError as exc:
                problems.append(f"cross_traffic[{i}]: {exc}")
        kwargs["cross_traffic"] = sources

    if problems:
        raise ScenarioError(problems)
    scenario = Scenario(**kwargs)
    validate_scenario(scenario)
    return scenario


def resolve_path(text: str, base_dir: Path) -> Path:
    if text.startswith("builtin:"):
        return builtin_path(text[len("builtin:"):])
    p = Path(text)
    return p if p.is_absolute() else (base_dir / p)


def builtin_path(name: str) -> Path:
    return Path(str(_resource_files("roiedca") / "data" / name))


def validate_scenario(s: Scenario, check_files: bool = True) -> None:
    problems = []
    if check_files and not Path(s.trace_path).is_file():
        problems.append(f"trace: file not found: {s.trace_path}")
    if not s.strategies:
        problems.append("strategies: at least one strategy required")
    for name in s.strategies:
        if name not in {st.value for st in Strategy}:
            problems.append(f"strategies: unknown strategy {name!r}")
    if not s.seeds:
        problems.append("seeds: at least one seed required")
    if any(not isinstance(x, int) or isinstance(x, bool) for x in s.seeds):
        problems.append("seeds: every seed must be an integer")
    try:
        s.mapping.validate(s.access_categories()[AC.VI].queue_capacity)
    except ValueError as exc:
        problems.append(f"mapping: {exc}")
    if not 0.0 <= s.uniform_p <= 1.0:
        problems.append(f"uniform_p: {s.uniform_p} is not in [0, 1]")
    try:
        check_priority_order(s.access_categories())
    except ValueError as exc:
        problems.append(f"edca: {exc}")
    ch = s.channel
    if ch.kind.lower().replace("-", "_") not in ("bernoulli", "gilbert_elliott"):
        problems.append(f"channel.kind: unknown channel {ch.kind!r}")
    for name in ("p_loss", "p_g2b", "p_b2g", "loss_good", "loss_bad"):
        if not 0.0 <= getattr(ch, name) <= 1.0:
            problems.append(f"channel.{name}: {getattr(ch, name)} is not a probability")
    for name in ("mtu", "slot_us", "overhead_us", "queue_capacity"):
        if getattr(s, name) <= 0:
            problems.append(f"{name}: must be positive")
    if s.sifs_us < 0:
        problems.append("sifs_us: must be non-negative")
    if s.retry_limit < 0:
        problems.append("retry_limit: must be non-negative")
    if s.phy_rate_bps <= 0:
        problems.append("phy_rate_bps: must be positive")
    if s.fps <= 0:
        problems.append("fps: must be positive")
    if s.psnr_averaging not in ("db", "mse"):
        problems.append(f"psnr_averaging: {s.psnr_averaging!r} is not 'db' or 'mse'")
    if s.blank_mse <= 0:
        problems.append("blank_mse: must be positive")
    if s.playout_deadline_ms is not None and s.playout_deadline_ms <= 0:
        problems.append("playout_deadline_ms: must be positive")
    if check_files and Path(s.trace_path).is_file() and s.fps > 0:
        from .traffic import TraceError, load_video_trace
        try:
            frames = len({e.frame_index for e in load_video_trace(s.trace_path)})
            if s.duration_s < frames / s.fps:
                problems.append(f"duration_s: {s.duration_s} is shorter than the trace ({frames / s.fps:g} s)")
        except TraceError as exc:
            problems.append(f"trace: {exc}")
    if problems:
        raise ScenarioError(problems)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario not found: {path}")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"{path}: {exc}"]) from None
    return scenario_from_dict(raw, path.parent)


def reference_scenario_path() -> Path:
    return builtin_path("reference_scenario.toml")


def reference_trace_path() -> Path:
    return builtin_path("reference_trace.csv")
