"""Video packet to access-category mapping.

Three strategies are supported:

``edca``
    every video packet goes to AC2.
``uniform``
    queue-driven demotion with one probability for all video packets.
``roi``
    queue-driven demotion with a per-region probability, so ROI packets
    can be held in AC2 while the background is pushed down.

Demotion follows a RED-style ramp on the instantaneous AC2 queue length.
Up to ``qth_low`` everything stays in AC2. Between the thresholds a packet
goes to AC1 with probability ``p_new``, and above ``qth_high`` it goes to
AC0 with probability ``p_new`` and to AC1 otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .engine import RngStream
from .mac import AC
from .traffic import Region


class Strategy(str, enum.Enum):
    STATIC_EDCA = "edca"
    UNIFORM_ADAPTIVE = "uniform"
    ROI_ADAPTIVE = "roi"


@dataclass(frozen=True)
class MappingConfig:
    p_roi: float = 0.0
    p_nonroi: float = 0.8
    qth_low: int = 10
    qth_high: int = 40

    def validate(self, ac2_capacity: int = 50) -> None:
        errors = []
        for name in ("p_roi", "p_nonroi"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                errors.append(f"{name}={p} is not in [0, 1]")
        if not 0 <= self.qth_low < self.qth_high:
            errors.append(f"need 0 <= qth_low < qth_high, got qth_low={self.qth_low}, qth_high={self.qth_high}")
        if self.qth_high > ac2_capacity:
            errors.append(f"qth_high={self.qth_high} exceeds the AC2 queue capacity {ac2_capacity}")
        if self.p_roi > self.p_nonroi:
            errors.append(f"p_roi={self.p_roi} must not exceed p_nonroi={self.p_nonroi}")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True)
class MapperState:
    strategy: Strategy
    config: MappingConfig
    uniform_p: float = 0.8

    def p_region(self, region: Region) -> float:
        if self.strategy is Strategy.UNIFORM_ADAPTIVE:
            return self.uniform_p
        return self.config.p_roi if region is Region.ROI else self.config.p_nonroi


@dataclass(frozen=True)
class AcDecision:
    chosen_ac: AC
    p_new_used: float
    qlen_seen: int


def compute_p_new(p_region: float, qlen: int, qth_low: int, qth_high: int) -> float:
    raw = p_region * (qlen - qth_low) / (qth_high - qth_low)
    return min(1.0, max(0.0, raw))


def map_packet(region: Region, qlen: int, state: MapperState, rng: RngStream) -> AcDecision:
    if state.strategy is Strategy.STATIC_EDCA:
        return AcDecision(AC.VI, 0.0, qlen)
    cfg = state.config
    if qlen <= cfg.qth_low:
        return AcDecision(AC.VI, 0.0, qlen)
    p_new = compute_p_new(state.p_region(region), qlen, cfg.qth_low, cfg.qth_high)
    demote = rng.uniform() < p_new
    if qlen <= cfg.qth_high:
        return AcDecision(AC.BE if demote else AC.VI, p_new, qlen)
    return AcDecision(AC.BK if demote else AC.BE, p_new, qlen)


def branch_probabilities(region: Region, qlen: int, state: MapperState) -> dict[AC, float]:
    """Exact probability of each AC for one mapping call."""
    cfg = state.config
    if state.strategy is Strategy.STATIC_EDCA or qlen <= cfg.qth_low:
        return {AC.BK: 0.0, AC.BE: 0.0, AC.VI: 1.0}
    p = compute_p_new(state.p_region(region), qlen, cfg.qth_low, cfg.qth_high)
    if qlen <= cfg.qth_high:
        return {AC.BK: 0.0, AC.BE: p, AC.VI: 1.0 - p}
    return {AC.BK: p, AC.BE: 1.0 - p, AC.VI: 0.0}


def make_strategy(name: str, config: MappingConfig | None = None, uniform_p: float = 0.8,
                  ac2_capacity: int = 50) -> MapperState:
    try:
        strategy = Strategy(name.strip().lower())
    except ValueError:
        choices = ", ".join(s.value for s in Strategy)
        raise ValueError(f"unknown strategy {name!r} (choose from {choices})") from None
    config = config or MappingConfig()
    if strategy is not Strategy.STATIC_EDCA:
        config.validate(ac2_capacity)
        if not 0.0 <= uniform_p <= 1.0:
            raise ValueError(f"uniform_p={uniform_p} is not in [0, 1]")
    return MapperState(strategy, config, uniform_p)
