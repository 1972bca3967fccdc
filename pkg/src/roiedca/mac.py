"""Single-station IEEE 802.11p EDCA MAC with a lossy channel.

Four FIFO access categories contend for one medium. Each AC waits its
AIFS (SIFS + aifsn slots) of idle medium and then counts down a backoff
drawn uniformly from ``[0, cw]``. Counters freeze while the medium is
busy. When several ACs reach zero in the same instant the highest
priority one transmits and the others behave as if they had collided.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Optional, Protocol

from .engine import Engine, Event, RngStream


class AC(enum.IntEnum):
    BK = 0
    BE = 1
    VI = 2
    VO = 3

    @property
    def label(self) -> str:
        return f"AC{int(self)}"


class Outcome(str, enum.Enum):
    DELIVERED = "DELIVERED"
    TAIL_DROP = "TAIL_DROP"
    RETRY_EXPIRED = "RETRY_EXPIRED"
    PENDING_AT_END = "PENDING_AT_END"


class TxResult(enum.Enum):
    DELIVERED = "Delivered"
    LOST_RETRYABLE = "LostRetryable"
    EXPIRED = "Expired"


class Frame(Protocol):
    packet_id: int
    size_bytes: int


@dataclass(frozen=True)
class AccessCategory:
    index: AC
    aifsn: int
    cw_min: int
    cw_max: int
    queue_capacity: int = 50

    def __post_init__(self):
        if self.cw_min > self.cw_max:
            raise ValueError(f"{self.index.label}: cw_min {self.cw_min} > cw_max {self.cw_max}")
        if self.aifsn < 1 or self.cw_min < 0 or self.queue_capacity < 1:
            raise ValueError(f"{self.index.label}: invalid EDCA parameters {self}")


# 802.11p OCB defaults: (aifsn, cw_min, cw_max)
OCB_DEFAULTS = {
    AC.VO: (2, 3, 7),
    AC.VI: (3, 7, 15),
    AC.BE: (6, 15, 1023),
    AC.BK: (9, 15, 1023),
}


def default_access_categories(queue_capacity: int = 50, overrides: Optional[dict] = None) -> list[AccessCategory]:
    """EDCA parameter set indexed by AC value, with optional per-AC overrides.

    ``overrides`` maps an AC (or ``"AC2"``-style label) to a dict of any of
    ``aifsn``, ``cw_min``, ``cw_max``, ``queue_capacity``.
    """
    overrides = {_as_ac(k): v for k, v in (overrides or {}).items()}
    out = []
    for ac in AC:
        aifsn, cw_min, cw_max = OCB_DEFAULTS[ac]
        params = dict(aifsn=aifsn, cw_min=cw_min, cw_max=cw_max, queue_capacity=queue_capacity)
        params.update(overrides.get(ac, {}))
        out.append(AccessCategory(ac, **params))
    return out


def _as_ac(key) -> AC:
    if isinstance(key, AC):
        return key
    if isinstance(key, int):
        return AC(key)
    text = str(key).upper()
    if text.startswith("AC") and text[2:].isdigit():
        return AC(int(text[2:]))
    return AC[text]


def check_priority_order(acs: list[AccessCategory]) -> None:
    by_index = sorted(acs, key=lambda a: a.index, reverse=True)
    for hi, lo in zip(by_index, by_index[1:]):
        if not (hi.aifsn <= lo.aifsn and hi.cw_min <= lo.cw_min):
            raise ValueError(f"{hi.index.label} must not be lower priority than {lo.index.label}")
        if (hi.aifsn, hi.cw_min) == (lo.aifsn, lo.cw_min):
            raise ValueError(f"{hi.index.label} and {lo.index.label} have identical priority")


class ChannelModel:
    """Bernoulli or Gilbert-Elliott per-attempt loss.

    Every attempt consumes exactly two draws (state step, loss), so the
    k-th attempt of a run sees the same randomness whatever the queueing
    order that led to it.
    """

    def __init__(self, rng: RngStream, kind: str = "gilbert_elliott", p_loss: float = 0.0,
                 p_g2b: float = 0.0, p_b2g: float = 1.0, loss_good: float = 0.0,
                 loss_bad: float = 1.0, start_bad: bool = False):
        kind = kind.lower().replace("-", "_")
        if kind not in ("bernoulli", "gilbert_elliott"):
            raise ValueError(f"unknown channel kind {kind!r}")
        for name, p in dict(p_loss=p_loss, p_g2b=p_g2b, p_b2g=p_b2g,
                            loss_good=loss_good, loss_bad=loss_bad).items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        self.rng = rng
        self.kind = kind
        self.p_loss = p_loss
        self.p_g2b = p_g2b
        self.p_b2g = p_b2g
        self.loss_good = loss_good
        self.loss_bad = loss_bad
        self.bad = start_bad
        self.attempts = 0
        self.losses = 0

    def attempt(self) -> bool:
        """Step the channel for one attempt; True if the frame got through."""
        u_state = self.rng.uniform()
        u_loss = self.rng.uniform()
        self.attempts += 1
        if self.kind == "bernoulli":
            p = self.p_loss
        else:
            if self.bad:
                if u_state < self.p_b2g:
                    self.bad = False
            elif u_state < self.p_g2b:
                self.bad = True
            p = self.loss_bad if self.bad else self.loss_good
        ok = u_loss >= p
        if not ok:
            self.losses += 1
        return ok

    def stationary_loss(self) -> float:
        if self.kind == "bernoulli":
            return self.p_loss
        total = self.p_g2b + self.p_b2g
        if total == 0:
            return self.loss_bad if self.bad else self.loss_good
        pi_bad = self.p_g2b / total
        return pi_bad * self.loss_bad + (1 - pi_bad) * self.loss_good


@dataclass
class LogRecord:
    packet_id: int
    ac: AC
    enqueue_us: int
    outcome: Outcome = Outcome.PENDING_AT_END
    dequeue_us: Optional[int] = None
    retries: int = 0


@dataclass
class AcCounters:
    enqueued: int = 0
    tail_dropped: int = 0
    tx_success: int = 0
    tx_failed_retry_exhausted: int = 0
    attempts: int = 0
    access_delay_sum: int = 0
    access_delay_count: int = 0
    bytes_delivered: int = 0

    def mean_access_delay(self) -> float:
        return self.access_delay_sum / self.access_delay_count if self.access_delay_count else float("nan")


@dataclass
class QueueState:
    params: AccessCategory
    pending: Deque = field(default_factory=deque)
    cw_current: int = 0
    backoff_counter: Optional[int] = None
    retry_count: int = 0
    count_start: int = 0  # instant the backoff starts decrementing
    head_since: int = 0   # instant the current head reached the head of line

    def __post_init__(self):
        self.cw_current = self.params.cw_min


class MacStats:
    def __init__(self):
        self.per_ac = {ac: AcCounters() for ac in AC}
        self.records: dict[int, LogRecord] = {}

    def still_pending(self, ac: AC) -> int:
        return sum(1 for r in self.records.values() if r.ac == ac and r.outcome is Outcome.PENDING_AT_END)

    def conservation_holds(self, ac: AC) -> bool:
        c = self.per_ac[ac]
        return c.enqueued == c.tail_dropped + c.tx_success + c.tx_failed_retry_exhausted + self.still_pending(ac)


class EdcaMac:
    """Four-queue EDCA entity driven by an :class:`Engine`.

    ``on_done(packet, outcome, t_us)`` is called when a packet leaves the MAC
    (delivered, tail-dropped or retry-expired).
    """

    def __init__(self, engine: Engine, channel: ChannelModel, backoff_rng: RngStream,
                 access_categories: Optional[list[AccessCategory]] = None,
                 slot_us: int = 13, sifs_us: int = 32, phy_rate_bps: float = 6e6,
                 overhead_us: int = 100, retry_limit: int = 4,
                 on_done: Optional[Callable[[Frame, Outcome, int], None]] = None):
        acs = access_categories or default_access_categories()
        check_priority_order(acs)
        if retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if phy_rate_bps <= 0:
            raise ValueError("phy_rate_bps must be positive")
        self.engine = engine
        self.channel = channel
        self.rng = backoff_rng
        self.slot_us = int(slot_us)
        self.sifs_us = int(sifs_us)
        self.phy_rate_bps = phy_rate_bps
        self.overhead_us = int(overhead_us)
        self.retry_limit = retry_limit
        self.on_done = on_done
        self.queues = {a.index: QueueState(a) for a in acs}
        self.stats = MacStats()
        self.busy = False
        self.idle_since = 0
        self._contention: Optional[Event] = None

    # -- observation ---------------------------------------------------

    def snapshot_qlen(self, ac: AC) -> int:
        return len(self.queues[ac].pending)

    def aifs_us(self, ac: AC) -> int:
        return self.sifs_us + self.queues[ac].params.aifsn * self.slot_us

    def airtime_us(self, size_bytes: int) -> int:
        bits = 8 * size_bytes
        return self.overhead_us + -(-bits * 1_000_000 // int(self.phy_rate_bps))

    # -- queueing ------------------------------------------------------

    def enqueue(self, packet: Frame, ac: AC) -> bool:
        ac = AC(ac)
        q = self.queues[ac]
        now = self.engine.clock
        counters = self.stats.per_ac[ac]
        counters.enqueued += 1
        rec = LogRecord(packet.packet_id, ac, now)
        self.stats.records[packet.packet_id] = rec
        if len(q.pending) >= q.params.queue_capacity:
            counters.tail_dropped += 1
            rec.outcome = Outcome.TAIL_DROP
            rec.dequeue_us = now
            if self.on_done:
                self.on_done(packet, Outcome.TAIL_DROP, now)
            return False
        q.pending.append(packet)
        if len(q.pending) == 1:
            q.head_since = now
            if q.backoff_counter is None:
                q.backoff_counter = self.rng.randint(0, q.cw_current)
            if not self.busy:
                q.count_start = max(now, self.idle_since) + self.aifs_us(ac)
                self._reschedule()
        return True

    # -- contention ----------------------------------------------------

    def _ready_at(self, q: QueueState) -> int:
        return q.count_start + q.backoff_counter * self.slot_us

    def _reschedule(self) -> None:
        if self._contention is not None:
            self._contention.cancel()
            self._contention = None
        ready = [self._ready_at(q) for q in self.queues.values() if q.pending]
        if ready:
            self._contention = self.engine.schedule(min(ready), "mac-slot", self.contend_and_select)

    def contend_and_select(self):
        """Resolve the contention instant: pick a winner and start its transmission.

        Returns ``(ac, packet)`` for the winner, or ``None`` if no queue
        is ready at the current clock.
        """
        self._contention = None
        now = self.engine.clock
        active = [(ac, q) for ac, q in self.queues.items() if q.pending]
        if not active:
            return None
        contenders = [ac for ac, q in active if self._ready_at(q) <= now]
        if not contenders:
            self._reschedule()
            return None
        winner = max(contenders)
        for ac, q in active:
            if ac == winner:
                continue
            if ac in contenders:
                # virtual collision: behave as if the frame collided
                q.cw_current = min(2 * q.cw_current + 1, q.params.cw_max)
                q.backoff_counter = self.rng.randint(0, q.cw_current)
            elif now > q.count_start:
                q.backoff_counter -= (now - q.count_start) // self.slot_us
        q = self.queues[winner]
        packet = q.pending[0]
        self.busy = True
        self.engine.schedule_in(self.airtime_us(packet.size_bytes), "mac-txend",
                                lambda: self._tx_end(winner))
        return winner, packet

    def transmit(self, ac: AC) -> TxResult:
        """Run one attempt of the head packet of ``ac`` over the channel."""
        q = self.queues[ac]
        counters = self.stats.per_ac[ac]
        counters.attempts += 1
        if self.channel.attempt():
            return TxResult.DELIVERED
        q.retry_count += 1
        if q.retry_count > self.retry_limit:
            return TxResult.EXPIRED
        return TxResult.LOST_RETRYABLE

    def _tx_end(self, ac: AC) -> None:
        now = self.engine.clock
        q = self.queues[ac]
        packet = q.pending[0]
        result = self.transmit(ac)
        rec = self.stats.records[packet.packet_id]
        rec.retries = q.retry_count
        counters = self.stats.per_ac[ac]
        if result is TxResult.LOST_RETRYABLE:
            q.cw_current = min(2 * q.cw_current + 1, q.params.cw_max)
        else:
            q.pending.popleft()
            outcome = Outcome.DELIVERED if result is TxResult.DELIVERED else Outcome.RETRY_EXPIRED
            if result is TxResult.DELIVERED:
                counters.tx_success += 1
                counters.bytes_delivered += packet.size_bytes
            else:
                counters.tx_failed_retry_exhausted += 1
            counters.access_delay_sum += now - q.head_since
            counters.access_delay_count += 1
            rec.outcome = outcome
            rec.dequeue_us = now
            q.retry_count = 0
            q.cw_current = q.params.cw_min
            q.head_since = now
            if self.on_done:
                self.on_done(packet, outcome, now)
        q.backoff_counter = self.rng.randint(0, q.cw_current) if q.pending else None
        self.busy = False
        self.idle_since = now
        for other_ac, other in self.queues.items():
            if other.pending:
                if other.backoff_counter is None:
                    other.backoff_counter = self.rng.randint(0, other.cw_current)
                other.count_start = now + self.aifs_us(other_ac)
        self._reschedule()

    def backlog(self) -> int:
        return sum(len(q.pending) for q in self.queues.values())


@dataclass(frozen=True)
class _SatPacket:
    packet_id: int
    size_bytes: int


def saturation_benchmark(duration_us: int, seed: int = 1, packet_size_bytes: int = 500,
                         access_categories: Optional[list[AccessCategory]] = None,
                         channel: Optional[ChannelModel] = None, **mac_kwargs) -> MacStats:
    """Keep all four queues permanently backlogged and return the MAC counters.

    Every queue is topped up to full whenever a packet leaves it, so each
    AC always has a frame contending.
    """
    engine = Engine()
    channel = channel or ChannelModel(RngStream(seed, "channel"), "bernoulli", p_loss=0.0)
    ids = iter(range(1 << 62))
    mac: EdcaMac

    def refill(ac: AC) -> None:
        q = mac.queues[ac]
        while len(q.pending) < q.params.queue_capacity:
            mac.enqueue(_SatPacket(next(ids), packet_size_bytes), ac)

    def on_done(packet, outcome, t_us):
        refill(mac.stats.records[packet.packet_id].ac)

    mac = EdcaMac(engine, channel, RngStream(seed, "backoff"), access_categories, on_done=on_done, **mac_kwargs)
    for ac in AC:
        refill(ac)
    engine.run_until(duration_us)
    return mac.stats
