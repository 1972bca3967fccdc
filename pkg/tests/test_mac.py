from dataclasses import dataclass

import pytest

from roiedca.engine import Engine, RngStream
from roiedca.mac import (AC, ChannelModel, EdcaMac, Outcome, default_access_categories, saturation_benchmark)

from conftest import FixedDraws


@dataclass(frozen=True)
class Pkt:
    packet_id: int
    size_bytes: int = 500


def make_mac(p_loss=0.0, seed=1, capacity=50, done=None, **kw):
    eng = Engine()
    ch = ChannelModel(RngStream(seed, "channel"), "bernoulli", p_loss=p_loss)
    mac = EdcaMac(eng, ch, RngStream(seed, "backoff"), default_access_categories(capacity),
                  on_done=done, **kw)
    return eng, mac


def test_tail_drop_at_capacity():
    eng, mac = make_mac()
    mac.busy = True  # hold the medium so nothing drains
    for i in range(50):
        assert mac.enqueue(Pkt(i), AC.VI)
    assert not mac.enqueue(Pkt(50), AC.VI)
    assert mac.stats.per_ac[AC.VI].tail_dropped == 1
    assert mac.stats.records[50].outcome is Outcome.TAIL_DROP


def test_enqueue_on_empty_queue():
    eng, mac = make_mac()
    assert mac.snapshot_qlen(AC.VI) == 0
    assert mac.enqueue(Pkt(0), AC.VI)
    assert mac.snapshot_qlen(AC.VI) == 1


def test_fifo_delivery_order():
    order = []
    eng, mac = make_mac(done=lambda p, o, t: order.append(p.packet_id))
    for i in range(20):
        mac.enqueue(Pkt(i), AC.VI)
    eng.run_until(10_000_000)
    assert order == list(range(20))


def test_lone_ac_transmits_after_aifs_and_backoff():
    done = []
    eng, mac = make_mac(done=lambda p, o, t: done.append(t))
    mac.rng = FixedDraws(0.0)  # backoff 0
    mac.enqueue(Pkt(0), AC.VI)
    eng.run_until(1_000_000)
    assert done == [mac.aifs_us(AC.VI) + mac.airtime_us(500)]


def test_virtual_collision_favours_higher_ac():
    eng, mac = make_mac()
    # AC3 aifs = 32+2*13 = 58; AC0 aifs = 32+9*13 = 149. Backoffs chosen so both hit 0 at t=149.
    mac.rng = FixedDraws(0.0, 0.99, 0.0, 0.0)
    mac.enqueue(Pkt(0), AC.BK)
    mac.enqueue(Pkt(1), AC.VO)
    vo, bk = mac.queues[AC.VO], mac.queues[AC.BK]
    vo.backoff_counter = 7
    vo.count_start = 58
    mac._reschedule()
    assert mac._ready_at(vo) == mac._ready_at(bk) == 149
    eng.run_until(149)
    assert mac.busy
    assert bk.cw_current == 31  # 2*15+1
    assert mac.stats.records[0].dequeue_us is None


def test_cw_growth_capped_at_cw_max():
    eng, mac = make_mac(p_loss=1.0, retry_limit=10)
    mac.enqueue(Pkt(0), AC.VO)
    eng.run_until(100_000_000)
    # AC3 cw_max is 7: 3 -> 7 -> 7 ...
    assert mac.stats.records[0].outcome is Outcome.RETRY_EXPIRED
    assert mac.queues[AC.VO].cw_current == 3  # reset after expiry


def test_perfect_channel_always_delivers():
    eng, mac = make_mac(p_loss=0.0)
    for i in range(30):
        mac.enqueue(Pkt(i), AC(i % 4))
    eng.run_until(100_000_000)
    assert all(r.outcome is Outcome.DELIVERED and r.retries == 0 for r in mac.stats.records.values())


def test_total_loss_expires_after_five_attempts():
    eng, mac = make_mac(p_loss=1.0, retry_limit=4)
    mac.enqueue(Pkt(0), AC.VI)
    eng.run_until(100_000_000)
    assert mac.stats.records[0].outcome is Outcome.RETRY_EXPIRED
    assert mac.stats.per_ac[AC.VI].attempts == 5


def test_gilbert_elliott_stationary_loss():
    ch = ChannelModel(RngStream(5, "channel"), "gilbert_elliott", p_g2b=0.1, p_b2g=0.5,
                      loss_good=0.0, loss_bad=1.0)
    n = 100_000
    losses = sum(not ch.attempt() for _ in range(n))
    assert ch.stationary_loss() == pytest.approx(1 / 6)
    assert abs(losses / n - 1 / 6) < 0.01


def test_channel_uses_two_draws_per_attempt():
    ch = ChannelModel(RngStream(5, "channel"), "bernoulli", p_loss=0.3)
    for _ in range(10):
        ch.attempt()
    assert ch.rng.draws == 20


def test_snapshot_qlen_after_one_success():
    eng, mac = make_mac()
    for i in range(3):
        mac.enqueue(Pkt(i), AC.VI)
    eng.run_until(eng.peek().fire_at)  # contention
    eng.run_until(eng.peek().fire_at)  # end of first transmission
    assert mac.stats.per_ac[AC.VI].tx_success == 1
    assert mac.snapshot_qlen(AC.VI) == 2


@pytest.mark.parametrize("p_loss", [0.0, 0.3, 0.9])
def test_conservation_with_pending_at_end(p_loss):
    eng, mac = make_mac(p_loss=p_loss, capacity=10)
    for i in range(200):
        eng.schedule(i * 200, "arr", lambda i=i: mac.enqueue(Pkt(i), AC(i % 4)))
    eng.run_until(30_000)
    for ac in AC:
        assert mac.stats.conservation_holds(ac)
    assert any(mac.stats.still_pending(ac) for ac in AC)


def test_rejects_inverted_priorities():
    with pytest.raises(ValueError):
        default_access_categories(overrides={"AC3": {"aifsn": 12, "cw_min": 63}})
    acs = default_access_categories(overrides={"AC3": {"aifsn": 12, "cw_min": 63, "cw_max": 1023}})
    with pytest.raises(ValueError, match="priority"):
        EdcaMac(Engine(), ChannelModel(RngStream(1, "c")), RngStream(1, "b"), acs)


def test_overlapping_windows_order_all_four_acs():
    ov = {AC.VO: dict(aifsn=2, cw_min=31, cw_max=1023), AC.VI: dict(aifsn=2, cw_min=63, cw_max=1023),
          AC.BE: dict(aifsn=3, cw_min=63, cw_max=1023), AC.BK: dict(aifsn=3, cw_min=127, cw_max=1023)}
    stats = saturation_benchmark(30_000_000, access_categories=default_access_categories(50, ov))
    delay = [stats.per_ac[ac].mean_access_delay() for ac in AC]
    tput = [stats.per_ac[ac].tx_success for ac in AC]
    assert delay[3] < delay[2] < delay[1] < delay[0]
    assert tput[3] > tput[2] > tput[1] > tput[0] > 0


def test_collision_loser_at_cw_max_stays_there():
    eng, mac = make_mac()
    mac.rng = FixedDraws(0.0, 0.0, 0.5)
    mac.enqueue(Pkt(0), AC.BK)
    mac.enqueue(Pkt(1), AC.VO)
    vo, bk = mac.queues[AC.VO], mac.queues[AC.BK]
    bk.cw_current = bk.params.cw_max
    vo.backoff_counter, vo.count_start = 7, 58
    mac._reschedule()
    eng.run_until(149)
    assert bk.cw_current == 1023
    assert bk.backoff_counter == 512  # redrawn from [0, 1023]: int(0.5 * 1024)
