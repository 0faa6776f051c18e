from dataclasses import replace

import numpy as np
import pytest

from stablesim.market import (
    BITCOIN,
    BUY,
    SELL,
    STABILIZED,
    UNIT,
    MarketConfig,
    Trader,
    common_trader_order,
    daily_step,
    even_sensitivities,
    init_market,
    match_orders,
    max_min_ratio,
    random_order,
    ration,
    run_market,
    speculator_order,
    update_price,
)


def test_price_update_clamps_and_floors():
    assert update_price(100.0, 10.0, 0.0, 1.0) == 110.0
    assert update_price(100.0, 1e6, 0.0, 1.0) == 150.0
    assert update_price(100.0, 0.0, 1e6, 1.0) == 50.0
    assert update_price(0.015, 0.0, 1.0, 1.0) == 0.01
    with pytest.raises(ValueError):
        update_price(0.0, 1.0, 1.0, 1.0)


def test_sensitivities():
    assert list(even_sensitivities(4)) == [0.25, 0.5, 0.75, 1.0]
    assert len(even_sensitivities(0)) == 0


def test_ration_smallest_first():
    assert list(ration([5, 1, 3], 5)) == [1, 1, 3]
    assert list(ration([5, 1, 3], 100)) == [5, 1, 3]
    assert list(ration([4, 4], 5)) == [4, 1]


def test_ration_priority():
    first = np.array([False, False, True])
    assert list(ration([1, 2, 10], 11, first)) == [1, 0, 10]


def test_match_short_demand():
    buys, sells, miner, d, s = match_orders([3, 0], [0, 2], miner_sell=4)
    assert (d, s) == (3, 6)
    assert list(buys) == [3, 0]
    # the miner's coins are sold first
    assert miner == 3 and list(sells) == [0, 0]


def test_match_short_supply():
    buys, sells, miner, d, s = match_orders([5, 1, 2], [0, 0, 0], miner_sell=4)
    assert (d, s) == (8, 4)
    assert list(buys) == [1, 1, 2]
    assert miner == 4


class _Fixed:
    def __init__(self, x):
        self.x = x

    def random(self):
        return self.x


def test_random_order_side_and_size():
    t = Trader("common", 0.5, 100.0, 10.0)
    assert random_order(t, _Fixed(0.1)).side == BUY
    o = random_order(t, _Fixed(0.9))
    assert o.side == SELL and o.quantity == pytest.approx(10.0)


def test_speculator_rules():
    t = Trader("speculator", 1.0, 100.0, ref_price=100.0, prev_ref_price=100.0)
    order, t2 = speculator_order(t, 151.0)
    assert order.side == SELL and t2.ref_price == 151.0 and t2.prev_ref_price == 100.0
    order, t3 = speculator_order(t, 49.0)
    assert order.side == BUY and t3.ref_price == 49.0
    order, t4 = speculator_order(t, 100.0)
    assert order is None and t4 == t
    # crash rule keeps buying without moving references
    order, t5 = speculator_order(t, 24.0)
    assert order.side == BUY and t5 == t


def test_common_trader_rules():
    t = Trader("common", 1.0, 100.0, ref_price=100.0)
    assert common_trader_order(t, 151.0)[0].side == BUY
    assert common_trader_order(t, 49.0)[0].side == SELL
    assert common_trader_order(t, 120.0)[0] is None


def test_config_validation():
    with pytest.raises(ValueError):
        MarketConfig(n_speculators=-1)
    with pytest.raises(ValueError):
        MarketConfig(currency="euro")
    with pytest.raises(ValueError):
        MarketConfig(participation=1.5)


def test_initial_holdings():
    st = init_market(MarketConfig())
    assert st.total_units() == (10_000_000 + 5_750_000) * UNIT
    assert st.miner_balance() == 0


@pytest.mark.parametrize("currency", [BITCOIN, STABILIZED])
def test_daily_conservation(currency):
    cfg = MarketConfig(currency=currency, days=60)
    st = init_market(cfg)
    rng = np.random.default_rng(7)
    for _ in range(60):
        before = st.total_units()
        rec = daily_step(st, rng)
        assert rec.total_units == before + rec.minted - rec.depreciated
        assert (st.holdings >= 0).all()


def test_bitcoin_halving_and_mint():
    cfg = MarketConfig(days=3, halving_interval=288)
    st = run_market(cfg, 0)
    assert [r.minted for r in st.history] == [144 * 125_000, 144 * 125_000, 144 * 62_500]


def test_stabilized_depreciates():
    st = run_market(MarketConfig(currency=STABILIZED, days=30), 1)
    assert st.history[0].depreciated == 0
    assert all(r.depreciated > 0 for r in st.history[1:])
    assert st.era_checks and st.era_checks[-1][0] == 2


def test_runs_are_reproducible():
    a = run_market(MarketConfig(currency=STABILIZED, days=40), 3)
    b = run_market(MarketConfig(currency=STABILIZED, days=40), 3)
    assert [r.price for r in a.history] == [r.price for r in b.history]


def test_max_min_ratio():
    assert max_min_ratio([2.0, 8.0, 4.0]) == 4.0


def test_no_traders_only_miners():
    cfg = MarketConfig(n_speculators=0, n_commons=0, days=5)
    st = run_market(cfg, 0)
    assert all(r.transacted == 0 for r in st.history)
    assert st.miner_balance() == st.total_units()


def test_without_behavior_only_random_orders():
    cfg = replace(MarketConfig(days=5), behavioral=False)
    st = run_market(cfg, 0)
    assert np.all(st.ref_price == cfg.initial_price)
