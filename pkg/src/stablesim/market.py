"""Daily artificial market for a proof-of-work currency.

Speculators buy low and sell high against personal reference prices, common
traders chase trends, and miners dump everything they mine.  All orders clear
once a day at the current price; the excess of demand over supply moves the
next day's price by ``alpha * (D - S)``, truncated to +/-50%.

Two currencies share the same traders:

``bitcoin``
    144 blocks a day, reward halving every 210,000 blocks, target retargeted
    every 2016 blocks so the interval stays at the reference.
``stabilized``
    blocks are produced by the chain policy at the pace set by the current
    hash rate, rewards follow the policy's adjustments, and every coin loses
    1% of its original value per coinage era (pro-rated daily).

Balances are integer units (``UNIT`` per coin), held per origin era so that
depreciation can be applied by age.  The unit is coarser than the ledger's
base unit so that runaway runs stay far inside int64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from stablesim.chain import ChainState, PolicyConfig, mine_until
from stablesim.econ import MiningEconomy, miner_entry_exit_step
from stablesim.ledger import EraSupplyLedger

BITCOIN = "bitcoin"
STABILIZED = "stabilized"
BUY = 1
SELL = -1
UNIT = 10_000


# Aggregate holdings above this many units are rejected before numpy sums can wrap.
CAPACITY_UNITS = 2**61


class MarketOverflow(RuntimeError):
    """The simulated money stock outgrew the integer representation."""


class ConservationError(RuntimeError):
    """Coins appeared or vanished outside minting and depreciation."""


@dataclass(frozen=True)
class MarketConfig:
    """Artificial market parameters; defaults are the reference set."""

    currency: str = BITCOIN
    days: int = 3650
    unit_cost: float = 815.0
    initial_price: float = 652.0
    initial_reward: float = 12.5
    unit_hash_rate: float = 1.0
    initial_reachability: float = 0.1
    initial_miners: float = 1000.0
    miner_floor: float = 100.0
    miner_step: float = 0.01
    n_speculators: int = 500
    speculator_coins: float = 10_000_000
    n_commons: int = 1000
    common_coins: float = 5_750_000
    buy_prob: float = 0.52
    alpha: float = 0.0001
    random_fraction: float = 0.2
    behavior_fraction: float = 0.8
    # Each day a trader places a random order with probability participation * sensitivity,
    # and independently evaluates its behavioral rule with the same probability.
    participation: float = 0.5
    behavioral: bool = True
    price_floor: float = 0.01
    blocks_per_day: int = 144
    halving: bool = True
    halving_interval: int = 210_000
    retarget_interval: int = 2016
    days_per_era: int = 14
    lifetime_eras: int = 100
    stochastic_blocks: bool = False

    def __post_init__(self):
        if self.currency not in (BITCOIN, STABILIZED):
            raise ValueError(f"unknown currency {self.currency!r}")
        for name in ("n_speculators", "n_commons", "days"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("speculator_coins", "common_coins", "initial_reward", "alpha"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 <= self.participation <= 1:
            raise ValueError("participation must be in [0, 1]")
        if not 0 <= self.buy_prob <= 1:
            raise ValueError("buy_prob must be a probability")
        if self.initial_price <= 0 or self.price_floor <= 0:
            raise ValueError("prices must be positive")
        if self.initial_miners < self.miner_floor:
            raise ValueError("initial miners below floor")


@dataclass
class Trader:
    """One trader, for rule-level use; the market itself stores traders as arrays."""

    kind: str
    sensitivity: float
    balance: float
    ref_price: float
    prev_ref_price: float | None = None

    def __post_init__(self):
        if not 0 < self.sensitivity <= 1:
            raise ValueError("sensitivity must be in (0, 1]")
        if self.balance < 0:
            raise ValueError("balance must be non-negative")


@dataclass(frozen=True)
class Order:
    trader: int  # -1 for the miner pool
    side: int
    quantity: float


def even_sensitivities(n: int) -> np.ndarray:
    """``n`` sensitivities evenly spaced over (0, 1]: 1/n, 2/n, ..., 1."""
    return np.arange(1, n + 1, dtype=float) / n if n else np.zeros(0)


def random_order(trader: Trader, rng, buy_prob: float = 0.52, fraction: float = 0.2) -> Order:
    """Random-movement order of ``fraction * balance * sensitivity``, buying with ``buy_prob``."""
    qty = trader.balance * trader.sensitivity * fraction
    if rng.random() < buy_prob:
        return Order(0, BUY, qty)
    return Order(0, SELL, min(qty, trader.balance))


def speculator_order(trader: Trader, price: float, fraction: float = 0.8):
    """Buy-low/sell-high rule.  Returns ``(order or None, updated trader)``."""
    s = trader.sensitivity
    qty = trader.balance * s * fraction
    if price < trader.prev_ref_price * (1 - s / 2) / 2:
        # Crash rule: keep buying and leave the references where they were.
        return Order(0, BUY, qty), trader
    if price > trader.ref_price * (1 + s / 2):
        side = SELL
    elif price < trader.ref_price * (1 - s / 2):
        side = BUY
    else:
        return None, trader
    updated = replace(trader, prev_ref_price=trader.ref_price, ref_price=price)
    return Order(0, side, qty), updated


def common_trader_order(trader: Trader, price: float, fraction: float = 0.8):
    """Trend-following rule.  Returns ``(order or None, updated trader)``."""
    s = trader.sensitivity
    qty = trader.balance * s * fraction
    if price > trader.ref_price * (1 + s / 2):
        side = BUY
    elif price < trader.ref_price * (1 - s / 2):
        side = SELL
    else:
        return None, trader
    return Order(0, side, qty), replace(trader, ref_price=price)


def miner_order(miner_balance) -> Order:
    return Order(-1, SELL, miner_balance)


def update_price(price: float, demand: float, supply: float, alpha: float,
                 floor: float = 0.01) -> float:
    """Next day's price: ``P + alpha * (D - S)`` with the move truncated to +/-P/2."""
    if price <= 0:
        raise ValueError("price must be positive")
    delta = alpha * (demand - supply)
    delta = min(max(delta, -price / 2), price / 2)
    return max(floor, price + delta)


def ration(quantities: np.ndarray, available: int, priority_first: np.ndarray | None = None) -> np.ndarray:
    """Fill ``available`` units across orders, smallest quantity first.

    Orders flagged in ``priority_first`` are served before everyone else.
    Ties are broken by position.  Returns integer fills.
    """
    q = np.asarray(quantities, dtype=np.int64)
    if priority_first is None:
        priority_first = np.zeros(len(q), dtype=bool)
    # lexsort: last key is primary.
    order = np.lexsort((np.arange(len(q)), q, ~priority_first))
    cum = np.cumsum(q[order])
    before = cum - q[order]
    filled_sorted = np.clip(available - before, 0, q[order])
    fills = np.empty_like(q)
    fills[order] = filled_sorted
    return fills


def match_orders(buy_qty: np.ndarray, sell_qty: np.ndarray, miner_sell: int = 0):
    """Single-price clearing of one day's book.

    ``buy_qty`` and ``sell_qty`` are per-trader integer quantities (zero for
    no order).  Returns ``(buy_fills, sell_fills, miner_fill, demand, supply)``;
    the long side is rationed with the miner first and then by ascending size.
    """
    buy_qty = np.asarray(buy_qty, dtype=np.int64)
    sell_qty = np.asarray(sell_qty, dtype=np.int64)
    demand = int(buy_qty.sum())
    supply = int(sell_qty.sum()) + int(miner_sell)
    volume = min(demand, supply)
    buy_fills = buy_qty if volume == demand else ration(buy_qty, volume)
    if volume == supply:
        return buy_fills, sell_qty, int(miner_sell), demand, supply
    all_sells = np.concatenate(([miner_sell], sell_qty)).astype(np.int64)
    first = np.zeros(len(all_sells), dtype=bool)
    first[0] = True
    fills = ration(all_sells, volume, first)
    return buy_fills, fills[1:], int(fills[0]), demand, supply


@dataclass
class DayRecord:
    day: int
    price: float
    demand: float
    supply: float
    transacted: float
    miners: float
    target_reachability: float
    reward: float
    hash_rate: float
    total_supply: float
    blocks: int
    minted: int
    depreciated: int
    total_units: int


@dataclass
class MarketState:
    config: MarketConfig
    economy: MiningEconomy
    price: float
    sensitivity: np.ndarray
    is_speculator: np.ndarray
    ref_price: np.ndarray
    prev_ref_price: np.ndarray
    # Units held per origin era (columns): one row per trader, last row the miners.
    holdings: np.ndarray
    day: int = 0
    blocks_mined: int = 0
    chain: ChainState | None = None
    era_ledger: EraSupplyLedger | None = None
    # Upper bound on how far per-holding rounding can pull the aggregate away
    # from the exact era-ledger supply.
    rounding_slack: Fraction = Fraction(0)
    # (era, aggregate units, exact ledger supply) at each era boundary.
    era_checks: list[tuple[int, int, Fraction]] = field(default_factory=list)
    history: list[DayRecord] = field(default_factory=list)
    # Set when a run stopped early because the money stock outgrew int64.
    overflow_day: int | None = None

    @property
    def n_traders(self) -> int:
        return len(self.sensitivity)

    @property
    def buckets(self) -> np.ndarray:
        return self.holdings[:-1]

    @property
    def miner_buckets(self) -> np.ndarray:
        return self.holdings[-1]

    def balances(self) -> np.ndarray:
        return self.buckets.sum(axis=1)

    def miner_balance(self) -> int:
        return int(self.miner_buckets.sum())

    def total_units(self) -> int:
        return int(self.holdings.sum())

    @property
    def reward(self) -> float:
        return self.economy.reward


def _n_eras(config: MarketConfig) -> int:
    if config.currency == BITCOIN:
        return 1
    return config.days // config.days_per_era + 2


def init_market(config: MarketConfig | None = None) -> MarketState:
    config = config or MarketConfig()
    ns, nr = config.n_speculators, config.n_commons
    sens = np.concatenate((even_sensitivities(ns), even_sensitivities(nr)))
    is_spec = np.zeros(ns + nr, dtype=bool)
    is_spec[:ns] = True
    n_eras = _n_eras(config)
    holdings = np.zeros((ns + nr + 1, n_eras), dtype=np.int64)
    if ns:
        holdings[:ns, 0] = int(round(config.speculator_coins * UNIT)) // ns
    if nr:
        holdings[ns:ns + nr, 0] = int(round(config.common_coins * UNIT)) // nr
    economy = MiningEconomy(
        miners=config.initial_miners,
        unit_hash_rate=config.unit_hash_rate,
        target_reachability=config.initial_reachability,
        reward=config.initial_reward,
        unit_cost=config.unit_cost,
        miner_floor=config.miner_floor,
    )
    state = MarketState(
        config=config,
        economy=economy,
        price=config.initial_price,
        sensitivity=sens,
        is_speculator=is_spec,
        ref_price=np.full(ns + nr, config.initial_price),
        prev_ref_price=np.full(ns + nr, config.initial_price),
        holdings=holdings,
    )
    if config.currency == STABILIZED:
        state.chain = ChainState(PolicyConfig(), config.initial_reachability, config.initial_reward,
                                 max_history=4 * PolicyConfig().detection_window)
        state.era_ledger = EraSupplyLedger(lifetime=config.lifetime_eras)
        state.era_ledger.mint(0, int(holdings.sum()))
    return state


# -- daily mechanics --------------------------------------------------------


def _mine_bitcoin(state: MarketState) -> tuple[int, int]:
    cfg = state.config
    eco = state.economy
    minted = 0
    start = state.blocks_mined
    for height in range(start, start + cfg.blocks_per_day):
        if cfg.halving and height > 0 and height % cfg.halving_interval == 0:
            eco = replace(eco, reward=eco.reward / 2)
        minted += int(round(eco.reward * UNIT))
        if (height + 1) % cfg.retarget_interval == 0:
            # Retarget so that the current hash rate yields the reference interval.
            ref_rate = cfg.initial_miners * cfg.unit_hash_rate * cfg.initial_reachability
            reach = min(1.0, ref_rate / (eco.miners * eco.unit_hash_rate))
            eco = replace(eco, target_reachability=reach)
    state.economy = eco
    state.blocks_mined += cfg.blocks_per_day
    state.miner_buckets[0] += minted
    return cfg.blocks_per_day, minted


def _mine_stabilized(state: MarketState, rng) -> tuple[int, int]:
    cfg = state.config
    chain = state.chain
    eco = state.economy
    era = state.day // cfg.days_per_era
    ref_rate = cfg.initial_miners * cfg.unit_hash_rate * cfg.initial_reachability
    rate = eco.miners * eco.unit_hash_rate / ref_rate
    minted = 0

    def credit(hdr):
        nonlocal minted
        minted += int(round(hdr.reward * UNIT))

    minutes = 1440.0
    py_rng = _PyRandom(rng) if cfg.stochastic_blocks else None
    n = mine_until(chain, lambda c: rate * c.target_reachability,
                   state.day * minutes, (state.day + 1) * minutes, py_rng, credit)
    state.blocks_mined += n
    state.miner_buckets[era] += minted
    state.economy = replace(eco, target_reachability=chain.target_reachability, reward=chain.reward)
    ledger = state.era_ledger
    ledger.advance_to(era)
    # The era ledger counts original (undepreciated) value.
    num = int(_day_factor_num(cfg, era, state.day))
    if minted:
        ledger.mint(era, Fraction(minted * cfg.lifetime_eras * cfg.days_per_era, num))
    return n, minted


class _PyRandom:
    """Adapter giving a numpy Generator the ``random.Random.expovariate`` interface."""

    def __init__(self, gen):
        self._gen = gen

    def expovariate(self, lambd):
        return float(self._gen.exponential(1.0 / lambd))


def _day_factor_num(cfg: MarketConfig, era, day):
    """Numerator of the value factor of era-``era`` coins on ``day`` (denominator lifetime*days_per_era)."""
    return np.maximum(0, cfg.lifetime_eras * cfg.days_per_era - (day - cfg.days_per_era * np.asarray(era)))


def _live_columns(state: MarketState) -> slice:
    cfg = state.config
    if cfg.currency == BITCOIN:
        return slice(0, 1)
    era = state.day // cfg.days_per_era
    return slice(max(0, era - cfg.lifetime_eras - 1), era + 1)


def _depreciate(state: MarketState) -> int:
    """Move every holding from yesterday's value factor to today's; returns units removed."""
    cfg = state.config
    if cfg.currency != STABILIZED or state.day == 0:
        return 0
    cols = _live_columns(state)
    eras = np.arange(cols.start, cols.stop)
    old = _day_factor_num(cfg, eras, state.day - 1)
    new = _day_factor_num(cfg, eras, state.day)
    active = np.nonzero(old > 0)[0] + cols.start
    if len(active) == 0:
        return 0
    lo, hi = active[0], active[-1] + 1
    sub = state.holdings[:, lo:hi]
    before = int(sub.sum())
    den = old[lo - cols.start:hi - cols.start]
    step = den - new[lo - cols.start:hi - cols.start]
    # v * new / den rounded half down equals v - round_half_up(v * step / den);
    # the small multiplier keeps the product far from int64 overflow.
    q, r = np.divmod(sub * step, den)
    # Each rounded holding is off by at most half a unit.
    state.rounding_slack += Fraction(int(np.count_nonzero(r)), 2)
    sub -= q + (2 * r >= den)
    return before - int(sub.sum())


def trader_orders(state: MarketState, rng) -> tuple[np.ndarray, np.ndarray]:
    """Net buy and sell quantities (integer units) per trader for today."""
    cfg = state.config
    n = state.n_traders
    bal = state.balances().astype(float)
    s = state.sensitivity
    price = state.price

    signed = np.zeros(n)
    # Random market movements.
    u_part = rng.random(n)
    u_side = rng.random(n)
    participates = u_part < cfg.participation * s
    rand_qty = bal * s * cfg.random_fraction
    signed += np.where(participates, np.where(u_side < cfg.buy_prob, rand_qty, -rand_qty), 0.0)

    if cfg.behavioral:
        qty = bal * s * cfg.behavior_fraction
        ref, prev_ref = state.ref_price, state.prev_ref_price
        high = price > ref * (1 + s / 2)
        low = price < ref * (1 - s / 2)
        specs = state.is_speculator
        act = rng.random(n) < cfg.participation * s
        high &= act
        low &= act
        crash = specs & act & (price < prev_ref * (1 - s / 2) / 2)
        spec_sell = specs & ~crash & high
        spec_buy = specs & ~crash & low
        comm = ~specs
        comm_buy = comm & high
        comm_sell = comm & low
        buy = crash | spec_buy | comm_buy
        sell = spec_sell | comm_sell
        signed += np.where(buy, qty, 0.0) - np.where(sell, qty, 0.0)
        spec_moved = spec_sell | spec_buy
        state.prev_ref_price = np.where(spec_moved, ref, prev_ref)
        state.ref_price = np.where(spec_moved | comm_buy | comm_sell, price, ref)

    units = np.floor(np.abs(signed)).astype(np.int64)
    buys = np.where(signed > 0, units, 0)
    sells = np.minimum(np.where(signed < 0, units, 0), state.balances())
    return buys, sells


def _settle(state: MarketState, buy_fills, sell_fills, miner_fill) -> None:
    """Move filled units between holdings, oldest coins first on the selling side."""
    cols = _live_columns(state)
    sell_all = np.append(sell_fills, miner_fill)
    sellers = np.nonzero(sell_all)[0]
    buyers = np.nonzero(buy_fills)[0]
    if len(sellers) == 0 or len(buyers) == 0:
        return
    held = state.holdings[sellers, cols]
    before = np.cumsum(held, axis=1) - held
    removed = np.clip(sell_all[sellers, None] - before, 0, held)
    state.holdings[sellers, cols] = held - removed
    pool = removed.sum(axis=0)
    # Buyers take the sold coins in pool order, era by era.
    pool_edges = np.concatenate(([0], np.cumsum(pool)))
    buyer_edges = np.concatenate(([0], np.cumsum(buy_fills[buyers])))
    lo = np.maximum(buyer_edges[:-1, None], pool_edges[None, :-1])
    hi = np.minimum(buyer_edges[1:, None], pool_edges[None, 1:])
    state.holdings[buyers, cols] += np.maximum(hi - lo, 0)


def _check_era_supply(state: MarketState) -> None:
    """Compare the aggregate holdings with the era ledger's exact supply."""
    era = state.day // state.config.days_per_era
    total = state.total_units()
    exact = state.era_ledger.supply
    state.era_checks.append((era, total, exact))
    if abs(total - exact) > state.rounding_slack:
        raise ConservationError(
            f"era {era}: holdings {total} differ from ledger supply {float(exact):.1f} "
            f"by more than the rounding bound {float(state.rounding_slack):.1f}")


def daily_step(state: MarketState, rng) -> DayRecord:
    """Advance the market by one day.

    Order of events: depreciation of coins already held (stabilized only),
    mining, order collection, matching, price update, miner entry/exit, day
    advance.  Depreciating before the mint means a fresh coin starts the day
    at its full value for the day.

    Raises ``ConservationError`` if the holdings stop adding up and
    ``MarketOverflow`` if they outgrow the integer representation.
    """
    cfg = state.config
    total_before = state.total_units()
    if cfg.currency == BITCOIN:
        blocks, minted = _mine_bitcoin(state)
        depreciated = 0
    else:
        # Depreciation applies to coins held since yesterday; today's mint is fresh.
        depreciated = _depreciate(state)
        blocks, minted = _mine_stabilized(state, rng)
        if float(state.holdings.sum(dtype=np.float64)) > CAPACITY_UNITS:
            raise MarketOverflow(f"day {state.day}: holdings exceed {CAPACITY_UNITS} units")
        if state.day % cfg.days_per_era == 0:
            _check_era_supply(state)

    buys, sells = trader_orders(state, rng)
    miner_sell = state.miner_balance()
    buy_fills, sell_fills, miner_fill, demand, supply = match_orders(buys, sells, miner_sell)
    _settle(state, buy_fills, sell_fills, miner_fill)
    transacted = int(buy_fills.sum())

    trade_price = state.price
    state.price = update_price(state.price, demand / UNIT, supply / UNIT, cfg.alpha, cfg.price_floor)
    state.economy = miner_entry_exit_step(state.economy, state.price, cfg.miner_step)

    total_after = state.total_units()
    rec = DayRecord(
        day=state.day,
        price=trade_price,
        demand=demand / UNIT,
        supply=supply / UNIT,
        transacted=transacted / UNIT,
        miners=state.economy.miners,
        target_reachability=state.economy.target_reachability,
        reward=state.economy.reward,
        hash_rate=state.economy.total_hash_rate,
        total_supply=total_after / UNIT,
        blocks=blocks,
        minted=minted,
        depreciated=depreciated,
        total_units=total_after,
    )
    if total_after != total_before + minted - depreciated:
        raise ConservationError(
            f"day {state.day}: {total_before} + {minted} - {depreciated} != {total_after}")
    state.history.append(rec)
    state.day += 1
    return rec


def run_market(config: MarketConfig, seed) -> MarketState:
    """Run ``config.days`` days from a fresh market with a seeded generator."""
    rng = np.random.default_rng(seed)
    state = init_market(config)
    for _ in range(config.days):
        try:
            daily_step(state, rng)
        except MarketOverflow:
            # A runaway run is reported as truncated rather than silently wrapped.
            state.overflow_day = state.day
            break
    return state


def price_series(state: MarketState) -> list[float]:
    return [r.price for r in state.history]


def max_min_ratio(series) -> float:
    lo = min(series)
    return math.inf if lo <= 0 else max(series) / lo
