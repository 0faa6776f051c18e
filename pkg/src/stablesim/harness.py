"""Named scenarios, config files, seeds and report output.

A scenario run writes three files into its output directory:

``series.csv``
    the scenario's main data series (per day, per era or per bin);
``summary.txt``
    an aligned table of min/max (and mean/final) values;
``params.txt``
    the fully resolved configuration, in the same ``key = value`` format
    accepted by :func:`parse_config`, so a run can be repeated from it.

Some scenarios write extra files (per-block CSVs, per-run market series).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import random
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from stablesim.chain import (
    ChainState,
    PolicyConfig,
    interval_histogram,
    mine_until,
    sample_block_interval,
    write_block_csv,
)
from stablesim.ledger import EraSupplyLedger
from stablesim.market import BITCOIN, STABILIZED, MarketConfig, MarketState, run_market


class ConfigError(ValueError):
    pass


class ScenarioError(RuntimeError):
    pass


# Seed streams: every random consumer in a scenario draws from its own stream
# so that adding a consumer never shifts the numbers seen by another.
MARKET_STREAM = 0
INTERVAL_STREAM = 1
SUPPLY_STREAM = 2


def derive_seed(master: int, stream: int, index: int = 0) -> int:
    """Per-run seed from a master seed.

    The mixing function is numpy's ``SeedSequence`` hash of the entropy words
    ``[master, stream, index]``; the first 64-bit word of its generated state
    is the run seed.  The same triple always gives the same seed on any
    platform, and distinct triples give statistically independent streams.
    """
    if master < 0 or stream < 0 or index < 0:
        raise ValueError("seed components must be non-negative")
    state = np.random.SeedSequence([master, stream, index]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    market: MarketConfig = field(default_factory=MarketConfig)
    # Sweeps.
    alphas: tuple[float, ...] = (0.00001, 0.0001, 0.001)
    rewards: tuple[float, ...] = (6.25, 12.5, 25.0, 50.0)
    # Interval distributions.
    interval_samples: int = 10_000
    multipliers: tuple[float, ...] = (1.0, 2.0, 0.8)
    bin_width: float = 1.0
    interval_horizon: float = 100.0
    # Supply under demand shocks, modelled as step changes in the miner count.
    supply_blocks: int = 2_016_000
    positive_shock_block: int = 500_000
    positive_recovery_block: int = 506_000
    positive_shock_factor: float = 2.0
    negative_shock_block: int = 1_000_000
    negative_recovery_block: int = 1_030_000
    negative_shock_factor: float = 0.67
    recovery_factor: float = 1.0
    stochastic_supply: bool = False
    # Exchange-rate comparison.
    fx_path: str = ""
    fx_alpha: float = 0.00001
    fx_scale: float = 0.153

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name in ("interval_samples", "supply_blocks"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.bin_width <= 0 or self.interval_horizon <= 0:
            raise ConfigError("bin_width and interval_horizon must be positive")
        if any(m <= 0 for m in self.multipliers):
            raise ConfigError("multipliers must be positive")
        if not (0 <= self.positive_shock_block <= self.positive_recovery_block
                <= self.negative_shock_block <= self.negative_recovery_block):
            raise ConfigError("shock blocks must be ordered: positive shock, its recovery, "
                              "negative shock, its recovery")
        for name in ("positive_shock_factor", "negative_shock_factor", "recovery_factor", "fx_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if any(a < 0 for a in self.alphas) or any(v <= 0 for v in self.rewards):
            raise ConfigError("alphas must be non-negative and rewards positive")


# -- config text format -----------------------------------------------------
#
#   # comment
#   alpha = 0.0001
#   alphas = 0.00001, 0.0001, 0.001
#   behavioral = false
#
# Keys are ScenarioConfig fields or MarketConfig fields (except ``currency``,
# which the scenario decides).  Unspecified keys keep their defaults.

_MARKET_KEYS = {f.name for f in fields(MarketConfig)} - {"currency"}
_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"market", "scenario"}


def _field_types(cls) -> dict[str, object]:
    return typing.get_type_hints(cls)


def _convert(key: str, raw: str, typ, lineno: int):
    def fail(expected):
        raise ConfigError(f"line {lineno}: {key} expects {expected}, got {raw!r}")

    origin = typing.get_origin(typ)
    if origin is tuple:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            fail("a comma-separated list")
        return tuple(_convert(key, p, typing.get_args(typ)[0], lineno) for p in parts)
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        fail("a boolean")
    if typ is int:
        try:
            return int(raw)
        except ValueError:
            fail("an integer")
    if typ is float:
        try:
            value = float(raw)
        except ValueError:
            fail("a number")
        if not math.isfinite(value):
            fail("a finite number")
        return value
    if typ is str:
        return raw
    # Optional[...] and similar: fall back to the first concrete argument.
    for arg in typing.get_args(typ):
        if arg is not type(None):
            return _convert(key, raw, arg, lineno)
    fail(str(typ))


def parse_config(text: str, scenario: str = "market-btc", seed: int | None = None) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from ``key = value`` text.

    ``seed`` given here overrides a ``seed`` line in the text; one of the two
    must be present.
    """
    market_types = _field_types(MarketConfig)
    scen_types = _field_types(ScenarioConfig)
    market_kw: dict[str, object] = {}
    scen_kw: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _MARKET_KEYS:
            market_kw[key] = _convert(key, raw, market_types[key], lineno)
        elif key in _SCENARIO_KEYS:
            scen_kw[key] = _convert(key, raw, scen_types[key], lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if seed is not None:
        scen_kw["seed"] = seed
    if "seed" not in scen_kw:
        raise ConfigError("missing seed: give it in the config or on the command line")
    try:
        market = MarketConfig(**market_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ScenarioConfig(scenario=scenario, market=market, **scen_kw)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: ScenarioConfig) -> str:
    """Resolved configuration in ``parse_config`` syntax."""
    lines = [f"# scenario: {config.scenario}"]
    for f in fields(ScenarioConfig):
        if f.name in ("scenario", "market"):
            continue
        lines.append(f"{f.name} = {_format_value(getattr(config, f.name))}")
    for f in fields(MarketConfig):
        if f.name == "currency":
            continue
        lines.append(f"{f.name} = {_format_value(getattr(config.market, f.name))}")
    return "\n".join(lines) + "\n"


# -- summaries and external data -------------------------------------------------


@dataclass(frozen=True)
class SeriesSummary:
    min: float
    max: float
    mean: float
    final: float


def summarize(series) -> SeriesSummary:
    values = [float(x) for x in series]
    if not values:
        raise ValueError("cannot summarize an empty series")
    lo, hi = min(values), max(values)
    # fsum keeps the mean exact enough that a constant series reports itself.
    mean = min(max(math.fsum(values) / len(values), lo), hi)
    return SeriesSummary(lo, hi, mean, values[-1])


class ExternalSeriesError(ValueError):
    pass


def load_external_series(path) -> list[tuple[dt.date, float]]:
    """Read ``date,value`` rows (ISO dates, optional header) sorted by date."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec) or rec[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and rec[0].strip().lower() == "date":
                continue
            if len(rec) != 2:
                raise ExternalSeriesError(f"{path}:{lineno}: expected 2 fields, got {len(rec)}")
            try:
                day = dt.date.fromisoformat(rec[0].strip())
            except ValueError:
                raise ExternalSeriesError(f"{path}:{lineno}: bad date {rec[0]!r}") from None
            try:
                value = float(rec[1])
            except ValueError:
                raise ExternalSeriesError(f"{path}:{lineno}: bad value {rec[1]!r}") from None
            if not math.isfinite(value):
                raise ExternalSeriesError(f"{path}:{lineno}: value must be finite")
            rows.append((day, value))
    rows.sort(key=lambda r: r[0])
    return rows


def scale_series(values, factor: float) -> list[float]:
    return [v * factor for v in values]


# -- output helpers ---------------------------------------------------------------

MARKET_COLUMNS = ["day", "price", "demand", "supply", "transacted", "miners",
                  "g", "V", "hash_rate", "total_supply"]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _market_rows(state: MarketState):
    for r in state.history:
        yield [r.day, r.price, r.demand, r.supply, r.transacted, r.miners,
               r.target_reachability, r.reward, r.hash_rate, r.total_supply]


def write_market_csv(state: MarketState, path, prefix: tuple = (), prefix_names: tuple = ()) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(prefix_names) + MARKET_COLUMNS)
        for row in _market_rows(state):
            w.writerow([_fmt(x) for x in (*prefix, *row)])


def format_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[c if isinstance(c, str) else f"{c:.2f}" for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = []
    for k, row in enumerate(cells):
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        out.append("  ".join([first, *rest]).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def _price_row(label: str, state: MarketState) -> list:
    s = summarize(r.price for r in state.history)
    return [label, s.min, s.max, s.mean, s.final]


PRICE_HEADER = ["run", "min price", "max price", "mean price", "final price"]


def _overflow_notes(states: dict) -> str:
    notes = [f"{label}: stopped on day {st.overflow_day}, money stock exceeded the integer range\n"
             for label, st in states.items() if st.overflow_day is not None]
    return "".join(notes)


# -- scenarios ----------------------------------------------------------------------


@dataclass
class ScenarioResult:
    files: list[Path]
    summary: str
    data: dict = field(default_factory=dict)


def market_run(config: ScenarioConfig, **overrides) -> MarketState:
    """One market run under ``config.seed``.

    All market runs of a master seed use the same stream, so sweep members
    differ only in the swept parameter (common random numbers).
    """
    mcfg = replace(config.market, **overrides)
    return run_market(mcfg, derive_seed(config.seed, MARKET_STREAM))


def scenario_intervals(config: ScenarioConfig, out: Path) -> ScenarioResult:
    """Sampled block intervals at fixed hash-rate multipliers, binned."""
    rows = []
    table = []
    files = []
    means = {}
    for k, mult in enumerate(config.multipliers):
        rng = random.Random(derive_seed(config.seed, INTERVAL_STREAM, k))
        chain = ChainState(PolicyConfig())
        t = 0.0
        intervals = []
        for _ in range(config.interval_samples):
            dt_ = sample_block_interval(mult, rng, chain.config.theta_ref)
            t += dt_
            chain.append(t)
            intervals.append(dt_)
        path = out / f"blocks_x{mult:g}.csv"
        write_block_csv(chain.headers, path)
        files.append(path)
        hist = interval_histogram(intervals, config.bin_width, config.interval_horizon)
        rows.extend((mult, b, f) for b, f in hist)
        s = summarize(intervals)
        means[mult] = s.mean
        table.append([f"x{mult:g}", s.mean, chain.config.theta_ref / mult, s.min, s.max])
    path = out / "series.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["multiplier", "interval_bin", "frequency"])
        for mult, b, f in rows:
            w.writerow([_fmt(float(mult)), _fmt(float(b)), _fmt(f)])
    summary = format_table(["multiplier", "mean interval", "expected", "min", "max"], table)
    return ScenarioResult([path, *files], summary, {"means": means, "histogram": rows})


def _shock_miners(config: ScenarioConfig, base: float):
    def miners(height: int) -> float:
        if config.positive_shock_block <= height < config.positive_recovery_block:
            return base * config.positive_shock_factor
        if config.negative_shock_block <= height < config.negative_recovery_block:
            return base * config.negative_shock_factor
        if height >= config.negative_recovery_block:
            return base * config.recovery_factor
        return base
    return miners


def run_supply(config: ScenarioConfig):
    """Mine ``supply_blocks`` blocks under the shock schedule.

    Returns ``(rows, chain)`` where each row is ``(era, first_height,
    timestamp, g, V, minted, total_supply)`` for a completed era.
    """
    m = config.market
    policy = PolicyConfig()
    chain = ChainState(policy, m.initial_reachability, m.initial_reward, max_history=4 * policy.detection_window)
    ledger = EraSupplyLedger(lifetime=m.lifetime_eras)
    miners = _shock_miners(config, m.initial_miners)
    ref_rate = m.initial_miners * m.unit_hash_rate * m.initial_reachability
    rng = random.Random(derive_seed(config.seed, SUPPLY_STREAM)) if config.stochastic_supply else None
    rows = []
    era_start = {"height": 0, "time": 0.0, "reach": chain.target_reachability, "reward": chain.reward}

    def close_era(era):
        rows.append((era, era_start["height"], era_start["time"], era_start["reach"], era_start["reward"],
                     ledger.minted[era], ledger.supply))

    def on_block(hdr):
        if hdr.height >= config.supply_blocks:
            return
        if hdr.era > ledger.current_era:
            close_era(ledger.current_era)
            ledger.advance_to(hdr.era)
            era_start.update(height=hdr.height, time=hdr.timestamp,
                             reach=hdr.target_reachability, reward=hdr.reward)
        ledger.mint(hdr.era, hdr.reward)

    def rate(c):
        return miners(c.height) * m.unit_hash_rate * c.target_reachability / ref_rate

    t = 0.0
    while chain.height < config.supply_blocks:
        # One day of wall-clock time per call; blocks past the budget are ignored.
        mine_until(chain, rate, t, t + 1440.0, rng, on_block)
        t += 1440.0
    close_era(ledger.current_era)
    return rows, chain


def scenario_supply(config: ScenarioConfig, out: Path) -> ScenarioResult:
    rows, chain = run_supply(config)
    path = out / "series.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["era", "height", "timestamp", "g", "V", "minted", "total_supply"])
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    era_len = chain.config.era_length
    pre_era = config.positive_shock_block // era_len - 1
    supply = [r[6] for r in rows]
    pre = supply[pre_era] if 0 <= pre_era < len(supply) else supply[-1]
    s = summarize(supply)
    v = summarize(r[4] for r in rows)
    table = [
        ["total supply", s.min, s.max, s.mean, s.final],
        ["reward", v.min, v.max, v.mean, v.final],
        ["supply / pre-shock", s.min / pre, s.max / pre, s.mean / pre, s.final / pre],
    ]
    summary = format_table(["series", "min", "max", "mean", "final"], table)
    summary += f"\npre-shock era {pre_era}: total supply {pre:.2f}\n"
    summary += f"adjustments: {sum(1 for _, a in chain.adjustments if a == 'positive')} positive, " \
               f"{sum(1 for _, a in chain.adjustments if a == 'negative')} negative\n"
    return ScenarioResult([path], summary, {"rows": rows, "chain": chain, "pre_era": pre_era})


def _single_market(currency: str):
    def run(config: ScenarioConfig, out: Path) -> ScenarioResult:
        state = market_run(config, currency=currency)
        path = out / "series.csv"
        write_market_csv(state, path)
        summary = format_table(PRICE_HEADER, [_price_row(currency, state)])
        summary += _overflow_notes({currency: state})
        return ScenarioResult([path], summary, {"state": state})
    return run


def _sweep(currency: str, param: str, values_attr: str, label: str):
    def run(config: ScenarioConfig, out: Path) -> ScenarioResult:
        path = out / "series.csv"
        table = []
        states = {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([label] + MARKET_COLUMNS)
            for value in getattr(config, values_attr):
                state = market_run(config, currency=currency, **{param: value})
                states[value] = state
                for row in _market_rows(state):
                    w.writerow([_fmt(float(value))] + [_fmt(x) for x in row])
                table.append(_price_row(f"{label}={value:g}", state))
        summary = format_table(PRICE_HEADER, table)
        summary += _overflow_notes({f"{label}={v:g}": st for v, st in states.items()})
        return ScenarioResult([path], summary, {"states": states})
    return run


def scenario_compare_fx(config: ScenarioConfig, out: Path) -> ScenarioResult:
    """A stabilized run scaled by a constant, side by side with an external rate series."""
    if not config.fx_path:
        raise ConfigError("compare-fx needs fx_path pointing at a date,value CSV")
    external = load_external_series(config.fx_path)
    if not external:
        raise ScenarioError(f"{config.fx_path}: no data rows")
    state = market_run(config, currency=STABILIZED, alpha=config.fx_alpha)
    prices = [r.price for r in state.history]
    scaled = scale_series(prices, config.fx_scale)
    path = out / "series.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "day", "scaled_price", "date", "external"])
        for i in range(max(len(scaled), len(external))):
            day, sp = (i, _fmt(scaled[i])) if i < len(scaled) else ("", "")
            date, ev = (external[i][0].isoformat(), _fmt(external[i][1])) if i < len(external) else ("", "")
            w.writerow([i, day, sp, date, ev])
    e = summarize(v for _, v in external)
    s = summarize(scaled)
    summary = format_table(PRICE_HEADER, [
        ["external series", e.min, e.max, e.mean, e.final],
        [f"{config.fx_scale:g} coin", s.min, s.max, s.mean, s.final],
    ])
    return ScenarioResult([path], summary, {"state": state, "external": external, "scaled": scaled})


SCENARIOS = {
    "intervals": (scenario_intervals, "block interval distributions at hash-rate multipliers 1.0, 2.0, 0.8"),
    "supply": (scenario_supply, "total supply per era over 2,016,000 blocks with demand shocks"),
    "market-btc": (_single_market(BITCOIN), "artificial market, Bitcoin rules"),
    "market-stc": (_single_market(STABILIZED), "artificial market, stabilized coin"),
    "sweep-alpha-btc": (_sweep(BITCOIN, "alpha", "alphas", "alpha"), "Bitcoin market across price sensitivities"),
    "sweep-alpha-stc": (_sweep(STABILIZED, "alpha", "alphas", "alpha"),
                        "stabilized market across price sensitivities"),
    "sweep-reward-stc": (_sweep(STABILIZED, "initial_reward", "rewards", "initial_reward"),
                         "stabilized market across initial rewards"),
    "compare-fx": (scenario_compare_fx, "scaled stabilized prices next to an external exchange-rate series"),
}


def run_scenario(config: ScenarioConfig, out_dir) -> ScenarioResult:
    """Run ``config.scenario`` and write its files into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ScenarioError(f"output directory {out} is not writable: {exc}") from exc
    func, _ = SCENARIOS[config.scenario]
    result = func(config, out)
    (out / "summary.txt").write_text(result.summary)
    (out / "params.txt").write_text(format_config(config))
    result.files.extend([out / "summary.txt", out / "params.txt"])
    return result
