"""Block production and the target/reward re-adjustment policy.

Blocks are produced as a Poisson process whose rate scales with the total
hash rate relative to the reference.  Every ``detection_window`` blocks the
average interval is measured from the median-time-past (MTP) of the window
boundaries and compared against two thresholds:

* at or below ``theta_ref * positive_threshold_ratio`` the target is halved
  and the reward doubled;
* at or above ``theta_ref * negative_threshold_ratio`` the target grows by
  5/4 (reachability capped at 1) and the reward drops to 80%.

Both rules preserve ``V * g`` and therefore the reward flow at fixed M.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    theta_ref: float = 10.0
    positive_threshold_ratio: float = 0.5
    negative_threshold_ratio: float = 1.25
    detection_window: int = 100
    era_length: int = 2016
    mtp_span: int = 11
    theta_min: float = 1.0

    def __post_init__(self):
        if not 0 < self.positive_threshold_ratio < 1 < self.negative_threshold_ratio:
            raise ValueError("thresholds must satisfy 0 < positive < 1 < negative")
        if self.theta_ref * self.positive_threshold_ratio <= self.theta_min:
            raise ValueError("positive threshold must stay above theta_min")
        if self.detection_window < 1 or self.era_length < 1:
            raise ValueError("window and era length must be positive")
        if self.mtp_span < 1 or self.mtp_span % 2 == 0:
            raise ValueError("mtp_span must be a positive odd count")

    @property
    def positive_threshold(self) -> float:
        return self.theta_ref * self.positive_threshold_ratio

    @property
    def negative_threshold(self) -> float:
        return self.theta_ref * self.negative_threshold_ratio


@dataclass(frozen=True, slots=True)
class BlockHeader:
    height: int
    timestamp: float
    target_reachability: float
    reward: float
    era: int


@dataclass
class ChainState:
    """Append-only header chain plus the policy state that governs new blocks.

    ``max_history`` bounds memory for long runs; only the tail needed for MTP
    over the current detection window is kept when it is set.
    """

    config: PolicyConfig = field(default_factory=PolicyConfig)
    target_reachability: float = 0.1
    reward: float = 12.5
    headers: list[BlockHeader] = field(default_factory=list)
    window_start: int | None = None
    max_history: int | None = None
    # Height of headers[0]; non-zero once old headers are trimmed.
    base_height: int = 0
    adjustments: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.window_start is None:
            # First window starts at the first height with a full MTP span behind it.
            self.window_start = self.config.mtp_span - 1

    @property
    def height(self) -> int:
        """Number of blocks produced so far."""
        return self.base_height + len(self.headers)

    @property
    def tip_time(self) -> float:
        return self.headers[-1].timestamp if self.headers else 0.0

    def header(self, height: int) -> BlockHeader:
        idx = height - self.base_height
        if idx < 0 or idx >= len(self.headers):
            raise InsufficientHistory(f"header {height} not available")
        return self.headers[idx]

    def append(self, timestamp: float) -> BlockHeader:
        if self.headers and timestamp <= self.headers[-1].timestamp:
            raise ValueError("timestamps must strictly increase")
        height = self.height
        hdr = BlockHeader(height, timestamp, self.target_reachability, self.reward,
                          height // self.config.era_length)
        self.headers.append(hdr)
        if self.max_history is not None and len(self.headers) > 2 * self.max_history:
            drop = len(self.headers) - self.max_history
            del self.headers[:drop]
            self.base_height += drop
        return hdr

    def window_due(self) -> bool:
        return self.height - 1 >= self.window_start + self.config.detection_window


def era_index(height: int, era_length: int = 2016) -> int:
    if height < 0:
        raise ValueError("height must be non-negative")
    return height // era_length


def sample_block_interval(rate_multiplier: float, rng: random.Random | None,
                          theta_ref: float = 10.0) -> float:
    """Exponential inter-arrival time with mean ``theta_ref / rate_multiplier``.

    ``rng=None`` returns the mean itself, for noise-free runs.
    """
    if not rate_multiplier > 0:
        raise ValueError(f"rate multiplier must be positive, got {rate_multiplier}")
    mean = theta_ref / rate_multiplier
    if rng is None:
        return mean
    return rng.expovariate(1.0 / mean)


def median_time_past(timestamps: Sequence[float], mtp_span: int = 11) -> float:
    if len(timestamps) != mtp_span:
        raise ValueError(f"expected {mtp_span} timestamps, got {len(timestamps)}")
    return sorted(timestamps)[mtp_span // 2]


def mtp_at(chain: ChainState, height: int) -> float:
    """MTP of the ``mtp_span`` blocks ending at ``height``."""
    span = chain.config.mtp_span
    lo = height - span + 1
    if lo < chain.base_height or height >= chain.height:
        raise InsufficientHistory(f"need blocks {lo}..{height} for MTP")
    i = lo - chain.base_height
    return median_time_past([h.timestamp for h in chain.headers[i:i + span]], span)


def windowed_mean_interval(chain: ChainState) -> float:
    """Average block interval over the current detection window, via MTP."""
    n = chain.config.detection_window
    start = chain.window_start
    end = start + n
    if chain.height - 1 < end:
        raise InsufficientHistory(f"window ends at {end}, chain tip is {chain.height - 1}")
    return (mtp_at(chain, end) - mtp_at(chain, start)) / n


def apply_positive_adjustment(reach, reward):
    return reach / 2, reward * 2


def apply_negative_adjustment(reach, reward):
    if isinstance(reach, Fraction):
        new_reach = min(Fraction(1), reach * Fraction(5, 4))
        return new_reach, reward * Fraction(4, 5)
    return min(1.0, reach * 5 / 4), reward * 0.8


def decide_adjustment(theta_obs: float, config: PolicyConfig) -> str | None:
    """Which rule, if any, an observed mean interval triggers."""
    if not math.isfinite(theta_obs) or theta_obs <= 0:
        log.warning("discarding implausible observed interval %r", theta_obs)
        return None
    low = theta_obs <= config.positive_threshold
    high = theta_obs >= config.negative_threshold
    if low and high:
        log.warning("observed interval %r crosses both thresholds; no adjustment", theta_obs)
        return None
    if theta_obs < 2 * config.theta_min:
        log.warning("observed interval %.3f approaching theta_min %.3f", theta_obs, config.theta_min)
    if low:
        return POSITIVE
    if high:
        return NEGATIVE
    return None


def policy_tick(chain: ChainState) -> str | None:
    """Evaluate the current window, apply at most one adjustment, open the next window."""
    theta_obs = windowed_mean_interval(chain)
    action = decide_adjustment(theta_obs, chain.config)
    if action == POSITIVE:
        chain.target_reachability, chain.reward = apply_positive_adjustment(
            chain.target_reachability, chain.reward)
    elif action == NEGATIVE:
        chain.target_reachability, chain.reward = apply_negative_adjustment(
            chain.target_reachability, chain.reward)
    if action is not None:
        chain.adjustments.append((chain.height - 1, action))
    chain.window_start += chain.config.detection_window
    return action


def mine_until(chain: ChainState, rate_multiplier, t_start: float, t_end: float,
               rng: random.Random | None = None, on_block=None) -> int:
    """Produce blocks over wall-clock ``[t_start, t_end)``, ticking the policy as windows close.

    ``rate_multiplier`` is a callable of the chain returning the current hash
    rate relative to the reference; it is re-read after every block so that
    adjustments take effect immediately.  With ``rng=None`` intervals take
    their expected value and the partial interval carries into the next call.
    Returns the number of blocks produced.
    """
    made = 0
    theta_ref = chain.config.theta_ref
    t = chain.tip_time
    if rng is not None:
        # Memoryless arrivals: the clock restarts wherever the rate last changed.
        t = max(t, t_start)
    while True:
        t_next = t + sample_block_interval(rate_multiplier(chain), rng, theta_ref)
        if t_next >= t_end:
            break
        hdr = chain.append(t_next)
        t = t_next
        made += 1
        if on_block is not None:
            on_block(hdr)
        if chain.window_due():
            policy_tick(chain)
    return made


def write_block_csv(headers: Iterable[BlockHeader], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["height", "timestamp", "interval", "g", "V", "era"])
        prev = None
        for h in headers:
            interval = "" if prev is None else f"{h.timestamp - prev:.6f}"
            w.writerow([h.height, f"{h.timestamp:.6f}", interval,
                        repr(h.target_reachability), repr(h.reward), h.era])
            prev = h.timestamp


def interval_histogram(intervals: Sequence[float], bin_width: float = 1.0,
                       horizon: float = 100.0) -> list[tuple[float, float]]:
    """Relative frequency of intervals per bin over ``[0, horizon)``."""
    nbins = int(round(horizon / bin_width))
    counts = [0] * nbins
    for x in intervals:
        k = int(x // bin_width)
        if 0 <= k < nbins:
            counts[k] += 1
    total = len(intervals) or 1
    return [(k * bin_width, c / total) for k, c in enumerate(counts)]
