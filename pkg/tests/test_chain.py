import math
import random
from fractions import Fraction

import pytest

from stablesim.chain import (
    NEGATIVE,
    POSITIVE,
    ChainState,
    InsufficientHistory,
    PolicyConfig,
    apply_negative_adjustment,
    apply_positive_adjustment,
    decide_adjustment,
    era_index,
    interval_histogram,
    median_time_past,
    mine_until,
    sample_block_interval,
    windowed_mean_interval,
    write_block_csv,
)

CFG = PolicyConfig()


@pytest.mark.parametrize("theta, action", [
    (5.0, POSITIVE), (4.0, POSITIVE), (5.01, None), (10.0, None),
    (12.49, None), (12.5, NEGATIVE), (30.0, NEGATIVE),
])
def test_thresholds(theta, action):
    assert decide_adjustment(theta, CFG) == action


@pytest.mark.parametrize("theta", [0.0, -3.0, math.nan, math.inf])
def test_implausible_observation_ignored(theta):
    assert decide_adjustment(theta, CFG) is None


def test_adjustments_keep_reward_flow():
    g, v = Fraction(1, 10), Fraction(25, 2)
    g2, v2 = apply_positive_adjustment(g, v)
    assert (g2, v2) == (Fraction(1, 20), 25)
    g3, v3 = apply_negative_adjustment(g, v)
    assert (g3, v3) == (Fraction(1, 8), 10)
    assert g2 * v2 == g3 * v3 == g * v


def test_negative_adjustment_caps_reachability():
    g, v = apply_negative_adjustment(0.9, 10.0)
    assert g == 1.0
    assert v == pytest.approx(8.0)


def test_median_time_past():
    assert median_time_past([5, 1, 4, 2, 3, 9, 8, 7, 6, 11, 10]) == 6
    with pytest.raises(ValueError):
        median_time_past([1, 2, 3])


def test_era_index():
    assert era_index(0) == 0
    assert era_index(2015) == 0
    assert era_index(2016) == 1
    with pytest.raises(ValueError):
        era_index(-1)


def test_chain_rejects_non_increasing_time():
    chain = ChainState()
    chain.append(1.0)
    with pytest.raises(ValueError):
        chain.append(1.0)


def test_windowed_interval_needs_history():
    chain = ChainState()
    for i in range(50):
        chain.append(10.0 * (i + 1))
    with pytest.raises(InsufficientHistory):
        windowed_mean_interval(chain)


def test_deterministic_mining_rate():
    chain = ChainState()
    n = mine_until(chain, lambda c: 1.0, 0.0, 1440.0)
    assert n == 143  # the 144th block would land exactly on the day boundary
    assert chain.adjustments == []


def test_doubled_rate_triggers_positive_then_settles():
    chain = ChainState()
    mine_until(chain, lambda c: 2.0 * c.target_reachability / 0.1, 0.0, 20 * 1440.0)
    assert chain.adjustments[0][1] == POSITIVE
    assert chain.target_reachability == pytest.approx(0.05)
    assert chain.reward == pytest.approx(25.0)


def test_history_trimming_keeps_heights():
    chain = ChainState(max_history=300)
    mine_until(chain, lambda c: 1.0, 0.0, 10 * 1440.0)
    assert chain.height == 1439
    assert len(chain.headers) <= 600
    assert chain.header(chain.height - 1).height == chain.height - 1
    with pytest.raises(InsufficientHistory):
        chain.header(0)


def test_sampled_interval_mean():
    rng = random.Random(3)
    xs = [sample_block_interval(2.0, rng) for _ in range(20000)]
    assert sum(xs) / len(xs) == pytest.approx(5.0, rel=0.03)
    assert sample_block_interval(0.8, None) == 12.5
    with pytest.raises(ValueError):
        sample_block_interval(0.0, rng)


def test_histogram_frequencies():
    hist = interval_histogram([0.5, 1.5, 1.7, 250.0], bin_width=1.0, horizon=3.0)
    assert hist == [(0.0, 0.25), (1.0, 0.5), (2.0, 0.0)]


def test_block_csv(tmp_path):
    chain = ChainState()
    for t in (10.0, 25.0):
        chain.append(t)
    path = tmp_path / "b.csv"
    write_block_csv(chain.headers, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "height,timestamp,interval,g,V,era"
    assert lines[2] == "1,25.000000,15.000000,0.1,12.5,0"


def test_policy_config_validation():
    with pytest.raises(ValueError):
        PolicyConfig(positive_threshold_ratio=1.2)
    with pytest.raises(ValueError):
        PolicyConfig(mtp_span=10)
