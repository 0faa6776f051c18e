"""Simulation of proof-of-work currency economics with price-stabilizing
consensus rules: limited target re-adjustment, variable block rewards and
coinage-era depreciation, plus an agent-based artificial market."""

from stablesim.econ import (
    MiningEconomy,
    aggregate_reward_rate,
    equilibrium_gap,
    expected_miner_benefit,
    mean_block_interval,
    miner_entry_exit_step,
)

__version__ = "0.1.0"

__all__ = [
    "MiningEconomy",
    "aggregate_reward_rate",
    "equilibrium_gap",
    "expected_miner_benefit",
    "mean_block_interval",
    "miner_entry_exit_step",
]
