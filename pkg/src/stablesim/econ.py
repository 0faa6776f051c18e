"""Mining economics: block interval, reward flow and the miner equilibrium.

With ``M`` mining units of hash rate ``h`` each and per-trial success
probability ``g``, blocks arrive on average every ``1 / (M*h*g)`` intervals.
Miners are in equilibrium when the fiat value of their expected reward per
interval, ``P*V*h*g``, equals their operating cost ``C_m``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class MiningEconomy:
    """The (M, h, g, V, C_m) tuple, plus the lower bound on M."""

    miners: float = 1000.0
    unit_hash_rate: float = 1.0
    target_reachability: float = 0.1
    reward: float = 12.5
    unit_cost: float = 815.0
    miner_floor: float = 100.0

    def __post_init__(self):
        if not 0 < self.target_reachability <= 1:
            raise ValueError(f"target reachability must be in (0, 1], got {self.target_reachability}")
        if self.unit_hash_rate <= 0:
            raise ValueError(f"unit hash rate must be positive, got {self.unit_hash_rate}")
        if self.reward < 0:
            raise ValueError(f"reward must be non-negative, got {self.reward}")
        if self.unit_cost <= 0:
            raise ValueError(f"unit cost must be positive, got {self.unit_cost}")
        if self.miner_floor < 0 or self.miners < self.miner_floor:
            raise ValueError(f"miners ({self.miners}) below floor ({self.miner_floor})")

    @property
    def total_hash_rate(self) -> float:
        return self.miners * self.unit_hash_rate


def mean_block_interval(economy: MiningEconomy) -> float:
    """Average interval between successful trials, ``1 / (M*h*g)``."""
    rate = economy.miners * economy.unit_hash_rate * economy.target_reachability
    if rate <= 0:
        raise ValueError("mean block interval undefined for zero miners, hash rate or reachability")
    return 1.0 / rate


def expected_miner_benefit(economy: MiningEconomy) -> float:
    """Expected coins per mining unit per interval, ``V*h*g``."""
    return economy.reward * economy.unit_hash_rate * economy.target_reachability


def aggregate_reward_rate(economy: MiningEconomy) -> float:
    """Coins minted per interval across all miners, ``V*M*h*g``."""
    return economy.reward * economy.miners * economy.unit_hash_rate * economy.target_reachability


def equilibrium_gap(economy: MiningEconomy, price: float) -> float:
    """Fiat profit per unit per interval, ``P*V*h*g - C_m``.

    Positive values attract miners, negative values push them out and zero is
    the long-run equilibrium.
    """
    if price < 0:
        raise ValueError(f"price must be non-negative, got {price}")
    return price * expected_miner_benefit(economy) - economy.unit_cost


def miner_entry_exit_step(economy: MiningEconomy, price: float, step: float = 0.01) -> MiningEconomy:
    """Move M by one ``step`` (1% by default) toward the equilibrium.

    An exact tie leaves M unchanged; exits never take M below the floor.
    """
    gap = equilibrium_gap(economy, price)
    if gap > 0:
        miners = economy.miners * (1 + step)
    elif gap < 0:
        miners = max(economy.miner_floor, economy.miners * (1 - step))
    else:
        return economy
    return replace(economy, miners=miners)
