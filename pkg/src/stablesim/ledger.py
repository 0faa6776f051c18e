"""Depreciating coins: per-era supply accounting and era-partitioned UTXOs.

A coin minted in era ``t`` is worth ``1 - 0.01 * (T - t)`` of its original
value in era ``T`` and is gone after 100 eras.  Coin values are integer base
units (``COIN`` per coin); every depreciation evaluation rounds half down.
"""

from __future__ import annotations

import io
import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

COIN = 10**8
LIFETIME_ERAS = 100
MAX_GROUPS = 100


class LedgerError(ValueError):
    pass


class EraMismatch(LedgerError):
    pass


class InvalidCoin(LedgerError):
    """A coin whose recorded value could not legally exist."""


class TransactionInvalid(LedgerError):
    pass


class ExpiredInput(TransactionInvalid):
    pass


class ConservationViolation(TransactionInvalid):
    pass


class DuplicateInput(TransactionInvalid):
    pass


class GroupOverflow(TransactionInvalid):
    pass


class UnknownInput(TransactionInvalid):
    pass


class MalformedGroup(TransactionInvalid):
    pass


def depreciation_factor(origin_era: int, eval_era: int, lifetime: int = LIFETIME_ERAS) -> Fraction:
    """Fraction of the original value left after ``eval_era - origin_era`` eras."""
    if eval_era < origin_era:
        raise ValueError(f"evaluation era {eval_era} precedes origin era {origin_era}")
    return Fraction(max(0, lifetime - (eval_era - origin_era)), lifetime)


def era_depreciation(minted, origin_era: int, eval_era: int, lifetime: int = LIFETIME_ERAS):
    """Depreciated amount ``min(Z, Z * (T - t) / lifetime)`` of one era's mint."""
    if eval_era < origin_era:
        raise ValueError(f"evaluation era {eval_era} precedes origin era {origin_era}")
    if minted < 0:
        raise ValueError("minted amount must be non-negative")
    return min(minted, minted * Fraction(eval_era - origin_era, lifetime))


def round_half_down(num: int, den: int) -> int:
    """``num / den`` rounded to the nearest integer, ties toward zero (den > 0, num >= 0)."""
    return -((-(2 * num - den)) // (2 * den))


def revalue(value: int, origin_era: int, from_era: int, to_era: int,
            lifetime: int = LIFETIME_ERAS) -> int:
    """Re-evaluate ``value`` base units recorded at ``from_era`` as of ``to_era``."""
    f_from = lifetime - (from_era - origin_era)
    if f_from <= 0 or from_era < origin_era:
        raise InvalidCoin(f"coin from era {origin_era} cannot be recorded at era {from_era}")
    if to_era < origin_era:
        raise ValueError("target era precedes origin era")
    f_to = max(0, lifetime - (to_era - origin_era))
    if f_to == f_from:
        return value
    return round_half_down(value * f_to, f_from)


@dataclass
class EraSupplyLedger:
    """Minted amount per coinage era with a running total-supply accumulator.

    ``supply`` always equals ``S(current_era)``; it is maintained
    incrementally as eras advance rather than re-summed.
    """

    lifetime: int = LIFETIME_ERAS
    minted: list = field(default_factory=lambda: [0])
    supply: object = 0
    # Sum of minted amounts still inside the lifetime window.
    _live: object = 0

    @property
    def current_era(self) -> int:
        return len(self.minted) - 1

    def mint(self, era: int, amount) -> "EraSupplyLedger":
        if era != self.current_era:
            raise EraMismatch(f"minting into era {era}, ledger is at era {self.current_era}")
        if amount < 0:
            raise ValueError("mint amount must be non-negative")
        self.minted[era] += amount
        self.supply += amount
        self._live += amount
        return self

    def advance_era(self) -> "EraSupplyLedger":
        # Every live era loses 1/lifetime of its original mint; the oldest hits zero.
        self.supply -= self._live * Fraction(1, self.lifetime)
        oldest = self.current_era - self.lifetime + 1
        if oldest >= 0:
            self._live -= self.minted[oldest]
        self.minted.append(0)
        return self

    def advance_to(self, era: int) -> "EraSupplyLedger":
        while self.current_era < era:
            self.advance_era()
        return self


def total_supply(ledger: EraSupplyLedger, era: int | None = None):
    """Coins in circulation at ``era`` (defaults to the ledger's current era)."""
    if era is None or era == ledger.current_era:
        return ledger.supply
    if era > ledger.current_era or era < 0:
        raise ValueError(f"ledger does not cover era {era}")
    lo = max(0, era - ledger.lifetime + 1)
    return sum((z * depreciation_factor(t, era, ledger.lifetime)
                for t, z in enumerate(ledger.minted[lo:era + 1], start=lo)), 0)


# -- UTXO transactions ----------------------------------------------------


@dataclass(frozen=True)
class CoinOutput:
    origin_era: int
    recorded_value: int
    recorded_era: int
    owner: str = ""

    def __post_init__(self):
        if self.recorded_value < 0:
            raise ValueError("recorded value must be non-negative")
        if self.recorded_era < self.origin_era:
            raise ValueError("recorded era precedes origin era")
        if self.recorded_era - self.origin_era >= LIFETIME_ERAS:
            raise InvalidCoin("coin recorded after full depreciation")


def evaluate_output_value(output: CoinOutput, target_era: int) -> int:
    """Value in base units of ``output`` as of ``target_era``.

    Only the origin era, the recording era and the target era matter; the
    path the coin took through earlier transactions does not.
    """
    return revalue(output.recorded_value, output.origin_era, output.recorded_era, target_era)


@dataclass(frozen=True)
class TxGroup:
    origin_era: int
    inputs: tuple[str, ...]
    outputs: tuple[CoinOutput, ...]


@dataclass(frozen=True)
class DepTransaction:
    txid: str
    era: int
    groups: tuple[TxGroup, ...]

    def outpoints(self):
        """``(outpoint, output)`` pairs for the coins this transaction creates."""
        i = 0
        for grp in self.groups:
            for out in grp.outputs:
                yield f"{self.txid}:{i}", out
                i += 1


def validate_transaction(tx: DepTransaction, utxos: Mapping[str, CoinOutput]) -> None:
    """Raise a ``TransactionInvalid`` subclass unless ``tx`` may be included in ``tx.era``.

    Each origin-era group must conserve value exactly: inputs evaluated at
    the transaction's era sum to the recorded values of the outputs.
    """
    if len(tx.groups) > MAX_GROUPS:
        raise GroupOverflow(f"{len(tx.groups)} groups exceed the limit of {MAX_GROUPS}")
    seen = set()
    for grp in tx.groups:
        total_in = 0
        for ref in grp.inputs:
            if ref in seen:
                raise DuplicateInput(f"input {ref} referenced twice")
            seen.add(ref)
            coin = utxos.get(ref)
            if coin is None:
                raise UnknownInput(f"input {ref} is not an unspent output")
            if coin.origin_era != grp.origin_era:
                raise MalformedGroup(f"input {ref} originates in era {coin.origin_era}, "
                                     f"group is for era {grp.origin_era}")
            if tx.era < coin.recorded_era:
                raise MalformedGroup(f"input {ref} is recorded after era {tx.era}")
            if tx.era - coin.origin_era >= LIFETIME_ERAS:
                raise ExpiredInput(f"input {ref} from era {coin.origin_era} has expired")
            total_in += evaluate_output_value(coin, tx.era)
        total_out = 0
        for out in grp.outputs:
            if out.origin_era != grp.origin_era or out.recorded_era != tx.era:
                raise MalformedGroup("output eras do not match the group and transaction")
            total_out += out.recorded_value
        if total_in != total_out:
            raise ConservationViolation(
                f"group from era {grp.origin_era}: inputs {total_in} != outputs {total_out}")


@dataclass
class UtxoLedger:
    """Unspent outputs keyed by ``txid:index``."""

    utxos: dict[str, CoinOutput] = field(default_factory=dict)

    def apply(self, tx: DepTransaction) -> None:
        validate_transaction(tx, self.utxos)
        for grp in tx.groups:
            for ref in grp.inputs:
                del self.utxos[ref]
        for ref, out in tx.outpoints():
            self.utxos[ref] = out

    def value_by_origin(self, era: int) -> dict[int, int]:
        """Evaluated value of all live coins per origin era, as of ``era``."""
        totals: dict[int, int] = {}
        for coin in self.utxos.values():
            v = evaluate_output_value(coin, era)
            totals[coin.origin_era] = totals.get(coin.origin_era, 0) + v
        return totals


# -- Text format ------------------------------------------------------------
#
# Snapshot:   <outpoint> <origin_era> <recorded_era> <recorded_value> <owner>
# Transaction: "tx <txid> <era>" followed by one line per group:
#   group <origin_era> in <ref>[,<ref>...] out <value>:<owner>[,<value>:<owner>...]
# Values are decimal coins; blank lines and '#' comments are ignored.

_VALUE_RE = re.compile(r"^\d+(\.\d{1,8})?$")


def parse_coins(text: str) -> int:
    if not _VALUE_RE.match(text):
        raise ValueError(f"bad coin amount {text!r}")
    return int(Decimal(text) * COIN)


def format_coins(units: int) -> str:
    whole, frac = divmod(units, COIN)
    return f"{whole}.{frac:08d}"


def dump_snapshot(utxos: Mapping[str, CoinOutput]) -> str:
    buf = io.StringIO()
    for ref in sorted(utxos):
        c = utxos[ref]
        buf.write(f"{ref} {c.origin_era} {c.recorded_era} {format_coins(c.recorded_value)} {c.owner}\n")
    return buf.getvalue()


def load_snapshot(text: str) -> dict[str, CoinOutput]:
    utxos = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        ref, origin, recorded, value, owner = parts
        utxos[ref] = CoinOutput(int(origin), parse_coins(value), int(recorded), owner)
    return utxos


def dump_transaction(tx: DepTransaction) -> str:
    lines = [f"tx {tx.txid} {tx.era}"]
    for grp in tx.groups:
        ins = ",".join(grp.inputs) or "-"
        outs = ",".join(f"{format_coins(o.recorded_value)}:{o.owner}" for o in grp.outputs) or "-"
        lines.append(f"group {grp.origin_era} in {ins} out {outs}")
    return "\n".join(lines) + "\n"


def load_transaction(text: str) -> DepTransaction:
    header = None
    groups = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "tx" and len(parts) == 3 and header is None:
            header = (parts[1], int(parts[2]))
        elif parts[0] == "group" and len(parts) == 6 and parts[2] == "in" and parts[4] == "out":
            if header is None:
                raise ValueError(f"line {lineno}: group before tx header")
            origin = int(parts[1])
            ins = () if parts[3] == "-" else tuple(parts[3].split(","))
            outs = []
            if parts[5] != "-":
                for item in parts[5].split(","):
                    value, _, owner = item.partition(":")
                    outs.append(CoinOutput(origin, parse_coins(value), header[1], owner))
            groups.append(TxGroup(origin, ins, tuple(outs)))
        else:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")
    if header is None:
        raise ValueError("missing tx header")
    return DepTransaction(header[0], header[1], tuple(groups))
