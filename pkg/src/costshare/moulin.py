"""Iterative bid-screening mechanism driven by any cost-share method.

Start from the full universe, drop any player whose current share exceeds
its bid, recompute shares, and repeat until the survivors all accept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (
    CapacityError,
    CostOracle,
    CostShareMethod,
    EPS,
    InvalidInputError,
    MechanismOutcome,
    MethodContractError,
    as_profile,
    iter_bits,
)

REMOVAL_POLICIES = ("lowest-index-violator", "all-violators-batch")


@dataclass(frozen=True)
class MoulinConfig:
    removal_policy: str = "lowest-index-violator"
    max_iterations: int | None = None  # defaults to |U| + 1

    def __post_init__(self):
        if self.removal_policy not in REMOVAL_POLICIES:
            raise InvalidInputError(f"unknown removal policy {self.removal_policy!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")


def run_moulin(
    method: CostShareMethod,
    oracle: CostOracle,
    bids: Sequence[float] | Mapping[int, float],
    config: MoulinConfig | None = None,
) -> MechanismOutcome:
    """Fixed point of share-vs-bid screening; prices are the final shares."""
    config = config or MoulinConfig()
    n = method.n_players
    bid_vec = as_profile(bids, n)
    limit = config.max_iterations if config.max_iterations is not None else n + 1
    mask = (1 << n) - 1
    trace: list[dict] = []
    for iteration in range(limit):
        shares = method.shares_mask(mask)
        if any(s < -EPS for s in shares.values()):
            bad = min(i for i, s in shares.items() if s < -EPS)
            raise MethodContractError(f"negative share {shares[bad]} for player {bad}")
        violators = [i for i in iter_bits(mask) if shares[i] > bid_vec[i]]
        if not violators:
            prices = tuple(shares.get(i, 0.0) for i in range(n))
            return MechanismOutcome(
                served=frozenset(iter_bits(mask)),
                prices=prices,
                incurred_cost=oracle.evaluate_mask(mask),
                trace=tuple(trace),
            )
        drop = violators[:1] if config.removal_policy == "lowest-index-violator" else violators
        for i in drop:
            trace.append(
                {"event": "remove", "iteration": iteration, "player": i,
                 "share": shares[i], "bid": bid_vec[i]}
            )
            mask &= ~(1 << i)
    raise MethodContractError(f"no fixed point within {limit} iterations")


def removal_order_invariance(
    method: CostShareMethod,
    oracle: CostOracle,
    bids: Sequence[float] | Mapping[int, float],
    cap: int = 8,
) -> bool:
    """True iff every violator-removal order reaches the same outcome.

    Explores the full choice tree (which violator to drop next); the final
    set determines the prices, so outcomes are compared by final set.
    """
    n = method.n_players
    if n > cap:
        raise CapacityError(f"{n} players exceed the order-search cap {cap}")
    bid_vec = as_profile(bids, n)
    outcomes: set[int] = set()
    seen: set[int] = set()

    def explore(mask: int) -> None:
        if mask in seen:
            return
        seen.add(mask)
        shares = method.shares_mask(mask)
        violators = [i for i in iter_bits(mask) if shares[i] > bid_vec[i]]
        if not violators:
            outcomes.add(mask)
            return
        for i in violators:
            explore(mask & ~(1 << i))

    explore((1 << n) - 1)
    return len(outcomes) == 1
