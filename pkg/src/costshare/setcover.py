"""Set cover: instance model, exact oracle, and the greedy-offer mechanism.

The mechanism repeatedly picks the set with the best cost-per-new-player
ratio, offers each still-unmarked covered player the ratio divided by the
harmonic number of the universe size, buys the set if every offer is
accepted, and deletes the refusing players otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .core import (
    CapacityError,
    CostOracle,
    InfeasibleError,
    InvalidInputError,
    MechanismOutcome,
    as_mask,
    as_profile,
    bits_of,
    harmonic,
    iter_bits,
    price_core_violations,
)


@dataclass(frozen=True)
class SetCoverInstance:
    """Universe of players and a collection of priced subsets covering them."""

    n_players: int
    sets: tuple[tuple[float, frozenset[int]], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "sets", tuple((float(c), frozenset(m)) for c, m in self.sets)
        )
        if self.n_players < 1:
            raise InvalidInputError("instance needs at least one player", "n_players")
        if not self.sets:
            raise InvalidInputError("collection must be nonempty", "sets")
        covered = set()
        for j, (cost, members) in enumerate(self.sets):
            if cost < 0 or math.isnan(cost):
                raise InvalidInputError(f"set {j} has negative cost", f"sets[{j}].cost")
            for i in members:
                if not 0 <= i < self.n_players:
                    raise InvalidInputError(f"set {j} covers unknown player {i}", f"sets[{j}].members")
            covered |= members
        missing = set(range(self.n_players)) - covered
        if missing:
            raise InfeasibleError(f"players {sorted(missing)} are covered by no set", "sets")

    @property
    def member_masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << i for i in members) for _, members in self.sets)


def sc_optimal_cost(
    instance: SetCoverInstance,
    subset: int | Iterable[int],
    cap: int = 16,
) -> tuple[float, tuple[int, ...]]:
    """Cheapest subcollection covering the given players, by enumeration.

    Ties prefer the lexicographically smallest tuple of set ids.
    """
    if len(instance.sets) > cap:
        raise CapacityError(f"collection of {len(instance.sets)} sets exceeds enumeration cap {cap}")
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        return 0.0, ()
    member_masks = instance.member_masks
    costs = [c for c, _ in instance.sets]
    best_cost = math.inf
    best_ids: tuple[int, ...] | None = None
    for pick in range(1, 1 << len(instance.sets)):
        covered = 0
        for j in iter_bits(pick):
            covered |= member_masks[j]
        if covered & mask != mask:
            continue
        cost = sum(costs[j] for j in iter_bits(pick))
        ids = bits_of(pick)
        if cost < best_cost or (cost == best_cost and best_ids is not None and ids < best_ids):
            best_cost, best_ids = cost, ids
    if best_ids is None:
        raise InfeasibleError(f"players {bits_of(mask)} cannot be covered")
    return best_cost, best_ids


def sc_oracle(instance: SetCoverInstance, cap: int = 16) -> CostOracle:
    @lru_cache(maxsize=None)
    def evaluate(mask: int) -> float:
        return sc_optimal_cost(instance, mask, cap=cap)[0]

    return CostOracle("set-cover", instance.n_players, evaluate)


def run_dmv_setcover(
    instance: SetCoverInstance,
    bids: Sequence[float] | Mapping[int, float],
) -> MechanismOutcome:
    """Greedy ratio offers at 1/H_k of the per-player set cost.

    H_k is fixed by the universe size before any deletion. A player refusing
    an offer (bid strictly below it) is deleted; compliant players of the
    same set stay unmarked and see later offers.
    """
    n = instance.n_players
    bid_vec = as_profile(bids, n)
    h_k = harmonic(n)
    member_masks = instance.member_masks
    alive = (1 << n) - 1
    marked = 0
    prices = [0.0] * n
    incurred = 0.0
    trace: list[dict] = []
    iteration = 0
    while alive & ~marked:
        unmarked = alive & ~marked
        best = None  # (ratio, set id, covered mask)
        for j, (cost, _) in enumerate(instance.sets):
            covered = member_masks[j] & unmarked
            m_j = covered.bit_count()
            if m_j == 0:
                continue
            ratio = cost / m_j
            if best is None or ratio < best[0]:
                best = (ratio, j, covered)
        if best is None:
            raise InfeasibleError(f"players {bits_of(unmarked)} cannot be covered")
        ratio, j, covered = best
        offer = ratio / h_k
        trace.append(
            {"event": "offer", "iteration": iteration, "set": j, "ratio": ratio,
             "share": offer, "players": list(iter_bits(covered))}
        )
        refusers = [i for i in iter_bits(covered) if bid_vec[i] < offer]
        if refusers:
            for i in refusers:
                trace.append(
                    {"event": "delete", "iteration": iteration, "player": i,
                     "share": offer, "bid": bid_vec[i]}
                )
                alive &= ~(1 << i)
        else:
            for i in iter_bits(covered):
                prices[i] = offer
            marked |= covered
            incurred += instance.sets[j][0]
            trace.append(
                {"event": "buy", "iteration": iteration, "set": j,
                 "cost": instance.sets[j][0], "players": list(iter_bits(covered))}
            )
        iteration += 1
    return MechanismOutcome(
        served=frozenset(iter_bits(marked)),
        prices=tuple(prices),
        incurred_cost=incurred,
        trace=tuple(trace),
    )


def dmv_sc_shares_in_core(
    instance: SetCoverInstance,
    outcome: MechanismOutcome,
    cap: int = 16,
) -> list[frozenset[int]]:
    """Served subsets that pay more in total than their stand-alone cover cost."""
    return price_core_violations(
        sc_oracle(instance), outcome.served_mask, outcome.prices, cap=cap
    )
