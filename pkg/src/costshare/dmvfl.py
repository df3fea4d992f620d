"""Ghost-growing facility-location mechanism on costs scaled down by 1.861.

Cost shares rise with the clock. An unconnected player pays
``max(0, t - c'(i, q))`` toward every unopened facility q (primed costs are
the originals divided by 1.861). Three event types drive the process: a
player's share reaches its bid (delete, withdraw its contributions), a
facility's contributions reach its scaled opening cost (open, connect the
positive contributors at their current shares), and a player's share
reaches its scaled connection cost to an open facility (connect).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .core import (
    InvalidInputError,
    MechanismOutcome,
    as_mask,
    as_profile,
    iter_bits,
)
from .facloc import FacilityLocationInstance, pt_method

SCALE = 1.861

_DELETE, _OPEN, _CONNECT = 0, 1, 2


@dataclass
class GhostProcessState:
    """Mutable simulation state (kept internal to one run)."""

    clock: float = 0.0
    unconnected: set[int] = field(default_factory=set)
    deleted: set[int] = field(default_factory=set)
    connected: dict[int, int] = field(default_factory=dict)  # player -> facility
    prices: dict[int, float] = field(default_factory=dict)
    open_facilities: set[int] = field(default_factory=set)


def _next_opening(opening: float, distances: list[float], now: float) -> float:
    """Earliest time >= now at which contributions reach the opening cost."""
    if opening <= 0.0:
        return now
    if not distances:
        return math.inf
    d = sorted(distances)
    prefix = 0.0
    for j, dj in enumerate(d, start=1):
        prefix += dj
        t = (opening + prefix) / j
        upper = d[j] if j < len(d) else math.inf
        if t <= upper:
            return max(t, now)
    raise AssertionError("opening scan always terminates on the last segment")


def run_dmv_fl(
    instance: FacilityLocationInstance,
    bids: Sequence[float] | Mapping[int, float],
) -> MechanismOutcome:
    """Simulate the ghost process; incurred cost is charged at unscaled prices.

    Simultaneous events resolve deletions first, then openings by ascending
    facility id, then connections by ascending player id.
    """
    n = instance.n_players
    bid_vec = as_profile(bids, n)
    scaled_open = [f / SCALE for f in instance.opening_costs]
    sd = [[instance.d(i, q) / SCALE for q in range(instance.n_facilities)] for i in range(n)]

    state = GhostProcessState(unconnected=set(range(n)))
    trace: list[dict] = []

    while state.unconnected:
        t = state.clock
        best = None  # (time, category, index, extra)
        for i in sorted(state.unconnected):
            key = (bid_vec[i], _DELETE, i, -1)
            if best is None or key < best:
                best = key
        for q in range(instance.n_facilities):
            if q in state.open_facilities:
                continue
            tq = _next_opening(scaled_open[q], [sd[i][q] for i in state.unconnected], t)
            key = (tq, _OPEN, q, -1)
            if best is None or key < best:
                best = key
        for i in sorted(state.unconnected):
            for q in sorted(state.open_facilities):
                key = (max(t, sd[i][q]), _CONNECT, i, q)
                if best is None or key < best:
                    best = key

        when, category, idx, extra = best
        if math.isinf(when):
            raise AssertionError("ghost process stalled with unconnected players")
        state.clock = when
        if category == _DELETE:
            state.unconnected.discard(idx)
            state.deleted.add(idx)
            trace.append({"event": "delete", "time": when, "player": idx, "bid": bid_vec[idx]})
        elif category == _OPEN:
            state.open_facilities.add(idx)
            joiners = sorted(
                i for i in state.unconnected if when - sd[i][idx] > 0.0
            )
            trace.append({"event": "open", "time": when, "facility": idx, "players": joiners})
            for i in joiners:
                state.unconnected.discard(i)
                state.connected[i] = idx
                state.prices[i] = when
                trace.append({"event": "connect", "time": when, "player": i, "facility": idx})
        else:
            state.unconnected.discard(idx)
            state.connected[idx] = extra
            state.prices[idx] = when
            trace.append({"event": "connect", "time": when, "player": idx, "facility": extra})

    incurred = sum(instance.opening_costs[q] for q in state.open_facilities)
    incurred += sum(instance.d(i, q) for i, q in state.connected.items())
    prices = tuple(state.prices.get(i, 0.0) for i in range(n))
    return MechanismOutcome(
        served=frozenset(state.connected),
        prices=prices,
        incurred_cost=incurred,
        trace=tuple(trace),
    )


def dmv_fl_single_facility_crosscheck(
    instance: FacilityLocationInstance,
    subset: int | Iterable[int],
) -> float:
    """Max gap between ghost prices and fill-time shares on scaled-down costs.

    Only meaningful for single-facility instances, where the two coincide.
    Participation is restricted to the given players by zeroing the others'
    bids (they are deleted at time 0 before contributing anything).
    """
    if instance.n_facilities != 1:
        raise InvalidInputError("cross-check requires exactly one facility")
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        return 0.0
    bids = [0.0] * instance.n_players
    for i in iter_bits(mask):
        bids[i] = math.inf
    outcome = run_dmv_fl(instance, bids)
    shares = pt_method(instance.scaled(1.0 / SCALE)).shares_mask(mask)
    return max(abs(outcome.prices[i] - shares[i]) for i in iter_bits(mask))
