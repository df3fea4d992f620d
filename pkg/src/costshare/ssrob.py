"""Single-sink rent-or-buy: instance, exact oracle, sampled-tree cost shares.

Capacity on an edge costs ``c_e * min(x, M)``. The exact oracle enumerates
hub sets W containing the root: buy a tree spanning W at M times tree cost,
rent every player's shortest path to W. The cost-share method samples each
player into a core set D with probability 1/M; sampled players pay M times
their primal-dual tree share on D, the rest pay their distance to D and the
root ("buy" and "rent" parts of the expectation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

from .core import (
    CapacityError,
    CostOracle,
    CostShareMethod,
    InvalidInputError,
    as_mask,
    bits_of,
    iter_bits,
    submasks,
)
from .steiner import SteinerInstance, jv_method, steiner_tree_cost_table


@dataclass(frozen=True)
class SSRoBInstance:
    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    root: int
    player_hosts: tuple[int, ...]
    M: float

    def __post_init__(self):
        if self.M < 1:
            raise InvalidInputError(f"M must be >= 1, got {self.M}", "M")
        object.__setattr__(self, "M", float(self.M))
        # graph invariants are enforced by the tree view below
        self.steiner_view

    @cached_property
    def steiner_view(self) -> SteinerInstance:
        return SteinerInstance(self.n_vertices, self.edges, self.root, self.player_hosts)

    @property
    def n_players(self) -> int:
        return len(self.player_hosts)

    @cached_property
    def dist(self) -> tuple[tuple[float, ...], ...]:
        return self.steiner_view.dist

    @cached_property
    def _jv(self) -> CostShareMethod:
        return jv_method(self.steiner_view)


def _hub_tables(instance: SSRoBInstance, cap: int) -> tuple[list[float], list[list[float]]]:
    """Per vertex-mask W: tree cost of spanning W, and min dist of each vertex to W."""
    n = instance.n_vertices
    if n > cap:
        raise CapacityError(f"{n} vertices exceed the rent-or-buy oracle cap {cap}")
    tree = steiner_tree_cost_table(instance.steiner_view, range(n), cap=cap)
    tree_list = [tree[w] for w in range(1 << n)]
    dist = instance.dist
    mindist: list[list[float]] = [[math.inf] * n]
    for w in range(1, 1 << n):
        low = (w & -w).bit_length() - 1
        rest = w & (w - 1)
        base = mindist[rest]
        mindist.append([min(base[v], dist[v][low]) for v in range(n)])
    return tree_list, mindist


def ssrob_optimal_cost(
    instance: SSRoBInstance,
    subset: int | Iterable[int],
    cap: int = 12,
) -> float:
    """Exact optimum over hub sets: min over W containing the root of
    M * tree(W) + sum of player distances to W."""
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        return 0.0
    tree, mindist = _cached_hub_tables(instance, cap)
    host_count: dict[int, int] = {}
    for i in iter_bits(mask):
        h = instance.player_hosts[i]
        host_count[h] = host_count.get(h, 0) + 1
    rootbit = 1 << instance.root
    best = math.inf
    for w in range(1 << instance.n_vertices):
        if not w & rootbit:
            continue
        cost = instance.M * tree[w]
        if cost >= best:
            continue
        md = mindist[w]
        cost += sum(cnt * md[h] for h, cnt in host_count.items())
        if cost < best:
            best = cost
    return best


@lru_cache(maxsize=None)
def _cached_hub_tables(instance: SSRoBInstance, cap: int):
    return _hub_tables(instance, cap)


def ssrob_oracle(instance: SSRoBInstance, cap: int = 12) -> CostOracle:
    @lru_cache(maxsize=None)
    def evaluate(mask: int) -> float:
        return ssrob_optimal_cost(instance, mask, cap=cap)

    return CostOracle("ssrob", instance.n_players, evaluate)


@dataclass(frozen=True)
class GstShareBreakdown:
    """Per-player buy/rent decomposition of the sampled-tree cost shares."""

    buy: dict[int, float]
    rent: dict[int, float]
    mode: str
    std_error: dict[int, float] | None = None

    @property
    def total(self) -> dict[int, float]:
        return {i: self.buy[i] + self.rent[i] for i in self.buy}


def _dist_to_group(instance: SSRoBInstance, player: int, dmask: int) -> float:
    """Shortest-path distance from a player to the sampled set or the root."""
    dist = instance.dist
    h = instance.player_hosts[player]
    best = dist[h][instance.root]
    for j in iter_bits(dmask):
        d = dist[h][instance.player_hosts[j]]
        if d < best:
            best = d
    return best


def _conditional_shares(instance: SSRoBInstance, smask: int, dmask: int) -> dict[int, float]:
    """Per-player conditional share given the sampled core set D."""
    jv = instance._jv.shares_mask(dmask) if dmask else {}
    out = {}
    for i in iter_bits(smask):
        if (dmask >> i) & 1:
            out[i] = instance.M * jv[i]
        else:
            out[i] = _dist_to_group(instance, i, dmask)
    return out


def gst_shares_exact(
    instance: SSRoBInstance,
    subset: int | Iterable[int],
    cap: int = 12,
) -> GstShareBreakdown:
    """Exact expectation over all core sets D, weighted (1/M)^|D| (1-1/M)^|S\\D|."""
    smask = as_mask(subset, instance.n_players)
    size = smask.bit_count()
    if size > cap:
        raise CapacityError(f"{size} players exceed the exact-expectation cap {cap}; use Monte Carlo")
    players = bits_of(smask)
    q = 1.0 / instance.M
    buy = {i: 0.0 for i in players}
    rent = {i: 0.0 for i in players}
    for dmask in submasks(smask):
        d_size = dmask.bit_count()
        weight = q ** d_size * (1.0 - q) ** (size - d_size)
        if weight == 0.0:
            continue
        cond = _conditional_shares(instance, smask, dmask)
        for i in players:
            if (dmask >> i) & 1:
                buy[i] += weight * cond[i]
            else:
                rent[i] += weight * cond[i]
    return GstShareBreakdown(buy=buy, rent=rent, mode="exact")


def gst_shares_mc(
    instance: SSRoBInstance,
    subset: int | Iterable[int],
    samples: int,
    seed: int,
) -> GstShareBreakdown:
    """Unbiased sample mean over independent draws of the core set D.

    Each draw uses a generator seeded from (seed, sample index), so results
    do not depend on evaluation order or worker count. Per-player standard
    errors come from a running variance of the conditional totals.
    """
    if samples < 1:
        raise InvalidInputError(f"samples must be >= 1, got {samples}")
    smask = as_mask(subset, instance.n_players)
    players = bits_of(smask)
    q = 1.0 / instance.M
    buy_mean = {i: 0.0 for i in players}
    rent_mean = {i: 0.0 for i in players}
    mean = {i: 0.0 for i in players}
    m2 = {i: 0.0 for i in players}
    cond_cache: dict[int, dict[int, float]] = {}
    for idx in range(samples):
        rng = np.random.default_rng([seed, idx])
        draws = rng.random(len(players))
        dmask = 0
        for pos, i in enumerate(players):
            if draws[pos] < q:
                dmask |= 1 << i
        cond = cond_cache.get(dmask)
        if cond is None:
            cond = cond_cache[dmask] = _conditional_shares(instance, smask, dmask)
        count = idx + 1
        for i in players:
            value = cond[i]
            sampled = (dmask >> i) & 1
            buy_mean[i] += ((value if sampled else 0.0) - buy_mean[i]) / count
            rent_mean[i] += ((0.0 if sampled else value) - rent_mean[i]) / count
            delta = value - mean[i]
            mean[i] += delta / count
            m2[i] += delta * (value - mean[i])
    std_error = {
        i: math.sqrt(m2[i] / (samples - 1) / samples) if samples > 1 else math.nan
        for i in players
    }
    return GstShareBreakdown(
        buy=buy_mean,
        rent=rent_mean,
        mode=f"monte-carlo(seed={seed}, samples={samples})",
        std_error=std_error,
    )


def gst_method(
    instance: SSRoBInstance,
    mode: str = "exact",
    samples: int = 20000,
    seed: int = 0,
    cap: int = 12,
) -> CostShareMethod:
    """Total sampled-tree shares packaged as a cost-share method."""
    if mode not in ("exact", "monte-carlo"):
        raise InvalidInputError(f"unknown share mode {mode!r}")

    @lru_cache(maxsize=None)
    def shares_mask(mask: int) -> dict[int, float]:
        if mask == 0:
            return {}
        if mode == "exact":
            return gst_shares_exact(instance, mask, cap=cap).total
        return gst_shares_mc(instance, mask, samples=samples, seed=seed).total

    return CostShareMethod("GST" if mode == "exact" else "GST-MC", instance.n_players, shares_mask)
