"""Rooted Steiner tree: instance model, exact oracle, primal-dual cost shares.

The exact oracle is the classic dynamic program over terminal subsets. The
cost-share method simulates uniform dual (moat) growth on the shortest-path
closure: terminal components grow at unit rate, each component's growth is
charged equally to the players it contains, components merge when the
distance between them is exhausted, and a component freezes once it reaches
the root component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable

from . import graphs
from .core import (
    CapacityError,
    CostOracle,
    CostShareMethod,
    InvalidInputError,
    as_mask,
    iter_bits,
)


@dataclass(frozen=True)
class SteinerInstance:
    """Undirected graph with a root; players live on host vertices."""

    n_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    root: int
    player_hosts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple((int(u), int(v), float(c)) for u, v, c in self.edges)
        )
        object.__setattr__(self, "player_hosts", tuple(int(h) for h in self.player_hosts))
        graphs.check_edges(self.n_vertices, self.edges)
        if not 0 <= self.root < self.n_vertices:
            raise InvalidInputError(f"root {self.root} outside graph", "root")
        for i, h in enumerate(self.player_hosts):
            if not 0 <= h < self.n_vertices:
                raise InvalidInputError(f"player {i} hosted at unknown vertex {h}", "player_vertices")
        if not graphs.is_connected(self.n_vertices, self.edges):
            raise InvalidInputError("graph must be connected", "edges")

    @property
    def n_players(self) -> int:
        return len(self.player_hosts)

    @cached_property
    def dist(self) -> tuple[tuple[float, ...], ...]:
        return graphs.shortest_path_closure(self.n_vertices, self.edges)


def _terminal_dp(instance: SteinerInstance, terms: list[int]) -> list[list[float]]:
    """dp[mask][v] = cheapest tree spanning {terms[i]: i in mask} plus vertex v.

    Dynamic program over terminal subsets anchored at each vertex; the
    metric-closure relaxation step replaces repeated edge scans.
    """
    n = instance.n_vertices
    dist = instance.dist
    full = (1 << len(terms)) - 1
    dp = [[math.inf] * n for _ in range(full + 1)]
    dp[0] = [0.0] * n
    for idx, tv in enumerate(terms):
        dp[1 << idx] = list(dist[tv])
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        row = dp[mask]
        sub = (mask - 1) & mask
        while sub:
            comp = mask ^ sub
            if sub <= comp:
                a, b = dp[sub], dp[comp]
                for v in range(n):
                    c = a[v] + b[v]
                    if c < row[v]:
                        row[v] = c
            sub = (sub - 1) & mask
        dp[mask] = [
            min(row[w] + dist[w][v] for w in range(n))
            for v in range(n)
        ]
    return dp


def steiner_tree_cost(instance: SteinerInstance, terminals: Iterable[int], cap: int = 12) -> float:
    """Minimum cost of a connected subgraph spanning the given vertices."""
    terms = sorted(set(terminals))
    if len(terms) <= 1:
        return 0.0
    if len(terms) > cap:
        raise CapacityError(f"{len(terms)} terminals exceed the dynamic-program cap {cap}")
    dp = _terminal_dp(instance, terms)
    return dp[(1 << len(terms)) - 1][terms[0]]


def steiner_tree_cost_table(
    instance: SteinerInstance, terminals: Iterable[int], cap: int = 12
) -> dict[int, float]:
    """Spanning cost of every subset of ``terminals``, keyed by subset mask."""
    terms = sorted(set(terminals))
    if len(terms) > cap:
        raise CapacityError(f"{len(terms)} terminals exceed the dynamic-program cap {cap}")
    if not terms:
        return {0: 0.0}
    dp = _terminal_dp(instance, terms)
    table = {0: 0.0}
    for mask in range(1, 1 << len(terms)):
        anchor = terms[(mask & -mask).bit_length() - 1]
        table[mask] = dp[mask][anchor]
    return table


def steiner_optimal_cost(
    instance: SteinerInstance,
    subset: int | Iterable[int],
    cap: int = 12,
) -> float:
    """Exact cost of connecting the hosts of the given players to the root."""
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        return 0.0
    terminals = {instance.player_hosts[i] for i in iter_bits(mask)}
    terminals.add(instance.root)
    return steiner_tree_cost(instance, terminals, cap=cap)


def steiner_oracle(instance: SteinerInstance, cap: int = 12) -> CostOracle:
    @lru_cache(maxsize=None)
    def evaluate(mask: int) -> float:
        return steiner_optimal_cost(instance, mask, cap=cap)

    return CostOracle("steiner", instance.n_players, evaluate)


@dataclass
class MoatState:
    """Final state of one moat-growth run (internal to the share computation)."""

    shares: dict[int, float]
    vertex_activity: dict[int, float]
    pair_load: dict[tuple[int, int], float]
    merges: list[dict] = field(default_factory=list)


def simulate_moats(instance: SteinerInstance, subset: int | Iterable[int]) -> MoatState:
    """Grow duals around the requested players' hosts until all reach the root.

    Components are sets of terminal vertices; a pair of vertices in distinct
    components becomes tight when their accumulated activities cover their
    closure distance. Simultaneous tight pairs resolve by ascending component
    ids (root component is 0, then host vertices in ascending order).
    """
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        raise InvalidInputError("cost shares undefined for the empty player set")
    dist = instance.dist
    root = instance.root
    players_at: dict[int, list[int]] = {}
    for i in iter_bits(mask):
        players_at.setdefault(instance.player_hosts[i], []).append(i)

    vertices = sorted(set(players_at) | {root})
    comp_id = {root: 0}
    for v in vertices:
        if v != root:
            comp_id[v] = len(comp_id)
    members: dict[int, list[int]] = {}
    for v in vertices:
        members.setdefault(comp_id[v], []).append(v)

    activity = {v: 0.0 for v in vertices}
    shares = {i: 0.0 for i in iter_bits(mask)}
    pair_load = {(u, v): 0.0 for a, u in enumerate(vertices) for v in vertices[a + 1:]}
    merges: list[dict] = []
    clock = 0.0

    def comp_active(cid: int) -> bool:
        return root not in members[cid]

    def comp_players(cid: int) -> list[int]:
        return [i for v in members[cid] for i in players_at.get(v, [])]

    while len(members) > 1:
        best = None  # (delta, low_cid, high_cid, u, v)
        for a, u in enumerate(vertices):
            cu = comp_id[u]
            ru = comp_active(cu)
            for v in vertices[a + 1:]:
                cv = comp_id[v]
                if cu == cv:
                    continue
                rate = ru + comp_active(cv)
                if rate == 0:
                    continue
                delta = max(0.0, (dist[u][v] - activity[u] - activity[v]) / rate)
                key = (delta, min(cu, cv), max(cu, cv), u, v)
                if best is None or key < best:
                    best = key
        delta, _, _, mu, mv = best
        if delta > 0.0:
            for cid in members:
                if not comp_active(cid):
                    continue
                for v in members[cid]:
                    activity[v] += delta
                belong = comp_players(cid)
                for i in belong:
                    shares[i] += delta / len(belong)
            for (u, v), _ in pair_load.items():
                cu, cv = comp_id[u], comp_id[v]
                if cu != cv:
                    pair_load[(u, v)] += delta * (comp_active(cu) + comp_active(cv))
            clock += delta
        keep, absorb = sorted((comp_id[mu], comp_id[mv]))
        merges.append({"time": clock, "components": (keep, absorb), "via": (mu, mv)})
        for v in members.pop(absorb):
            comp_id[v] = keep
            members[keep].append(v)

    return MoatState(shares=shares, vertex_activity=activity, pair_load=pair_load, merges=merges)


def jv_cost_shares(instance: SteinerInstance, subset: int | Iterable[int]) -> dict[int, float]:
    """Per-player dual growth accumulated before reaching the root component."""
    return simulate_moats(instance, subset).shares


def jv_method(instance: SteinerInstance) -> CostShareMethod:
    @lru_cache(maxsize=None)
    def shares_mask(mask: int) -> dict[int, float]:
        if mask == 0:
            return {}
        return simulate_moats(instance, mask).shares

    return CostShareMethod("JV", instance.n_players, shares_mask)
