"""Uncapacitated facility location: instance model, exact oracle, fill-time shares.

The cost-sharing method grows a ball around every requested player at unit
rate; ball growth past a facility fills that facility's opening cost, and a
player's share is the first time a full facility lies inside its ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from . import graphs
from .core import (
    EPS,
    CapacityError,
    CostOracle,
    CostShareMethod,
    InvalidInputError,
    as_mask,
    bits_of,
    iter_bits,
)


@dataclass(frozen=True)
class FacilityLocationInstance:
    """Players and facilities embedded in a common metric.

    ``metric`` is a square matrix over all points, players first (indices
    ``0..n_players-1``) then facilities (``n_players..n_players+n_facilities-1``).
    """

    n_players: int
    opening_costs: tuple[float, ...]
    metric: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "opening_costs", tuple(float(f) for f in self.opening_costs))
        object.__setattr__(self, "metric", tuple(tuple(float(x) for x in row) for row in self.metric))
        self._validate()

    def _validate(self) -> None:
        if self.n_players < 1:
            raise InvalidInputError("instance needs at least one player", "n_players")
        if not self.opening_costs:
            raise InvalidInputError("instance needs at least one facility", "opening_costs")
        for q, f in enumerate(self.opening_costs):
            if f < 0 or math.isnan(f):
                raise InvalidInputError(f"opening cost of facility {q} must be >= 0", f"opening_costs[{q}]")
        n = self.n_players + self.n_facilities
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise InvalidInputError(f"metric must be {n}x{n} (players then facilities)", "metric")
        m = self.metric
        for a in range(n):
            if m[a][a] != 0.0:
                raise InvalidInputError(f"metric diagonal must be zero at {a}", f"metric[{a}][{a}]")
            for b in range(n):
                if m[a][b] < 0 or math.isnan(m[a][b]):
                    raise InvalidInputError(f"metric entry ({a},{b}) must be >= 0", f"metric[{a}][{b}]")
                if abs(m[a][b] - m[b][a]) > EPS:
                    raise InvalidInputError(f"metric not symmetric at ({a},{b})", f"metric[{a}][{b}]")
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if m[a][b] > m[a][c] + m[c][b] + EPS:
                        raise InvalidInputError(
                            f"triangle inequality fails on ({a},{b},{c})", f"metric[{a}][{b}]"
                        )

    @property
    def n_facilities(self) -> int:
        return len(self.opening_costs)

    def d(self, player: int, facility: int) -> float:
        return self.metric[player][self.n_players + facility]

    def scaled(self, factor: float) -> "FacilityLocationInstance":
        """Same layout with every distance and opening cost multiplied by factor."""
        return FacilityLocationInstance(
            self.n_players,
            tuple(f * factor for f in self.opening_costs),
            tuple(tuple(x * factor for x in row) for row in self.metric),
        )

    @classmethod
    def colocated(cls, k: int, opening: float = 1.0) -> "FacilityLocationInstance":
        """k players sitting on top of a single facility."""
        n = k + 1
        return cls(k, (opening,), tuple(tuple(0.0 for _ in range(n)) for _ in range(n)))

    @classmethod
    def on_ray(cls, distances: Sequence[float], opening: float = 1.0) -> "FacilityLocationInstance":
        """Single facility at the origin, players on one ray at given distances."""
        pts = [float(d) for d in distances] + [0.0]
        n = len(pts)
        metric = tuple(tuple(abs(pts[a] - pts[b]) for b in range(n)) for a in range(n))
        return cls(len(distances), (opening,), metric)

    @classmethod
    def from_points(
        cls,
        player_points: Sequence[tuple[float, float]],
        facility_points: Sequence[tuple[float, float]],
        opening_costs: Sequence[float],
    ) -> "FacilityLocationInstance":
        pts = list(player_points) + list(facility_points)
        metric = tuple(
            tuple(math.dist(a, b) for b in pts)
            for a in pts
        )
        return cls(len(player_points), tuple(opening_costs), metric)

    @classmethod
    def from_graph(
        cls,
        n_vertices: int,
        edges: Sequence[tuple[int, int, float]],
        player_vertices: Sequence[int],
        facility_vertices: Sequence[int],
        opening_costs: Sequence[float],
    ) -> "FacilityLocationInstance":
        """Metric taken as the shortest-path closure of an undirected graph."""
        graphs.check_edges(n_vertices, edges)
        if not graphs.is_connected(n_vertices, edges):
            raise InvalidInputError("graph must be connected", "edges")
        closure = graphs.shortest_path_closure(n_vertices, edges)
        pts = list(player_vertices) + list(facility_vertices)
        for v in pts:
            if not 0 <= v < n_vertices:
                raise InvalidInputError(f"point vertex {v} outside graph", "player_vertices")
        metric = tuple(tuple(closure[a][b] for b in pts) for a in pts)
        return cls(len(player_vertices), tuple(opening_costs), metric)


def fl_optimal_cost(
    instance: FacilityLocationInstance,
    subset: int | Iterable[int],
    cap: int = 16,
) -> tuple[float, frozenset[int], dict[int, int]]:
    """Exact optimum by enumerating nonempty facility subsets.

    Returns (cost, opened facilities, player -> facility assignment); the
    empty player set opens nothing and costs 0. Cost ties prefer the
    lexicographically smallest facility set.
    """
    if instance.n_facilities > cap:
        raise CapacityError(f"{instance.n_facilities} facilities exceed enumeration cap {cap}")
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        return 0.0, frozenset(), {}
    players = bits_of(mask)
    best_cost = math.inf
    best_key: tuple[int, ...] | None = None
    best_open: tuple[int, ...] = ()
    for fmask in range(1, 1 << instance.n_facilities):
        opened = bits_of(fmask)
        cost = sum(instance.opening_costs[q] for q in opened)
        for i in players:
            cost += min(instance.d(i, q) for q in opened)
        key = opened
        if cost < best_cost or (cost == best_cost and best_key is not None and key < best_key):
            best_cost, best_key, best_open = cost, key, opened
    assignment = {
        i: min(best_open, key=lambda q: (instance.d(i, q), q))
        for i in players
    }
    return best_cost, frozenset(best_open), assignment


def fl_oracle(instance: FacilityLocationInstance, cap: int = 16) -> CostOracle:
    @lru_cache(maxsize=None)
    def evaluate(mask: int) -> float:
        return fl_optimal_cost(instance, mask, cap=cap)[0]

    return CostOracle("facility-location", instance.n_players, evaluate)


def _fill_time(opening: float, distances: Sequence[float]) -> float:
    """Unique t with sum_i max(0, t - d_i) = opening, by breakpoint scan."""
    d = sorted(distances)
    prefix = 0.0
    for j, dj in enumerate(d, start=1):
        prefix += dj
        t = (opening + prefix) / j
        upper = d[j] if j < len(d) else math.inf
        if t <= upper:
            return t
    raise AssertionError("fill-time scan always terminates on the last segment")


def pt_fill_times(
    instance: FacilityLocationInstance,
    subset: int | Iterable[int],
) -> dict[int, float]:
    """Fill time of every facility against the balls of the given players."""
    mask = as_mask(subset, instance.n_players)
    if mask == 0:
        raise InvalidInputError("fill times undefined for the empty player set")
    players = bits_of(mask)
    return {
        q: _fill_time(instance.opening_costs[q], [instance.d(i, q) for i in players])
        for q in range(instance.n_facilities)
    }


def pt_cost_share(
    instance: FacilityLocationInstance,
    player: int,
    subset: int | Iterable[int],
) -> float:
    """First time a full facility lies in the player's ball."""
    mask = as_mask(subset, instance.n_players)
    if not (mask >> player) & 1:
        raise InvalidInputError(f"share undefined: player {player} not in subset")
    times = pt_fill_times(instance, mask)
    return min(max(t, instance.d(player, q)) for q, t in times.items())


def pt_method(instance: FacilityLocationInstance) -> CostShareMethod:
    """Fill-time cost shares packaged for the mechanism and analysis layers."""

    @lru_cache(maxsize=None)
    def shares_mask(mask: int) -> dict[int, float]:
        if mask == 0:
            return {}
        times = pt_fill_times(instance, mask)
        return {
            i: min(max(t, instance.d(i, q)) for q, t in times.items())
            for i in iter_bits(mask)
        }

    return CostShareMethod("PT", instance.n_players, shares_mask)
