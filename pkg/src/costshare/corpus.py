"""Seeded instance generators backing the bundled corpus and the test suites."""

from __future__ import annotations

import random
from typing import Sequence

from .core import CostOracle
from .facloc import FacilityLocationInstance
from .setcover import SetCoverInstance
from .ssrob import SSRoBInstance
from .steiner import SteinerInstance


def colocated_facility(k: int, opening: float = 1.0) -> FacilityLocationInstance:
    return FacilityLocationInstance.colocated(k, opening)


def two_distance_facility() -> FacilityLocationInstance:
    """Two players at 0.2 and 0.4 on a ray through a unit-cost facility."""
    return FacilityLocationInstance.on_ray([0.2, 0.4], opening=1.0)


def single_player_facility(distance: float = 2.0, opening: float = 1.0) -> FacilityLocationInstance:
    return FacilityLocationInstance.on_ray([distance], opening=opening)


def random_facility_instances(
    count: int,
    seed: int,
    max_players: int = 5,
    max_facilities: int = 3,
) -> list[FacilityLocationInstance]:
    """Random euclidean layouts; the plane embedding guarantees a metric."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(2, max_players)
        f = rng.randint(1, max_facilities)
        players = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(n)]
        facilities = [(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(f)]
        openings = [rng.uniform(0.1, 1.2) for _ in range(f)]
        out.append(FacilityLocationInstance.from_points(players, facilities, openings))
    return out


def _random_graph(rng: random.Random, max_vertices: int) -> tuple[int, list[tuple[int, int, float]]]:
    n = rng.randint(3, max_vertices)
    edges = []
    for v in range(1, n):
        u = rng.randrange(v)
        edges.append((u, v, rng.uniform(0.2, 1.5)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < 0.25:
                edges.append((u, v, rng.uniform(0.2, 2.0)))
    return n, edges


def path_steiner(n_terminals: int = 3, spacing: float = 1.0) -> SteinerInstance:
    """Players strung along a path away from the root."""
    edges = tuple((v, v + 1, spacing) for v in range(n_terminals))
    return SteinerInstance(
        n_vertices=n_terminals + 1,
        edges=edges,
        root=0,
        player_hosts=tuple(range(1, n_terminals + 1)),
    )


def single_player_steiner(distance: float = 2.0) -> SteinerInstance:
    return SteinerInstance(2, ((0, 1, distance),), 0, (1,))


def colocated_steiner(k: int, distance: float = 1.0) -> SteinerInstance:
    return SteinerInstance(2, ((0, 1, distance),), 0, tuple(1 for _ in range(k)))


def random_steiner_instances(
    count: int,
    seed: int,
    max_vertices: int = 8,
    max_players: int = 5,
) -> list[SteinerInstance]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n, edges = _random_graph(rng, max_vertices)
        k = rng.randint(1, max_players)
        hosts = tuple(rng.randrange(n) for _ in range(k))
        out.append(SteinerInstance(n, tuple(edges), 0, hosts))
    return out


def random_ssrob_instances(
    count: int,
    seed: int,
    max_vertices: int = 8,
    max_players: int = 5,
    m_choices: Sequence[float] = (1.0, 2.0, 4.0),
) -> list[SSRoBInstance]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n, edges = _random_graph(rng, max_vertices)
        k = rng.randint(1, max_players)
        hosts = tuple(rng.randrange(n) for _ in range(k))
        out.append(SSRoBInstance(n, tuple(edges), 0, hosts, rng.choice(list(m_choices))))
    return out


def three_set_cover() -> SetCoverInstance:
    """Two players, singletons at cost 1 each and the pair at cost 1.5."""
    return SetCoverInstance(2, ((1.0, frozenset({0})), (1.0, frozenset({1})), (1.5, frozenset({0, 1}))))


def random_setcover_instances(
    count: int,
    seed: int,
    max_players: int = 4,
    max_sets: int = 6,
) -> list[SetCoverInstance]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(2, max_players)
        sets: list[tuple[float, frozenset[int]]] = []
        for _ in range(rng.randint(1, max_sets - n)):
            members = frozenset(i for i in range(n) if rng.random() < 0.5)
            if members:
                sets.append((rng.uniform(0.5, 2.0), members))
        covered = set().union(*(m for _, m in sets)) if sets else set()
        for i in range(n):
            if i not in covered:
                sets.append((rng.uniform(0.5, 2.0), frozenset({i})))
        out.append(SetCoverInstance(n, tuple(sets)))
    return out


def random_valuations(oracle: CostOracle, seed: int, spread: float = 2.0) -> tuple[float, ...]:
    """Valuations scaled to each player's stand-alone cost, so corpus runs
    mix served and dropped players."""
    rng = random.Random(seed)
    vals = []
    for i in range(oracle.n_players):
        solo = oracle.evaluate_mask(1 << i)
        vals.append(rng.uniform(0.0, spread * solo + 0.1))
    return tuple(vals)
