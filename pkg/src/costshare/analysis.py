"""Summability measurement, the layered lower-bound network, incentive checks.

Summability of a cost-share method is the worst ratio, over subsets S and
orderings of S, of the prefix-sum of shares to C(S); it controls the
efficiency loss of the bid-screening mechanism. The layered network grows a
unit root edge into levels of parallel two-hop refinements and hosts groups
of co-located players whose prefix shares are tested against per-level
thresholds. Incentive checks brute-force unilateral and coalition bid
deviations on finite grids.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .core import (
    CapacityError,
    CostOracle,
    CostShareMethod,
    EPS,
    InvalidInputError,
    MechanismOutcome,
    as_mask,
    as_profile,
    bits_of,
    harmonic,
    iter_bits,
    mask_of,
)
from .steiner import SteinerInstance

MechanismRunner = Callable[[Sequence[float]], MechanismOutcome]


# ---------------------------------------------------------------------------
# summability

@dataclass(frozen=True)
class SummabilityReport:
    value: float
    subset: frozenset[int]
    ordering: tuple[int, ...]
    cost: float
    ratio: float
    search_mode: str


def _ratio(value: float, cost: float) -> float:
    if cost > EPS:
        return value / cost
    return 0.0 if value <= EPS else math.inf


def _prefix_sum(method: CostShareMethod, ordering: Sequence[int]) -> float:
    total = 0.0
    prefix = 0
    for i in ordering:
        prefix |= 1 << i
        total += method.shares_mask(prefix)[i]
    return total


def summability_for(
    method: CostShareMethod,
    oracle: CostOracle,
    subset: int | Iterable[int],
    ordering: Sequence[int],
) -> SummabilityReport:
    """Prefix-sum of shares along one ordering, relative to C(S)."""
    mask = as_mask(subset, method.n_players)
    ordering = tuple(ordering)
    if mask_of(ordering) != mask or len(ordering) != mask.bit_count():
        raise InvalidInputError("ordering must be a permutation of the subset")
    value = _prefix_sum(method, ordering)
    cost = oracle.evaluate_mask(mask)
    return SummabilityReport(
        value=value,
        subset=frozenset(iter_bits(mask)),
        ordering=ordering,
        cost=cost,
        ratio=_ratio(value, cost),
        search_mode="fixed",
    )


def _greedy_ordering(method: CostShareMethod, mask: int) -> tuple[int, ...]:
    """Forward-build an ordering, always picking the largest next share."""
    remaining = set(iter_bits(mask))
    prefix = 0
    order: list[int] = []
    while remaining:
        best_i, best_s = None, -math.inf
        for i in sorted(remaining):
            s = method.shares_mask(prefix | (1 << i))[i]
            if s > best_s:
                best_i, best_s = i, s
        order.append(best_i)
        remaining.discard(best_i)
        prefix |= 1 << best_i
    return tuple(order)


def worst_summability(
    method: CostShareMethod,
    oracle: CostOracle,
    mode: str = "exhaustive",
    trials: int = 200,
    seed: int = 0,
    cap: int = 8,
) -> SummabilityReport:
    """Worst prefix-sum ratio over subsets and orderings.

    Exhaustive mode enumerates everything (universe capped); random mode
    takes seeded (subset, ordering) draws plus a greedy ordering per drawn
    subset and for the full universe.
    """
    n = method.n_players
    best: SummabilityReport | None = None

    def consider(mask: int, order: tuple[int, ...], label: str) -> None:
        nonlocal best
        value = _prefix_sum(method, order)
        cost = oracle.evaluate_mask(mask)
        report = SummabilityReport(
            value=value,
            subset=frozenset(iter_bits(mask)),
            ordering=order,
            cost=cost,
            ratio=_ratio(value, cost),
            search_mode=label,
        )
        if best is None or report.ratio > best.ratio:
            best = report

    if mode == "exhaustive":
        if n > cap:
            raise CapacityError(f"{n} players exceed the exhaustive ordering cap {cap}")
        for mask in range(1, 1 << n):
            for order in itertools.permutations(bits_of(mask)):
                consider(mask, order, "exhaustive")
    elif mode == "random":
        rng = random.Random(seed)
        label = f"random(seed={seed}, trials={trials})"
        full = (1 << n) - 1
        consider(full, _greedy_ordering(method, full), label)
        for _ in range(trials):
            mask = rng.randrange(1, 1 << n)
            order = list(iter_bits(mask))
            rng.shuffle(order)
            consider(mask, tuple(order), label)
            consider(mask, _greedy_ordering(method, mask), label)
    else:
        raise InvalidInputError(f"unknown search mode {mode!r}")
    return best


def random_order_expected_summability(
    method: CostShareMethod,
    oracle: CostOracle,
    subset: int | Iterable[int],
    trials: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and standard error of the ratio over uniform random orderings."""
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    mask = as_mask(subset, method.n_players)
    rng = random.Random(seed)
    base = list(iter_bits(mask))
    cost = oracle.evaluate_mask(mask)
    ratios = []
    for _ in range(trials):
        order = base[:]
        rng.shuffle(order)
        ratios.append(_ratio(_prefix_sum(method, order), cost))
    mean = sum(ratios) / trials
    if trials > 1:
        var = sum((r - mean) ** 2 for r in ratios) / (trials - 1)
        stderr = math.sqrt(var / trials)
    else:
        stderr = math.nan
    return mean, stderr


# ---------------------------------------------------------------------------
# layered lower-bound construction

@dataclass(frozen=True)
class LowerBoundConstruction:
    """Layered refinement of a unit root edge with co-located player groups.

    Level-j edges cost 2^-j; each level-(j-1) edge maps to m disjoint two-hop
    paths through fresh vertices, each hosting a group of sqrt(k) players.
    """

    k: int
    beta: float
    m: int
    p: int
    instance: SteinerInstance
    level_vertices: tuple[tuple[int, ...], ...]
    level_edges: tuple[tuple[tuple[int, int], ...], ...]
    # groups[j][parent_edge][r] = (vertex, players); index j counts from level 1
    groups: tuple[tuple[tuple[tuple[int, tuple[int, ...]], ...], ...], ...]
    u0: tuple[int, ...]

    @property
    def sqrt_k(self) -> int:
        return math.isqrt(self.k)

    def edge_cost(self, level: int) -> float:
        return 2.0 ** -level

    def groups_at(self, level: int) -> tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]:
        if not 1 <= level <= self.p:
            raise InvalidInputError(f"level {level} outside 1..{self.p}")
        return self.groups[level - 1]


def predicted_m(k: int, beta: float) -> int:
    """The analysis-scale group count, ceil(8 * beta * sqrt(k) * (2 beta)^sqrt(k))."""
    sqrt_k = math.isqrt(k)
    return math.ceil(8 * beta * sqrt_k * (2 * beta) ** sqrt_k)


def build_lower_bound(
    k: int,
    beta: float,
    m_override: int | None = None,
    vertex_cap: int = 5000,
) -> LowerBoundConstruction:
    """Build the layered network with sqrt(k) co-located players per vertex."""
    sqrt_k = math.isqrt(k)
    if k < 4 or sqrt_k * sqrt_k != k or (sqrt_k & (sqrt_k - 1)) != 0:
        raise InvalidInputError(f"k must be a power of 4 and >= 4, got {k}")
    if beta < 1:
        raise InvalidInputError(f"beta must be >= 1, got {beta}")
    if m_override is not None and m_override < 2:
        raise InvalidInputError(f"m override must be >= 2, got {m_override}")
    m = m_override if m_override is not None else predicted_m(k, beta)
    p = sqrt_k.bit_length() - 1  # (log2 k) / 2

    n_vertices = 2
    edge_count = 1
    for _ in range(p):
        n_vertices += m * edge_count
        edge_count *= 2 * m
    if n_vertices > vertex_cap:
        raise CapacityError(
            f"construction needs {n_vertices} vertices at m={m} (cap {vertex_cap}); "
            "pass a small m override for desk-scale runs"
        )

    level_vertices: list[tuple[int, ...]] = [(0, 1)]
    level_edges: list[list[tuple[int, int]]] = [[(0, 1)]]
    groups: list[list[list[tuple[int, tuple[int, ...]]]]] = []
    hosts: list[int] = [1] * sqrt_k  # players of the base group live at vertex 1
    u0 = tuple(range(sqrt_k))
    next_vertex = 2
    for j in range(1, p + 1):
        new_vertices: list[int] = []
        new_edges: list[tuple[int, int]] = []
        level_groups: list[list[tuple[int, tuple[int, ...]]]] = []
        for (v, w) in level_edges[j - 1]:
            edge_groups: list[tuple[int, tuple[int, ...]]] = []
            for _ in range(m):
                x = next_vertex
                next_vertex += 1
                new_vertices.append(x)
                new_edges.append((v, x))
                new_edges.append((x, w))
                players = tuple(range(len(hosts), len(hosts) + sqrt_k))
                hosts.extend([x] * sqrt_k)
                edge_groups.append((x, players))
            level_groups.append(edge_groups)
        level_vertices.append(tuple(new_vertices))
        level_edges.append(new_edges)
        groups.append(level_groups)

    cost_p = 2.0 ** -p
    instance = SteinerInstance(
        n_vertices=next_vertex,
        edges=tuple((u, v, cost_p) for u, v in level_edges[p]),
        root=0,
        player_hosts=tuple(hosts),
    )
    return LowerBoundConstruction(
        k=k,
        beta=float(beta),
        m=m,
        p=p,
        instance=instance,
        level_vertices=tuple(level_vertices),
        level_edges=tuple(tuple(e) for e in level_edges),
        groups=tuple(tuple(tuple(eg) for eg in lg) for lg in groups),
        u0=u0,
    )


@dataclass(frozen=True)
class GroupAudit:
    """Threshold trail for one tested group (level 0 is the base group)."""

    level: int
    parent_edge: int
    group_index: int
    ordering: tuple[int, ...]
    shares: tuple[float, ...]
    thresholds: tuple[float, ...]
    good: bool


@dataclass(frozen=True)
class EdgeStatus:
    level: int
    parent_edge: int
    endpoints: tuple[int, int]
    active: bool
    chosen_group: int | None  # None when active but no group passed


@dataclass(frozen=True)
class GoodGroupSelection:
    selected: frozenset[int]
    ordering: tuple[int, ...]
    edge_status: tuple[EdgeStatus, ...]
    audits: tuple[GroupAudit, ...]
    complete: bool  # every active edge selected a group
    all_groups_good: bool  # complete, and the base group also cleared its thresholds
    level_sizes_ok: bool | None
    level_costs: tuple[float, ...] | None
    prefix_sum: float | None
    prefix_ratio: float | None
    target_bound: float


def _test_group(
    method: CostShareMethod,
    base_mask: int,
    players: Sequence[int],
    threshold_base: float,
    exhaustive_limit: int = 4,
) -> tuple[bool, tuple[int, ...], tuple[float, ...], tuple[float, ...]]:
    """Greedy peel: at step l pick the largest remaining share; must clear
    threshold_base / l. Falls back to exhaustive ordering search for small
    groups when the greedy order fails."""

    def run(order: Sequence[int]) -> tuple[bool, list[float], list[float]]:
        prefix = base_mask
        shares, thresholds = [], []
        for pos, i in enumerate(order, start=1):
            prefix |= 1 << i
            s = method.shares_mask(prefix)[i]
            thr = threshold_base / pos
            shares.append(s)
            thresholds.append(thr)
            if s < thr - EPS:
                return False, shares, thresholds
        return True, shares, thresholds

    remaining = set(players)
    prefix = base_mask
    order: list[int] = []
    shares: list[float] = []
    thresholds: list[float] = []
    good = True
    for pos in range(1, len(players) + 1):
        cand_shares = {i: method.shares_mask(prefix | (1 << i))[i] for i in sorted(remaining)}
        top = max(cand_shares.values())
        pick = min(i for i, s in cand_shares.items() if s == top)
        thr = threshold_base / pos
        order.append(pick)
        shares.append(top)
        thresholds.append(thr)
        remaining.discard(pick)
        prefix |= 1 << pick
        if top < thr - EPS:
            good = False
            break
    if good:
        return True, tuple(order), tuple(shares), tuple(thresholds)
    if len(players) <= exhaustive_limit:
        for perm in itertools.permutations(sorted(players)):
            ok, s, thr = run(perm)
            if ok:
                return True, perm, tuple(s), tuple(thr)
    return False, tuple(order), tuple(shares), tuple(thresholds)


def select_good_groups(
    construction: LowerBoundConstruction,
    method: CostShareMethod,
    oracle: CostOracle,
) -> GoodGroupSelection:
    """Walk levels and active edges, keeping the first group that clears the
    per-position thresholds; failures are reported, never raised."""
    beta = construction.beta
    audits: list[GroupAudit] = []
    statuses: list[EdgeStatus] = []
    sigma: list[int] = []
    selected = 0
    active_vertices = {construction.instance.root}

    # base group is always included; its threshold trail is still recorded
    base_good, order, shares, thresholds = _test_group(method, 0, construction.u0, 1.0 / (4 * beta))
    audits.append(GroupAudit(0, -1, 0, order, shares, thresholds, base_good))
    base_order = order if len(order) == len(construction.u0) else tuple(construction.u0)
    sigma.extend(base_order)
    selected |= mask_of(construction.u0)
    active_vertices.add(construction.instance.player_hosts[construction.u0[0]])
    complete = True
    level_masks = [selected]

    for j in range(1, construction.p + 1):
        threshold_base = construction.edge_cost(j) / (4 * beta)
        for e_idx, (v, w) in enumerate(construction.level_edges[j - 1]):
            active = v in active_vertices and w in active_vertices
            if not active:
                statuses.append(EdgeStatus(j, e_idx, (v, w), False, None))
                continue
            chosen = None
            for r, (x, players) in enumerate(construction.groups_at(j)[e_idx]):
                ok, order, shares, thresholds = _test_group(method, selected, players, threshold_base)
                audits.append(GroupAudit(j, e_idx, r, order, shares, thresholds, ok))
                if ok:
                    chosen = r
                    sigma.extend(order)
                    selected |= mask_of(players)
                    active_vertices.add(x)
                    break
            statuses.append(EdgeStatus(j, e_idx, (v, w), True, chosen))
            if chosen is None:
                complete = False
        level_masks.append(selected)

    sqrt_k = construction.sqrt_k
    level_sizes_ok = None
    level_costs = None
    prefix_sum = None
    prefix_ratio = None
    if complete:
        sizes = [level_masks[0].bit_count()] + [
            (level_masks[j] & ~level_masks[j - 1]).bit_count()
            for j in range(1, construction.p + 1)
        ]
        expected = [sqrt_k] + [2 ** (j - 1) * sqrt_k for j in range(1, construction.p + 1)]
        level_sizes_ok = sizes == expected
        level_costs = tuple(oracle.evaluate_mask(level_masks[j]) for j in range(construction.p + 1))
        prefix_sum = _prefix_sum(method, sigma)
        prefix_ratio = _ratio(prefix_sum, oracle.evaluate_mask(selected))
    target = harmonic(sqrt_k) / (4 * beta) * (1 + construction.p / 2)
    return GoodGroupSelection(
        selected=frozenset(iter_bits(selected)),
        ordering=tuple(sigma),
        edge_status=tuple(statuses),
        audits=tuple(audits),
        complete=complete,
        all_groups_good=complete and base_good,
        level_sizes_ok=level_sizes_ok,
        level_costs=level_costs,
        prefix_sum=prefix_sum,
        prefix_ratio=prefix_ratio,
        target_bound=target,
    )


# ---------------------------------------------------------------------------
# incentive checks

@dataclass(frozen=True)
class DeviationViolation:
    coalition: tuple[int, ...]
    bids: tuple[float, ...]
    truthful_utilities: tuple[float, ...]
    deviant_utilities: tuple[float, ...]


def default_bid_grid(
    valuation: float,
    multiples: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
    eps_step: float | None = None,
) -> tuple[float, ...]:
    """Deviation bids: multiples of the valuation, optionally v +/- eps and 0."""
    grid = {m * valuation for m in multiples}
    grid.add(0.0)
    if eps_step is not None:
        grid.add(max(0.0, valuation - eps_step))
        grid.add(valuation + eps_step)
    return tuple(sorted(grid))


def _grids_for(
    valuations: Sequence[float],
    bid_grids: Sequence[Sequence[float]] | None,
) -> list[tuple[float, ...]]:
    if bid_grids is not None:
        return [tuple(g) for g in bid_grids]
    return [default_bid_grid(v) for v in valuations]


def check_strategyproof(
    mechanism: MechanismRunner,
    valuations: Sequence[float] | Mapping[int, float],
    bid_grids: Sequence[Sequence[float]] | None = None,
    cap: int = 4,
) -> list[DeviationViolation]:
    """Unilateral deviations that strictly beat truthful bidding."""
    return check_gsp(mechanism, valuations, bid_grids, max_coalition=1, cap=cap)


def check_gsp(
    mechanism: MechanismRunner,
    valuations: Sequence[float] | Mapping[int, float],
    bid_grids: Sequence[Sequence[float]] | None = None,
    max_coalition: int = 2,
    weak: bool = False,
    cap: int = 4,
) -> list[DeviationViolation]:
    """Coalition deviations where someone strictly gains and nobody loses.

    With ``weak=True`` a violation instead requires every coalition member to
    strictly gain. Singleton coalitions reproduce the strategyproofness check.
    """
    vals = as_profile(valuations, _probe_players(valuations))
    n = len(vals)
    if n > cap:
        raise CapacityError(f"{n} players exceed the deviation-search cap {cap}")
    grids = _grids_for(vals, bid_grids)
    truthful = mechanism(vals)
    u_truth = truthful.utilities(vals)
    violations: list[DeviationViolation] = []
    for size in range(1, min(max_coalition, n) + 1):
        for coalition in itertools.combinations(range(n), size):
            for deviation in itertools.product(*(grids[i] for i in coalition)):
                if all(deviation[pos] == vals[i] for pos, i in enumerate(coalition)):
                    continue
                bids = list(vals)
                for pos, i in enumerate(coalition):
                    bids[i] = deviation[pos]
                outcome = mechanism(bids)
                u_dev = outcome.utilities(vals)
                gains = [u_dev[i] > u_truth[i] + EPS for i in coalition]
                losses = [u_dev[i] < u_truth[i] - EPS for i in coalition]
                bad = all(gains) if weak else (any(gains) and not any(losses))
                if bad:
                    violations.append(
                        DeviationViolation(
                            coalition=coalition,
                            bids=tuple(bids),
                            truthful_utilities=tuple(u_truth[i] for i in coalition),
                            deviant_utilities=tuple(u_dev[i] for i in coalition),
                        )
                    )
    return violations


def _probe_players(valuations) -> int:
    if isinstance(valuations, Mapping):
        return len(valuations)
    return len(list(valuations))
