"""Shared domain model: players, profiles, cost oracles, cost-share methods.

Players are dense integer ids ``0..n-1``. Subsets of players are plain int
bitmasks internally; every public operation also accepts an iterable of
player ids. Money is float64 with a global comparison tolerance ``EPS``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

EPS = 1e-9

PlayerSet = "int | Iterable[int]"


class InvalidInputError(ValueError):
    """Malformed input: unknown players, broken invariants, bad parameters."""

    def __init__(self, message: str, field_path: str | None = None):
        super().__init__(message)
        self.field_path = field_path


class InfeasibleError(InvalidInputError):
    """No feasible service plan exists for the requested set."""


class CapacityError(RuntimeError):
    """An exhaustive operation would exceed its enumeration cap."""


class MethodContractError(RuntimeError):
    """A cost-share method violated its contract (e.g. negative share)."""


@dataclass(frozen=True)
class Caps:
    """Enumeration caps for the exhaustive verifiers."""

    subsets: int = 16
    orderings: int = 8
    facilities: int = 16
    terminals: int = 12
    vertices: int = 12
    collection: int = 16


def caps_from_env(environ: Mapping[str, str] | None = None) -> Caps:
    """Build Caps from COSTSHARE_CAPS, e.g. ``subsets=20,orderings=9``."""
    environ = os.environ if environ is None else environ
    raw = environ.get("COSTSHARE_CAPS", "")
    overrides: dict[str, int] = {}
    for part in filter(None, (p.strip() for p in raw.split(","))):
        name, _, value = part.partition("=")
        if name not in Caps.__dataclass_fields__:
            raise InvalidInputError(f"unknown cap {name!r} in COSTSHARE_CAPS")
        try:
            overrides[name] = int(value)
        except ValueError:
            raise InvalidInputError(f"cap {name!r} needs an integer, got {value!r}")
    return Caps(**overrides)


# ---------------------------------------------------------------------------
# bitmask helpers

def mask_of(players: Iterable[int]) -> int:
    mask = 0
    for i in players:
        mask |= 1 << i
    return mask


def as_mask(subset: int | Iterable[int], n: int) -> int:
    """Normalize a subset (mask or iterable of ids) to a validated bitmask."""
    if isinstance(subset, int):
        mask = subset
        if mask < 0 or mask >> n:
            raise InvalidInputError(f"subset mask {mask:#x} outside universe of {n} players")
        return mask
    mask = 0
    for i in subset:
        if not 0 <= i < n:
            raise InvalidInputError(f"unknown player {i} (universe has {n} players)")
        mask |= 1 << i
    return mask


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def bits_of(mask: int) -> tuple[int, ...]:
    return tuple(iter_bits(mask))


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including itself and 0, descending."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def as_profile(values: Sequence[float] | Mapping[int, float], n: int) -> tuple[float, ...]:
    """Normalize a per-player money profile; every player needs one entry >= 0."""
    if isinstance(values, Mapping):
        if set(values) != set(range(n)):
            raise InvalidInputError(f"profile must cover players 0..{n - 1} exactly")
        seq = [float(values[i]) for i in range(n)]
    else:
        seq = [float(v) for v in values]
        if len(seq) != n:
            raise InvalidInputError(f"profile has {len(seq)} entries, universe has {n}")
    for i, v in enumerate(seq):
        if v < 0 or math.isnan(v):
            raise InvalidInputError(f"profile entry for player {i} must be >= 0, got {v}")
    return tuple(seq)


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class CostOracle:
    """Exact service cost C(S) for one problem family.

    ``evaluate_mask`` maps a player bitmask to money; it must be
    deterministic, nondecreasing, and satisfy C(empty) = 0.
    """

    kind: str
    n_players: int
    evaluate_mask: Callable[[int], float]

    def cost(self, subset: int | Iterable[int]) -> float:
        return self.evaluate_mask(as_mask(subset, self.n_players))

    @property
    def universe(self) -> frozenset[int]:
        return frozenset(range(self.n_players))


@dataclass(frozen=True)
class CostShareMethod:
    """Cost shares chi(i, S) >= 0, defined for members i of S only.

    ``shares_mask`` maps a player bitmask to a dict {player: share} and is
    expected to be cached by the factory that builds it.
    """

    descriptor: str
    n_players: int
    shares_mask: Callable[[int], dict[int, float]]

    def shares(self, subset: int | Iterable[int]) -> dict[int, float]:
        return dict(self.shares_mask(as_mask(subset, self.n_players)))

    def share(self, player: int, subset: int | Iterable[int]) -> float:
        mask = as_mask(subset, self.n_players)
        if not (mask >> player) & 1:
            raise InvalidInputError(f"share undefined: player {player} not in subset")
        return self.shares_mask(mask)[player]


@dataclass(frozen=True)
class MechanismOutcome:
    """Served set, price vector, incurred service cost, and audit trail."""

    served: frozenset[int]
    prices: tuple[float, ...]
    incurred_cost: float
    trace: tuple[dict, ...] = ()

    @property
    def served_mask(self) -> int:
        return mask_of(self.served)

    def price_sum(self) -> float:
        return sum(self.prices[i] for i in self.served)

    def utilities(self, valuations: Sequence[float]) -> tuple[float, ...]:
        return tuple(
            (valuations[i] - self.prices[i]) if i in self.served else 0.0
            for i in range(len(self.prices))
        )


def validate_outcome(outcome: MechanismOutcome, bids: Sequence[float], eps: float = EPS) -> list[str]:
    """Individual rationality / no-positive-transfer audit; returns violations."""
    problems = []
    for i, p in enumerate(outcome.prices):
        if i in outcome.served:
            if p < -eps:
                problems.append(f"player {i}: negative price {p}")
            if p > bids[i] + eps:
                problems.append(f"player {i}: price {p} exceeds bid {bids[i]}")
        elif p != 0.0:
            problems.append(f"player {i}: unserved but priced {p}")
    return problems


# ---------------------------------------------------------------------------
# universal metrics

def harmonic(k: int) -> float:
    """k-th harmonic number, sum of 1/l for l = 1..k."""
    if k < 1:
        raise InvalidInputError(f"harmonic number needs k >= 1, got {k}")
    return sum(1.0 / l for l in range(1, k + 1))


def social_cost(
    oracle: CostOracle,
    valuations: Sequence[float] | Mapping[int, float],
    served: int | Iterable[int],
    incurred: float | None = None,
) -> float:
    """Service cost plus the valuations of the excluded players.

    Uses ``incurred`` as the service cost when supplied (for mechanisms that
    build an approximate plan), otherwise the oracle's optimal cost.
    """
    n = oracle.n_players
    mask = as_mask(served, n)
    vals = as_profile(valuations, n)
    cost = oracle.evaluate_mask(mask) if incurred is None else incurred
    excluded = sum(vals[i] for i in range(n) if not (mask >> i) & 1)
    return cost + excluded


def social_welfare(
    oracle: CostOracle,
    valuations: Sequence[float] | Mapping[int, float],
    served: int | Iterable[int],
) -> float:
    """Served valuations minus service cost."""
    n = oracle.n_players
    mask = as_mask(served, n)
    vals = as_profile(valuations, n)
    return sum(vals[i] for i in iter_bits(mask)) - oracle.evaluate_mask(mask)


def optimal_social_cost(
    oracle: CostOracle,
    valuations: Sequence[float] | Mapping[int, float],
    cap: int = 16,
) -> tuple[float, frozenset[int]]:
    """Exact minimum social cost over all subsets, with one witness.

    Ties break toward smaller cardinality, then lexicographic player order.
    """
    n = oracle.n_players
    if n > cap:
        raise CapacityError(f"universe of {n} players exceeds enumeration cap {cap}")
    vals = as_profile(valuations, n)
    total = sum(vals)
    best_cost = math.inf
    best_key: tuple[int, tuple[int, ...]] | None = None
    best_mask = 0
    for mask in range(1 << n):
        served_val = sum(vals[i] for i in iter_bits(mask))
        cost = oracle.evaluate_mask(mask) + (total - served_val)
        key = (mask.bit_count(), bits_of(mask))
        if cost < best_cost or (cost == best_cost and best_key is not None and key < best_key):
            best_cost, best_key, best_mask = cost, key, mask
    return best_cost, frozenset(iter_bits(best_mask))


def budget_balance_ratio(
    method: CostShareMethod,
    oracle: CostOracle,
    subset: int | Iterable[int],
    beta: float,
) -> tuple[float, bool, bool]:
    """Total shares on S and the two sandwich checks C(S)/beta <= sum <= C(S)."""
    mask = as_mask(subset, oracle.n_players)
    if mask == 0:
        raise InvalidInputError("budget-balance ratio undefined for the empty set")
    total = sum(method.shares_mask(mask).values())
    cost = oracle.evaluate_mask(mask)
    lower_ok = total >= cost / beta - EPS
    upper_ok = total <= cost + EPS
    return total, lower_ok, upper_ok


def price_core_violations(
    oracle: CostOracle,
    served: int | Iterable[int],
    prices: Sequence[float],
    cap: int = 16,
    eps: float = EPS,
) -> list[frozenset[int]]:
    """Subsets of the served set whose total price exceeds their stand-alone cost."""
    mask = as_mask(served, oracle.n_players)
    if mask.bit_count() > cap:
        raise CapacityError(f"core check over {mask.bit_count()} players exceeds cap {cap}")
    violations = []
    for sub in submasks(mask):
        if sub == 0:
            continue
        paid = sum(prices[i] for i in iter_bits(sub))
        if paid > oracle.evaluate_mask(sub) + eps:
            violations.append(frozenset(iter_bits(sub)))
    return violations


def check_core(
    method: CostShareMethod,
    oracle: CostOracle,
    subset: int | Iterable[int],
    cap: int = 16,
) -> list[frozenset[int]]:
    """Core check for a method's shares on S: no S' in S pays more than C(S')."""
    mask = as_mask(subset, oracle.n_players)
    shares = method.shares_mask(mask)
    prices = [shares.get(i, 0.0) for i in range(oracle.n_players)]
    return price_core_violations(oracle, mask, prices, cap=cap)


def check_cross_monotonic(
    method: CostShareMethod,
    universe: int | Iterable[int] | None = None,
    cap: int = 8,
) -> list[tuple[int, frozenset[int], frozenset[int]]]:
    """Violations of cross-monotonicity on single-element extensions.

    Checking T = S + {j} suffices: any violating pair S within T decomposes
    into a violating step along a chain of single additions.
    """
    n = method.n_players
    umask = (1 << n) - 1 if universe is None else as_mask(universe, n)
    if umask.bit_count() > cap:
        raise CapacityError(f"cross-monotonicity check over {umask.bit_count()} players exceeds cap {cap}")
    violations = []
    for smask in submasks(umask):
        if smask == 0:
            continue
        shares_s = method.shares_mask(smask)
        for j in iter_bits(umask & ~smask):
            shares_t = method.shares_mask(smask | (1 << j))
            for i in iter_bits(smask):
                if shares_s[i] < shares_t[i] - EPS:
                    violations.append(
                        (i, frozenset(iter_bits(smask)), frozenset(iter_bits(smask | (1 << j))))
                    )
    return violations
