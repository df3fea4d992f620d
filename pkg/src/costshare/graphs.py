"""Small graph utilities shared by the network-based instance models."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .core import InvalidInputError

Edge = tuple[int, int, float]


def check_edges(n_vertices: int, edges: Iterable[Edge]) -> None:
    for u, v, c in edges:
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise InvalidInputError(f"edge ({u},{v}) references a vertex outside 0..{n_vertices - 1}")
        if c < 0 or math.isnan(c):
            raise InvalidInputError(f"edge ({u},{v}) has negative cost {c}")


def shortest_path_closure(n_vertices: int, edges: Iterable[Edge]) -> tuple[tuple[float, ...], ...]:
    """All-pairs shortest path distances (parallel edges keep the cheapest)."""
    dist = [[math.inf] * n_vertices for _ in range(n_vertices)]
    for v in range(n_vertices):
        dist[v][v] = 0.0
    for u, v, c in edges:
        if c < dist[u][v]:
            dist[u][v] = dist[v][u] = c
    for k in range(n_vertices):
        dk = dist[k]
        for i in range(n_vertices):
            dik = dist[i][k]
            if dik == math.inf:
                continue
            di = dist[i]
            for j in range(n_vertices):
                alt = dik + dk[j]
                if alt < di[j]:
                    di[j] = alt
    return tuple(tuple(row) for row in dist)


def is_connected(n_vertices: int, edges: Sequence[Edge]) -> bool:
    if n_vertices <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n_vertices)]
    for u, v, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n_vertices
