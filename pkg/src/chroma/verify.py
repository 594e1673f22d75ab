"""Ground-truth checkers used by the tests and the CLI.

Verifiers always run against the undistributed graph; distributed
outputs are gathered by gid first, which surfaces any ghost-consistency
bug a per-rank view would hide.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import Graph

__all__ = [
    "ViolationKind",
    "Violation",
    "verify_d1",
    "verify_d2",
    "chromatic_oracle",
    "color_stats",
    "GraphTooLarge",
]


class ViolationKind(str, Enum):
    D1_EDGE = "d1-edge"
    D2_PATH = "d2-path"
    PD2_PATH = "pd2-path"
    UNCOLORED = "uncolored"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    u: int
    w: int | None = None
    middle: int | None = None

    def __str__(self) -> str:
        if self.kind is ViolationKind.UNCOLORED:
            return f"vertex {self.u} is uncolored"
        if self.kind is ViolationKind.D1_EDGE:
            return f"edge ({self.u},{self.w}) shares a color"
        return f"path {self.u}-{self.middle}-{self.w} endpoints share a color"


class GraphTooLarge(ValueError):
    pass


def _check_sizes(g: Graph, colors: np.ndarray) -> None:
    if len(colors) != g.num_vertices:
        raise ValueError(
            f"coloring has {len(colors)} entries for {g.num_vertices} vertices"
        )


def verify_d1(g: Graph, colors: np.ndarray) -> list[Violation]:
    """Empty iff a proper distance-1 coloring with no uncolored vertices."""
    _check_sizes(g, colors)
    out = [Violation(ViolationKind.UNCOLORED, int(v)) for v in np.flatnonzero(colors == 0)]
    for u in range(g.num_vertices):
        row = g.adj(u)
        for v in row[row > u].tolist():
            if colors[u] != 0 and colors[u] == colors[v]:
                out.append(Violation(ViolationKind.D1_EDGE, u, v))
    return out


def verify_d2(
    g: Graph,
    colors: np.ndarray,
    partial: bool = False,
    endpoint_mask: np.ndarray | None = None,
) -> list[Violation]:
    """Distance-2 checker; with partial only 2-path endpoints must differ.

    endpoint_mask restricts the partial check (and the uncolored scan) to
    a vertex subset, e.g. the colored side of a bipartite graph.
    """
    _check_sizes(g, colors)
    kind = ViolationKind.PD2_PATH if partial else ViolationKind.D2_PATH
    if endpoint_mask is None:
        endpoint_mask = np.ones(g.num_vertices, dtype=bool)
    out = [
        Violation(ViolationKind.UNCOLORED, int(v))
        for v in np.flatnonzero((colors == 0) & endpoint_mask)
    ]
    if not partial:
        out.extend(v for v in verify_d1(g, colors) if v.kind is ViolationKind.D1_EDGE)
    for m in range(g.num_vertices):
        row = g.adj(m)
        for i in range(len(row)):
            u = int(row[i])
            if colors[u] == 0 or not endpoint_mask[u]:
                continue
            for j in range(i + 1, len(row)):
                w = int(row[j])
                if endpoint_mask[w] and colors[u] == colors[w]:
                    out.append(Violation(kind, u, w, middle=m))
    return out


def color_stats(colors: np.ndarray) -> tuple[int, dict[int, int]]:
    """Number of distinct nonzero colors and a per-color histogram."""
    nz = np.asarray(colors)
    nz = nz[nz > 0]
    values, counts = np.unique(nz, return_counts=True)
    return len(values), {int(c): int(k) for c, k in zip(values, counts)}


def _colorable(adj: list[np.ndarray], k: int) -> bool:
    """Backtracking k-colorability with saturation-guided vertex selection."""
    n = len(adj)
    assignment = np.zeros(n, dtype=np.int64)
    # forbidden[v] = bitmask of colors 1..k used by v's neighbors
    forbidden = [0] * n
    degrees = np.array([len(a) for a in adj])

    def pick() -> int:
        best, best_key = -1, (-1, -1)
        for v in range(n):
            if assignment[v]:
                continue
            sat = bin(forbidden[v]).count("1")
            key = (sat, int(degrees[v]))
            if key > best_key:
                best, best_key = v, key
        return best

    def place(v: int, limit: int) -> bool:
        if v == -1:
            return True
        mask = forbidden[v]
        for c in range(1, min(limit, k) + 1):
            bit = 1 << c
            if mask & bit:
                continue
            assignment[v] = c
            touched = []
            for u in adj[v].tolist():
                if not (forbidden[u] & bit):
                    forbidden[u] |= bit
                    touched.append(u)
            # symmetry break: color c+1 only enters once c is in use
            if place(pick(), max(limit, c + 1)):
                return True
            assignment[v] = 0
            for u in touched:
                forbidden[u] &= ~bit
        return False

    return place(pick(), 1)


def chromatic_oracle(g: Graph, max_n: int = 12) -> int:
    """Exact chromatic number via iterative-deepening backtracking.

    The default size guard keeps casual calls cheap; callers that accept
    the cost may raise max_n (triangle-free instances in the test suite
    stay tractable into the dozens of vertices).
    """
    n = g.num_vertices
    if n > max_n:
        raise GraphTooLarge(f"graph has {n} vertices, oracle limit is {max_n}")
    if n == 0:
        return 0
    if g.num_edges == 0:
        return 1
    adj = [g.adj(v) for v in range(n)]
    for k in range(2, n + 1):
        if _colorable(adj, k):
            return k
    return n
