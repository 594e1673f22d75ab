"""On-rank coloring kernels.

Serial greedy first-fit plus speculative kernels that color a worklist
optimistically and then repair conflicts inside the local graph. All
kernels accept either a Graph or a runtime LocalGraph; they only touch
row_offsets/col_indices and the colors array. Vertices outside the
worklist are treated as read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .graph import GraphStats

__all__ = [
    "Kernel",
    "KernelChoice",
    "ForbiddenMask",
    "first_fit_color",
    "new_coloring",
    "serial_greedy",
    "select_kernel",
    "speculative_color",
    "speculative_color_d2",
    "two_hop_neighbors",
]

# Tripwire for the internal speculate/fix loops; the keep-larger-index
# loser rule guarantees progress long before this.
_MAX_INTERNAL_SWEEPS = 10_000


class Kernel(Enum):
    VERTEX_BASED = "vb"
    EDGE_BASED = "eb"
    NET_BASED_D2 = "nb-d2"


@dataclass(frozen=True)
class KernelChoice:
    """Kernel selection: explicit kind, or None to apply the degree heuristic."""

    kind: Kernel | None = None
    max_degree_threshold: int = 6000

    def __post_init__(self) -> None:
        if self.max_degree_threshold <= 0:
            raise ValueError("max_degree_threshold must be positive")


def select_kernel(st: GraphStats, cfg: KernelChoice | None = None) -> KernelChoice:
    """Edge-based iff the maximum degree strictly exceeds the threshold."""
    cfg = cfg or KernelChoice()
    if cfg.kind is not None:
        return cfg
    kind = Kernel.EDGE_BASED if st.delta_max > cfg.max_degree_threshold else Kernel.VERTEX_BASED
    return replace(cfg, kind=kind)


class ForbiddenMask:
    """Sliding 64-color bitmask for first-fit selection.

    Bit i covers color base+i; when every bit in the window saturates the
    window advances by 64 colors.
    """

    __slots__ = ("base", "bits")
    _FULL = (1 << 64) - 1

    def __init__(self, base: int = 1):
        self.base = base
        self.bits = 0

    def forbid(self, color: int) -> None:
        off = color - self.base
        if 0 <= off < 64:
            self.bits |= 1 << off

    @property
    def saturated(self) -> bool:
        return self.bits == self._FULL

    def advance(self) -> None:
        self.base += 64
        self.bits = 0

    def smallest_allowed(self) -> int | None:
        if self.saturated:
            return None
        free = ~self.bits & self._FULL
        return self.base + (free & -free).bit_length() - 1


def first_fit_color(forbidden) -> int:
    """Smallest positive color absent from `forbidden` (zeros ignored)."""
    arr = np.asarray(forbidden)
    arr = arr[arr > 0]
    if arr.size == 0:
        return 1
    mask = ForbiddenMask(1)
    while True:
        lo, hi = mask.base, mask.base + 64
        for c in arr[(arr >= lo) & (arr < hi)].tolist():
            mask.forbid(c)
        color = mask.smallest_allowed()
        if color is not None:
            return color
        mask.advance()


def new_coloring(num_vertices: int) -> np.ndarray:
    """All-uncolored coloring (color 0)."""
    return np.zeros(num_vertices, dtype=np.int32)


def serial_greedy(g, order=None) -> np.ndarray:
    """First-fit color g's vertices in the given order (default ascending)."""
    n = g.num_vertices
    if order is None:
        order = np.arange(n, dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
        if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("order is not a permutation of the vertices")
    colors = new_coloring(n)
    off, idx = g.row_offsets, g.col_indices
    for v in order.tolist():
        colors[v] = first_fit_color(colors[idx[off[v] : off[v + 1]]])
    return colors


def two_hop_neighbors(g, v: int) -> np.ndarray:
    """Vertices at distance exactly <= 2 from v through any middle, minus v."""
    off, idx = g.row_offsets, g.col_indices
    one = idx[off[v] : off[v + 1]]
    if one.size == 0:
        return one
    rows = [idx[off[u] : off[u + 1]] for u in one.tolist()]
    two = np.unique(np.concatenate(rows))
    return two[two != v]


def _forbidden_d1(g, colors, v: int) -> np.ndarray:
    off, idx = g.row_offsets, g.col_indices
    return colors[idx[off[v] : off[v + 1]]]


def _forbidden_d2(g, colors, v: int, partial: bool) -> np.ndarray:
    two = two_hop_neighbors(g, v)
    if partial:
        return colors[two]
    off, idx = g.row_offsets, g.col_indices
    one = idx[off[v] : off[v + 1]]
    return colors[np.union1d(one, two)]


def _gauss_seidel(g, colors, worklist, forbidden_of) -> np.ndarray:
    """Deterministic path: commit first-fit colors in ascending vertex order."""
    for v in np.sort(worklist).tolist():
        colors[v] = first_fit_color(forbidden_of(g, colors, v))
    return colors


def _d1_losers_vertex(g, colors, candidates, in_round) -> list[int]:
    """Vertex-parallel scan: v loses when an equal-colored neighbor either
    outranks it (larger local index) or is read-only."""
    off, idx = g.row_offsets, g.col_indices
    losers = []
    for v in candidates.tolist():
        row = idx[off[v] : off[v + 1]]
        same = row[colors[row] == colors[v]]
        if same.size and bool(np.any((same > v) | ~in_round[same])):
            losers.append(v)
    return losers


def _d1_losers_edge(g, colors, candidates, in_round) -> list[int]:
    """Edge-parallel scan over the candidate rows; same loser rule."""
    off, idx = g.row_offsets, g.col_indices
    dead = set()
    for v in candidates.tolist():
        if v in dead:
            continue
        row = idx[off[v] : off[v + 1]]
        for u in row.tolist():
            if u in dead or colors[u] != colors[v]:
                continue
            if u > v or not in_round[u]:
                dead.add(v)
                break
    return sorted(dead)


def speculative_color(lg, colors, worklist, kernel: KernelChoice | None = None,
                      deterministic: bool = False) -> np.ndarray:
    """Color every worklist vertex, then repair distance-1 conflicts locally.

    The speculate sweep assigns first-fit colors to all uncolored worklist
    vertices against a snapshot of the current colors (simultaneous
    semantics, as data-parallel workers would). Conflicting same-round
    pairs then lose their lower-index member and are reswept. The
    deterministic flag serializes the sweep in ascending vertex order,
    which makes a full-graph call identical to serial first-fit.
    """
    worklist = np.asarray(worklist, dtype=np.int64)
    if worklist.size == 0:
        return colors
    if deterministic:
        return _gauss_seidel(lg, colors, worklist, _forbidden_d1)
    kind = (kernel.kind if kernel and kernel.kind else Kernel.VERTEX_BASED)
    in_round = np.zeros(len(colors), dtype=bool)
    in_round[worklist] = True
    pending = np.sort(worklist)
    for _ in range(_MAX_INTERNAL_SWEEPS):
        if pending.size == 0:
            return colors
        proposals = [first_fit_color(_forbidden_d1(lg, colors, v)) for v in pending.tolist()]
        colors[pending] = proposals
        find = _d1_losers_edge if kind is Kernel.EDGE_BASED else _d1_losers_vertex
        losers = find(lg, colors, pending, in_round)
        colors[losers] = 0
        pending = np.asarray(losers, dtype=np.int64)
    raise RuntimeError("speculative distance-1 loop failed to settle")


def _d2_losers(g, colors, in_round, full: bool, candidates) -> list[int]:
    """Net-based scan: inside each adjacency row, equal colors conflict;
    with full distance-2 the row's center joins the comparison.

    Conflicts can only involve same-sweep assignees (first-fit forbade all
    settled colors), so only rows touching a candidate need scanning.
    """
    off, idx = g.row_offsets, g.col_indices
    dead: set[int] = set()
    rows = [idx[off[v] : off[v + 1]] for v in candidates.tolist()]
    middles = np.unique(np.concatenate(rows + [candidates]))
    wanted = set(candidates.tolist())
    for w in middles.tolist():
        row = idx[off[w] : off[w + 1]]
        if row.size == 0:
            continue
        members = np.append(row, w) if full else row
        cols = colors[members]
        live = cols > 0
        members, cols = members[live], cols[live]
        if members.size < 2:
            continue
        order = np.lexsort((members, cols))
        members, cols = members[order], cols[order]
        ties = np.flatnonzero(cols[1:] == cols[:-1])
        if ties.size == 0:
            continue
        # within a color group the largest index (or any read-only vertex)
        # survives; all other in-round members lose
        start = 0
        while start < members.size:
            stop = start + 1
            while stop < members.size and cols[stop] == cols[start]:
                stop += 1
            if stop - start > 1:
                group = members[start:stop]
                keep = group[-1] if in_round[group[-1]] and not np.any(~in_round[group]) else -1
                for m in group.tolist():
                    if in_round[m] and m != keep:
                        dead.add(m)
            start = stop
    return sorted(dead & wanted)


def speculative_color_d2(lg, colors, worklist, partial: bool = False,
                         deterministic: bool = False) -> np.ndarray:
    """Distance-2 analogue of speculative_color.

    Full mode forbids every color within two hops; partial mode forbids
    only two-hop colors (adjacent vertices may share). Internal conflicts
    are found net-based: every adjacency row is scanned pairwise instead
    of walking each vertex's two-hop neighborhood.
    """
    worklist = np.asarray(worklist, dtype=np.int64)
    if worklist.size == 0:
        return colors

    def forbidden(g, c, v):
        return _forbidden_d2(g, c, v, partial)

    if deterministic:
        return _gauss_seidel(lg, colors, worklist, forbidden)
    in_round = np.zeros(len(colors), dtype=bool)
    in_round[worklist] = True
    pending = np.sort(worklist)
    for _ in range(_MAX_INTERNAL_SWEEPS):
        if pending.size == 0:
            return colors
        proposals = [first_fit_color(forbidden(lg, colors, v)) for v in pending.tolist()]
        colors[pending] = proposals
        losers = _d2_losers(lg, colors, in_round, full=not partial, candidates=pending)
        colors[losers] = 0
        pending = np.asarray(losers, dtype=np.int64)
    raise RuntimeError("speculative distance-2 loop failed to settle")
