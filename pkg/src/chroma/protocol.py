"""Distributed coloring drivers and cross-rank conflict resolution.

The drivers run lock-step supersteps: color locally, exchange boundary
colors, detect conflicts, allreduce, and iterate until no conflicts
remain. Every rank must reach the same verdict about which endpoint of a
conflicting edge (or two-hop path) gets recolored, without extra
communication, so the loser cascade depends only on globally consistent
inputs: colors as of the last exchange, global degrees, and a hash of
the global id.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .localcolor import KernelChoice, select_kernel, speculative_color, speculative_color_d2
from .runtime import (
    LocalGraph,
    RankWorld,
    RoundReport,
    allreduce_sum,
    exchange_boundary_colors,
    restore_ghost_colors,
    snapshot_ghost_colors,
)

__all__ = [
    "Mode",
    "AlgorithmConfig",
    "NonConvergenceError",
    "gid_rand",
    "check_conflicts",
    "detect_conflicts_d1",
    "detect_conflicts_d2",
    "compute_global_degrees",
    "run_distributed",
    "ghost_layers_for",
]

_MASK64 = (1 << 64) - 1


class Mode(str, Enum):
    D1 = "d1"
    D1_2GL = "d1-2gl"
    D2 = "d2"
    PD2 = "pd2"


@dataclass
class AlgorithmConfig:
    mode: Mode = Mode.D1
    recolor_degrees: bool = False
    kernel: KernelChoice = field(default_factory=KernelChoice)
    deterministic: bool = False
    max_rounds: int = 200

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


class NonConvergenceError(RuntimeError):
    """Raised when the conflict loop exceeds max_rounds; carries reports."""

    def __init__(self, message: str, reports: list[RoundReport]):
        super().__init__(message)
        self.reports = reports


def ghost_layers_for(mode: Mode) -> int:
    return 1 if mode is Mode.D1 else 2


def gid_rand(gid: int) -> int:
    """Deterministic 64-bit avalanche mix of a global id.

    Identical on every rank with no communication; used to break
    conflict-loser ties. Wrapping arithmetic mod 2^64.
    """
    z = (gid + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def gid_rand_array(gids: np.ndarray) -> np.ndarray:
    """Vectorized gid_rand."""
    z = gids.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def check_conflicts(
    v: int,
    u: int,
    colors: np.ndarray,
    gids: np.ndarray,
    degrees: np.ndarray,
    recolor_degrees: bool,
) -> int:
    """Resolve one potential conflict in place; returns 1 if one existed.

    When both vertices carry the same nonzero color, exactly one is
    uncolored by the cascade: with recolor_degrees the lower-degree
    vertex loses; ties (or the flag off) fall to the higher gid hash,
    then to the higher gid. The verdict is a pure function of globally
    consistent data, so both owning ranks agree without communication.
    """
    cv, cu = colors[v], colors[u]
    if cv == 0 or cu == 0 or cv != cu:
        return 0
    gv, gu = int(gids[v]), int(gids[u])
    if gv == gu:
        raise ValueError(f"conflict check on the same global vertex {gv}")
    if recolor_degrees and degrees[v] < degrees[u]:
        colors[v] = 0
    elif recolor_degrees and degrees[u] < degrees[v]:
        colors[u] = 0
    elif gid_rand(gv) > gid_rand(gu):
        colors[v] = 0
    elif gid_rand(gu) > gid_rand(gv):
        colors[u] = 0
    elif gv > gu:
        colors[v] = 0
    else:
        colors[u] = 0
    return 1


def detect_conflicts_d1(
    lg: LocalGraph,
    colors: np.ndarray,
    degrees: np.ndarray,
    recolor_degrees: bool,
) -> int:
    """Scan every ghost's incident edges, uncoloring losers in place.

    A ghost's scan stops early once the ghost itself is uncolored; the
    returned count is a termination signal (any positive value means
    another round), not an exact conflict cardinality.
    """
    conflicts = 0
    gids = lg.gids
    for v in range(lg.owned_count, lg.num_local):
        if colors[v] == 0:
            continue
        for u in lg.adj(v).tolist():
            conflicts += check_conflicts(v, u, colors, gids, degrees, recolor_degrees)
            if colors[v] == 0:
                break
    return conflicts


def detect_conflicts_d2(
    lg: LocalGraph,
    colors: np.ndarray,
    degrees: np.ndarray,
    do_partial: bool,
    recolor_degrees: bool,
) -> int:
    """Check each distance-2 boundary vertex against its two-hop reach.

    Requires both ghost layers so first-layer ghost rows are complete.
    Without do_partial the one-hop pairs are checked as well; the scan of
    a vertex aborts as soon as it loses its own color.
    """
    if lg.ghost_layers < 2:
        raise ValueError("distance-2 detection needs a second ghost layer")
    conflicts = 0
    gids = lg.gids
    for v in lg.boundary_d2.tolist():
        dead = False
        for u in lg.adj(v).tolist():
            if not do_partial:
                conflicts += check_conflicts(v, u, colors, gids, degrees, recolor_degrees)
                if colors[v] == 0:
                    dead = True
                    break
            for x in lg.adj(u).tolist():
                if x == v:
                    continue
                conflicts += check_conflicts(v, x, colors, gids, degrees, recolor_degrees)
                if colors[v] == 0:
                    dead = True
                    break
            if dead:
                break
    return conflicts


def compute_global_degrees(world: RankWorld) -> list[np.ndarray]:
    """True global degree for every owned and ghost vertex, on each rank.

    Owned rows already list every global neighbor, so owned degrees are
    local row lengths; ghost degrees arrive through one exchange round
    along the same routes the color updates use. Computed once, before
    the first conflict round.
    """
    per_rank: list[np.ndarray] = []
    owned_degree: dict[int, int] = {}
    for lg in world.local_graphs:
        deg = np.zeros(lg.num_local, dtype=np.int64)
        for v in range(lg.owned_count):
            deg[v] = lg.row_offsets[v + 1] - lg.row_offsets[v]
            owned_degree[int(lg.gids[v])] = int(deg[v])
        per_rank.append(deg)
    for lg, deg in zip(world.local_graphs, per_rank):
        for slot in range(lg.ghost_count):
            lid = lg.owned_count + slot
            deg[lid] = owned_degree[int(lg.gids[lid])]
        lg.global_degrees = deg
    return per_rank


def _color_phase(world, colorings, worklists, cfg, kernel):
    partial = cfg.mode is Mode.PD2
    d2 = cfg.mode in (Mode.D2, Mode.PD2)

    def run(r: int):
        lg = world.local_graphs[r]
        if worklists[r].size == 0:
            return
        if d2:
            speculative_color_d2(
                lg, colorings[r], worklists[r], partial=partial,
                deterministic=cfg.deterministic,
            )
        else:
            speculative_color(
                lg, colorings[r], worklists[r], kernel=kernel,
                deterministic=cfg.deterministic,
            )

    world.map_ranks(run)


def _detect_phase(world, colorings, degrees, cfg) -> list[int]:
    if cfg.mode in (Mode.D2, Mode.PD2):
        do_partial = cfg.mode is Mode.PD2

        def run(r: int) -> int:
            return detect_conflicts_d2(
                world.local_graphs[r], colorings[r], degrees[r], do_partial,
                cfg.recolor_degrees,
            )

    else:

        def run(r: int) -> int:
            return detect_conflicts_d1(
                world.local_graphs[r], colorings[r], degrees[r], cfg.recolor_degrees
            )

    return world.map_ranks(run)


def run_distributed(
    world: RankWorld, cfg: AlgorithmConfig
) -> tuple[np.ndarray, list[RoundReport]]:
    """Speculate-and-iterate driver for all four modes.

    Returns the gathered global coloring and one RoundReport per
    iteration; the final report always shows zero conflicts. Ghost
    snapshots are taken right after each exchange (the owner-consistent
    state) so that restoring after a recolor sweep leaves every ghost
    holding exactly what its owner last broadcast.
    """
    needed = ghost_layers_for(cfg.mode)
    if world.ghost_layers < needed:
        raise ValueError(
            f"mode {cfg.mode.value} needs {needed} ghost layer(s), "
            f"world was built with {world.ghost_layers}"
        )
    world.reset_exchange_state()
    kernel = select_kernel(world.source_stats, cfg.kernel)
    degrees = compute_global_degrees(world)
    colorings = [np.zeros(lg.num_local, dtype=np.int32) for lg in world.local_graphs]
    reports: list[RoundReport] = []
    snapshots: list[np.ndarray] = [None] * world.num_ranks  # type: ignore[list-item]

    worklists = [np.arange(lg.owned_count, dtype=np.int64) for lg in world.local_graphs]
    while True:
        round_index = len(reports)
        if round_index > cfg.max_rounds:
            raise NonConvergenceError(
                f"no convergence after {cfg.max_rounds} rounds", reports
            )
        recolored = [
            int(np.count_nonzero(w < world.local_graphs[r].owned_count))
            for r, w in enumerate(worklists)
        ]

        t0 = time.perf_counter()
        _color_phase(world, colorings, worklists, cfg, kernel)
        if round_index > 0:
            for r in range(world.num_ranks):
                restore_ghost_colors(world.local_graphs[r], colorings[r], snapshots[r])
        t1 = time.perf_counter()
        bytes_sent, messages = exchange_boundary_colors(
            world, colorings, changed_only=round_index > 0
        )
        for r in range(world.num_ranks):
            snapshots[r] = snapshot_ghost_colors(world.local_graphs[r], colorings[r])
        t2 = time.perf_counter()
        local_counts = _detect_phase(world, colorings, degrees, cfg)
        conflicts = allreduce_sum(world, local_counts)
        t3 = time.perf_counter()

        reports.append(
            RoundReport(
                round_index=round_index,
                conflicts=conflicts,
                recolored_per_rank=recolored,
                bytes_sent=bytes_sent,
                messages_sent=messages,
                time_color_s=t1 - t0,
                time_comm_s=t2 - t1,
                time_detect_s=t3 - t2,
            )
        )
        if conflicts == 0:
            break
        worklists = [np.flatnonzero(c == 0).astype(np.int64) for c in colorings]

    global_colors = np.zeros(world.num_global_vertices, dtype=np.int32)
    for r, lg in enumerate(world.local_graphs):
        global_colors[lg.gids[: lg.owned_count]] = colorings[r][: lg.owned_count]
    return global_colors, reports
