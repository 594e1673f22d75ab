"""Deterministic in-process simulation of the distributed environment.

Ranks are plain data: each one holds a LocalGraph over its owned vertices
plus one or two ghost layers. Inter-rank interaction happens only through
bulk color exchanges and an allreduce, mirroring a bulk-synchronous MPI
program. Ranks may execute sequentially or on a thread pool; protocol
results never depend on the schedule because phases are barrier-separated
and each rank owns its state exclusively.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphStats, stats as graph_stats
from .partition import PartitionMap

__all__ = [
    "LocalGraph",
    "RankWorld",
    "RoundReport",
    "ProtocolError",
    "build_local_graphs",
    "exchange_boundary_colors",
    "allreduce_sum",
    "snapshot_ghost_colors",
    "restore_ghost_colors",
]

# communication-volume proxy: u64 gid + u32 color per updated ghost copy
BYTES_PER_PAIR = 12


class ProtocolError(RuntimeError):
    """A message referenced a gid unknown to the receiving rank."""


@dataclass
class LocalGraph:
    """One rank's subgraph: owned vertices first, then ghosts.

    Local indices 0..owned_count-1 are owned; the rest are ghost copies
    (first layer before second layer, each ascending by gid). Ghost rows
    hold whatever adjacency the rank legitimately knows: with one ghost
    layer only edges back to owned vertices, with two layers the full
    rows of first-layer ghosts and back-edges for the second layer.
    """

    rank: int
    owned_count: int
    ghost_count: int
    row_offsets: np.ndarray
    col_indices: np.ndarray  # local indices, rows sorted
    gids: np.ndarray  # local index -> global id
    ghost_owner: np.ndarray  # per ghost slot, owning rank
    ghost_layers: int
    first_layer_ghost_count: int
    boundary_d1: np.ndarray  # owned lids adjacent to >= 1 ghost
    boundary_d2: np.ndarray  # owned lids with a ghost within two hops
    num_local_edges: int  # E_l: both endpoints owned
    num_ghost_edges: int  # E_g: >= 1 ghost endpoint
    gid_to_lid: dict[int, int] = field(repr=False, default_factory=dict)
    global_degrees: np.ndarray | None = None

    @property
    def num_local(self) -> int:
        return self.owned_count + self.ghost_count

    @property
    def num_vertices(self) -> int:  # graph-like duck type for the kernels
        return self.num_local

    def adj(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def is_ghost(self, lid: int) -> bool:
        return lid >= self.owned_count


@dataclass
class RoundReport:
    """Per-iteration accounting for one protocol round."""

    round_index: int
    conflicts: int
    recolored_per_rank: list[int]
    bytes_sent: int
    messages_sent: int
    time_color_s: float = 0.0
    time_comm_s: float = 0.0
    time_detect_s: float = 0.0

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "round": self.round_index,
            "conflicts": self.conflicts,
            "recolored_per_rank": list(self.recolored_per_rank),
            "bytes_sent": self.bytes_sent,
            "messages_sent": self.messages_sent,
        }
        if include_timings:
            d["time_color_ms"] = self.time_color_s * 1e3
            d["time_comm_ms"] = self.time_comm_s * 1e3
            d["time_detect_ms"] = self.time_detect_s * 1e3
        return d


@dataclass
class RankWorld:
    """All ranks' local graphs plus the routing tables between them."""

    num_ranks: int
    ghost_layers: int
    local_graphs: list[LocalGraph]
    partition: PartitionMap
    num_global_vertices: int
    source_stats: GraphStats
    # send_targets[r] maps an owned lid of rank r to the ranks ghosting it
    send_targets: list[dict[int, list[int]]]
    # last color broadcast per owned lid (drives changed-only exchanges)
    last_sent: list[dict[int, int]] = field(default_factory=list)
    workers: int = 1
    total_bytes: int = 0
    total_messages: int = 0

    def map_ranks(self, fn):
        """Run fn(rank_index) for every rank; one superstep phase."""
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, range(self.num_ranks)))
        return [fn(r) for r in range(self.num_ranks)]

    def reset_exchange_state(self) -> None:
        self.last_sent = [dict() for _ in range(self.num_ranks)]
        self.total_bytes = 0
        self.total_messages = 0


def _neighbors_of(g: Graph, gids: np.ndarray) -> np.ndarray:
    if gids.size == 0:
        return np.empty(0, dtype=np.int64)
    rows = [g.adj(v) for v in gids.tolist()]
    return np.unique(np.concatenate(rows))


def build_local_graphs(g: Graph, pm: PartitionMap, ghost_layers: int = 1) -> RankWorld:
    """Split g across pm's ranks with one or two ghost layers.

    With two layers each rank also stores every neighbor of its ghosts
    (the two-hop neighborhood of owned vertices); first-layer ghost rows
    are then complete, mirroring a one-time exchange of boundary
    adjacency lists. Edges to ghosts are stored undirected.
    """
    if ghost_layers not in (1, 2):
        raise ValueError("ghost_layers must be 1 or 2")
    pm.validate()
    if len(pm.owner) != g.num_vertices:
        raise ValueError("partition size does not match graph")

    owner = pm.owner
    locals_: list[LocalGraph] = []
    for r in range(pm.num_ranks):
        owned = np.flatnonzero(owner == r).astype(np.int64)
        owned_set = set(owned.tolist())
        nbrs = _neighbors_of(g, owned)
        layer1 = nbrs[owner[nbrs] != r] if nbrs.size else nbrs
        layer1_set = set(layer1.tolist())
        if ghost_layers == 2:
            l1_nbrs = _neighbors_of(g, layer1)
            layer2 = np.array(
                sorted(set(l1_nbrs.tolist()) - owned_set - layer1_set), dtype=np.int64
            )
        else:
            layer2 = np.empty(0, dtype=np.int64)

        all_gids = np.concatenate([owned, layer1, layer2])
        gid_to_lid = {int(gid): lid for lid, gid in enumerate(all_gids.tolist())}
        known = set(gid_to_lid)

        rows: list[np.ndarray] = []
        e_local = e_ghost = 0
        oc = len(owned)
        for lid, gid in enumerate(all_gids.tolist()):
            if lid < oc:
                nbr = g.adj(gid)  # all known by construction
            elif gid in layer1_set:
                if ghost_layers == 2:
                    nbr = g.adj(gid)  # full row arrived with the adjacency exchange
                else:
                    nbr = np.array(
                        [u for u in g.adj(gid).tolist() if u in owned_set], dtype=np.int64
                    )
            else:
                # second layer: only back-edges to first-layer ghosts are known
                nbr = np.array(
                    [u for u in g.adj(gid).tolist() if u in layer1_set], dtype=np.int64
                )
            local_row = np.array(sorted(gid_to_lid[int(u)] for u in nbr.tolist()), dtype=np.int64)
            rows.append(local_row)
            ghosts_in_row = int(np.count_nonzero(local_row >= oc))
            if lid < oc:
                e_local += len(local_row) - ghosts_in_row
                e_ghost += ghosts_in_row
            else:
                e_ghost += len(local_row)
        offsets = np.zeros(len(all_gids) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([len(row) for row in rows])
        indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)

        b1_mask = np.zeros(oc, dtype=bool)
        for v in range(oc):
            row = indices[offsets[v] : offsets[v + 1]]
            if np.any(row >= oc):
                b1_mask[v] = True
        b2_mask = b1_mask.copy()
        for v in range(oc):
            if b2_mask[v]:
                continue
            row = indices[offsets[v] : offsets[v + 1]]
            owned_nbrs = row[row < oc]
            if owned_nbrs.size and np.any(b1_mask[owned_nbrs]):
                b2_mask[v] = True

        ghost_gids = all_gids[oc:]
        locals_.append(
            LocalGraph(
                rank=r,
                owned_count=oc,
                ghost_count=len(ghost_gids),
                row_offsets=offsets,
                col_indices=indices,
                gids=all_gids,
                ghost_owner=owner[ghost_gids].astype(np.int32)
                if len(ghost_gids)
                else np.empty(0, dtype=np.int32),
                ghost_layers=ghost_layers,
                first_layer_ghost_count=len(layer1),
                boundary_d1=np.flatnonzero(b1_mask).astype(np.int64),
                boundary_d2=np.flatnonzero(b2_mask).astype(np.int64),
                num_local_edges=e_local // 2,
                num_ghost_edges=e_ghost // 2,
                gid_to_lid=gid_to_lid,
            )
        )

    # routing: an owned vertex is broadcast to every rank holding a copy
    send_targets: list[dict[int, list[int]]] = [dict() for _ in range(pm.num_ranks)]
    for r, lg in enumerate(locals_):
        for ghost_slot in range(lg.ghost_count):
            gid = int(lg.gids[lg.owned_count + ghost_slot])
            owner_rank = int(owner[gid])
            owned_lid = locals_[owner_rank].gid_to_lid[gid]
            send_targets[owner_rank].setdefault(owned_lid, []).append(r)

    world = RankWorld(
        num_ranks=pm.num_ranks,
        ghost_layers=ghost_layers,
        local_graphs=locals_,
        partition=pm,
        num_global_vertices=g.num_vertices,
        source_stats=graph_stats(g),
        send_targets=send_targets,
    )
    world.reset_exchange_state()
    return world


def exchange_boundary_colors(
    world: RankWorld, colorings: list[np.ndarray], changed_only: bool = False
) -> tuple[int, int]:
    """Broadcast owned boundary colors so every ghost copy matches its owner.

    With changed_only, only vertices whose color differs from the last
    broadcast are sent. Returns (bytes_sent, messages_sent); a message is
    one nonempty rank-to-rank transfer of (gid, color) pairs.
    """
    inboxes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for r in range(world.num_ranks):
        lg = world.local_graphs[r]
        colors = colorings[r]
        last = world.last_sent[r]
        for lid, targets in world.send_targets[r].items():
            color = int(colors[lid])
            if changed_only and last.get(lid) == color:
                continue
            last[lid] = color
            gid = int(lg.gids[lid])
            for dst in targets:
                inboxes.setdefault((r, dst), []).append((gid, color))

    bytes_sent = 0
    messages = 0
    for (src, dst), pairs in sorted(inboxes.items()):
        lg = world.local_graphs[dst]
        colors = colorings[dst]
        for gid, color in pairs:
            lid = lg.gid_to_lid.get(gid)
            if lid is None:
                raise ProtocolError(f"rank {dst} received unknown gid {gid} from rank {src}")
            colors[lid] = color
        bytes_sent += BYTES_PER_PAIR * len(pairs)
        messages += 1
    world.total_bytes += bytes_sent
    world.total_messages += messages
    return bytes_sent, messages


def allreduce_sum(world: RankWorld, per_rank_values) -> int:
    """Global sum made visible to every rank."""
    values = list(per_rank_values)
    if len(values) != world.num_ranks:
        raise ValueError("allreduce requires a contribution from every rank")
    return int(sum(values))


def snapshot_ghost_colors(lg: LocalGraph, colors: np.ndarray) -> np.ndarray:
    """Copy of the ghost segment of a rank's coloring."""
    return colors[lg.owned_count :].copy()


def restore_ghost_colors(lg: LocalGraph, colors: np.ndarray, saved: np.ndarray) -> None:
    """Put every ghost entry back to its snapshot value; owned untouched."""
    if len(saved) != lg.ghost_count:
        raise ValueError("ghost snapshot length mismatch")
    colors[lg.owned_count :] = saved
