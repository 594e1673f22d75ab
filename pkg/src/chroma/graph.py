"""Graph containers, generators, and file I/O.

All graphs are stored in CSR form with dense 0-based vertex ids.
Undirected graphs are kept simple (no self-loops, no multi-edges),
symmetrized, and with sorted adjacency rows; the coloring kernels and
conflict scans elsewhere in the package rely on those invariants.
Colors are positive integers starting at 1; 0 means "uncolored".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "DirectedGraph",
    "BipartiteGraph",
    "GraphStats",
    "preprocess",
    "preprocess_directed",
    "load_edge_list",
    "load_matrix_market",
    "load_graph",
    "save_csr_cache",
    "load_csr_cache",
    "gen_hex_mesh",
    "gen_mycielskian",
    "gen_random_gnp",
    "stats",
    "to_bipartite",
]

CSR_CACHE_MAGIC = b"CHRG"
CSR_CACHE_VERSION = 1


@dataclass
class Graph:
    """Simple undirected graph in CSR form.

    Attributes
    ----------
    num_vertices : int
        Vertex count; ids are 0..num_vertices-1.
    row_offsets : ndarray of int64, shape (num_vertices + 1,)
        CSR row pointers; non-decreasing, row_offsets[0] == 0.
    col_indices : ndarray of int64
        Concatenated adjacency rows, each sorted ascending. Every
        undirected edge appears twice (once per endpoint).
    source_ids : ndarray or None
        When loaded from a file with arbitrary ids, source_ids[i] is the
        original id of compacted vertex i.
    """

    num_vertices: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    source_ids: np.ndarray | None = None

    def adj(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each edge stored twice in CSR)."""
        return len(self.col_indices) // 2

    def validate(self) -> None:
        """Assert the CSR invariants; raises ValueError on corruption."""
        off, idx = self.row_offsets, self.col_indices
        if len(off) != self.num_vertices + 1 or off[0] != 0 or off[-1] != len(idx):
            raise ValueError("row_offsets inconsistent with col_indices")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets not non-decreasing")
        if len(idx) and (idx.min() < 0 or idx.max() >= self.num_vertices):
            raise ValueError("col_indices out of range")
        for v in range(self.num_vertices):
            row = self.adj(v)
            if np.any(row == v):
                raise ValueError(f"self-loop at vertex {v}")
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"row {v} not strictly sorted (dup or unsorted)")
        # symmetry: (u, v) present iff (v, u) present
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), np.diff(off))
        fwd = set(zip(src.tolist(), idx.tolist()))
        for u, v in fwd:
            if (v, u) not in fwd:
                raise ValueError(f"asymmetric edge ({u},{v})")


@dataclass
class DirectedGraph:
    """Directed graph in CSR form (out-adjacency); used as PD2 input."""

    num_vertices: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    source_ids: np.ndarray | None = None

    def adj(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    @property
    def num_edges(self) -> int:
        return len(self.col_indices)


@dataclass
class BipartiteGraph:
    """Bipartite view over an undirected Graph.

    Vertices 0..num_s-1 are the colored side V_s, num_s..num_s+num_t-1
    are V_t. The embedded ``graph`` is a plain Graph over both sides and
    is what the distributed drivers operate on.
    """

    num_s: int
    num_t: int
    graph: Graph

    def s_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_s + self.num_t, dtype=bool)
        mask[: self.num_s] = True
        return mask


@dataclass(frozen=True)
class GraphStats:
    num_vertices: int
    num_edges: int
    delta_avg: float
    delta_max: int


def _csr_from_sorted_pairs(num_vertices: int, pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Build (row_offsets, col_indices) from deduplicated (src, dst) pairs."""
    offsets = np.zeros(num_vertices + 1, dtype=np.int64)
    if len(pairs):
        counts = np.bincount(pairs[:, 0], minlength=num_vertices)
        offsets[1:] = np.cumsum(counts)
        indices = pairs[:, 1].astype(np.int64)
    else:
        indices = np.empty(0, dtype=np.int64)
    return offsets, indices


def _dedupe_pairs(num_vertices: int, pairs: np.ndarray) -> np.ndarray:
    """Sort pairs by (src, dst) and drop duplicates. n^2 must fit in int64."""
    if len(pairs) == 0:
        return pairs.reshape(0, 2).astype(np.int64)
    enc = pairs[:, 0].astype(np.int64) * num_vertices + pairs[:, 1]
    enc = np.unique(enc)
    out = np.empty((len(enc), 2), dtype=np.int64)
    out[:, 0] = enc // num_vertices
    out[:, 1] = enc % num_vertices
    return out


def preprocess(num_vertices: int, edges: np.ndarray) -> Graph:
    """Build a simple, symmetrized, sorted-adjacency Graph from raw edges.

    Multi-edges and self-loops are removed; every input edge (u, v) also
    contributes (v, u). An empty edge set is allowed.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if num_vertices > 2**31:
        raise ValueError("graph too large for this build")
    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
    pairs = _dedupe_pairs(num_vertices, both)
    offsets, indices = _csr_from_sorted_pairs(num_vertices, pairs)
    return Graph(num_vertices, offsets, indices)


def preprocess_directed(num_vertices: int, arcs: np.ndarray) -> DirectedGraph:
    """Like preprocess but keeps arc direction (no symmetrization)."""
    arcs = np.asarray(arcs, dtype=np.int64).reshape(-1, 2)
    arcs = arcs[arcs[:, 0] != arcs[:, 1]]
    pairs = _dedupe_pairs(num_vertices, arcs)
    offsets, indices = _csr_from_sorted_pairs(num_vertices, pairs)
    return DirectedGraph(num_vertices, offsets, indices)


def _parse_pairs(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read "u v" lines, compacting ids by first appearance.

    Returns (edges over compacted ids, source id of each compacted vertex).
    """
    id_map: dict[int, int] = {}
    src: list[int] = []
    dst: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith("%"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer vertex id") from exc
            for w in (u, v):
                if w not in id_map:
                    id_map[w] = len(id_map)
            src.append(id_map[u])
            dst.append(id_map[v])
    if not src:
        raise ValueError(f"{path}: no edges found")
    edges = np.column_stack([np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)])
    source_ids = np.fromiter(id_map.keys(), dtype=np.int64, count=len(id_map))
    return edges, source_ids


def load_edge_list(path: str, directed: bool = False) -> Graph | DirectedGraph:
    """Load a whitespace-separated edge list ('#'/'%' lines are comments)."""
    edges, source_ids = _parse_pairs(path)
    n = len(source_ids)
    if directed:
        g: Graph | DirectedGraph = preprocess_directed(n, edges)
    else:
        g = preprocess(n, edges)
    g.source_ids = source_ids
    return g


def load_matrix_market(path: str) -> Graph:
    """Load the coordinate/pattern/symmetric subset of Matrix Market."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        fields = header.strip().lower().split()
        expect = ["%%matrixmarket", "matrix", "coordinate", "pattern", "symmetric"]
        if fields != expect:
            raise ValueError(f"{path}: unsupported Matrix Market header {header.strip()!r}")
        size_line = None
        lineno = 1
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            size_line = line
            break
        if size_line is None:
            raise ValueError(f"{path}: missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: malformed size line")
        rows, cols, nnz = (int(p) for p in parts)
        if rows != cols:
            raise ValueError(f"{path}: pattern is {rows}x{cols}, expected square")
        src = np.empty(nnz, dtype=np.int64)
        dst = np.empty(nnz, dtype=np.int64)
        k = 0
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j'")
            src[k] = int(parts[0]) - 1
            dst[k] = int(parts[1]) - 1
            k += 1
        if k != nnz:
            raise ValueError(f"{path}: expected {nnz} entries, found {k}")
    return preprocess(rows, np.column_stack([src, dst]))


def save_csr_cache(g: Graph, path: str) -> None:
    """Write the binary CSR cache: magic, version u32, n u64, m u64, data (LE)."""
    with open(path, "wb") as fh:
        fh.write(CSR_CACHE_MAGIC)
        fh.write(struct.pack("<I", CSR_CACHE_VERSION))
        fh.write(struct.pack("<Q", g.num_vertices))
        fh.write(struct.pack("<Q", len(g.col_indices)))
        fh.write(g.row_offsets.astype("<u8").tobytes())
        fh.write(g.col_indices.astype("<u8").tobytes())


def load_csr_cache(path: str) -> Graph:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CSR_CACHE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CSR_CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        (m,) = struct.unpack("<Q", fh.read(8))
        offsets = np.frombuffer(fh.read(8 * (n + 1)), dtype="<u8").astype(np.int64)
        indices = np.frombuffer(fh.read(8 * m), dtype="<u8").astype(np.int64)
        if len(offsets) != n + 1 or len(indices) != m:
            raise ValueError(f"{path}: truncated cache file")
    return Graph(int(n), offsets, indices)


def load_graph(path: str, directed: bool = False) -> Graph | DirectedGraph:
    """Dispatch on file content: CSR cache, Matrix Market, or edge list."""
    with open(path, "rb") as fh:
        head = fh.read(len(CSR_CACHE_MAGIC))
    if head == CSR_CACHE_MAGIC:
        return load_csr_cache(path)
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        first = fh.readline()
    if first.startswith("%%MatrixMarket"):
        return load_matrix_market(path)
    return load_edge_list(path, directed=directed)


def gen_hex_mesh(nx: int, ny: int, nz: int) -> Graph:
    """Uniform 3D hexahedral mesh: one vertex per cell, 6-point stencil.

    Cells are ordered x-fastest (id = x + nx*(y + ny*z)), so contiguous
    id ranges form slabs along z. Edge count is
    3*nx*ny*nz - nx*ny - ny*nz - nx*nz.
    """
    if nx < 1 or ny < 1 or nz < 1:
        raise ValueError("mesh dimensions must be >= 1")
    n = nx * ny * nz
    if n > 2**31:
        raise ValueError("mesh dimensions overflow supported size")
    ids = np.arange(n, dtype=np.int64).reshape(nz, ny, nx)
    pieces = []
    if nx > 1:
        pieces.append(np.column_stack([ids[:, :, :-1].ravel(), ids[:, :, 1:].ravel()]))
    if ny > 1:
        pieces.append(np.column_stack([ids[:, :-1, :].ravel(), ids[:, 1:, :].ravel()]))
    if nz > 1:
        pieces.append(np.column_stack([ids[:-1, :, :].ravel(), ids[1:, :, :].ravel()]))
    edges = np.concatenate(pieces) if pieces else np.empty((0, 2), dtype=np.int64)
    return preprocess(n, edges)


def gen_mycielskian(k: int) -> Graph:
    """Mycielskian iterate of K2 with chromatic number exactly k (2 <= k <= 12).

    Each step maps G on n vertices to a graph on 2n+1: shadow vertex n+i
    copies the neighborhood of i, and an apex 2n joins all shadows. The
    construction preserves triangle-freeness while raising the chromatic
    number by one, so k=3 yields C5 and k=4 the 11-vertex Grotzsch graph.
    """
    if not 2 <= k <= 12:
        raise ValueError("k must be in [2, 12]")
    n = 2
    edges = np.array([[0, 1]], dtype=np.int64)
    for _ in range(k - 2):
        shadow_u = edges + np.array([n, 0], dtype=np.int64)  # (n+i, j)
        shadow_v = edges[:, ::-1] + np.array([n, 0], dtype=np.int64)  # (n+j, i)
        apex = np.column_stack(
            [np.arange(n, 2 * n, dtype=np.int64), np.full(n, 2 * n, dtype=np.int64)]
        )
        edges = np.concatenate([edges, shadow_u, shadow_v, apex])
        n = 2 * n + 1
    return preprocess(n, edges)


def gen_random_gnp(n: int, p: float, seed: int) -> Graph:
    """Seeded Erdos-Renyi G(n, p); identical on repeat calls."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    rng = np.random.default_rng(seed)
    if n < 2 or p == 0.0:
        return preprocess(n, np.empty((0, 2), dtype=np.int64))
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = np.column_stack([iu[keep], iv[keep]]).astype(np.int64)
    return preprocess(n, edges)


def stats(g: Graph) -> GraphStats:
    """Exact counts and degree extremes; edges counted once (undirected)."""
    deg = g.degrees
    dmax = int(deg.max()) if g.num_vertices else 0
    davg = float(deg.mean()) if g.num_vertices else 0.0
    return GraphStats(g.num_vertices, g.num_edges, davg, dmax)


def to_bipartite(d: DirectedGraph) -> BipartiteGraph:
    """Row/column bipartite form of a directed graph.

    Each arc (v, u) becomes an undirected edge between s_v (id v) and
    t_u (id n+u). Both sides have n vertices; the embedded Graph spans
    2n vertices and feeds the D2/PD2 drivers directly.
    """
    n = d.num_vertices
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(d.row_offsets))
    edges = np.column_stack([src, d.col_indices + n])
    g = preprocess(2 * n, edges)
    return BipartiteGraph(num_s=n, num_t=n, graph=g)
