"""Simple undirected graphs, stochastic block models, and synthetic targets.

Graphs are simple (no self-loops, no multi-edges) and undirected. Edges are
stored once in canonical form (u < v, lexicographically sorted); a CSR view
over both edge directions is built on construction so likelihood kernels can
run in O(|E|) per pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def as_rng(seed):
    """Coerce None, an int seed, or a Generator into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _canonical_edges(n_nodes, edges):
    edges = np.asarray(edges, dtype=np.int64)
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError(f"edge array must have shape (E, 2), got {edges.shape}")
    if edges.min() < 0 or edges.max() >= n_nodes:
        raise ValueError("edge endpoint out of range [0, n_nodes)")
    keep = edges[:, 0] != edges[:, 1]  # drop self-loops
    edges = edges[keep]
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    edges = np.unique(np.column_stack([lo, hi]), axis=0)
    return edges


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected graph with optional node features/labels."""

    n_nodes: int
    edges: np.ndarray                 # (E, 2) canonical: u < v, sorted, unique
    features: np.ndarray | None = None  # (N, D) float
    labels: np.ndarray | None = None    # (N,) ints in {0, 1}
    # CSR over both edge directions, filled in __post_init__.
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    edge_row: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_nodes
        if n < 0:
            raise ValueError("n_nodes must be non-negative")
        e = self.edges
        directed = np.concatenate([e, e[:, ::-1]], axis=0) if e.size else e.reshape(0, 2)
        order = np.lexsort((directed[:, 1], directed[:, 0]))
        directed = directed[order]
        counts = np.bincount(directed[:, 0], minlength=n) if n else np.zeros(0, np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", np.ascontiguousarray(directed[:, 1]))
        object.__setattr__(self, "edge_row", np.ascontiguousarray(directed[:, 0]))
        for name in ("edges", "indptr", "indices", "edge_row", "features", "labels"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, n):
        return self.indices[self.indptr[n]:self.indptr[n + 1]]

    def adjacency(self, dtype=np.float64):
        """Dense symmetric 0/1 adjacency matrix."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=dtype)
        if self.n_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1
            a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def with_edges(self, edges):
        """Same nodes/features/labels, different edge set."""
        return build_graph(self.n_nodes, edges, features=self.features, labels=self.labels)


def build_graph(n_nodes, edges, features=None, labels=None):
    """Construct a Graph, deduplicating edges and dropping self-loops.

    Endpoints are 0-based; an endpoint outside [0, n_nodes) is an error.
    """
    n_nodes = int(n_nodes)
    edges = _canonical_edges(n_nodes, edges)
    if features is not None:
        features = np.array(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n_nodes:
            raise ValueError(f"features must have shape ({n_nodes}, D)")
    if labels is not None:
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != n_nodes:
            raise ValueError(f"labels must have length {n_nodes}")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
    return Graph(n_nodes, edges, features=features, labels=labels)


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model: class proportions and symmetric block probabilities."""

    class_probs: np.ndarray   # (K,) sums to 1
    block_probs: np.ndarray   # (K, K) symmetric, entries in [0, 1]

    def __post_init__(self):
        cp = np.asarray(self.class_probs, dtype=np.float64)
        bp = np.asarray(self.block_probs, dtype=np.float64)
        object.__setattr__(self, "class_probs", cp)
        object.__setattr__(self, "block_probs", bp)
        if cp.ndim != 1 or cp.size == 0 or (cp < 0).any():
            raise ValueError("class_probs must be a non-negative vector")
        if abs(cp.sum() - 1.0) > 1e-9:
            raise ValueError(f"class_probs must sum to 1 within 1e-9, got {cp.sum()!r}")
        k = cp.size
        if bp.shape != (k, k):
            raise ValueError(f"block_probs must have shape ({k}, {k})")
        if not np.allclose(bp, bp.T, rtol=0, atol=0):
            raise ValueError("block_probs must be symmetric")
        if (bp < 0).any() or (bp > 1).any():
            raise ValueError("block_probs entries must lie in [0, 1]")

    @property
    def n_classes(self):
        return self.class_probs.size


def three_class_off_diagonal_sbm(p=0.5):
    """Three-class SBM with zero within-class blocks and `p` across classes."""
    k = 3
    blocks = np.full((k, k), float(p))
    np.fill_diagonal(blocks, 0.0)
    return SbmSpec(np.full(k, 1.0 / k), blocks)


def two_block_assortative_sbm(p_in=0.2, p_out=0.02):
    """Two-class SBM with dominant within-class probability."""
    blocks = np.array([[p_in, p_out], [p_out, p_in]], dtype=np.float64)
    return SbmSpec(np.full(2, 0.5), blocks)


def sample_sbm(spec, n_nodes, rng):
    """Sample a graph from an SBM; returns (graph, node_classes).

    Node classes are drawn i.i.d. from class_probs; each dyad (n, m), n < m,
    is an edge with probability block_probs[k_n, k_m].
    """
    rng = as_rng(rng)
    n = int(n_nodes)
    classes = rng.choice(spec.n_classes, size=n, p=spec.class_probs)
    iu, ju = np.triu_indices(n, k=1)
    probs = spec.block_probs[classes[iu], classes[ju]]
    mask = rng.random(probs.shape) < probs
    edges = np.column_stack([iu[mask], ju[mask]])
    return build_graph(n, edges), classes


def sbm_prob_matrix(spec, classes):
    """Ground-truth dyad probability matrix for given node classes (zero diagonal)."""
    classes = np.asarray(classes)
    p = spec.block_probs[np.ix_(classes, classes)].astype(np.float64)
    np.fill_diagonal(p, 0.0)
    return p


def bipartite_prob_matrix(nodes_per_side, a):
    """Bipartite edge-probability target on 2N nodes.

    Cross-side dyads get probability 1 - exp(-a^2); same-side dyads and the
    diagonal are 0. Side 1 is nodes [0, N), side 2 is [N, 2N).
    """
    n = int(nodes_per_side)
    if n < 1:
        raise ValueError("nodes_per_side must be >= 1")
    a = float(a)
    p = np.zeros((2 * n, 2 * n))
    cross = -np.expm1(-(a * a))
    p[:n, n:] = cross
    p[n:, :n] = cross
    return p


def sample_bernoulli_graph(prob_matrix, rng):
    """Sample a simple graph with independent dyad probabilities (upper triangle)."""
    p = np.asarray(prob_matrix, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("prob_matrix must be square")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    rng = as_rng(rng)
    n = p.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.shape) < p[iu, ju]
    return build_graph(n, np.column_stack([iu[mask], ju[mask]]))


def densify_two_hop(graph):
    """Add an edge between every pair of nodes sharing a common neighbor.

    Monotone (never removes edges); complete graphs are fixed points.
    """
    a = graph.adjacency(dtype=np.bool_)
    two_hop = (a.astype(np.int64) @ a.astype(np.int64)) > 0
    np.fill_diagonal(two_hop, False)
    merged = a | two_hop
    iu, ju = np.nonzero(np.triu(merged, k=1))
    return graph.with_edges(np.column_stack([iu, ju]))
