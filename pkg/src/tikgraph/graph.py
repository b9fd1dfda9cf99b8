"""Sparse undirected graphs, normalized Laplacians, and structural queries.

Graphs are immutable once built: adjacency in CSR form with symmetric
nonnegative weights, no stored self-loops, plus cached degrees and
connected-component labels. All node indices are dense 0-based integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


@dataclass(frozen=True)
class Graph:
    """Immutable undirected weighted graph.

    Attributes
    ----------
    n : int
        Node count.
    adj : scipy.sparse.csr_matrix
        Symmetric adjacency with nonnegative weights and empty diagonal.
    degrees : ndarray, shape (n,)
        Weighted degree of each node.
    component_of : ndarray of int, shape (n,)
        Connected-component label per node (BFS-consistent).
    num_components : int
    """

    n: int
    adj: sp.csr_matrix
    degrees: np.ndarray
    component_of: np.ndarray
    num_components: int

    @property
    def num_edges(self) -> int:
        return self.adj.nnz // 2

    def edge_list(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (edges, weights) with i < j, in deterministic CSR order."""
        coo = sp.triu(self.adj, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        edges = np.stack([coo.row[order], coo.col[order]], axis=1)
        return edges, coo.data[order]


def build_graph(edges, n: int, weights=None) -> Graph:
    """Build a Graph from an edge list.

    Duplicate edges collapse by summing weights; self-loops are dropped.

    Parameters
    ----------
    edges : iterable of (i, j)
        Node index pairs, 0 <= i, j < n.
    n : int
        Node count.
    weights : optional sequence of nonnegative floats, parallel to edges.

    Raises
    ------
    ValueError
        On out-of-range indices or negative weights.
    """
    if n < 0:
        raise ValueError(f"node count must be nonnegative, got {n}")
    edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if weights is None:
        w = np.ones(len(edges))
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(edges):
            raise ValueError("weights length does not match edge count")
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise ValueError("edge index out of range")
    if np.any(w < 0):
        raise ValueError("negative edge weight")

    keep = edges[:, 0] != edges[:, 1] if len(edges) else np.zeros(0, dtype=bool)
    edges, w = edges[keep], w[keep]
    # Symmetrize by inserting both orientations; COO->CSR sums duplicates.
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.concatenate([w, w])
    adj = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    adj.eliminate_zeros()
    adj.sort_indices()

    degrees = np.asarray(adj.sum(axis=1)).ravel()
    if n > 0:
        num_components, component_of = csgraph.connected_components(
            adj, directed=False
        )
    else:
        num_components, component_of = 0, np.zeros(0, dtype=np.int32)
    return Graph(
        n=n,
        adj=adj,
        degrees=degrees,
        component_of=np.asarray(component_of),
        num_components=int(num_components),
    )


def normalized_laplacian(g: Graph) -> sp.csr_matrix:
    """Symmetric normalized Laplacian with isolated-node rows zeroed.

    For non-isolated nodes this is I - D^{-1/2} A D^{-1/2}; for an isolated
    node i, row and column i (including the diagonal) are exactly zero, which
    keeps the spectrum inside [0, 2] and makes the operator block-diagonal
    over connected components.
    """
    d = g.degrees
    nz = d > 0
    inv_sqrt = np.zeros(g.n)
    inv_sqrt[nz] = 1.0 / np.sqrt(d[nz])
    scaled = sp.diags(inv_sqrt) @ g.adj @ sp.diags(inv_sqrt)
    lap = sp.diags(nz.astype(float)) - scaled
    lap = lap.tocsr()
    lap.sort_indices()
    return lap


def hop_distance(g: Graph, i: int, j: int):
    """BFS shortest-path edge count between i and j; math.inf across components."""
    if not (0 <= i < g.n and 0 <= j < g.n):
        raise ValueError(f"node out of range: ({i}, {j}) with n={g.n}")
    if i == j:
        return 0
    dist = csgraph.shortest_path(g.adj, method="D", unweighted=True, indices=i)
    d = dist[j]
    return math.inf if np.isinf(d) else int(d)


def all_hop_distances(g: Graph) -> np.ndarray:
    """All-pairs BFS distance matrix (float, inf across components)."""
    if g.n == 0:
        return np.zeros((0, 0))
    return csgraph.shortest_path(g.adj, method="D", unweighted=True)


def diameter(g: Graph) -> int:
    """Maximum hop distance over all node pairs; requires a connected graph."""
    if g.num_components != 1:
        raise ValueError("diameter is undefined for a disconnected graph")
    dist = all_hop_distances(g)
    return int(dist.max())


def batch_graphs(items) -> tuple[Graph, np.ndarray, np.ndarray]:
    """Block-diagonal union of (Graph, feature matrix) pairs.

    Returns
    -------
    (batched Graph, stacked features, graph_of)
        graph_of maps each node of the union to the index of its source graph.
        Component labels are offset per graph so per-graph structure is kept.
    """
    items = list(items)
    if not items:
        raise ValueError("cannot batch an empty list of graphs")
    feats = []
    d = None
    for g, x in items:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != g.n:
            raise ValueError(
                f"feature matrix shape {x.shape} does not match n={g.n}"
            )
        if d is None:
            d = x.shape[1]
        elif x.shape[1] != d:
            raise ValueError("inconsistent feature dimension across batch")
        feats.append(x)

    adj = sp.block_diag([g.adj for g, _ in items], format="csr")
    adj.sort_indices()
    degrees = np.concatenate([g.degrees for g, _ in items])
    comp, graph_of, offset = [], [], 0
    for idx, (g, _) in enumerate(items):
        comp.append(g.component_of + offset)
        graph_of.append(np.full(g.n, idx, dtype=np.int64))
        offset += g.num_components
    batched = Graph(
        n=int(adj.shape[0]),
        adj=adj,
        degrees=degrees,
        component_of=np.concatenate(comp) if comp else np.zeros(0, dtype=int),
        num_components=offset,
    )
    return batched, np.vstack(feats), np.concatenate(graph_of)


def graph_to_dict(g: Graph) -> dict:
    """JSON-ready form: {"n", "edges", "weights" (omitted when all 1)}."""
    edges, w = g.edge_list()
    out = {"n": g.n, "edges": edges.tolist()}
    if len(w) and not np.all(w == 1.0):
        out["weights"] = w.tolist()
    return out


def graph_from_dict(d: dict) -> Graph:
    return build_graph(d["edges"], int(d["n"]), d.get("weights"))
