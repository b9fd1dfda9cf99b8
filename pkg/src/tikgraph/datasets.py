"""Seeded generators for the five benchmark task families, plus JSONL storage.

Every generator is a pure function of (params, seed): identical seeds produce
identical datasets byte-for-byte. Ground-truth annotations ride in each
sample's meta dict; "highlight_nodes"/"highlight_edges" are a uniform overlay
contract consumed by the plotting frontend.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, build_graph, diameter, graph_from_dict, graph_to_dict
from .seeding import rng_for

DATASET_SCHEMA_VERSION = 1


@dataclass
class GraphSample:
    graph: Graph
    features: np.ndarray
    label: object  # int class or float regression target
    meta: dict = field(default_factory=dict)


def _ones_features(n: int) -> np.ndarray:
    return np.ones((n, 1))


# ---------------------------------------------------------------------------
# clique distance


def gen_clique_distance(
    count: int,
    seed: int,
    clique_size: tuple[int, int] = (4, 8),
    path_length: tuple[int, int] = (1, 7),
) -> list[GraphSample]:
    """Two cliques joined by a path; label 1 iff the inter-clique distance >= 4.

    The path-length range must straddle the threshold so both classes occur.
    Features are the all-ones vector (the task is purely structural).
    """
    lo, hi = path_length
    if lo < 1 or hi < lo or lo >= 4 or hi < 4:
        raise ValueError("path_length range must straddle the threshold 4")
    if clique_size[0] < 2 or clique_size[1] < clique_size[0]:
        raise ValueError("degenerate clique size range")
    rng = rng_for(seed, "clique_distance")
    samples = []
    for _ in range(count):
        a = int(rng.integers(clique_size[0], clique_size[1] + 1))
        b = int(rng.integers(clique_size[0], clique_size[1] + 1))
        length = int(rng.integers(lo, hi + 1))
        edges = []
        nodes_a = list(range(a))
        nodes_b = list(range(a, a + b))
        for block in (nodes_a, nodes_b):
            edges.extend((i, j) for k, i in enumerate(block) for j in block[k + 1 :])
        anchor_a = int(rng.integers(0, a))
        anchor_b = int(rng.integers(a, a + b))
        path_nodes = list(range(a + b, a + b + length - 1))
        chain = [anchor_a] + path_nodes + [anchor_b]
        path_edges = list(zip(chain[:-1], chain[1:]))
        edges.extend(path_edges)
        n = a + b + length - 1
        g = build_graph(edges, n)
        samples.append(
            GraphSample(
                graph=g,
                features=_ones_features(n),
                label=int(length >= 4),
                meta={
                    "path_length": length,
                    "clique_a": nodes_a,
                    "clique_b": nodes_b,
                    "anchors": [anchor_a, anchor_b],
                    "path_nodes": path_nodes,
                    "highlight_nodes": path_nodes,
                    "highlight_edges": [list(e) for e in path_edges],
                },
            )
        )
    return samples


# ---------------------------------------------------------------------------
# triangles


def count_triangles(g: Graph) -> int:
    """Triangle count via common-neighbor intersection over edges, O(n*m)."""
    neighbors = [set(g.adj.indices[g.adj.indptr[i] : g.adj.indptr[i + 1]]) for i in range(g.n)]
    total = 0
    edges, _ = g.edge_list()
    for i, j in edges:
        total += len(neighbors[i] & neighbors[j])
    return total // 3


def find_triangle(g: Graph):
    neighbors = [set(g.adj.indices[g.adj.indptr[i] : g.adj.indptr[i + 1]]) for i in range(g.n)]
    edges, _ = g.edge_list()
    for i, j in edges:
        common = neighbors[i] & neighbors[j]
        if common:
            return sorted([int(i), int(j), int(min(common))])
    return None


def gen_triangles(
    count: int,
    seed: int,
    size: tuple[int, int] = (8, 16),
    edge_factor: float = 1.1,
    budget: int = 5000,
) -> list[GraphSample]:
    """Balanced dataset: class 1 graphs contain exactly one triangle, class 0
    none. Candidates are G(n, m) draws with m ~ edge_factor * n, bucketed by
    their exact triangle count so both classes share the same (n, m) law.
    """
    if size[0] < 4 or size[1] < size[0]:
        raise ValueError("size range infeasible")
    if count % 2:
        raise ValueError("count must be even for a balanced dataset")
    rng = rng_for(seed, "triangles")
    pools: dict[int, list[GraphSample]] = {0: [], 1: []}
    attempts = 0
    half = count // 2
    while (len(pools[0]) < half or len(pools[1]) < half) and attempts < budget * count:
        attempts += 1
        n = int(rng.integers(size[0], size[1] + 1))
        m = max(n - 1, int(round(edge_factor * n)))
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        idx = rng.choice(len(pairs), size=min(m, len(pairs)), replace=False)
        g = build_graph([pairs[k] for k in sorted(idx)], n)
        tri = count_triangles(g)
        if tri > 1 or len(pools[tri]) >= half:
            continue
        nodes = find_triangle(g) if tri == 1 else []
        tri_edges = (
            [[nodes[0], nodes[1]], [nodes[0], nodes[2]], [nodes[1], nodes[2]]] if nodes else []
        )
        pools[tri].append(
            GraphSample(
                graph=g,
                features=_ones_features(n),
                label=tri,
                meta={
                    "triangle_nodes": nodes,
                    "highlight_nodes": nodes,
                    "highlight_edges": tri_edges,
                },
            )
        )
    if len(pools[0]) < half or len(pools[1]) < half:
        raise RuntimeError("triangle rejection-sampling budget exceeded")
    samples = [s for pair in zip(pools[0], pools[1]) for s in pair]
    order = rng.permutation(count)
    return [samples[i] for i in order]


# ---------------------------------------------------------------------------
# colors


def gen_colors(
    count: int,
    seed: int,
    size: tuple[int, int] = (5, 15),
    num_colors: int = 3,
    mean_degree: float = 3.0,
) -> list[GraphSample]:
    """Random graphs with one-hot color features; the label counts nodes of
    color 0 ("green"). Solvable from features alone."""
    if num_colors < 2:
        raise ValueError("need at least two colors")
    rng = rng_for(seed, "colors")
    samples = []
    for _ in range(count):
        n = int(rng.integers(size[0], size[1] + 1))
        p = min(1.0, mean_degree / max(n - 1, 1))
        mask = rng.random((n, n)) < p
        iu = np.triu_indices(n, k=1)
        edges = [(int(i), int(j)) for i, j in zip(*iu) if mask[i, j]]
        g = build_graph(edges, n)
        colors = rng.integers(0, num_colors, size=n)
        feats = np.zeros((n, num_colors))
        feats[np.arange(n), colors] = 1.0
        green = [int(i) for i in np.flatnonzero(colors == 0)]
        samples.append(
            GraphSample(
                graph=g,
                features=feats,
                label=len(green),
                meta={"green_nodes": green, "highlight_nodes": green},
            )
        )
    return samples


# ---------------------------------------------------------------------------
# contextual stochastic block model


@dataclass
class CsbmParams:
    """Two-block contextual SBM.

    Edges are Bernoulli with p_in = (d + lam*sqrt(d))/n within blocks and
    p_out = (d - lam*sqrt(d))/n across; features are f_i = sqrt(mu/n) v_i u + z_i
    with shared direction u and noise z_i both N(0, I_p / p), p = round(n/gamma).
    """

    n: int = 100
    avg_degree: float = 10.0
    lam: float = 1.0
    mu: float = 1.0
    gamma: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if self.n % 2:
            raise ValueError("n must be even (two equal blocks)")
        if not 0 <= self.lam <= math.sqrt(self.avg_degree):
            raise ValueError("lam must lie in [0, sqrt(avg_degree)]")
        if self.mu < 0 or self.gamma <= 0:
            raise ValueError("mu must be >= 0 and gamma > 0")

    @property
    def p_in(self) -> float:
        return (self.avg_degree + self.lam * math.sqrt(self.avg_degree)) / self.n

    @property
    def p_out(self) -> float:
        return (self.avg_degree - self.lam * math.sqrt(self.avg_degree)) / self.n

    @property
    def feature_dim(self) -> int:
        return max(1, int(round(self.n / self.gamma)))


def _sample_sbm_edges(rng, n, communities, p_in, p_out):
    iu, ju = np.triu_indices(n, k=1)
    same = communities[iu] == communities[ju]
    prob = np.where(same, p_in, p_out)
    hit = rng.random(len(iu)) < prob
    return list(zip(iu[hit].tolist(), ju[hit].tolist()))


def gen_csbm(params: CsbmParams, rng=None, resample_budget: int = 500) -> GraphSample:
    """One class-1 sample; the topology is resampled until connected."""
    rng = rng if rng is not None else rng_for(params.seed, "csbm")
    n, p = params.n, params.feature_dim
    communities = np.concatenate([np.ones(n // 2, int), -np.ones(n // 2, int)])
    communities = communities[rng.permutation(n)]
    for _ in range(resample_budget):
        g = build_graph(_sample_sbm_edges(rng, n, communities, params.p_in, params.p_out), n)
        if g.num_components == 1:
            break
    else:
        raise RuntimeError("connectivity resampling budget exceeded")
    u = rng.normal(0.0, p**-0.5, size=p)
    noise = rng.normal(0.0, p**-0.5, size=(n, p))
    feats = math.sqrt(params.mu / n) * communities[:, None] * u + noise
    return GraphSample(
        graph=g,
        features=feats,
        label=1,
        meta={
            "communities": communities.tolist(),
            "p_in": params.p_in,
            "p_out": params.p_out,
            "feature_dim": p,
            "lam": params.lam,
            "mu": params.mu,
            "highlight_nodes": [int(i) for i in np.flatnonzero(communities == 1)],
        },
    )


def rewire_null(g: Graph, swaps: int | None = None, seed: int = 0, rng=None) -> tuple[Graph, int]:
    """Degree-preserving double-edge-swap randomization of a connected graph.

    Swaps that would create self-loops, multi-edges, or disconnect the graph
    are rejected. Returns (rewired graph, accepted swap count); the count may
    fall short of the target when the attempt budget runs out.
    """
    if g.num_components != 1:
        raise ValueError("rewiring requires a connected input graph")
    if g.n > 2000:
        raise ValueError("dense rewiring buffer is restricted to n <= 2000")
    rng = rng if rng is not None else rng_for(seed, "rewire")
    edges, w = g.edge_list()
    if len(w) and not np.all(w == 1.0):
        raise ValueError("rewiring supports unit-weight graphs only")
    target = 10 * len(edges) if swaps is None else swaps
    max_attempts = 50 * max(target, 1)

    adj = np.zeros((g.n, g.n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    edges = [tuple(e) for e in edges.tolist()]

    def connected() -> bool:
        frontier = np.zeros(g.n, dtype=bool)
        frontier[0] = True
        seen = frontier.copy()
        while frontier.any():
            frontier = adj[frontier].any(axis=0) & ~seen
            seen |= frontier
        return bool(seen.all())

    accepted = 0
    attempts = 0
    while accepted < target and attempts < max_attempts:
        attempts += 1
        e1, e2 = rng.integers(0, len(edges), size=2)
        if e1 == e2:
            continue
        a, b = edges[e1]
        c, d = edges[e2]
        if rng.random() < 0.5:
            b, a = a, b
        # propose (a, d) and (c, b)
        if len({a, b, c, d}) < 4 or adj[a, d] or adj[c, b]:
            continue
        adj[a, b] = adj[b, a] = adj[c, d] = adj[d, c] = False
        adj[a, d] = adj[d, a] = adj[c, b] = adj[b, c] = True
        if not connected():
            adj[a, d] = adj[d, a] = adj[c, b] = adj[b, c] = False
            adj[a, b] = adj[b, a] = adj[c, d] = adj[d, c] = True
            continue
        edges[e1] = (a, d)
        edges[e2] = (c, b)
        accepted += 1
    return build_graph(edges, g.n), accepted


def gen_csbm_task(params: CsbmParams, count: int, seed: int | None = None) -> list[GraphSample]:
    """Balanced two-class dataset: class 1 = CSBM samples; class 0 = fresh
    same-lam topology rewired to kill community structure, features with mu=0."""
    if count % 2:
        raise ValueError("count must be even")
    seed = params.seed if seed is None else seed
    rng = rng_for(seed, "csbm-task")
    samples = []
    for _ in range(count // 2):
        samples.append(gen_csbm(params, rng=rng))
    null_params = CsbmParams(
        n=params.n, avg_degree=params.avg_degree, lam=params.lam,
        mu=0.0, gamma=params.gamma, seed=seed,
    )
    for _ in range(count // 2):
        base = gen_csbm(null_params, rng=rng)
        g, accepted = rewire_null(base.graph, rng=rng)
        meta = dict(base.meta)
        meta.update({"rewired_swaps": accepted, "mu": 0.0, "highlight_nodes": []})
        samples.append(GraphSample(graph=g, features=base.features, label=0, meta=meta))
    order = rng.permutation(count)
    return [samples[i] for i in order]


# ---------------------------------------------------------------------------
# diameter regression


def _random_tree_edges(rng, n):
    # Pruefer sequence decoding
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, int)
    for v in seq:
        degree[v] += 1
    edges = []
    leaves = sorted(int(i) for i in range(n) if degree[i] == 1)
    import heapq

    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(v)))
        degree[leaf] -= 1
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, int(v))
    u, v = (int(i) for i in np.flatnonzero(degree == 1))
    edges.append((u, v))
    return edges


def gen_diameter(
    count: int,
    seed: int,
    diam_range: tuple[int, int] = (4, 30),
    budget: int = 200,
) -> list[GraphSample]:
    """Connected graphs from three families (random trees, paths with attached
    blobs, sparse connected G(n, m)) with exact-diameter regression targets."""
    rng = rng_for(seed, "diameter")
    samples = []
    families = ["tree", "path_blobs", "sparse"]
    for k in range(count):
        family = families[k % len(families)]
        for _ in range(budget):
            if family == "tree":
                n = int(rng.integers(10, 61))
                g = build_graph(_random_tree_edges(rng, n), n)
            elif family == "path_blobs":
                length = int(rng.integers(max(diam_range[0], 4), diam_range[1] - 1))
                edges = [(i, i + 1) for i in range(length)]
                n = length + 1
                for _ in range(int(rng.integers(1, 4))):
                    site = int(rng.integers(0, length + 1))
                    blob = int(rng.integers(2, 5))
                    members = [site] + list(range(n, n + blob))
                    edges.extend(
                        (members[i], members[j])
                        for i in range(len(members))
                        for j in range(i + 1, len(members))
                    )
                    n += blob
                g = build_graph(edges, n)
            else:
                n = int(rng.integers(15, 51))
                m = int(round(1.2 * n))
                pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
                idx = rng.choice(len(pairs), size=min(m, len(pairs)), replace=False)
                g = build_graph([pairs[q] for q in sorted(idx)], n)
                if g.num_components != 1:
                    continue
            target = diameter(g)
            if diam_range[0] <= target <= diam_range[1]:
                break
        else:
            raise RuntimeError("diameter rejection budget exceeded")
        samples.append(
            GraphSample(
                graph=g,
                features=_ones_features(g.n),
                label=float(target),
                meta={"family": family},
            )
        )
    return samples


# ---------------------------------------------------------------------------
# persistence


def save_jsonl(path, samples, generator: str, params: dict, seed: int):
    """One header line with provenance, then one JSON object per sample."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "schema_version": DATASET_SCHEMA_VERSION,
            "generator": generator,
            "params": params,
            "seed": seed,
            "count": len(samples),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in samples:
            row = graph_to_dict(s.graph)
            row["features"] = [[float(v) for v in r] for r in np.asarray(s.features)]
            row["label"] = s.label
            row["meta"] = s.meta
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_jsonl(path) -> tuple[list[GraphSample], dict]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:1: malformed header: {exc}") from None
    if header.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise ValueError(
            f"{path}: schema version {header.get('schema_version')} != {DATASET_SCHEMA_VERSION}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            g = graph_from_dict(row)
            feats = np.asarray(row["features"], dtype=float)
            label = row["label"]
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed sample: {exc}") from None
        if feats.shape[0] != g.n:
            raise ValueError(f"{path}:{lineno}: features rows != node count")
        samples.append(GraphSample(graph=g, features=feats, label=label, meta=row.get("meta", {})))
    return samples, header


def split_dataset(samples, seed: int, fractions=(0.8, 0.1, 0.1), stratify: bool = True):
    """Deterministic train/val/test split with exact global sizes
    (round(f0*N), round(f1*N), remainder).

    Stratification spreads each label class evenly through the cut order
    (systematic-sampling merge), so class proportions match to +-1 per split.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    rng = rng_for(seed, "split")
    n = len(samples)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    if stratify:
        buckets: dict = {}
        for i in range(n):
            buckets.setdefault(str(samples[i].label), []).append(i)
        keyed = []
        for key in sorted(buckets):
            members = np.array(buckets[key])
            members = members[rng.permutation(len(members))]
            for rank, idx in enumerate(members):
                keyed.append(((rank + 0.5) / len(members), rng.random(), int(idx)))
        keyed.sort()
        order = np.array([idx for _, _, idx in keyed], dtype=int)
    else:
        order = rng.permutation(n)
    cuts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return [[samples[i] for i in sorted(part)] for part in cuts]
