import json
import math

import networkx as nx
import numpy as np
import pytest

from tikgraph.datasets import (
    CsbmParams,
    GraphSample,
    count_triangles,
    find_triangle,
    gen_clique_distance,
    gen_colors,
    gen_csbm,
    gen_csbm_task,
    gen_diameter,
    gen_triangles,
    load_jsonl,
    rewire_null,
    save_jsonl,
    split_dataset,
)
from tikgraph.graph import build_graph, diameter, hop_distance


def to_networkx(g):
    nxg = nx.Graph()
    nxg.add_nodes_from(range(g.n))
    edges, _ = g.edge_list()
    nxg.add_edges_from(map(tuple, edges.tolist()))
    return nxg


class TestCliqueDistance:
    def test_labels_follow_threshold(self):
        samples = gen_clique_distance(60, seed=0)
        lengths = {s.meta["path_length"] for s in samples}
        assert min(lengths) < 4 <= max(lengths)
        for s in samples:
            assert s.label == int(s.meta["path_length"] >= 4)
            if s.meta["path_length"] == 1:
                assert s.label == 0
            if s.meta["path_length"] == 4:
                assert s.label == 1

    def test_inter_clique_distance_matches_meta(self):
        for s in gen_clique_distance(20, seed=1):
            a, b = s.meta["anchors"]
            assert hop_distance(s.graph, a, b) == s.meta["path_length"]

    def test_diameter_at_least_path_length(self):
        for s in gen_clique_distance(20, seed=2):
            assert diameter(s.graph) >= s.meta["path_length"]

    def test_features_all_ones(self):
        s = gen_clique_distance(2, seed=3)[0]
        np.testing.assert_array_equal(s.features, np.ones((s.graph.n, 1)))

    def test_degenerate_range_rejected(self):
        with pytest.raises(ValueError, match="straddle"):
            gen_clique_distance(5, seed=0, path_length=(4, 7))
        with pytest.raises(ValueError, match="straddle"):
            gen_clique_distance(5, seed=0, path_length=(1, 3))


class TestTriangles:
    def test_counting_oracle_matches_networkx(self):
        rng = np.random.default_rng(4)
        for _ in range(15):
            n = int(rng.integers(5, 25))
            iu, ju = np.triu_indices(n, k=1)
            keep = rng.random(len(iu)) < 0.2
            g = build_graph(list(zip(iu[keep].tolist(), ju[keep].tolist())), n)
            expected = sum(nx.triangles(to_networkx(g)).values()) // 3
            assert count_triangles(g) == expected

    def test_k3_is_minimal_positive(self):
        k3 = build_graph([(0, 1), (1, 2), (0, 2)], 3)
        assert count_triangles(k3) == 1
        assert find_triangle(k3) == [0, 1, 2]

    def test_class_labels_verified_by_enumeration(self):
        samples = gen_triangles(40, seed=5)
        labels = [s.label for s in samples]
        assert sorted(set(labels)) == [0, 1]
        assert labels.count(0) == labels.count(1) == 20
        for s in samples:
            tri = count_triangles(s.graph)
            assert tri == s.label  # 0 or exactly 1
            if s.label == 1:
                i, j, k = s.meta["triangle_nodes"]
                assert s.graph.adj[i, j] and s.graph.adj[j, k] and s.graph.adj[i, k]
            else:
                assert s.meta["triangle_nodes"] == []

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError, match="even"):
            gen_triangles(7, seed=0)


class TestColors:
    def test_label_is_green_row_count(self):
        for s in gen_colors(30, seed=6):
            assert s.label == int((s.features[:, 0] == 1.0).sum())
            assert s.label == len(s.meta["green_nodes"])

    def test_one_hot_features(self):
        for s in gen_colors(10, seed=7, num_colors=4):
            assert s.features.shape[1] == 4
            np.testing.assert_array_equal(s.features.sum(axis=1), np.ones(s.graph.n))

    def test_needs_two_colors(self):
        with pytest.raises(ValueError, match="two colors"):
            gen_colors(5, seed=0, num_colors=1)


class TestCsbm:
    def test_edge_probabilities_formula(self):
        p = CsbmParams(n=100, avg_degree=10.0, lam=1.0, mu=1.0, gamma=25.0)
        assert p.p_in == pytest.approx((10 + math.sqrt(10)) / 100)
        assert p.p_out == pytest.approx((10 - math.sqrt(10)) / 100)
        assert p.p_in == pytest.approx(0.1316227766, abs=1e-9)
        assert p.p_out == pytest.approx(0.0683772234, abs=1e-9)

    def test_lambda_zero_is_erdos_renyi(self):
        p = CsbmParams(n=50, avg_degree=8.0, lam=0.0, mu=0.5, gamma=10.0)
        assert p.p_in == p.p_out

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="even"):
            CsbmParams(n=99)
        with pytest.raises(ValueError, match="lam"):
            CsbmParams(n=100, avg_degree=4.0, lam=3.0)

    def test_blocks_balanced_and_connected(self):
        sample = gen_csbm(CsbmParams(n=60, avg_degree=8.0, lam=1.0, mu=1.0, gamma=15.0, seed=8))
        v = np.array(sample.meta["communities"])
        assert (v == 1).sum() == 30
        assert (v == -1).sum() == 30
        assert sample.graph.num_components == 1
        assert sample.features.shape == (60, 4)

    def test_empirical_mean_degree(self):
        params = CsbmParams(n=100, avg_degree=10.0, lam=1.0, mu=1.0, gamma=25.0, seed=9)
        from tikgraph.seeding import rng_for

        rng = rng_for(9, "mean-degree-test")
        degs = [gen_csbm(params, rng=rng).graph.degrees.mean() for _ in range(200)]
        assert abs(np.mean(degs) - 10.0) <= 1.0  # within 10 percent

    def test_task_balance_and_null_features(self):
        params = CsbmParams(n=60, avg_degree=8.0, lam=1.0, mu=2.0, gamma=15.0, seed=10)
        samples = gen_csbm_task(params, 40)
        labels = [s.label for s in samples]
        assert labels.count(0) == labels.count(1) == 20
        # class-0 features carry no planted direction
        p = params.feature_dim
        rng = np.random.default_rng(0)
        w = rng.normal(size=p)
        w /= np.linalg.norm(w)
        corrs = []
        for s in samples:
            if s.label == 0:
                corrs.extend(np.abs(s.features @ w))
        assert np.mean(corrs) < 4.0 / math.sqrt(p)


class TestRewire:
    def test_degree_sequence_and_connectivity_preserved(self):
        sample = gen_csbm(CsbmParams(n=60, avg_degree=8.0, lam=2.0, mu=1.0, gamma=15.0, seed=11))
        g = sample.graph
        g2, accepted = rewire_null(g, seed=11)
        assert accepted > 0
        np.testing.assert_array_equal(np.sort(g.degrees), np.sort(g2.degrees))
        np.testing.assert_array_equal(g.degrees, g2.degrees)  # per node, exactly
        assert g2.num_components == 1
        assert g2.num_edges == g.num_edges

    def test_structure_actually_randomized(self):
        sample = gen_csbm(CsbmParams(n=60, avg_degree=8.0, lam=2.5, mu=1.0, gamma=15.0, seed=12))
        g2, _ = rewire_null(sample.graph, seed=12)
        v = np.array(sample.meta["communities"])
        def within_fraction(g):
            edges, _ = g.edge_list()
            same = sum(1 for i, j in edges if v[i] == v[j])
            return same / len(edges)
        assert within_fraction(sample.graph) > 0.6  # planted structure
        assert abs(within_fraction(g2) - 0.5) < 0.12  # destroyed

    def test_disconnected_input_rejected(self):
        g = build_graph([(0, 1), (2, 3)], 4)
        with pytest.raises(ValueError, match="connected"):
            rewire_null(g, seed=0)


class TestDiameterTask:
    def test_targets_match_bfs_oracle(self):
        for s in gen_diameter(30, seed=13):
            assert s.label == float(nx.diameter(to_networkx(s.graph)))
            assert 4 <= s.label <= 30

    def test_trivial_families(self):
        path12 = build_graph([(i, i + 1) for i in range(11)], 12)
        assert diameter(path12) == 11
        star = build_graph([(0, i) for i in range(1, 7)], 7)
        assert diameter(star) == 2

    def test_families_mixed(self):
        fams = {s.meta["family"] for s in gen_diameter(9, seed=14)}
        assert fams == {"tree", "path_blobs", "sparse"}


class TestJsonl:
    def test_round_trip_lossless(self, tmp_path):
        samples = gen_csbm_task(CsbmParams(n=20, avg_degree=5.0, lam=1.0, mu=1.0, gamma=5.0, seed=15), 10)
        path = tmp_path / "data.jsonl"
        save_jsonl(path, samples, "csbm", {"n": 20}, seed=15)
        loaded, header = load_jsonl(path)
        assert header["generator"] == "csbm"
        assert header["seed"] == 15
        assert header["count"] == 10
        assert len(loaded) == 10
        for a, b in zip(samples, loaded):
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.graph.adj.toarray(), b.graph.adj.toarray())
            assert a.label == b.label
            assert a.meta == b.meta

    def test_byte_identical_for_same_seed(self, tmp_path):
        for name in ("a", "b"):
            samples = gen_clique_distance(12, seed=16)
            save_jsonl(tmp_path / f"{name}.jsonl", samples, "clique_distance", {}, seed=16)
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        samples = gen_clique_distance(2, seed=17)
        save_jsonl(path, samples, "clique_distance", {}, seed=17)
        lines = path.read_text().splitlines()
        lines[2] = '{"broken": '
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match=":3:"):
            load_jsonl(path)

    def test_schema_version_mismatch(self, tmp_path):
        path = tmp_path / "v.jsonl"
        path.write_text(json.dumps({"schema_version": 42}) + "\n")
        with pytest.raises(ValueError, match="schema version"):
            load_jsonl(path)


class TestSplit:
    def test_exact_global_sizes(self):
        samples = gen_clique_distance(700, seed=1)
        tr, va, te = split_dataset(samples, seed=1)
        assert (len(tr), len(va), len(te)) == (560, 70, 70)

    def test_stratification_approximate(self):
        samples = gen_clique_distance(200, seed=18)
        tr, va, te = split_dataset(samples, seed=18)
        full_rate = np.mean([s.label for s in samples])
        for part in (tr, va, te):
            rate = np.mean([s.label for s in part])
            assert abs(rate - full_rate) < 0.1

    def test_deterministic(self):
        samples = gen_clique_distance(50, seed=19)
        a = split_dataset(samples, seed=19)
        b = split_dataset(samples, seed=19)
        for pa, pb in zip(a, b):
            assert [id(s) for s in pa] == [id(s) for s in pb]


def test_generators_are_pure_functions_of_seed():
    for gen, kwargs in (
        (gen_clique_distance, {}),
        (gen_colors, {}),
        (gen_triangles, {"size": (8, 14)}),
        (gen_diameter, {}),
    ):
        a = gen(10 if gen is not gen_triangles else 10, 20, **kwargs)
        b = gen(10, 20, **kwargs)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.features, sb.features)
            np.testing.assert_array_equal(sa.graph.adj.toarray(), sb.graph.adj.toarray())
            assert sa.label == sb.label
            assert sa.meta == sb.meta
