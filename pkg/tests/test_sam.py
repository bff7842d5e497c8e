import numpy as np
import pytest

from samgcl.errors import ConfigError, DegenerateExplanation
from samgcl.knn import build_exact, build_quantized
from samgcl.sam import (
    SmoothingConfig,
    cam_scores,
    channel_importance_graph,
    channel_importance_node,
    dataset_sparsity,
    edge_scores,
    explain_graphs,
    explain_nodes,
    node_scores,
    normalize01,
    roc_auc,
    sparsity,
)


def smoothed_oracle(target, emb, m, include_self=True):
    """Sort every other row by (distance, index), sum the m nearest, normalise."""
    others = sorted((float(((emb[j] - emb[target]) ** 2).sum()), j) for j in range(len(emb)) if j != target)
    total = sum((emb[j] for _, j in others[:m]), emb[target].copy() if include_self else np.zeros(emb.shape[1]))
    return total / np.linalg.norm(total)


class TestChannelImportance:
    def test_m0_is_own_direction(self):
        z = np.array([[3.0, 4.0], [1.0, 0.0]])
        np.testing.assert_allclose(channel_importance_graph(0, z, m=0), [0.6, 0.8], atol=1e-15)

    def test_identical_embeddings(self):
        z = np.tile([[1.0, 2.0, 2.0]], (6, 1))
        for m in range(6):
            np.testing.assert_allclose(channel_importance_graph(2, z, m=m), [1 / 3, 2 / 3, 2 / 3], atol=1e-15)

    def test_hand_values(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
        # nearest to graph 0 is graph 1 (distance sqrt 2)
        np.testing.assert_allclose(channel_importance_graph(0, z, m=1), [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-15)
        np.testing.assert_allclose(channel_importance_graph(0, z, m=2), [6 / np.sqrt(72), 6 / np.sqrt(72)], atol=1e-15)

    def test_random_vs_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n, k = int(rng.integers(2, 20)), int(rng.integers(1, 6))
            z = rng.normal(size=(n, k))
            m = int(rng.integers(0, n))
            t = int(rng.integers(0, n))
            w = channel_importance_graph(t, z, build_exact(z), m)
            np.testing.assert_allclose(w, smoothed_oracle(t, z, m), atol=1e-12)
            assert abs(np.linalg.norm(w) - 1) < 1e-10

    def test_neighbours_only_variant(self):
        z = np.random.default_rng(1).normal(size=(8, 3))
        np.testing.assert_allclose(channel_importance_graph(3, z, m=2, include_self=False), smoothed_oracle(3, z, 2, False), atol=1e-12)

    def test_node_duplicates(self):
        Z = np.array([[2.0, 0.0], [2.0, 0.0], [-1.0, 3.0]])
        np.testing.assert_allclose(channel_importance_node(0, Z, m=1), [1.0, 0.0])

    def test_node_vs_oracle(self):
        Z = np.random.default_rng(2).normal(size=(5, 4))
        for i in range(5):
            np.testing.assert_allclose(channel_importance_node(i, Z, m=2), smoothed_oracle(i, Z, 2), atol=1e-12)

    def test_quantized_index_accepted(self):
        z = np.random.default_rng(3).normal(size=(40, 3))
        w = channel_importance_graph(5, z, build_quantized(z, 4, probe=4), m=3)
        np.testing.assert_allclose(w, smoothed_oracle(5, z, 3), atol=1e-12)

    def test_errors(self):
        z = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(DegenerateExplanation):
            channel_importance_graph(0, z, m=1)
        with pytest.raises(ConfigError):
            channel_importance_graph(0, z, m=2)


class TestScores:
    def test_node_score_examples(self):
        w = np.array([0.6, 0.8])
        assert node_scores(np.array([-w, w]), w).tolist() == pytest.approx([0.0, 1.0])

    def test_dot_product_oracle(self):
        rng = np.random.default_rng(4)
        Z, w = rng.normal(size=(7, 3)), rng.normal(size=3)
        expected = [max(0.0, sum(Z[i, k] * w[k] for k in range(3))) for i in range(7)]
        np.testing.assert_allclose(node_scores(Z, w), expected, atol=1e-14)

    def test_edge_scores(self):
        assert edge_scores(np.array([0.4, 0.8]), [[0, 1]]).tolist() == pytest.approx([0.6])
        assert not edge_scores(np.zeros(3), [[0, 1], [1, 2]]).any()

    def test_star_oracle(self):
        psi = np.array([1.0, 0.2, 0.4, 0.6])
        star = np.array([[0, 1], [0, 2], [0, 3]])
        assert edge_scores(psi, star).tolist() == pytest.approx([0.6, 0.7, 0.8])

    def test_cam_equals_sam(self):
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(9, 4))
        w = channel_importance_graph(0, rng.normal(size=(3, 4)), m=1)
        np.testing.assert_array_equal(cam_scores(Z, w), node_scores(Z, w))
        assert not cam_scores(Z, np.zeros(4)).any()

    def test_cam_fixture(self):
        Z = np.array([[1.0, 2.0], [-3.0, 1.0]])
        assert cam_scores(Z, [1.0, 1.0]).tolist() == [3.0, 0.0]

    def test_scaling_preserves_ranking(self):
        rng = np.random.default_rng(6)
        edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4], [0, 4], [1, 3]])
        for _ in range(100):
            pooled = rng.normal(size=(6, 4))
            Z = rng.normal(size=(5, 4))
            c = float(rng.uniform(0.01, 100.0))
            base = explain_graphs([Z], pooled, [edges], SmoothingConfig(m=2))[0]
            scaled = explain_graphs([c * Z], c * pooled, [edges], SmoothingConfig(m=2))[0]
            if base is None:
                assert scaled is None
                continue
            assert base.psi.argmax() == scaled.psi.argmax()
            np.testing.assert_array_equal(np.argsort(base.psi, kind="stable"), np.argsort(scaled.psi, kind="stable"))
            np.testing.assert_allclose(scaled.psi, c * base.psi, rtol=1e-10)
            assert base.phi.argmax() == scaled.phi.argmax()


class TestNormalizeAndSparsity:
    def test_normalize01(self):
        assert normalize01([0.0, 2.0, 4.0]).tolist() == [0.0, 0.5, 1.0]
        assert normalize01([3.0, 3.0]).tolist() == [0.5, 0.5]

    def test_batch_vs_per_graph_scope(self):
        a, b = np.array([0.0, 1.0]), np.array([2.0, 4.0])
        per_graph = np.concatenate([normalize01(a), normalize01(b)])
        batch = normalize01(np.concatenate([a, b]))
        assert per_graph.tolist() == [0.0, 1.0, 0.0, 1.0]
        assert batch.tolist() == [0.0, 0.25, 0.5, 1.0]

    def test_sparsity_examples(self):
        assert sparsity(np.full(4, 0.3), 0.3) == 1.0
        assert sparsity(np.array([0.0, 1.0, 2.0, 3.0]), 1.5) == 0.5

    def test_dataset_sparsity_counting_oracle(self):
        rng = np.random.default_rng(7)
        psis = [rng.exponential(size=int(rng.integers(1, 9))) for _ in range(12)]
        mu = np.mean(np.concatenate(psis))
        expected = [1 - sum(1 for v in p if v > mu) / len(p) for p in psis]
        np.testing.assert_allclose(dataset_sparsity(psis), expected)


class TestExplain:
    def test_hg_variant_is_unsmoothed_heat_map(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(2, 8))
            Zs = [rng.normal(size=(int(rng.integers(1, 6)), 3)) for _ in range(n)]
            pooled = np.array([Z.mean(axis=0) for Z in Zs])
            edges = [np.zeros((0, 2), np.int64)] * n
            for k, e in enumerate(explain_graphs(Zs, pooled, edges, SmoothingConfig(m=0))):
                raw = np.maximum(Zs[k] @ (pooled[k] / np.linalg.norm(pooled[k])), 0)
                if e is None:
                    assert not raw.any()
                else:
                    np.testing.assert_array_equal(e.psi, raw)

    def test_invariants(self):
        rng = np.random.default_rng(9)
        Zs = [rng.normal(size=(4, 3)) for _ in range(5)]
        pooled = np.array([Z.mean(axis=0) for Z in Zs])
        edges = [np.array([[0, 1], [2, 3]])] * 5
        for e in explain_graphs(Zs, pooled, edges, SmoothingConfig(m=2)):
            if e is None:
                continue
            assert np.all(e.psi >= 0) and e.psi01.min() >= 0 and e.psi01.max() <= 1
            assert len(e.phi) == 2
            assert abs(np.linalg.norm(e.w_tilde) - 1) < 1e-10

    def test_explain_nodes_rows(self):
        Z = np.random.default_rng(10).normal(size=(6, 3))
        e = explain_nodes(Z, np.array([[0, 1]]), SmoothingConfig(m=2, scope="node-level"))
        assert e.w_tilde.shape == (6, 3)
        for i in range(6):
            assert e.psi[i] == pytest.approx(max(0.0, Z[i] @ smoothed_oracle(i, Z, 2)))

    def test_explain_nodes_degenerate(self):
        Z = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(DegenerateExplanation):
            explain_nodes(Z, np.zeros((0, 2)), SmoothingConfig(m=1, scope="node-level"))

    def test_config(self):
        with pytest.raises(ConfigError):
            SmoothingConfig(m=0, include_self=False).validate()


class TestRocAuc:
    def test_perfect_and_tied(self):
        assert roc_auc([0.1, 0.9], [False, True]) == 1.0
        assert roc_auc([0.5, 0.5, 0.5], [True, False, False]) == 0.5

    def test_pairwise_oracle(self):
        rng = np.random.default_rng(11)
        s = rng.integers(0, 5, size=30).astype(float)
        pos = rng.random(30) < 0.4
        pairs = [(1.0 if a > b else 0.5 if a == b else 0.0) for a in s[pos] for b in s[~pos]]
        assert roc_auc(s, pos) == pytest.approx(np.mean(pairs))
