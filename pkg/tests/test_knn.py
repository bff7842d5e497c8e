import numpy as np
import pytest

from samgcl.errors import ConfigError
from samgcl.knn import build_exact, build_index, build_quantized, default_num_lists


def brute_force(points, q, m, exclude=None):
    """All-pairs scan keyed on exact integer squared distance, then id."""
    rows = [(int(((p - q) ** 2).sum()), i) for i, p in enumerate(points) if i != exclude]
    return [i for _, i in sorted(rows)[:m]]


class TestExact:
    def test_one_dim_example(self):
        idx = build_exact(np.array([[0.0], [1.0], [10.0]]))
        ids, _ = idx.query([0.4], 1)
        assert ids.tolist() == [0]

    def test_self_exclusion(self):
        pts = np.array([[0.0, 0.0], [3.0, 0.0], [1.0, 0.0]])
        ids, dist = build_exact(pts).query(pts[0], 1, exclude=0)
        assert ids.tolist() == [2] and dist.tolist() == [1.0]

    def test_exclusion_by_id_survives_duplicates(self):
        pts = np.array([[1.0], [1.0], [5.0]])
        ids, _ = build_exact(pts).query(pts[1], 1, exclude=1)
        assert ids.tolist() == [0]

    def test_ties_go_to_smaller_id(self):
        pts = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        ids, _ = build_exact(pts).query([0.0], 4)
        assert ids.tolist() == [0, 1, 2, 3]

    def test_brute_force_200_configs(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n, k = int(rng.integers(1, 40)), int(rng.integers(1, 6))
            # small integer coordinates: exact squared distances and plenty of ties
            pts = rng.integers(-4, 5, size=(n, k)).astype(float)
            exclude = int(rng.integers(0, n)) if rng.random() < 0.5 else None
            m = int(rng.integers(0, n - (exclude is not None) + 1))
            q = pts[exclude] if exclude is not None else rng.integers(-4, 5, size=k).astype(float)
            ids, dist = build_exact(pts).query(q, m, exclude=exclude)
            assert ids.tolist() == brute_force(pts, q, m, exclude)
            assert np.all(np.diff(dist) >= 0)

    def test_m_too_large(self):
        idx = build_exact(np.zeros((3, 2)))
        with pytest.raises(ConfigError):
            idx.query(np.zeros(2), 3, exclude=0)
        with pytest.raises(ConfigError):
            idx.query(np.zeros(2), 4)

    def test_empty(self):
        with pytest.raises(ConfigError):
            build_exact(np.zeros((0, 2)))


class TestQuantized:
    def test_single_point(self):
        idx = build_quantized(np.array([[2.0, -1.0]]), 1)
        np.testing.assert_array_equal(idx.centroids, [[2.0, -1.0]])

    def test_two_clusters(self):
        rng = np.random.default_rng(1)
        pts = np.vstack([rng.normal(0, 0.1, (50, 3)), rng.normal(100, 0.1, (50, 3))])
        idx = build_quantized(pts, 2, seed=3)
        lists = sorted(idx.list_ids(), key=lambda a: a.min())
        assert [len(a) for a in lists] == [50, 50]
        assert lists[0].tolist() == list(range(50))

    def test_every_id_in_one_list(self):
        pts = np.random.default_rng(2).normal(size=(300, 4))
        idx = build_quantized(pts, 17)
        all_ids = np.concatenate(idx.list_ids())
        assert sorted(all_ids.tolist()) == list(range(300))

    def test_deterministic(self):
        pts = np.random.default_rng(3).normal(size=(200, 5))
        a, b = build_quantized(pts, 12, seed=9), build_quantized(pts, 12, seed=9)
        for x, y in zip(a.list_ids(), b.list_ids()):
            np.testing.assert_array_equal(x, y)

    def test_full_probe_equals_exact(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n = int(rng.integers(5, 80))
            pts = np.round(rng.normal(size=(n, 3)), 1)
            C = int(rng.integers(1, min(n, 10) + 1))
            idx, ex = build_quantized(pts, C, seed=int(rng.integers(100))), build_exact(pts)
            q = rng.normal(size=3)
            m = int(rng.integers(0, n + 1))
            np.testing.assert_array_equal(idx.query(q, m, probe=C)[0], ex.query(q, m)[0])

    @staticmethod
    def _recall(pts, probe):
        idx, ex = build_quantized(pts, 32, probe=probe), build_exact(pts)
        hits = [len(np.intersect1d(idx.query(p, 8, exclude=i)[0], ex.query(p, 8, exclude=i)[0])) for i, p in enumerate(pts)]
        return np.mean(hits) / 8

    def test_recall_at_8(self):
        # embeddings cluster; centres and within-cluster noise share the same scale, so clusters overlap
        rng = np.random.default_rng(5)
        centres = rng.normal(size=(32, 32))
        pts = centres[rng.integers(0, 32, 1000)] + rng.normal(size=(1000, 32))
        assert self._recall(pts, 4) >= 0.9

    def test_recall_grows_with_probe_on_isotropic_noise(self):
        pts = np.random.default_rng(6).normal(size=(1000, 32))
        r = [self._recall(pts, p) for p in (1, 4, 16, 32)]
        assert r == sorted(r) and r[-1] == 1.0

    def test_short_lists_widen(self):
        pts = np.vstack([np.zeros((1, 2)), np.full((20, 2), 50.0)])
        idx = build_quantized(pts, 2, probe=1)
        ids, _ = idx.query([0.0, 0.0], 5)
        assert len(ids) == 5 and ids[0] == 0

    def test_distances_non_decreasing(self):
        pts = np.random.default_rng(6).normal(size=(150, 6))
        idx = build_quantized(pts, 10)
        _, d = idx.query(np.zeros(6), 40)
        assert np.all(np.diff(d) >= 0)

    def test_config_errors(self):
        pts = np.zeros((3, 2))
        with pytest.raises(ConfigError):
            build_quantized(pts, 4)
        idx = build_quantized(pts, 2)
        with pytest.raises(ConfigError):
            idx.query(np.zeros(2), 1, probe=3)


def test_build_index_dispatch():
    pts = np.random.default_rng(7).normal(size=(30, 2))
    assert type(build_index(pts)).__name__ == "ExactIndex"
    q = build_index(pts, "quantized")
    assert q.num_lists == default_num_lists(30) == 5
    with pytest.raises(ConfigError):
        build_index(pts, "lsh")
