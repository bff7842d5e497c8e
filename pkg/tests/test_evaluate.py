import numpy as np
import pytest

from samgcl.errors import ConfigError
from samgcl.evaluate import ProbeConfig, accuracy, default_probe, linear_probe, stratified_folds


class TestAccuracy:
    def test_examples(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
        assert accuracy([0, 1], [1, 0]) == 0.0
        assert accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([0], [0, 1])


class TestFolds:
    def test_disjoint_cover_and_stratified(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(10, 120))
            labels = rng.integers(0, int(rng.integers(2, 5)), size=n)
            k = int(rng.integers(2, 11))
            parts = stratified_folds(labels, k, np.random.default_rng(1))
            joined = np.concatenate(parts)
            assert sorted(joined.tolist()) == list(range(n))
            for c in np.unique(labels):
                share = np.mean(labels == c)
                for p in parts:
                    assert abs(np.sum(labels[p] == c) - share * len(p)) <= 1 + 1e-9 or len(p) == 0

    def test_deterministic(self):
        labels = np.repeat([0, 1, 2], 10)
        a = stratified_folds(labels, 5, np.random.default_rng(3))
        b = stratified_folds(labels, 5, np.random.default_rng(3))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestProbe:
    def test_separable_blobs(self):
        rng = np.random.default_rng(1)
        X = np.vstack([rng.normal(-3, 1, (100, 4)), rng.normal(3, 1, (100, 4))])
        y = np.repeat([0, 1], 100)
        mean, std = linear_probe(X, y, ProbeConfig(), seed=0)
        assert mean >= 0.99 and std >= 0

    def test_chance_level(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(400, 5))
        y = rng.permutation(np.repeat([0, 1], [240, 160]))
        mean, _ = linear_probe(X, y, ProbeConfig(folds=5), seed=0)
        assert abs(mean - 0.6) <= 0.05

    def test_constant_embeddings(self):
        y = np.repeat([0, 1], [30, 20])
        mean, _ = linear_probe(np.ones((50, 3)), y, ProbeConfig(folds=5), seed=0)
        # every fold holds 6 of class 0 and 4 of class 1; only the intercept can learn
        assert mean == pytest.approx(0.6)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X, y = rng.normal(size=(60, 3)), rng.integers(0, 3, 60)
        assert linear_probe(X, y, seed=4) == linear_probe(X, y, seed=4)

    def test_repetitions(self):
        rng = np.random.default_rng(4)
        X, y = rng.normal(size=(40, 2)), np.repeat([0, 1], 20)
        mean, std = linear_probe(X, y, ProbeConfig(folds=4, repetitions=3), seed=0)
        assert 0 <= mean <= 1 and std >= 0

    def test_errors(self):
        with pytest.raises(ConfigError):
            linear_probe(np.zeros((20, 2)), np.zeros(20))
        with pytest.raises(ConfigError):
            linear_probe(np.zeros((5, 2)), np.array([0, 1, 0, 1, 0]))
        with pytest.raises(ConfigError):
            ProbeConfig(folds=1).validate()

    def test_defaults(self):
        assert default_probe("node-level").folds == 5
        assert default_probe("graph-level").folds == 10
