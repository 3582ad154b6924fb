import math

import numpy as np
import pytest

from htlreg.data import Dataset
from htlreg.smoothing import KSPredictor, SmoothingKernel, ks_bandwidth_rule, ks_fit


def make(xs, ys):
    return Dataset(features=np.asarray(xs, float).reshape(-1, 1),
                   labels=np.asarray(ys, float))


def brute_force_ks(train_x, train_y, kernel, h, x):
    """Independent re-implementation of the weight formula, plain loops."""
    def K(u):
        if kernel is SmoothingKernel.BOXCAR:
            return 1.0 if u <= 1.0 else 0.0
        if kernel is SmoothingKernel.EPANECHNIKOV:
            return 1.0 - u * u if u <= 1.0 else 0.0
        if kernel is SmoothingKernel.TRUNCATED_GAUSSIAN:
            return math.exp(-0.5 * u * u) if u <= 1.0 else 0.0
        return math.exp(-0.5 * u * u)

    vals = [K(np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(xi)) / h)
            for xi in train_x]
    total = sum(vals)
    if total == 0.0:
        dists = [np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(xi))
                 for xi in train_x]
        return train_y[int(np.argmin(dists))]
    return sum(v * y for v, y in zip(vals, train_y)) / total


class TestWeights:
    def test_boxcar_one_point_in_window(self):
        p = ks_fit(make([0.0, 1.0], [0.0, 0.0]), SmoothingKernel.BOXCAR, 0.5)
        np.testing.assert_allclose(p.weights([0.0]), [1.0, 0.0])

    def test_boxcar_symmetric(self):
        p = ks_fit(make([0.0, 1.0], [0.0, 0.0]), SmoothingKernel.BOXCAR, 2.0)
        np.testing.assert_allclose(p.weights([0.5]), [0.5, 0.5])

    def test_epanechnikov_hand_values(self):
        # K(0.25)=0.9375, K(0.5)=0.75, K(2.25)=0 -> normalized [5/9, 4/9, 0]
        p = ks_fit(make([0.0, 0.3, 1.0], [0, 0, 0]),
                   SmoothingKernel.EPANECHNIKOV, 0.4)
        np.testing.assert_allclose(
            p.weights([0.1]), [5.0 / 9.0, 4.0 / 9.0, 0.0], atol=1e-14
        )

    @pytest.mark.parametrize("kernel", list(SmoothingKernel))
    def test_convexity_property(self, kernel):
        rng = np.random.default_rng(42)
        for _ in range(25):
            n, d = int(rng.integers(2, 15)), int(rng.integers(1, 4))
            ds = Dataset(features=rng.normal(size=(n, d)), labels=rng.normal(size=n))
            p = ks_fit(ds, kernel, float(rng.uniform(0.05, 2.0)))
            W = p.weights_many(rng.normal(size=(6, d)))
            assert np.all(W >= 0) and np.all(W <= 1)
            np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)

    def test_dimension_mismatch(self):
        p = ks_fit(make([0.0], [1.0]))
        with pytest.raises(ValueError, match="dim"):
            p.weights_many(np.zeros((2, 3)))


class TestPredict:
    def test_single_training_point(self):
        for kernel in SmoothingKernel:
            p = ks_fit(make([0.2], [5.0]), kernel, 0.3)
            assert p.predict_one([0.9]) == 5.0

    def test_boxcar_mean(self):
        p = ks_fit(make([0.0, 1.0], [1.0, 3.0]), SmoothingKernel.BOXCAR, 2.0)
        assert p.predict_one([0.5]) == pytest.approx(2.0, abs=1e-15)

    def test_matches_brute_force_on_squared_curve(self):
        xs = np.linspace(0, 1, 50)
        ys = xs**2
        p = ks_fit(make(xs, ys), SmoothingKernel.EPANECHNIKOV, 0.1)
        for q in np.linspace(0, 1, 30):
            expected = brute_force_ks(xs, ys, SmoothingKernel.EPANECHNIKOV, 0.1, q)
            assert p.predict_one([q]) == pytest.approx(expected, abs=1e-12)

    def test_bounded_by_label_range(self):
        rng = np.random.default_rng(3)
        ds = Dataset(features=rng.uniform(size=(40, 2)), labels=rng.normal(size=40))
        p = ks_fit(ds, SmoothingKernel.TRUNCATED_GAUSSIAN, 0.2)
        preds = p.predict(rng.uniform(size=(80, 2)))
        assert preds.min() >= ds.labels.min() - 1e-12
        assert preds.max() <= ds.labels.max() + 1e-12

    def test_fallback_nearest_neighbor(self):
        p = ks_fit(make([0.0, 10.0], [1.0, 2.0]), SmoothingKernel.BOXCAR, 0.5)
        # query far from both, nearer to the second point
        assert p.predict_one([7.0]) == 2.0

    def test_fallback_tie_lowest_index(self):
        p = ks_fit(make([0.0, 4.0], [1.0, 2.0]), SmoothingKernel.BOXCAR, 0.5)
        assert p.predict_one([2.0]) == 1.0


class TestStability:
    def test_label_perturbation_bound_exact(self):
        # |f_hat(x) - f_tilde(x)| <= sum_i w_i(x) |dY_i| over 100 random cases
        rng = np.random.default_rng(7)
        for case in range(100):
            n = int(rng.integers(2, 20))
            xs = rng.uniform(size=(n, 1))
            ys = rng.normal(size=n)
            delta = rng.normal(size=n)
            kernel = list(SmoothingKernel)[case % 4]
            h = float(rng.uniform(0.05, 1.0))
            base = Dataset(features=xs, labels=ys)
            pert = Dataset(features=xs, labels=ys + delta)
            p0, p1 = ks_fit(base, kernel, h), ks_fit(pert, kernel, h)
            queries = rng.uniform(size=(20, 1))
            gap = np.abs(p0.predict(queries) - p1.predict(queries))
            bound = p0.weights_many(queries) @ np.abs(delta)
            assert np.all(gap <= bound + 1e-12)


class TestBandwidthRule:
    def test_n_one(self):
        assert ks_bandwidth_rule(1, 1, 1.0) == 1.0

    def test_thousand(self):
        assert ks_bandwidth_rule(1000, 1, 1.0) == pytest.approx(0.1, rel=1e-12)

    def test_million_d2_alpha_half(self):
        assert ks_bandwidth_rule(10**6, 2, 0.5) == pytest.approx(0.01, rel=1e-12)

    def test_constant_scales(self):
        assert ks_bandwidth_rule(1000, 1, 1.0, c=2.0) == pytest.approx(0.2, rel=1e-12)

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            ks_bandwidth_rule(10, 1, 0.0)
        with pytest.raises(ValueError):
            ks_bandwidth_rule(10, 1, 1.5)

    def test_positive_bandwidth_required(self):
        with pytest.raises(ValueError):
            KSPredictor(train=make([0.0], [0.0]), bandwidth=0.0)
