import math

import numpy as np
import pytest

from htlreg.data import (
    CsvError,
    Dataset,
    DomainTag,
    SyntheticSpec,
    doppler,
    doppler_offset_spec,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
    subsample,
    uniform_sampler,
)

# frozen from an independent high-precision evaluation of
# sqrt(0.25) * sin(2.1*pi / 0.55)
DOPPLER_HALF = -0.2703204087


class TestDoppler:
    def test_vanishes_at_endpoints(self):
        assert doppler(0.0) == 0.0
        assert doppler(1.0) == 0.0

    def test_midpoint_value(self):
        assert doppler(0.5) == pytest.approx(DOPPLER_HALF, abs=5e-11)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            doppler(-0.1)
        with pytest.raises(ValueError):
            doppler(1.5)

    def test_vectorized(self):
        xs = np.linspace(0, 1, 11)
        vals = doppler(xs)
        assert vals.shape == (11,)
        assert vals[0] == 0.0 and vals[-1] == 0.0


class TestDataset:
    def test_row_count_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            Dataset(features=np.zeros((3, 1)), labels=np.zeros(2))

    def test_bound_violations(self):
        with pytest.raises(ValueError, match="x_bound"):
            Dataset(features=[[2.0]], labels=[0.0], x_bound=1.0)
        with pytest.raises(ValueError, match="y_bound"):
            Dataset(features=[[0.5]], labels=[3.0], y_bound=1.0)

    def test_immutable_arrays(self):
        ds = Dataset(features=[[1.0], [2.0]], labels=[1.0, 2.0])
        with pytest.raises(ValueError):
            ds.features[0, 0] = 9.0
        with pytest.raises(ValueError):
            ds.labels[0] = 9.0


class TestGenerateSynthetic:
    def test_zero_noise_identity_labels(self):
        spec = SyntheticSpec(
            source_fn=lambda X: X[:, 0],
            target_fn=lambda X: X[:, 0],
            input_sampler=uniform_sampler(1),
        )
        ds = generate_synthetic(spec, 3, DomainTag.SOURCE, seed=7)
        np.testing.assert_array_equal(ds.labels, ds.features[:, 0])

    def test_same_seed_bit_identical(self):
        spec = doppler_offset_spec(0.01)
        a = generate_synthetic(spec, 25, DomainTag.TARGET, seed=7)
        b = generate_synthetic(spec, 25, DomainTag.TARGET, seed=7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = generate_synthetic(spec, 25, DomainTag.TARGET, seed=8)
        assert not np.array_equal(a.labels, c.labels)

    def test_noise_centering_montecarlo(self):
        # residual mean within 3*sigma/sqrt(n) of 0 for the benchmark spec
        spec = doppler_offset_spec(0.01)
        ds = generate_synthetic(spec, 100, DomainTag.TARGET, seed=11)
        residuals = ds.labels - spec.target_fn(ds.features)
        assert abs(residuals.mean()) < 3 * 0.1 / math.sqrt(100)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_noise_centering_large_sample(self, seed):
        spec = doppler_offset_spec(0.04)
        n = 10_000
        ds = generate_synthetic(spec, n, DomainTag.TARGET, seed=seed)
        residuals = ds.labels - spec.target_fn(ds.features)
        assert abs(residuals.mean()) < 4 * 0.2 / math.sqrt(n)

    def test_validation_uses_target_law(self):
        spec = SyntheticSpec(
            source_fn=lambda X: np.zeros(len(X)),
            target_fn=lambda X: np.ones(len(X)),
            input_sampler=uniform_sampler(1),
        )
        ds = generate_synthetic(spec, 5, DomainTag.VALIDATION, seed=0)
        np.testing.assert_array_equal(ds.labels, np.ones(5))

    def test_explicit_y_bound_clips(self):
        spec = SyntheticSpec(
            source_fn=lambda X: 10.0 * np.ones(len(X)),
            target_fn=lambda X: 10.0 * np.ones(len(X)),
            input_sampler=uniform_sampler(1),
            y_bound=1.0,
        )
        ds = generate_synthetic(spec, 4, DomainTag.SOURCE, seed=0)
        assert np.all(ds.labels == 1.0)
        assert ds.y_bound == 1.0

    def test_n_validation(self):
        with pytest.raises(ValueError):
            generate_synthetic(doppler_offset_spec(), 0, DomainTag.SOURCE, 0)


class TestLoadCsv:
    def test_two_row_file(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n0,1\n1,3\n")
        ds = load_csv(path, "y")
        np.testing.assert_array_equal(ds.features, [[0.0], [1.0]])
        np.testing.assert_array_equal(ds.labels, [1.0, 3.0])

    def test_label_by_index(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n1,2,3\n4,5,6\n")
        ds = load_csv(path, 1)
        np.testing.assert_array_equal(ds.labels, [2.0, 5.0])
        np.testing.assert_array_equal(ds.features, [[1.0, 3.0], [4.0, 6.0]])

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n0,1\nfoo,3\n")
        with pytest.raises(CsvError, match=r"line 3.*column 'x'"):
            load_csv(path, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "absent.csv", "y")

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n0,1\n1,2,3\n")
        with pytest.raises(CsvError, match="line 3"):
            load_csv(path, "y")

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("x,y\n0,1\n")
        with pytest.raises(CsvError, match="label column"):
            load_csv(path, "z")

    def test_round_trip(self, tmp_path):
        ds = generate_synthetic(doppler_offset_spec(0.01), 40, DomainTag.TARGET, 3)
        path = tmp_path / "rt.csv"
        save_csv(ds, path)
        back = load_csv(path, "y")
        np.testing.assert_allclose(back.features, ds.features, atol=1e-12)
        np.testing.assert_allclose(back.labels, ds.labels, atol=1e-12)


class TestSplit:
    def _data(self, n):
        return Dataset(
            features=np.arange(n, dtype=float).reshape(-1, 1),
            labels=np.arange(n, dtype=float),
        )

    def test_sizes_80_20(self):
        train, val, rest = split(self._data(10), (0.8, 0.2), seed=1)
        assert train.n == 8 and val.n == 2 and rest is None

    def test_sizes_50_20(self):
        train, val, rest = split(self._data(10), (0.5, 0.2), seed=1)
        assert (train.n, val.n, rest.n) == (5, 2, 3)

    def test_empty_train_error(self):
        with pytest.raises(ValueError, match="empty"):
            split(self._data(5), (0.1, 0.5), seed=0)

    def test_validation_tagging(self):
        train, val, _ = split(self._data(10), (0.5, 0.2), seed=1)
        assert train.domain_tag is DomainTag.TARGET
        assert val.domain_tag is DomainTag.VALIDATION

    def test_same_seed_same_split(self):
        a = split(self._data(20), (0.6, 0.2), seed=5)
        b = split(self._data(20), (0.6, 0.2), seed=5)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.features, pb.features)

    def test_partition_property(self):
        # disjoint and exhaustive over 100 random (n, fractions) cases
        rng = np.random.default_rng(0)
        for case in range(100):
            n = int(rng.integers(2, 60))
            f_train = float(rng.uniform(1.0 / n, 0.8))
            f_val = float(rng.uniform(0.0, 1.0 - f_train))
            data = self._data(n)
            parts = split(data, (f_train, f_val), seed=case)
            rows = np.concatenate(
                [p.features[:, 0] for p in parts if p is not None]
            )
            assert len(rows) == n
            assert sorted(rows.tolist()) == sorted(data.features[:, 0].tolist())


def test_subsample_deterministic():
    ds = generate_synthetic(doppler_offset_spec(0.0), 30, DomainTag.SOURCE, 1)
    a = subsample(ds, 10, seed=2)
    b = subsample(ds, 10, seed=2)
    np.testing.assert_array_equal(a.features, b.features)
    assert a.n == 10
    with pytest.raises(ValueError):
        subsample(ds, 31, seed=0)
