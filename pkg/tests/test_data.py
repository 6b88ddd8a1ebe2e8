import numpy as np
import pytest

from fedadapt import (FeatureDataset, accuracy, generate_synthetic_suite,
                      make_batches, predict, read_feature_file,
                      split_60_20_20, write_feature_file)
from fedadapt.errors import DataValidationError, FormatError, ParameterError


def random_dataset(rng, d=8, c=3, n=10, name="testdomain"):
    # generate at float32 precision so file round trips compare exactly
    return FeatureDataset(
        domain_name=name,
        class_names=tuple(f"class{i}" for i in range(c)),
        class_text_features=rng.standard_normal((c, d)).astype(np.float32),
        features=rng.standard_normal((n, d)).astype(np.float32),
        labels=rng.integers(0, c, size=n),
    )


class TestFeatureFile:
    def test_round_trip_exact(self, tmp_path):
        ds = random_dataset(np.random.default_rng(0))
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        back = read_feature_file(path)
        assert back.domain_name == ds.domain_name
        assert back.class_names == ds.class_names
        assert np.array_equal(back.class_text_features, ds.class_text_features)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)

    def test_round_trip_narrows_to_float32(self, tmp_path):
        ds = FeatureDataset(
            domain_name="x", class_names=("a", "b"),
            class_text_features=np.array([[0.1, 0.2], [0.3, 0.4]]),
            features=np.array([[1.0 / 3.0, 2.0 / 3.0]]),
            labels=np.array([1]),
        )
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        back = read_feature_file(path)
        assert np.array_equal(
            back.features, ds.features.astype(np.float32).astype(np.float64))

    def test_empty_sample_list_is_valid(self, tmp_path):
        ds = random_dataset(np.random.default_rng(1), n=0)
        path = tmp_path / "empty.fcf"
        write_feature_file(ds, path)
        back = read_feature_file(path)
        assert back.n_samples == 0
        assert back.n_classes == 3

    def test_bad_magic(self, tmp_path):
        ds = random_dataset(np.random.default_rng(2))
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        raw = bytearray(path.read_bytes())
        raw[0] = ord("X")
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as exc:
            read_feature_file(path)
        assert exc.value.offset == 0

    def test_bad_version(self, tmp_path):
        ds = random_dataset(np.random.default_rng(3))
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as exc:
            read_feature_file(path)
        assert exc.value.offset == 4

    def test_truncation_reports_offset(self, tmp_path):
        ds = random_dataset(np.random.default_rng(4))
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-7])
        with pytest.raises(FormatError) as exc:
            read_feature_file(path)
        assert exc.value.offset is not None

    def test_trailing_bytes_rejected(self, tmp_path):
        ds = random_dataset(np.random.default_rng(5))
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        path.write_bytes(path.read_bytes() + b"\x00\x01")
        with pytest.raises(FormatError):
            read_feature_file(path)

    def test_out_of_range_label_rejected(self, tmp_path):
        ds = random_dataset(np.random.default_rng(6), c=3, n=2)
        path = tmp_path / "d.fcf"
        write_feature_file(ds, path)
        raw = bytearray(path.read_bytes())
        # first record's label field sits right after the class-text block
        header = raw.index(b"class2") + len("class2") + 3 * 8 * 4
        raw[header:header + 4] = (250).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(DataValidationError):
            read_feature_file(path)


class TestSplit:
    @pytest.mark.parametrize("n,sizes", [(100, (60, 20, 20)), (10, (6, 2, 2)),
                                         (11, (6, 2, 3)), (5, (3, 1, 1))])
    def test_sizes(self, n, sizes):
        split = split_60_20_20(n, seed=0)
        assert (split.train.size, split.valid.size, split.test.size) == sizes

    def test_too_small(self):
        with pytest.raises(ParameterError):
            split_60_20_20(4, seed=0)

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(5, 500))
            seed = int(rng.integers(0, 2 ** 31))
            split = split_60_20_20(n, seed)
            merged = np.concatenate([split.train, split.valid, split.test])
            assert merged.size == n
            assert np.array_equal(np.sort(merged), np.arange(n))

    def test_deterministic(self):
        a = split_60_20_20(37, seed=9)
        b = split_60_20_20(37, seed=9)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.valid, b.valid)
        assert np.array_equal(a.test, b.test)


class TestBatches:
    def test_chunk_sizes(self):
        batches = make_batches(np.arange(10), 4, np.random.default_rng(0))
        assert [b.size for b in batches] == [4, 4, 2]

    def test_singleton_tail_dropped(self):
        batches = make_batches(np.arange(9), 4, np.random.default_rng(0))
        assert [b.size for b in batches] == [4, 4]

    def test_never_yields_singletons(self):
        rng = np.random.default_rng(1)
        for n in range(2, 40):
            for bs in (2, 3, 4, 7):
                for b in make_batches(np.arange(n), bs, rng):
                    assert b.size >= 2

    def test_same_seed_same_batches(self):
        a = make_batches(np.arange(20), 6, np.random.default_rng(5))
        b = make_batches(np.arange(20), 6, np.random.default_rng(5))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_bad_batch_size(self):
        with pytest.raises(ParameterError):
            make_batches(np.arange(5), 0, np.random.default_rng(0))


class TestSyntheticSuite:
    def test_shift_zero_shares_class_means(self):
        # with no noise the samples ARE the class means: identical everywhere
        suite = generate_synthetic_suite(3, 12, 8, 4, shift=0.0, seed=0,
                                         noise_lo=0.0, noise_hi=0.0)
        for ds in suite[1:]:
            assert np.array_equal(ds.features, suite[0].features)

    def test_shift_separates_domains(self):
        suite = generate_synthetic_suite(2, 12, 8, 4, shift=0.5, seed=0,
                                         noise_lo=0.0, noise_hi=0.0)
        assert not np.array_equal(suite[0].features, suite[1].features)

    def test_deterministic(self):
        a = generate_synthetic_suite(3, 20, 16, 4, 0.5, seed=11)
        b = generate_synthetic_suite(3, 20, 16, 4, 0.5, seed=11)
        for x, y in zip(a, b):
            assert np.array_equal(x.features, y.features)
            assert np.array_equal(x.labels, y.labels)

    def test_class_vectors_orthonormal(self):
        suite = generate_synthetic_suite(2, 8, 16, 4, 0.5, seed=2)
        gram = suite[0].class_text_features @ suite[0].class_text_features.T
        assert np.allclose(gram, np.eye(4), atol=1e-12)

    def test_labels_balanced(self):
        suite = generate_synthetic_suite(2, 200, 32, 4, 0.5, seed=3)
        for ds in suite:
            counts = np.bincount(ds.labels, minlength=4)
            assert np.all(counts == 50)

    def test_zero_shot_above_chance_pinned(self):
        # accuracies measured once with the built evaluator and frozen here
        suite = generate_synthetic_suite(4, 200, 32, 4, 0.5, seed=0)
        expected = [0.655, 0.650, 0.740, 0.730]
        for ds, want in zip(suite, expected):
            acc = accuracy(predict(None, ds.features, ds.class_text_features),
                           ds.labels)
            assert acc > 0.25
            assert acc == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("kwargs", [
        dict(n_domains=1, n_per_domain=10, d=8, c=4, shift=0.5),
        dict(n_domains=2, n_per_domain=10, d=3, c=4, shift=0.5),
        dict(n_domains=2, n_per_domain=10, d=8, c=1, shift=0.5),
        dict(n_domains=2, n_per_domain=0, d=8, c=4, shift=0.5),
        dict(n_domains=2, n_per_domain=10, d=8, c=4, shift=-1.0),
    ])
    def test_parameter_violations(self, kwargs):
        with pytest.raises(ParameterError):
            generate_synthetic_suite(seed=0, **kwargs)


class TestFeatureDatasetValidation:
    def test_label_out_of_range(self):
        with pytest.raises(DataValidationError):
            FeatureDataset("x", ("a", "b"), np.zeros((2, 4)),
                           np.zeros((3, 4)), np.array([0, 1, 2]))

    def test_wrong_feature_dim(self):
        with pytest.raises(DataValidationError):
            FeatureDataset("x", ("a", "b"), np.zeros((2, 4)),
                           np.zeros((3, 5)), np.array([0, 1, 0]))

    def test_name_count_mismatch(self):
        with pytest.raises(DataValidationError):
            FeatureDataset("x", ("a",), np.zeros((2, 4)),
                           np.zeros((1, 4)), np.array([0]))
