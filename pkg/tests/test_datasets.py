import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedmark.datasets import (
    GenSpec,
    dump_dataset,
    generate,
    load_dataset,
    parse_dataset,
    random_probe_inputs,
    sample_queries,
    save_dataset,
    split,
)
from seedmark.errors import FormatError, SpecError


class TestGenerate:
    def test_deterministic(self):
        spec = GenSpec()
        d1, d2 = generate(spec, 3), generate(spec, 3)
        assert np.array_equal(d1.features, d2.features)
        assert np.array_equal(d1.labels, d2.labels)

    def test_balanced_labels(self):
        data = generate(GenSpec(classes=3, samples_per_class=40), 0)
        assert all(np.sum(data.labels == c) == 40 for c in range(3))

    def test_feature_range(self):
        data = generate(GenSpec(spread=2.0), 1)
        assert data.features.min() >= -1.0 and data.features.max() <= 1.0

    def test_ring_classes(self):
        data = generate(GenSpec(kind="ring_classes", classes=3), 2)
        assert data.class_count == 3
        radii = np.hypot(data.features[:, 0], data.features[:, 1])
        # outer ring sits farther out than the inner ring on average
        assert radii[data.labels == 2].mean() > radii[data.labels == 0].mean()

    def test_bad_spec(self):
        with pytest.raises(SpecError):
            GenSpec(classes=1)
        with pytest.raises(SpecError):
            GenSpec(spread=0.0)
        with pytest.raises(SpecError):
            GenSpec(kind="moons")


class TestSplit:
    def test_sizes_and_disjoint(self):
        data = generate(GenSpec(samples_per_class=25), 0)  # N = 100
        train, test = split(data, 0.2, 1)
        assert len(train) == 80 and len(test) == 20

    def test_deterministic(self):
        data = generate(GenSpec(), 0)
        (tr1, te1), (tr2, te2) = split(data, 0.3, 9), split(data, 0.3, 9)
        assert np.array_equal(tr1.features, tr2.features)
        assert np.array_equal(te1.labels, te2.labels)

    @given(st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_union_complete(self, fraction, seed):
        data = generate(GenSpec(samples_per_class=30), 4)
        train, test = split(data, fraction, seed)
        combined = np.concatenate([train.features, test.features])
        assert len(combined) == len(data)
        # same multiset of rows
        key = lambda arr: np.lexsort(arr.T)
        assert np.array_equal(combined[key(combined)], data.features[key(data.features)])

    def test_degenerate_fraction(self):
        data = generate(GenSpec(), 0)
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(SpecError):
                split(data, bad, 0)


class TestSampleQueries:
    def test_full_budget_is_shuffled_copy(self):
        data = generate(GenSpec(samples_per_class=25), 2)
        q = sample_queries(data, 1.0, 5)
        assert len(q) == len(data)
        key = lambda arr: np.lexsort(arr.T)
        assert np.array_equal(q[key(q)], data.features[key(data.features)])

    def test_half_budget_exact(self):
        data = generate(GenSpec(samples_per_class=50), 2)  # N = 200
        assert len(sample_queries(data, 0.5, 0)) == 100

    def test_deterministic(self):
        data = generate(GenSpec(), 2)
        assert np.array_equal(sample_queries(data, 0.3, 7), sample_queries(data, 0.3, 7))


class TestProbes:
    def test_shape_and_range(self):
        p = random_probe_inputs(5, 2, (-1, 1), seed=0)
        assert p.shape == (5, 2)
        assert p.min() >= -1 and p.max() <= 1

    def test_deterministic(self):
        assert np.array_equal(
            random_probe_inputs(10, 3, seed=4), random_probe_inputs(10, 3, seed=4)
        )

    def test_empirical_mean(self):
        p = random_probe_inputs(100_000, 1, (-1, 1), seed=1)
        assert abs(p.mean()) < 0.01

    def test_empty_range(self):
        with pytest.raises(SpecError):
            random_probe_inputs(5, 2, (1, 1), seed=0)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        data = generate(GenSpec(samples_per_class=10), 6)
        path = tmp_path / "d.csv"
        save_dataset(data, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.features, data.features)
        assert np.array_equal(loaded.labels, data.labels)
        assert loaded.class_count == data.class_count
        assert loaded.seed == data.seed

    def test_truncated(self):
        text = dump_dataset(generate(GenSpec(samples_per_class=5), 0))
        broken = text[: len(text) // 2].rsplit("\n", 1)[0] + "\n1.0,2.0\n"
        with pytest.raises(FormatError):
            parse_dataset(broken)

    def test_bad_header(self):
        with pytest.raises(FormatError):
            parse_dataset("not a dataset\n1,2,0\n")

    def test_label_class_mismatch(self):
        text = "# seedmark-dataset v1 dims=2 classes=2 seed=0 name=x\n0.0,0.0,5\n"
        with pytest.raises(FormatError):
            parse_dataset(text)
