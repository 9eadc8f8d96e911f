import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fairdp.dataset import (
    SensitiveStats,
    TabularDataset,
    adjacent_sensitive,
    load_csv,
    minibatch,
    one_hot,
    sensitive_stats,
    train_test_split,
)
from fairdp.exceptions import (
    DegenerateGroupError,
    EmptyDatasetError,
    ParseError,
    SchemaError,
)


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def small_ds(s=(1, 1, 2, 2), y=(1, 2, 1, 2)):
    n = len(s)
    rng = np.random.default_rng(0)
    return TabularDataset.from_arrays(rng.normal(size=(n, 2)), y, s, l=2, k=2)


class TestLoadCsv:
    def test_four_row_file(self, tmp_path):
        p = write_csv(
            tmp_path / "d.csv",
            "x1,x2,lab,grp\n1,2,a,m\n3,4,b,f\n5,6,a,m\n7,8,b,f\n",
        )
        ds = load_csv(p, "lab", "grp")
        assert (ds.n, ds.d_x, ds.l, ds.k) == (4, 2, 2, 2)
        assert ds.labels.tolist() == [1, 2, 1, 2]
        assert ds.sensitive.tolist() == [1, 2, 1, 2]
        assert ds.label_names == ("a", "b")
        assert ds.sensitive_names == ("m", "f")

    def test_single_sensitive_value_rejected(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,lab,grp\n1,a,m\n2,b,m\n")
        with pytest.raises(ValueError):
            load_csv(p, "lab", "grp")

    def test_many_feature_columns(self, tmp_path):
        cols = [f"c{i}" for i in range(102)]
        header = ",".join(cols + ["lab", "grp"])
        row1 = ",".join(["0.5"] * 102 + ["a", "m"])
        row2 = ",".join(["1.5"] * 102 + ["b", "f"])
        p = write_csv(tmp_path / "wide.csv", f"{header}\n{row1}\n{row2}\n")
        assert load_csv(p, "lab", "grp").d_x == 102

    def test_missing_column(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,lab\n1,a\n")
        with pytest.raises(SchemaError):
            load_csv(p, "lab", "grp")

    def test_non_numeric_cell_reports_row(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,lab,grp\n1,a,m\noops,b,f\n")
        with pytest.raises(ParseError) as err:
            load_csv(p, "lab", "grp")
        assert err.value.row == 1

    def test_non_finite_cell_rejected(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,lab,grp\nnan,a,m\n1,b,f\n")
        with pytest.raises(ParseError):
            load_csv(p, "lab", "grp")

    def test_empty_file(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "")
        with pytest.raises(EmptyDatasetError):
            load_csv(p, "lab", "grp")
        p2 = write_csv(tmp_path / "h.csv", "x,lab,grp\n")
        with pytest.raises(EmptyDatasetError):
            load_csv(p2, "lab", "grp")

    def test_reload_gives_identical_encodings(self, tmp_path):
        p = write_csv(
            tmp_path / "d.csv",
            "x,lab,grp\n1,z,q\n2,a,p\n3,z,q\n4,a,p\n",
        )
        a, b = load_csv(p, "lab", "grp"), load_csv(p, "lab", "grp")
        assert a.label_names == b.label_names
        assert a.sensitive_names == b.sensitive_names
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.sensitive, b.sensitive)


class TestSplit:
    def test_three_to_one(self):
        rng = np.random.default_rng(1)
        ds = TabularDataset.from_arrays(
            rng.normal(size=(100, 3)),
            rng.integers(1, 3, 100),
            rng.integers(1, 3, 100),
            l=2,
            k=2,
        )
        train, test = train_test_split(ds, 0.25, seed=7)
        assert (train.n, test.n) == (75, 25)

    def test_tiny_split(self):
        train, test = train_test_split(small_ds(), 0.25, seed=0)
        assert (train.n, test.n) == (3, 1)

    def test_deterministic(self):
        ds = small_ds(s=(1, 2, 1, 2, 1, 2), y=(1, 1, 2, 2, 1, 2))
        a = train_test_split(ds, 0.5, seed=3)
        b = train_test_split(ds, 0.5, seed=3)
        assert np.array_equal(a[0].features, b[0].features)
        assert np.array_equal(a[1].features, b[1].features)

    def test_fraction_out_of_range(self):
        with pytest.raises(ValueError):
            train_test_split(small_ds(), 1.0, seed=0)
        with pytest.raises(ValueError):
            train_test_split(small_ds(), 0.0, seed=0)

    @given(n=st.integers(4, 60), frac=st.floats(0.1, 0.9), seed=st.integers(0, 100))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, n, frac, seed):
        assume(int(np.ceil(n * (1 - frac) - 1e-9)) < n)  # both sides nonempty
        rng = np.random.default_rng(0)
        features = rng.normal(size=(n, 2))
        features[:, 0] = np.arange(n)  # row identities survive the split
        codes = np.resize([1, 2], n)
        ds = TabularDataset.from_arrays(features, codes, codes, l=2, k=2)
        train, test = train_test_split(ds, frac, seed=seed)
        ids = np.concatenate([train.features[:, 0], test.features[:, 0]])
        assert sorted(ids.tolist()) == list(range(n))
        assert train.n == int(np.ceil(n * (1 - frac) - 1e-9))


class TestSensitiveStats:
    def test_balanced(self):
        st_ = sensitive_stats(small_ds())
        assert np.allclose(st_.probabilities, [0.5, 0.5])
        assert st_.rho == 0.5
        assert np.allclose(st_.inv_sqrt, [1.41421356, 1.41421356])

    def test_skewed(self):
        st_ = sensitive_stats(small_ds(s=(1, 1, 1, 2)))
        assert np.allclose(st_.probabilities, [0.75, 0.25])
        assert st_.rho == 0.25
        # 0.75 ** -0.5 and 0.25 ** -0.5
        assert np.allclose(st_.inv_sqrt, [1.15470054, 2.0])

    def test_empty_group(self):
        ds = TabularDataset.from_arrays(
            np.zeros((4, 1)), [1, 2, 1, 2], [1, 1, 1, 1], l=2, k=2
        )
        with pytest.raises(DegenerateGroupError):
            sensitive_stats(ds)

    def test_inv_sqrt_inverts(self):
        st_ = SensitiveStats.from_groups(np.array([1, 1, 2, 3, 3, 3]), 3)
        assert np.allclose(st_.inv_sqrt * np.sqrt(st_.probabilities), 1.0)


class TestOneHot:
    def test_basic(self):
        assert one_hot(2, 4).tolist() == [0.0, 1.0, 0.0, 0.0]
        assert one_hot(1, 1).tolist() == [1.0]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot(5, 4)
        with pytest.raises(ValueError):
            one_hot(0, 4)


class TestMinibatch:
    def test_full_size_draw_may_repeat(self):
        rng = np.random.default_rng(0)
        seen_repeat = any(
            len(set(minibatch(5, 5, np.random.default_rng(s)).tolist())) < 5
            for s in range(20)
        )
        assert seen_repeat
        assert minibatch(5, 5, rng).shape == (5,)

    def test_bad_sizes(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            minibatch(5, 6, rng)
        with pytest.raises(ValueError):
            minibatch(5, 0, rng)

    def test_stream_semantics(self):
        a = np.random.default_rng(9)
        b = np.random.default_rng(9)
        first_a, second_a = minibatch(10, 4, a), minibatch(10, 4, a)
        first_b, second_b = minibatch(10, 4, b), minibatch(10, 4, b)
        assert not np.array_equal(first_a, second_a)
        assert np.array_equal(first_a, first_b)
        assert np.array_equal(second_a, second_b)

    def test_uniform_frequencies(self):
        rng = np.random.default_rng(5)
        draws = np.concatenate([minibatch(10, 10, rng) for _ in range(10_000)])
        freq = np.bincount(draws, minlength=10) / draws.size
        se = np.sqrt(0.1 * 0.9 / draws.size)
        assert np.all(np.abs(freq - 0.1) <= 3 * se)


class TestAdjacent:
    def test_single_difference(self):
        ds = small_ds()
        flipped = adjacent_sensitive(ds, 0, 2)
        assert np.count_nonzero(flipped.sensitive != ds.sensitive) == 1
        assert np.array_equal(flipped.features, ds.features)
        assert np.array_equal(flipped.labels, ds.labels)

    def test_same_group_rejected(self):
        with pytest.raises(ValueError):
            adjacent_sensitive(small_ds(), 0, 1)

    def test_rho_recount(self):
        flipped = adjacent_sensitive(small_ds(), 3, 1)
        assert sensitive_stats(flipped).rho == pytest.approx(0.25)

    def test_emptying_group_rejected(self):
        ds = small_ds(s=(1, 1, 1, 2))
        with pytest.raises(DegenerateGroupError):
            adjacent_sensitive(ds, 3, 1)

    def test_rho_moves_by_at_most_one_over_n(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = int(rng.integers(6, 30))
            s = rng.integers(1, 4, n)
            s[:3] = [1, 2, 3]  # keep every group nonempty
            ds = TabularDataset.from_arrays(rng.normal(size=(n, 2)), [1, 2] * (n // 2) + [1] * (n % 2), s, l=2, k=3)
            i = int(rng.integers(0, n))
            options = [g for g in (1, 2, 3) if g != ds.sensitive[i]]
            try:
                flipped = adjacent_sensitive(ds, i, options[0])
            except DegenerateGroupError:
                continue
            drho = abs(sensitive_stats(flipped).rho - sensitive_stats(ds).rho)
            assert drho <= 1.0 / n + 1e-12

    def test_immutability(self):
        ds = small_ds()
        with pytest.raises(ValueError):
            ds.sensitive[0] = 2
