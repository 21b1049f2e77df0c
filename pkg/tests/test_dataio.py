"""CSV ingestion, dataset container, and fold splitting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rumsim.dataio import (Dataset, SchemaConfig, canonical_schema, kfold_split,
                           load_dataset, write_dataset)
from rumsim.errors import ConfigError, SchemaError
from rumsim.synthdata import SynthConfig, generate_dataset
from rumsim.distributions import gumbel


def binary_schema(**kwargs):
    return SchemaConfig(
        alternatives=("car", "bus"),
        choice_column="choice",
        alt_var_columns={"cost": ("cost_1", "cost_2")},
        shared_columns=kwargs.pop("shared_columns", ()),
        **kwargs)


class TestLoadDataset:
    def test_three_row_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("cost_1,cost_2,choice\n1.5,2.0,0\n0.25,0.5,1\n3.0,1.0,0\n")
        data, report = load_dataset(path, binary_schema())
        assert data.n == 3 and data.j == 2
        np.testing.assert_array_equal(data.y, [0, 1, 0])
        np.testing.assert_allclose(data.alt_vars["cost"][:, 0], [1.5, 0.25, 3.0])
        assert report.rows_read == 3 and report.rows_kept == 3

    def test_nan_cell_with_dropna(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("cost_1,cost_2,choice\n1.0,2.0,0\n,0.5,1\n3.0,1.0,0\n")
        data, report = load_dataset(path, binary_schema(dropna=("cost_1",)))
        assert data.n == 2
        assert report.dropna_dropped == 1
        assert any("missing" in line for line in report.lines())

    def test_filter_report_states_resulting_n(self, tmp_path):
        path = tmp_path / "survey.csv"
        rows = ["cost_1,cost_2,purpose,choice"]
        rows += [f"{i}.0,{i + 1}.0,{i % 4},{i % 2}" for i in range(12)]
        path.write_text("\n".join(rows) + "\n")
        schema = binary_schema(filters=("purpose in (1, 3)",))
        data, report = load_dataset(path, schema)
        assert data.n == 6
        assert report.filter_counts == [("purpose in (1, 3)", 6)]
        assert f"kept {data.n} rows" in report.lines()[-1]

    def test_unknown_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("cost_1,choice\n1.0,0\n")
        with pytest.raises(SchemaError, match="cost_2"):
            load_dataset(path, binary_schema())

    def test_unparsable_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("cost_1,cost_2,choice\n1.0,2.0,0\noops,0.5,1\n")
        with pytest.raises(SchemaError, match=r"cost_1.*row 1"):
            load_dataset(path, binary_schema())

    def test_choice_out_of_range_named(self, tmp_path):
        path = tmp_path / "badchoice.csv"
        path.write_text("cost_1,cost_2,choice\n1.0,2.0,7\n")
        with pytest.raises(SchemaError, match=r"choice.*row 0"):
            load_dataset(path, binary_schema())

    def test_choice_labels_mapping(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("cost_1,cost_2,choice\n1.0,2.0,1\n2.0,1.0,2\n")
        data, _ = load_dataset(path, binary_schema(choice_labels=(1, 2)))
        np.testing.assert_array_equal(data.y, [0, 1])

    def test_categorical_one_hot_with_reference(self, tmp_path):
        path = tmp_path / "cat.csv"
        path.write_text("cost_1,cost_2,band,choice\n"
                        "1,2,low,0\n2,1,mid,1\n1,1,high,0\n2,2,low,1\n")
        schema = binary_schema(shared_columns=("band",),
                               categorical={"band": {"levels": ["low", "mid", "high"],
                                                     "drop": "low"}})
        data, report = load_dataset(path, schema)
        assert set(data.shared_vars) == {"band_mid", "band_high"}
        np.testing.assert_array_equal(data.shared_vars["band_mid"], [0, 1, 0, 0])
        assert any("reference" in line for line in report.lines())

    def test_availability_enforced(self, tmp_path):
        path = tmp_path / "avail.csv"
        path.write_text("cost_1,cost_2,av_1,av_2,choice\n1.0,2.0,1,0,1\n")
        schema = binary_schema(availability_columns=("av_1", "av_2"))
        with pytest.raises(ConfigError, match="unavailable"):
            load_dataset(path, schema)


class TestRoundTrip:
    def test_write_then_read_identical(self, tmp_path):
        data = generate_dataset(SynthConfig(j=3, n=40, beta_true=(-1, .5, .5, 1),
                                            error=gumbel(), seed=3))
        path = tmp_path / "round.csv"
        write_dataset(data, path)
        again, _ = load_dataset(path, canonical_schema(data))
        assert again.n == data.n and again.j == data.j
        np.testing.assert_array_equal(again.y, data.y)
        for key in data.alt_vars:
            np.testing.assert_array_equal(again.alt_vars[key], data.alt_vars[key])


class TestStandardize:
    def test_zscore_and_binary_passthrough(self):
        gen = np.random.default_rng(0)
        data = Dataset(alt_vars={"x": gen.normal(3.0, 2.0, size=(50, 2))},
                       shared_vars={"flag": (gen.uniform(size=50) > 0.5).astype(float)},
                       y=gen.integers(0, 2, size=50), alt_names=("a", "b"))
        scaled, stats = data.standardized()
        for alt in (0, 1):
            col = scaled.alt_vars["x"][:, alt]
            assert abs(col.mean()) < 1e-12
            assert abs(col.std() - 1.0) < 1e-12
        np.testing.assert_array_equal(scaled.shared_vars["flag"],
                                      data.shared_vars["flag"])

    def test_training_stats_applied_to_test(self):
        gen = np.random.default_rng(1)
        data = Dataset(alt_vars={"x": gen.normal(size=(30, 2))}, shared_vars={},
                       y=gen.integers(0, 2, size=30), alt_names=("a", "b"))
        train = data.subset(np.arange(20))
        test = data.subset(np.arange(20, 30))
        _, stats = train.standardized()
        scaled_test, _ = test.standardized(stats)
        key = ("alt", "x", 0)
        expected = (test.alt_vars["x"][:, 0] - stats[key][0]) / stats[key][1]
        np.testing.assert_allclose(scaled_test.alt_vars["x"][:, 0], expected)


class TestKfold:
    def test_five_folds_of_ten(self):
        data = generate_dataset(SynthConfig(j=2, n=10, beta_true=(-1, .5, .5, 1),
                                            error=gumbel(), seed=4))
        folds = kfold_split(data, 5, seed=0)
        assert len(folds) == 5
        all_test = np.concatenate([te for _, te in folds])
        assert sorted(all_test.tolist()) == list(range(10))
        for train, test in folds:
            assert len(test) == 2
            assert len(np.intersect1d(train, test)) == 0

    def test_same_seed_identical(self):
        data = generate_dataset(SynthConfig(j=2, n=23, beta_true=(-1, .5, .5, 1),
                                            error=gumbel(), seed=5))
        a = kfold_split(data, 4, seed=9)
        b = kfold_split(data, 4, seed=9)
        for (tr1, te1), (tr2, te2) in zip(a, b):
            np.testing.assert_array_equal(tr1, tr2)
            np.testing.assert_array_equal(te1, te2)

    def test_k_exceeding_n_rejected(self):
        data = generate_dataset(SynthConfig(j=2, n=3, beta_true=(-1, .5, .5, 1),
                                            error=gumbel(), seed=6))
        with pytest.raises(ConfigError):
            kfold_split(data, 5, seed=0)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(4, 60), k=st.integers(2, 6), seed=st.integers(0, 100))
    def test_partition_properties(self, n, k, seed):
        if k > n:
            return
        data = generate_dataset(SynthConfig(j=2, n=n, beta_true=(-1, .5, .5, 1),
                                            error=gumbel(), seed=7))
        folds = kfold_split(data, k, seed=seed)
        sizes = [len(te) for _, te in folds]
        assert max(sizes) - min(sizes) <= 1
        all_test = np.concatenate([te for _, te in folds])
        assert sorted(all_test.tolist()) == list(range(n))
        for train, test in folds:
            assert sorted(np.concatenate([train, test]).tolist()) == list(range(n))


class TestDatasetValidation:
    def test_choice_range(self):
        with pytest.raises(ConfigError, match="row 1"):
            Dataset(alt_vars={"x": np.zeros((2, 2))}, shared_vars={},
                    y=np.array([0, 5]), alt_names=("a", "b"))

    def test_nan_rejected(self):
        bad = np.zeros((2, 2))
        bad[0, 0] = np.nan
        with pytest.raises(ConfigError, match="non-finite"):
            Dataset(alt_vars={"x": bad}, shared_vars={},
                    y=np.array([0, 1]), alt_names=("a", "b"))

    def test_observation_view(self):
        data = Dataset(alt_vars={"x": np.array([[1.0, 2.0], [3.0, 4.0]])},
                       shared_vars={"age": np.array([30.0, 40.0])},
                       y=np.array([0, 1]), alt_names=("a", "b"))
        obs = data.observation(1)
        np.testing.assert_array_equal(obs["x"], [3.0, 4.0])
        assert obs["age"] == 40.0
