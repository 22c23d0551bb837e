import logging
import math
import pathlib
import tempfile
import unittest

import numpy
import pandas
import pytest

import penaltylearn.log
from penaltylearn.data import Sequence, SyntheticConfig, generate_synthetic
from penaltylearn.errors import ConfigError, PipelineError
from penaltylearn.features import (
    BASE_STATISTICS,
    base_statistics,
    catalog_names,
    feature_catalog,
    feature_matrix,
    fit_pipeline,
    fit_standardizer,
    named_feature_set,
    select_columns,
    select_finite_columns,
    sequence_features,
    write_features,
)

LOGGER = logging.getLogger(__name__)
penaltylearn.log.register_sink(LOGGER.debug)


def make_sequence(values, sequence_id: str = "s1") -> Sequence:
    return Sequence(sequence_id, numpy.arange(1, len(values) + 1), values)


class StatisticsTest(unittest.TestCase):
    def test_small_sequence(self):
        stats = base_statistics(make_sequence([1, 3, 2]))
        assert set(stats) == set(BASE_STATISTICS)
        assert stats["range"] == 2
        assert stats["sum_abs_diff"] == 3
        assert stats["mean_abs_diff"] == 1.5
        assert stats["median"] == 2
        assert stats["count"] == 3

    def test_single_point(self):
        stats = base_statistics(make_sequence([4.2]))
        assert stats["variance"] == 0
        assert stats["sum_abs_diff"] == 0
        assert stats["mean_abs_diff"] == 0
        assert stats["q25"] == stats["q75"] == 4.2

    def test_step(self):
        stats = base_statistics(make_sequence([1, 1, 1, 5, 5, 5]))
        assert stats["variance"] == pytest.approx(4.8)
        assert stats["range"] == 4
        assert stats["sd"] == pytest.approx(math.sqrt(4.8))


class CatalogTest(unittest.TestCase):
    def test_size_and_names(self):
        vector = sequence_features(make_sequence([1, 3, 2]))
        assert len(vector.names) == 84
        assert len(set(vector.names)) == 84
        assert vector.names == catalog_names()
        assert "loglog.count" in vector.names
        assert "log1p.mean_abs_diff" in vector.names

    def test_transforms(self):
        stats = base_statistics(make_sequence([1, 3, 2]))
        stats["count"] = math.exp(math.e)
        stats["min"] = -2.0
        values = feature_catalog(stats).as_dict()
        assert values["loglog.count"] == pytest.approx(1.0)
        assert math.isnan(values["log.min"])
        assert values["abs.min"] == 2.0
        assert values["square.min"] == 4.0
        assert values["sqrt.min"] == pytest.approx(math.sqrt(2))
        assert values["log1p.min"] == pytest.approx(math.log(3))
        assert values["identity.min"] == -2.0

    def test_four_features(self):
        names = named_feature_set("f4")
        assert names == ["loglog.count", "log.variance", "log.range", "loglog.sum_abs_diff"]
        row = select_columns(feature_matrix({"s1": make_sequence([1, 1, 1, 5, 5, 5])}, ["s1"]), names)[0]
        expected = [math.log(math.log(6)), math.log(4.8), math.log(4), math.log(math.log(4))]
        assert row.tolist() == pytest.approx(expected, abs=1e-12)

    def test_named_sets(self):
        assert named_feature_set("f1") == ["loglog.count"]
        assert named_feature_set("1") == ["loglog.count"]
        assert named_feature_set("f2") == ["loglog.count", "log.variance"]
        assert len(named_feature_set("full")) == 84
        with pytest.raises(ConfigError):
            named_feature_set("f3")

    def test_deterministic(self):
        seq = make_sequence(numpy.random.default_rng(1).normal(size=30))
        first = feature_catalog(base_statistics(seq)).values
        second = feature_catalog(base_statistics(seq)).values
        assert numpy.array_equal(first, second, equal_nan=True)


class FilterTest(unittest.TestCase):
    def test_mask(self):
        matrix = numpy.array([[1.0, numpy.nan, 2.0], [3.0, 4.0, numpy.inf]])
        assert select_finite_columns(matrix).tolist() == [True, False, False]

        with pytest.raises(PipelineError):
            select_finite_columns(numpy.array([[numpy.nan], [1.0]]))

    def test_synthetic_keeps_named_features(self):
        sequences, _ = generate_synthetic(SyntheticConfig(n_sequences=20), 4)
        mask = select_finite_columns(feature_matrix(sequences, sorted(sequences)))
        kept = {name for name, keep in zip(catalog_names(), mask) if keep}
        assert set(named_feature_set("f4")) <= kept

    def test_mask_ignores_test_rows(self):
        sequences, _ = generate_synthetic(SyntheticConfig(n_sequences=12), 8)
        ids = sorted(sequences)
        pipeline = fit_pipeline("full", sequences, ids[:8])
        shuffled = fit_pipeline("full", sequences, list(reversed(ids[:8])))
        assert pipeline.names == shuffled.names
        first = pipeline.transform(sequences, ids[8:])
        second = pipeline.transform(sequences, list(reversed(ids[8:])))
        assert numpy.array_equal(first, second[::-1])

    def test_test_rows_imputed(self):
        train = {f"t{i}": make_sequence(numpy.arange(i + 2.0) + 1, f"t{i}") for i in range(5)}
        pipeline = fit_pipeline("f2", train, sorted(train))
        assert pipeline.names == ("loglog.count", "log.variance")

        # a single point has zero variance: log.variance is -inf
        test = {"one": make_sequence([7.0], "one"), "two": make_sequence([1.0, 2.0], "two")}
        x = pipeline.transform(test, ["one", "two"])
        assert numpy.all(numpy.isfinite(x))
        assert x[0, 1] == 0.0


class StandardizerTest(unittest.TestCase):
    def test_train_moments(self):
        rng = numpy.random.default_rng(0)
        matrix = rng.normal(loc=3, scale=2, size=(40, 3))
        matrix[:, 2] = 5.0
        standardizer = fit_standardizer(matrix)
        x = standardizer.apply(matrix)
        assert numpy.all(numpy.abs(x.mean(axis=0)) < 1e-9)
        assert x[:, :2].std(axis=0) == pytest.approx([1.0, 1.0])
        assert numpy.all(x[:, 2] == 0.0)
        assert standardizer.invert(x)[:, :2] == pytest.approx(matrix[:, :2])


class FeatureFileTest(unittest.TestCase):
    def test_write(self):
        sequences = {"b": make_sequence([1, 2, 3], "b"), "a": make_sequence([0, 5], "a")}
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "features.csv"
            write_features(path, sequences)
            df = pandas.read_csv(path)
        assert list(df.columns) == ["sequenceID"] + list(catalog_names())
        assert df["sequenceID"].tolist() == ["a", "b"]
        assert df["identity.count"].tolist() == [2, 3]
