from __future__ import annotations

import functools
import pathlib
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy
import pandas

import penaltylearn.utils
from penaltylearn.data import Sequence, SequenceSet
from penaltylearn.errors import ConfigError, PipelineError
from penaltylearn.log import dbg, warn

BASE_STATISTICS: tuple[str, ...] = (
    "count",
    "mean",
    "variance",
    "sd",
    "min",
    "max",
    "q25",
    "median",
    "q75",
    "range",
    "sum_abs_diff",
    "mean_abs_diff",
)

TRANSFORMS: dict[str, Callable[[numpy.ndarray], numpy.ndarray]] = {
    "identity": lambda x: x,
    "abs": numpy.abs,
    "square": numpy.square,
    "sqrt": lambda x: numpy.sqrt(numpy.abs(x)),
    "log": numpy.log,
    "loglog": lambda x: numpy.log(numpy.log(x)),
    "log1p": lambda x: numpy.log1p(numpy.abs(x)),
}

FEATURE_SETS: dict[str, tuple[str, ...]] = {
    "f1": ("loglog.count",),
    "f2": ("loglog.count", "log.variance"),
    "f4": ("loglog.count", "log.variance", "log.range", "loglog.sum_abs_diff"),
}


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: numpy.ndarray

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("Feature names must be distinct")
        if len(self.names) != len(self.values):
            raise ValueError("Feature names and values must have equal length")
        return

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def base_statistics(seq: Sequence) -> dict[str, float]:
    """Length, moments, order statistics and consecutive differences of a sequence

    Args:
        seq (Sequence): the data

    Returns:
        dict[str, float]: one value per name of `BASE_STATISTICS`
    """
    d = seq.values
    n = len(d)
    diffs = numpy.abs(numpy.diff(d))
    variance = float(numpy.var(d, ddof=1)) if n > 1 else 0.0
    q25, median, q75 = numpy.quantile(d, [0.25, 0.5, 0.75])
    return {
        "count": float(n),
        "mean": float(numpy.mean(d)),
        "variance": variance,
        "sd": float(numpy.sqrt(variance)),
        "min": float(d.min()),
        "max": float(d.max()),
        "q25": float(q25),
        "median": float(median),
        "q75": float(q75),
        "range": float(d.max() - d.min()),
        "sum_abs_diff": float(diffs.sum()),
        "mean_abs_diff": float(diffs.mean()) if n > 1 else 0.0,
    }


def catalog_names() -> tuple[str, ...]:
    return tuple(f"{transform}.{stat}" for transform in TRANSFORMS for stat in BASE_STATISTICS)


def feature_catalog(stats: dict[str, float]) -> FeatureVector:
    """Every transform applied to every base statistic; non-finite results are kept"""
    raw = numpy.array([stats[name] for name in BASE_STATISTICS], dtype=float)
    with numpy.errstate(all="ignore"):
        values = numpy.concatenate([fn(raw) for fn in TRANSFORMS.values()])
    return FeatureVector(catalog_names(), values)


@functools.lru_cache(maxsize=4096)
def sequence_features(seq: Sequence) -> FeatureVector:
    return feature_catalog(base_statistics(seq))


def feature_matrix(sequences: SequenceSet, ids: Iterable[str]) -> numpy.ndarray:
    """Catalog rows of the sequences `ids`, in that order"""
    rows = [sequence_features(sequences[sid]).values for sid in ids]
    if not rows:
        return numpy.empty((0, len(catalog_names())))
    return numpy.vstack(rows)


def named_feature_set(which: str) -> list[str]:
    """Feature names of a named set: f1, f2, f4 or full (the bare suffixes 1, 2, 4 are accepted)

    Raises:
        ConfigError: on unknown set name
    """
    key = which if which == "full" or which.startswith("f") else f"f{which}"
    if key == "full":
        return list(catalog_names())
    if key not in FEATURE_SETS:
        raise ConfigError(f"Unknown feature set '{which}'")
    return list(FEATURE_SETS[key])


def select_columns(matrix: numpy.ndarray, names: list[str]) -> numpy.ndarray:
    lookup = {name: idx for idx, name in enumerate(catalog_names())}
    return matrix[:, [lookup[name] for name in names]]


def select_finite_columns(matrix: numpy.ndarray) -> numpy.ndarray:
    """Mask of the columns finite in every (training) row

    Raises:
        PipelineError: if every column is filtered out
    """
    mask = numpy.all(numpy.isfinite(matrix), axis=0)
    if not mask.any():
        raise PipelineError("Every feature column contains non-finite values")
    dbg(f"Kept {int(mask.sum())}/{len(mask)} finite feature columns")
    return mask


@dataclass(frozen=True)
class Standardizer:
    """Per-column centering and scaling fitted on training rows. Zero-sd columns map to 0 and non-finite
    entries are imputed with the training mean."""

    mean: numpy.ndarray
    sd: numpy.ndarray

    def apply(self, matrix: numpy.ndarray) -> numpy.ndarray:
        matrix = numpy.array(matrix, dtype=float)
        bad = ~numpy.isfinite(matrix)
        if bad.any():
            warn(f"Imputing {int(bad.sum())} non-finite feature value(s) with the training mean")
            matrix = numpy.where(bad, self.mean, matrix)
        scale = numpy.where(self.sd > 0, self.sd, 1.0)
        return numpy.where(self.sd > 0, (matrix - self.mean) / scale, 0.0)

    def invert(self, matrix: numpy.ndarray) -> numpy.ndarray:
        return matrix * self.sd + self.mean

    def to_dict(self) -> dict[str, list[float]]:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, values: dict[str, list[float]]) -> Standardizer:
        return cls(numpy.asarray(values["mean"], dtype=float), numpy.asarray(values["sd"], dtype=float))


def fit_standardizer(matrix: numpy.ndarray) -> Standardizer:
    matrix = numpy.asarray(matrix, dtype=float)
    if matrix.shape[0] == 0:
        return Standardizer(numpy.zeros(matrix.shape[1]), numpy.zeros(matrix.shape[1]))
    return Standardizer(matrix.mean(axis=0), matrix.std(axis=0))


@dataclass(frozen=True)
class FeaturePipeline:
    """Named feature set restricted to the training-finite columns, then standardized"""

    names: tuple[str, ...]
    standardizer: Standardizer

    def transform(self, sequences: SequenceSet, ids: Iterable[str]) -> numpy.ndarray:
        return self.standardizer.apply(select_columns(feature_matrix(sequences, ids), list(self.names)))


def fit_pipeline(feature_set: str, sequences: SequenceSet, train_ids: list[str]) -> FeaturePipeline:
    """Fit mask and standardizer on the training rows only"""
    names = named_feature_set(feature_set)
    train = select_columns(feature_matrix(sequences, train_ids), names)
    mask = select_finite_columns(train)
    kept = [name for name, keep in zip(names, mask) if keep]
    return FeaturePipeline(tuple(kept), fit_standardizer(train[:, mask]))


def write_features(path: Optional[pathlib.Path], sequences: SequenceSet) -> None:
    """The full catalog, one row per sequence"""
    ids = sorted(sequences)
    df = pandas.DataFrame(feature_matrix(sequences, ids), columns=list(catalog_names()))
    df.insert(0, "sequenceID", ids)
    penaltylearn.utils.write_csv(path, df)
    return
