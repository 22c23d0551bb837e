from __future__ import annotations

from dataclasses import dataclass

import numpy

from penaltylearn.errors import ValidationError
from penaltylearn.log import dbg
from penaltylearn.penaltypath import TargetInterval


@dataclass(frozen=True)
class IntervalDataset:
    """Feature rows with interval targets [lower, upper] on log(lambda)"""

    x: numpy.ndarray
    lower: numpy.ndarray
    upper: numpy.ndarray
    feature_names: tuple[str, ...] = ()
    ids: tuple[str, ...] = ()

    def __post_init__(self):
        x = numpy.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise ValidationError("Feature matrix must be two-dimensional")
        lower = numpy.asarray(self.lower, dtype=float)
        upper = numpy.asarray(self.upper, dtype=float)
        if not (len(lower) == len(upper) == x.shape[0]):
            raise ValidationError("Feature rows and targets must have equal length")
        if numpy.any(lower >= upper):
            raise ValidationError("Every target must satisfy lower < upper")
        if numpy.any(numpy.isinf(lower) & numpy.isinf(upper)):
            raise ValidationError("Every target needs at least one finite bound")
        if not numpy.all(numpy.isfinite(x)):
            raise ValidationError("Feature values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        return

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def take(self, rows: numpy.ndarray | list[int]) -> IntervalDataset:
        rows = numpy.asarray(rows, dtype=numpy.int64)
        ids = tuple(self.ids[i] for i in rows) if self.ids else ()
        return IntervalDataset(self.x[rows], self.lower[rows], self.upper[rows], self.feature_names, ids)

    @classmethod
    def from_targets(
        cls,
        x: numpy.ndarray,
        targets: list[TargetInterval],
        feature_names: tuple[str, ...] = (),
        ids: tuple[str, ...] = (),
    ) -> IntervalDataset:
        """Build a dataset, dropping the rows whose target is (-inf, +inf): they carry no information"""
        keep = [i for i, t in enumerate(targets) if t.censoring != "none"]
        if len(keep) != len(targets):
            dbg(f"Dropped {len(targets) - len(keep)} rows with an unbounded target")
        x = numpy.asarray(x, dtype=float).reshape(len(targets), -1)[keep]
        return cls(
            x,
            numpy.array([targets[i].lower for i in keep], dtype=float),
            numpy.array([targets[i].upper for i in keep], dtype=float),
            tuple(feature_names),
            tuple(ids[i] for i in keep) if ids else (),
        )
