from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Union

import numpy

import penaltylearn.const
from penaltylearn.data import SequenceSet
from penaltylearn.errors import ConfigError
from penaltylearn.features import FeaturePipeline

from .bic import bic_predict
from .linear import LinearModel, linear_predict
from .mlp import MLPModel, mlp_predict
from .mmit import TreeModel, mmit_predict

Estimator = Union[LinearModel, MLPModel, TreeModel]


@dataclass(frozen=True)
class ModelSpec:
    """One of the compared models, `<family>.<feature set>`"""

    family: str
    feature_set: str

    @property
    def name(self) -> str:
        return f"{self.family}.{self.feature_set}"

    @property
    def supervised(self) -> bool:
        return self.family != "BIC"

    def __str__(self) -> str:
        return self.name


class ModelManager(dict[str, ModelSpec]):
    def __init__(self):
        super().__init__()
        self.load()

    def load(self) -> None:
        for name in penaltylearn.const.MODEL_NAMES:
            family, feature_set = name.split(".", 1)
            self[name] = ModelSpec(family, feature_set)
        return

    def find(self, name: str) -> ModelSpec:
        for key, spec in self.items():
            if key.lower() == name.lower():
                return spec
        raise ConfigError(f"Unknown model '{name}' (expected one of {', '.join(self)})")


Models = ModelManager()


@dataclass(frozen=True)
class TrainedModel:
    """A fitted model together with its feature pipeline; predicts log(lambda) per sequence"""

    spec: ModelSpec
    estimator: Optional[Estimator] = None
    pipeline: Optional[FeaturePipeline] = None
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    margin: float = penaltylearn.const.DEFAULT_MARGIN

    def predict_matrix(self, x: numpy.ndarray) -> numpy.ndarray:
        match self.estimator:
            case LinearModel():
                return linear_predict(self.estimator, x)
            case MLPModel():
                return mlp_predict(self.estimator, x)
            case TreeModel():
                return mmit_predict(self.estimator, x)
            case _:
                raise ConfigError(f"Model '{self.spec}' has no feature-based estimator")

    def predict(self, sequences: SequenceSet, ids: Iterable[str]) -> dict[str, float]:
        ids = list(ids)
        if not self.spec.supervised:
            return {sid: bic_predict(len(sequences[sid])) for sid in ids}
        assert self.pipeline is not None
        if not ids:
            return {}
        values = self.predict_matrix(self.pipeline.transform(sequences, ids))
        return {sid: float(v) for sid, v in zip(ids, values)}
