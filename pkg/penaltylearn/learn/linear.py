from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy

from penaltylearn.learn.dataset import IntervalDataset
from penaltylearn.learn.loss import squared_hinge_vector
from penaltylearn.learn.optim import Parameters, TrainingHistory, TrainingSettings, minimize
from penaltylearn.log import dbg


@dataclass(frozen=True)
class LinearModel:
    """log(lambda) = x.w + b"""

    weights: numpy.ndarray
    intercept: float
    history: Optional[TrainingHistory] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, values: dict) -> LinearModel:
        return cls(numpy.asarray(values["weights"], dtype=float), float(values["intercept"]))


def linear_predict(model: LinearModel, x: numpy.ndarray) -> numpy.ndarray:
    return numpy.asarray(x, dtype=float) @ model.weights + model.intercept


def linear_objective(
    params: Parameters, data: IntervalDataset, margin: float, l1_strength: float = 0.0
) -> tuple[float, Parameters]:
    """Mean squared hinge loss plus the L1 norm of the weights (intercept unpenalized), and the gradient of
    the smooth part"""
    w, b = params
    losses, dloss = squared_hinge_vector(data.x @ w + b[0], data.lower, data.upper, margin)
    n = max(len(data), 1)
    loss = float(losses.sum() / n + l1_strength * numpy.abs(w).sum())
    return loss, [data.x.T @ dloss / n, numpy.array([dloss.sum() / n])]


def train_linear(
    data: IntervalDataset,
    l1_strength: float = 0.0,
    settings: TrainingSettings = TrainingSettings(),
    seed: int = 0,
) -> LinearModel:
    """Fit w and b with Adam, followed by a soft-threshold step on w when `l1_strength` > 0. The objective is
    convex: the model starts at 0 and `seed` is only recorded."""
    params = [numpy.zeros(data.n_features), numpy.zeros(1)]
    threshold = settings.learning_rate * l1_strength

    def soft_threshold(p: Parameters) -> None:
        w = p[0]
        w[:] = numpy.sign(w) * numpy.maximum(numpy.abs(w) - threshold, 0.0)
        return

    best, history = minimize(
        lambda p: linear_objective(p, data, settings.margin, l1_strength),
        params,
        settings,
        soft_threshold if l1_strength > 0 else None,
    )
    dbg(f"Linear model (l1={l1_strength}): {int(numpy.count_nonzero(best[0]))}/{data.n_features} non-zero weights")
    return LinearModel(best[0], float(best[1][0]), history)
