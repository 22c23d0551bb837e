from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.errors import ConfigError
from penaltylearn.learn.dataset import IntervalDataset
from penaltylearn.learn.loss import squared_hinge_vector
from penaltylearn.learn.optim import Parameters, TrainingHistory, TrainingSettings, minimize


@dataclass(frozen=True)
class MLPModel:
    """Fully connected network: rectifier hidden layers of equal width, linear scalar output"""

    weights: tuple[numpy.ndarray, ...]
    biases: tuple[numpy.ndarray, ...]
    seed: int = 0
    activation: str = "relu"
    history: Optional[TrainingHistory] = field(default=None, compare=False, repr=False)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def hidden_layers(self) -> int:
        return len(self.weights) - 1

    @property
    def parameters(self) -> Parameters:
        return list(self.weights) + list(self.biases)

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "activation": self.activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, values: dict, seed: int = 0) -> MLPModel:
        sizes = values["layer_sizes"]
        weights = tuple(
            numpy.asarray(w, dtype=float).reshape(fan_in, fan_out)
            for w, fan_in, fan_out in zip(values["weights"], sizes[:-1], sizes[1:])
        )
        biases = tuple(numpy.asarray(b, dtype=float) for b in values["biases"])
        return cls(weights, biases, seed, values.get("activation", "relu"))


def check_architecture(layers: int, width: int) -> None:
    if not penaltylearn.const.MLP_MIN_LAYERS <= layers <= penaltylearn.const.MLP_MAX_LAYERS:
        raise ConfigError(f"Hidden layer count must be in [1, 4] (got {layers})")
    if width not in penaltylearn.const.MLP_WIDTHS:
        raise ConfigError(f"Hidden width must be one of {penaltylearn.const.MLP_WIDTHS} (got {width})")
    return


def init_mlp(n_inputs: int, layers: int, width: int, seed: int) -> MLPModel:
    """Uniform Glorot initialization of the weights, zero biases

    Raises:
        ConfigError: if the architecture is outside the supported grid
    """
    check_architecture(layers, width)
    rng = penaltylearn.utils.rng_for(seed, layers, width)
    sizes = [n_inputs] + [width] * layers + [1]
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = numpy.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    biases = [numpy.zeros(fan_out) for fan_out in sizes[1:]]
    return MLPModel(tuple(weights), tuple(biases), seed)


def forward(params: Parameters, x: numpy.ndarray) -> tuple[numpy.ndarray, list[numpy.ndarray]]:
    """Returns the outputs, and the input of every layer (for back-propagation)"""
    depth = len(params) // 2
    weights, biases = params[:depth], params[depth:]
    h = numpy.asarray(x, dtype=float)
    inputs = [h]
    for w, b in zip(weights[:-1], biases[:-1]):
        h = numpy.maximum(h @ w + b, 0.0)
        inputs.append(h)
    return (h @ weights[-1] + biases[-1]).ravel(), inputs


def mlp_objective(params: Parameters, data: IntervalDataset, margin: float) -> tuple[float, Parameters]:
    """Mean squared hinge loss and its gradient with respect to every weight matrix and bias vector"""
    depth = len(params) // 2
    weights = params[:depth]
    n = max(len(data), 1)

    yhat, inputs = forward(params, data.x)
    losses, dloss = squared_hinge_vector(yhat, data.lower, data.upper, margin)

    grad_w: list[numpy.ndarray] = [numpy.empty(0)] * depth
    grad_b: list[numpy.ndarray] = [numpy.empty(0)] * depth
    delta = (dloss / n)[:, None]
    for layer in range(depth - 1, -1, -1):
        grad_w[layer] = inputs[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            # rectifier derivative, from the layer output
            delta = (delta @ weights[layer].T) * (inputs[layer] > 0)

    return float(losses.sum() / n), grad_w + grad_b


def train_mlp(
    data: IntervalDataset,
    layers: int,
    width: int,
    settings: TrainingSettings = TrainingSettings(),
    seed: int = 0,
) -> MLPModel:
    """Full-batch Adam on the mean squared hinge loss; returns the parameters of the best iteration

    Args:
        data (IntervalDataset): standardized training rows
        layers (int): hidden layer count, 1 to 4
        width (int): hidden layer width, a power of two from 2 to 512
        settings (TrainingSettings, optional): optimizer and early stopping settings
        seed (int, optional): the initialization seed

    Raises:
        ConfigError: on unsupported architecture
        TrainingError: if the loss becomes non-finite

    Returns:
        MLPModel: the trained network, with its training history
    """
    model = init_mlp(data.n_features, layers, width, seed)
    best, history = minimize(lambda p: mlp_objective(p, data, settings.margin), model.parameters, settings)
    depth = len(best) // 2
    return MLPModel(tuple(best[:depth]), tuple(best[depth:]), seed, history=history)


def mlp_predict(model: MLPModel, x: numpy.ndarray) -> numpy.ndarray:
    yhat, _ = forward(model.parameters, x)
    return yhat
