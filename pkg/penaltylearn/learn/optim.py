from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy

import penaltylearn.const
from penaltylearn.errors import TrainingError
from penaltylearn.log import dbg

Parameters = list[numpy.ndarray]
Objective = Callable[[Parameters], tuple[float, Parameters]]


@dataclass(frozen=True)
class TrainingSettings:
    learning_rate: float = penaltylearn.const.DEFAULT_LEARNING_RATE
    max_iterations: int = penaltylearn.const.DEFAULT_MAX_ITERATIONS
    patience: int = penaltylearn.const.DEFAULT_PATIENCE
    min_improvement: float = penaltylearn.const.DEFAULT_MIN_IMPROVEMENT
    margin: float = penaltylearn.const.DEFAULT_MARGIN


@dataclass
class TrainingHistory:
    """Training objective per iteration; iteration 0 is the initial point"""

    losses: list[float] = field(default_factory=list)
    best_iteration: int = 0
    stop_iteration: int = 0

    @property
    def best_loss(self) -> float:
        return self.losses[self.best_iteration]


class Adam:
    """Full-batch Adam, updating the parameter arrays in place"""

    def __init__(
        self,
        params: Parameters,
        learning_rate: float = penaltylearn.const.DEFAULT_LEARNING_RATE,
        beta1: float = penaltylearn.const.ADAM_BETA1,
        beta2: float = penaltylearn.const.ADAM_BETA2,
        epsilon: float = penaltylearn.const.ADAM_EPSILON,
    ):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = [numpy.zeros_like(p) for p in params]
        self.v = [numpy.zeros_like(p) for p in params]
        self.t = 0
        return

    def step(self, grads: Parameters) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / correction1) / (numpy.sqrt(v / correction2) + self.epsilon)
        return


class EarlyStopping:
    """Stop once the loss has not decreased by at least `min_improvement` for `patience` consecutive
    iterations"""

    def __init__(self, patience: int, min_improvement: float):
        self.patience = patience
        self.min_improvement = min_improvement
        self.best = math.inf
        self.best_iteration = 0
        self.counter = 0
        self.early_stop = False
        return

    def __call__(self, iteration: int, loss: float) -> bool:
        """Record the loss of `iteration`; returns True if it is a new best"""
        if loss < self.best and self.best - loss >= self.min_improvement:
            self.best = loss
            self.best_iteration = iteration
            self.counter = 0
            return True

        self.counter += 1
        if self.counter >= self.patience:
            self.early_stop = True
        return False


def minimize(
    objective: Objective,
    params: Parameters,
    settings: TrainingSettings,
    proximal: Optional[Callable[[Parameters], None]] = None,
) -> tuple[Parameters, TrainingHistory]:
    """Run Adam on `objective` with early stopping

    Args:
        objective (Objective): returns the loss and the gradients at the given parameters
        params (Parameters): the initial parameters, updated in place
        settings (TrainingSettings): learning rate, iteration cap and patience
        proximal (Optional[Callable[[Parameters], None]], optional): in-place operator applied after each
        Adam update

    Raises:
        TrainingError: if the loss becomes non-finite

    Returns:
        tuple[Parameters, TrainingHistory]: a copy of the parameters of the best iteration, and the loss trace
    """
    adam = Adam(params, settings.learning_rate)
    stopper = EarlyStopping(settings.patience, settings.min_improvement)
    history = TrainingHistory()
    best = [p.copy() for p in params]

    for iteration in range(settings.max_iterations + 1):
        loss, grads = objective(params)
        if not math.isfinite(loss):
            raise TrainingError("Training loss is not finite", iteration)

        history.losses.append(loss)
        history.stop_iteration = iteration
        if stopper(iteration, loss):
            best = [p.copy() for p in params]
            history.best_iteration = iteration

        if stopper.early_stop or iteration == settings.max_iterations:
            break

        adam.step(grads)
        if proximal:
            proximal(params)

    dbg(
        f"Stopped at iteration {history.stop_iteration}, best loss {history.best_loss:.6g} "
        f"at iteration {history.best_iteration}"
    )
    return best, history
