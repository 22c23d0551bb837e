import numpy

from penaltylearn.penaltypath import TargetInterval


def squared_hinge(yhat: float, target: TargetInterval, margin: float) -> tuple[float, float]:
    """Squared hinge loss of one prediction against an interval target

    Args:
        yhat (float): the predicted log(lambda)
        target (TargetInterval): the target, either bound may be infinite
        margin (float): the hinge margin, >= 0

    Returns:
        tuple[float, float]: the loss and its derivative with respect to `yhat`. The loss is 0 exactly on
        [lower + margin, upper - margin]
    """
    below = max(target.lower - yhat + margin, 0.0)
    above = max(yhat - target.upper + margin, 0.0)
    return below * below + above * above, 2.0 * (above - below)


def squared_hinge_vector(
    yhat: numpy.ndarray, lower: numpy.ndarray, upper: numpy.ndarray, margin: float
) -> tuple[numpy.ndarray, numpy.ndarray]:
    """Element-wise `squared_hinge`; infinite bounds contribute 0"""
    below = numpy.maximum(lower - yhat + margin, 0.0)
    above = numpy.maximum(yhat - upper + margin, 0.0)
    return below * below + above * above, 2.0 * (above - below)


def mean_squared_hinge(yhat: numpy.ndarray, lower: numpy.ndarray, upper: numpy.ndarray, margin: float) -> float:
    if len(yhat) == 0:
        return 0.0
    losses, _ = squared_hinge_vector(yhat, lower, upper, margin)
    return float(losses.mean())
