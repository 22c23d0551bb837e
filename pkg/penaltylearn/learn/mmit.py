from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy

from penaltylearn.learn.dataset import IntervalDataset
from penaltylearn.learn.loss import squared_hinge_vector
from penaltylearn.log import dbg


def _hinge_total(value: float, lower: numpy.ndarray, upper: numpy.ndarray, margin: float) -> float:
    losses, _ = squared_hinge_vector(numpy.full(len(lower), value), lower, upper, margin)
    return float(losses.sum())


def mmit_leaf_value(lower: numpy.ndarray, upper: numpy.ndarray, margin: float) -> tuple[float, float]:
    """Constant prediction minimizing the total squared hinge loss of a set of interval targets

    The objective is a convex piecewise quadratic whose breakpoints are the finite values lower + margin and
    upper - margin. When the minimum is 0 the flat region [max(lower) + margin, min(upper) - margin] is
    returned by its midpoint (its finite end if half-infinite, 0 if unbounded); otherwise the minimizer is
    unique and lies on the quadratic piece containing its own stationary point.

    Args:
        lower (numpy.ndarray): lower bounds, may be -inf
        upper (numpy.ndarray): upper bounds, may be +inf
        margin (float): the hinge margin

    Returns:
        tuple[float, float]: the minimizer and the minimal total loss
    """
    lower = numpy.asarray(lower, dtype=float)
    upper = numpy.asarray(upper, dtype=float)
    a = numpy.sort(lower[numpy.isfinite(lower)] + margin)
    b = numpy.sort(upper[numpy.isfinite(upper)] - margin)
    a_max = float(a[-1]) if len(a) else -math.inf
    b_min = float(b[0]) if len(b) else math.inf

    if a_max <= b_min:
        match (math.isinf(a_max), math.isinf(b_min)):
            case (True, True):
                value = 0.0
            case (True, False):
                value = b_min
            case (False, True):
                value = a_max
            case _:
                value = (a_max + b_min) / 2
        return value, 0.0

    # the minimizer lies in (b_min, a_max), where at least one term of each side is active
    points = numpy.unique(numpy.concatenate([a, b]))
    points = points[(points >= b_min) & (points <= a_max)]
    lows, highs = points[:-1], points[1:]
    mids = (lows + highs) / 2

    a_sums = numpy.concatenate([[0.0], numpy.cumsum(a)])
    b_sums = numpy.concatenate([[0.0], numpy.cumsum(b)])
    a_cut = numpy.searchsorted(a, mids, side="right")
    b_cut = numpy.searchsorted(b, mids, side="left")
    n_active = (len(a) - a_cut) + b_cut
    stationary = ((a_sums[-1] - a_sums[a_cut]) + b_sums[b_cut]) / n_active

    inside = numpy.flatnonzero((stationary >= lows) & (stationary <= highs))
    if len(inside):
        value = float(stationary[inside[0]])
    else:
        candidates = numpy.clip(stationary, lows, highs)
        totals = [_hinge_total(float(c), lower, upper, margin) for c in candidates]
        value = float(candidates[int(numpy.argmin(totals))])
    return value, _hinge_total(value, lower, upper, margin)


@dataclass(frozen=True)
class TreeNode:
    """A leaf when `feature` is None; rows with x[feature] <= threshold go left"""

    value: float
    loss: float
    size: int
    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional[TreeNode] = None
    right: Optional[TreeNode] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        node: dict = {"value": self.value, "loss": self.loss, "size": self.size}
        if not self.is_leaf:
            assert self.left and self.right
            node |= {
                "feature": self.feature,
                "threshold": self.threshold,
                "left": self.left.to_dict(),
                "right": self.right.to_dict(),
            }
        return node

    @classmethod
    def from_dict(cls, values: dict) -> TreeNode:
        if "feature" not in values:
            return cls(float(values["value"]), float(values["loss"]), int(values["size"]))
        return cls(
            float(values["value"]),
            float(values["loss"]),
            int(values["size"]),
            int(values["feature"]),
            float(values["threshold"]),
            cls.from_dict(values["left"]),
            cls.from_dict(values["right"]),
        )


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    max_depth: int
    min_samples_split: int
    margin: float

    @property
    def depth(self) -> int:
        def walk(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            assert node.left and node.right
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    @property
    def leaves(self) -> list[TreeNode]:
        found: list[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                found.append(node)
            else:
                assert node.left and node.right
                stack += [node.right, node.left]
        return found

    @property
    def loss(self) -> float:
        return sum(leaf.loss for leaf in self.leaves)

    def truncated(self, max_depth: int) -> TreeModel:
        """The tree grown with a smaller `max_depth`: greedy splits do not depend on the depth limit"""

        def cut(node: TreeNode, depth: int) -> TreeNode:
            if node.is_leaf:
                return node
            if depth >= max_depth:
                return TreeNode(node.value, node.loss, node.size)
            assert node.left and node.right
            return replace(node, left=cut(node.left, depth + 1), right=cut(node.right, depth + 1))

        return TreeModel(cut(self.root, 0), max_depth, self.min_samples_split, self.margin)

    def to_dict(self) -> dict:
        return {"tree": self.root.to_dict()}

    @classmethod
    def from_dict(cls, values: dict, hyperparameters: dict) -> TreeModel:
        return cls(
            TreeNode.from_dict(values["tree"]),
            int(hyperparameters["max_depth"]),
            int(hyperparameters["min_samples_split"]),
            float(hyperparameters["margin"]),
        )


def mmit_predict(model: TreeModel, x: numpy.ndarray) -> numpy.ndarray:
    x = numpy.asarray(x, dtype=float)
    result = numpy.empty(x.shape[0])
    for i, row in enumerate(x):
        node = model.root
        while not node.is_leaf:
            assert node.left and node.right and node.feature is not None
            node = node.left if row[node.feature] <= node.threshold else node.right
        result[i] = node.value
    return result


class TreeBuilder:
    """Greedy top-down growth: every feature and every midpoint between consecutive distinct values is tried,
    and the split minimizing the summed leaf losses is kept if it strictly lowers the node loss. Ties go to
    the lowest feature index, then the lowest threshold."""

    def __init__(self, max_depth: int, min_samples_split: int, margin: float):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.margin = margin
        return

    def build(self, data: IntervalDataset) -> TreeModel:
        root = self.__grow(data, numpy.arange(len(data)), 0)
        model = TreeModel(root, self.max_depth, self.min_samples_split, self.margin)
        dbg(f"Grew a tree of depth {model.depth} with {len(model.leaves)} leaves, loss {model.loss:.6g}")
        return model

    def __grow(self, data: IntervalDataset, rows: numpy.ndarray, depth: int) -> TreeNode:
        value, loss = mmit_leaf_value(data.lower[rows], data.upper[rows], self.margin)
        node = TreeNode(value, loss, len(rows))
        if depth >= self.max_depth or len(rows) < self.min_samples_split or loss == 0.0:
            return node

        split = self.__best_split(data, rows)
        if split is None:
            return node

        feature, threshold, split_loss = split
        if not split_loss < loss - 1e-12 * max(loss, 1.0):
            return node

        goes_left = data.x[rows, feature] <= threshold
        return TreeNode(
            value,
            loss,
            len(rows),
            feature,
            threshold,
            self.__grow(data, rows[goes_left], depth + 1),
            self.__grow(data, rows[~goes_left], depth + 1),
        )

    def __best_split(self, data: IntervalDataset, rows: numpy.ndarray) -> Optional[tuple[int, float, float]]:
        best: Optional[tuple[int, float, float]] = None
        for feature in range(data.n_features):
            column = data.x[rows, feature]
            order = numpy.argsort(column, kind="stable")
            ordered = column[order]
            cuts = numpy.flatnonzero(numpy.diff(ordered) > 0) + 1
            for cut in cuts:
                left, right = rows[order[:cut]], rows[order[cut:]]
                _, left_loss = mmit_leaf_value(data.lower[left], data.upper[left], self.margin)
                _, right_loss = mmit_leaf_value(data.lower[right], data.upper[right], self.margin)
                total = left_loss + right_loss
                if best is None or total < best[2]:
                    best = (feature, float((ordered[cut - 1] + ordered[cut]) / 2), total)
        return best


def train_mmit(data: IntervalDataset, max_depth: int, min_samples_split: int, margin: float) -> TreeModel:
    return TreeBuilder(max_depth, min_samples_split, margin).build(data)
