from __future__ import annotations

import itertools
import math
import pathlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy
import pandas

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.data import Sequence, SequenceSet
from penaltylearn.errors import DomainError
from penaltylearn.log import dbg


@dataclass(frozen=True)
class Segmentation:
    """Optimal piecewise-constant fit of a sequence

    `changepoints` holds 1-based indices i in [1, N-1]: the mean changes between points i and i+1.
    """

    changepoints: tuple[int, ...]
    means: tuple[float, ...]
    data_cost: float
    penalized_cost: float
    penalty: float

    @property
    def size(self) -> int:
        """Number of segments"""
        return len(self.changepoints) + 1

    def fitted_values(self, n: int) -> numpy.ndarray:
        """The mean vector m, of length n"""
        lengths = numpy.diff((0,) + self.changepoints + (n,))
        return numpy.repeat(numpy.asarray(self.means), lengths)

    def positions(self, seq: Sequence) -> list[float]:
        return changepoint_positions(seq, self.changepoints)


class CumulativeSums:
    """O(1) squared-error cost of any segment through cumulative sums of d and d^2"""

    def __init__(self, values: numpy.ndarray):
        self.n = len(values)
        self.s1 = numpy.concatenate([[0.0], numpy.cumsum(values)])
        self.s2 = numpy.concatenate([[0.0], numpy.cumsum(numpy.square(values))])
        return

    def cost(self, start: int, end: int) -> float:
        """Sum of squared errors of points [start, end) around their mean"""
        size = end - start
        total = self.s1[end] - self.s1[start]
        return max(self.s2[end] - self.s2[start] - total * total / size, 0.0)

    def costs_to(self, starts: numpy.ndarray, end: int) -> numpy.ndarray:
        """Vectorized `cost(start, end)` for every start in `starts`"""
        sizes = end - starts
        totals = self.s1[end] - self.s1[starts]
        return numpy.maximum(self.s2[end] - self.s2[starts] - totals * totals / sizes, 0.0)

    def mean(self, start: int, end: int) -> float:
        return (self.s1[end] - self.s1[start]) / (end - start)


def changepoint_positions(seq: Sequence, changepoints: tuple[int, ...] | list[int]) -> list[float]:
    """Midpoint coordinates (positions[i] + positions[i+1]) / 2 of 1-based changepoint indices"""
    return [(int(seq.positions[i - 1]) + int(seq.positions[i])) / 2 for i in changepoints]


def check_penalty(penalty: float) -> float:
    try:
        value = float(penalty)
    except (TypeError, ValueError):
        value = math.nan
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"Penalty must be a finite value > 0 (got {penalty})")
    return value


def segmentation_from_changepoints(seq: Sequence, changepoints: tuple[int, ...], penalty: float) -> Segmentation:
    """Recompute means and costs of a given changepoint set"""
    sums = CumulativeSums(seq.values)
    bounds = (0,) + tuple(changepoints) + (len(seq),)
    means = tuple(float(sums.mean(s, e)) for s, e in zip(bounds, bounds[1:]))
    data_cost = float(sum(sums.cost(s, e) for s, e in zip(bounds, bounds[1:])))
    return Segmentation(
        tuple(changepoints), means, data_cost, data_cost + penalty * len(changepoints), float(penalty)
    )


def _backtrack(prev: numpy.ndarray, end: int) -> list[int]:
    """Changepoints of the optimal prefix ending at `end`, following back-pointers down to 0"""
    path: list[int] = []
    while end > 0:
        end = int(prev[end])
        if end > 0:
            path.append(end)
    path.reverse()
    return path


def _pick(totals: numpy.ndarray, counts: Optional[numpy.ndarray], first: Callable[[numpy.ndarray], int]) -> int:
    """Index of the winner among `totals`: minimal cost, then fewest changepoints, then the lexicographically
    smallest changepoint list as decided by `first` over the remaining candidates. Costs within a relative
    tolerance of the minimum are ties."""
    best = totals.min()
    tolerance = penaltylearn.const.TIE_RELATIVE_TOLERANCE * abs(best)
    candidates = numpy.flatnonzero(totals <= best + tolerance)
    if len(candidates) > 1 and counts is not None:
        candidates = candidates[counts[candidates] == counts[candidates].min()]
    if len(candidates) == 1:
        return int(candidates[0])
    return first(candidates)


def _precedes(prev: numpy.ndarray, a: int, b: int) -> bool:
    """Whether the changepoint list ending at `a` is lexicographically smaller than the one ending at `b`.
    Both lists have the same length; the back-pointer chains are walked until they merge."""
    smaller = a < b
    while a != b:
        smaller = a < b
        a, b = int(prev[a]), int(prev[b])
    return smaller


def _first_by_backtracking(prev: numpy.ndarray, candidates: numpy.ndarray) -> int:
    winner = int(candidates[0])
    for c in candidates[1:]:
        if _precedes(prev, int(c), winner):
            winner = int(c)
    return winner


def _first_by_rank(starts: numpy.ndarray, ranks: numpy.ndarray, candidates: numpy.ndarray) -> int:
    """Candidate whose changepoint list, the list of its start then the start itself, is the smallest;
    `ranks` orders the lists of the starts"""
    chosen = starts[candidates]
    return int(candidates[numpy.lexsort((chosen, ranks[chosen]))[0]])


def opart(seq: Sequence, penalty: float) -> Segmentation:
    """Optimal partitioning: minimize the squared error plus `penalty` per changepoint

    Args:
        seq (Sequence): the data
        penalty (float): lambda > 0

    Raises:
        DomainError: if the penalty is not finite and positive

    Returns:
        Segmentation: the global minimizer; ties go to fewer changepoints, then to the lexicographically
        smallest changepoint list
    """
    penalty = check_penalty(penalty)
    n = len(seq)
    sums = CumulativeSums(seq.values)

    best = numpy.zeros(n + 1)
    counts = numpy.full(n + 1, -1, dtype=numpy.int64)
    prev = numpy.zeros(n + 1, dtype=numpy.int64)

    for end in range(1, n + 1):
        starts = numpy.arange(end)
        totals = best[:end] + sums.costs_to(starts, end)
        totals[1:] += penalty

        winner = _pick(totals, counts[:end] + 1, lambda candidates: _first_by_backtracking(prev, candidates))
        best[end] = totals[winner]
        counts[end] = counts[winner] + 1
        prev[end] = winner

    changepoints = tuple(_backtrack(prev, n))
    return segmentation_from_changepoints(seq, changepoints, penalty)


@dataclass(frozen=True)
class SegmentCosts:
    """Segment neighborhood costs: costs[k-1] is the minimal data cost over segmentations with exactly k
    segments, for k = 1..k_max"""

    costs: numpy.ndarray
    k_max: int
    n: int
    prev: numpy.ndarray = field(repr=False, compare=False)

    def cost(self, k: int) -> float:
        return float(self.costs[k - 1])

    def changepoints(self, k: int) -> tuple[int, ...]:
        """Changepoints of the optimal segmentation with exactly `k` segments"""
        if not 1 <= k <= self.k_max:
            raise DomainError(f"Model size {k} outside [1, {self.k_max}]")
        path: list[int] = []
        end = self.n
        for segments in range(k, 1, -1):
            end = int(self.prev[segments, end])
            path.append(end)
        path.reverse()
        return tuple(path)


def segment_costs(seq: Sequence, k_max: int) -> SegmentCosts:
    """Segment neighborhood dynamic program, O(k_max N^2)

    Args:
        seq (Sequence): the data
        k_max (int): largest number of segments, 1 <= k_max <= N

    Raises:
        DomainError: if k_max is out of range

    Returns:
        SegmentCosts: C_1..C_kmax and the back-pointers to recover each optimal segmentation
    """
    n = len(seq)
    if not (isinstance(k_max, int) and 1 <= k_max <= n):
        raise DomainError(f"k_max must be in [1, {n}] (got {k_max})")

    sums = CumulativeSums(seq.values)
    prev = numpy.zeros((k_max + 1, n + 1), dtype=numpy.int64)

    # row k holds the best cost of the first t points split into k segments
    current = numpy.full(n + 1, numpy.inf)
    current[1:] = sums.costs_to(numpy.zeros(n, dtype=numpy.int64), numpy.arange(1, n + 1))
    costs = [float(current[n])]

    # lexicographic rank of the changepoint lists of the previous row
    ranks = numpy.zeros(n + 1, dtype=numpy.int64)

    for k in range(2, k_max + 1):
        following = numpy.full(n + 1, numpy.inf)
        # the last row only needs the full sequence
        ends = range(k, n + 1) if k < k_max else (n,)
        for end in ends:
            starts = numpy.arange(k - 1, end)
            totals = current[k - 1 : end] + sums.costs_to(starts, end)
            winner = _pick(totals, None, lambda candidates: _first_by_rank(starts, ranks, candidates))
            following[end] = totals[winner]
            prev[k, end] = starts[winner]
        current = following
        costs.append(float(current[n]))

        if k < k_max:
            row = numpy.arange(k, n + 1)
            last = prev[k, row]
            following_ranks = numpy.zeros(n + 1, dtype=numpy.int64)
            following_ranks[row] = numpy.unique(ranks[last] * (n + 1) + last, return_inverse=True)[1]
            ranks = following_ranks

    # rounding must not break monotonicity
    values = numpy.minimum.accumulate(numpy.asarray(costs))
    dbg(f"Segment costs of '{seq.id}' up to k={k_max}: {values.tolist()}")
    return SegmentCosts(values, k_max, n, prev)


def brute_force_opart(seq: Sequence, penalty: float) -> Segmentation:
    """Exhaustive search over the 2^(N-1) changepoint subsets; a test oracle for `opart`

    Raises:
        DomainError: if N > 16 or the penalty is invalid
    """
    penalty = check_penalty(penalty)
    n = len(seq)
    if n > penaltylearn.const.BRUTE_FORCE_MAX_LENGTH:
        raise DomainError(f"Brute force refuses sequences longer than {penaltylearn.const.BRUTE_FORCE_MAX_LENGTH}")

    sums = CumulativeSums(seq.values)
    subsets: list[tuple[int, ...]] = []
    totals: list[float] = []
    for mask in itertools.product((False, True), repeat=n - 1):
        changepoints = tuple(i + 1 for i, on in enumerate(mask) if on)
        bounds = (0,) + changepoints + (n,)
        data_cost = sum(sums.cost(s, e) for s, e in zip(bounds, bounds[1:]))
        subsets.append(changepoints)
        totals.append(data_cost + penalty * len(changepoints))

    arr = numpy.asarray(totals)
    counts = numpy.asarray([len(c) for c in subsets])
    winner = _pick(arr, counts, lambda candidates: int(min(candidates, key=lambda i: subsets[i])))
    return segmentation_from_changepoints(seq, subsets[winner], penalty)


def write_segmentations(path: Optional[pathlib.Path], sequences: SequenceSet, results: dict[str, Segmentation]) -> None:
    """One row per changepoint: index and midpoint coordinate"""
    rows = [
        (sid, index, position)
        for sid, seg in sorted(results.items())
        for index, position in zip(seg.changepoints, seg.positions(sequences[sid]))
    ]
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.SEGMENTS_COLUMNS)))
    return
