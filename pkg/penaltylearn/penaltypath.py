from __future__ import annotations

import bisect
import math
import pathlib
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy
import pandas

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.data import Label, LabelSet, Sequence, SequenceSet
from penaltylearn.errors import FormatError
from penaltylearn.log import dbg, warn
from penaltylearn.segment import SegmentCosts, changepoint_positions, segment_costs


@dataclass(frozen=True)
class PathPiece:
    k: int
    lambda_low: float
    lambda_high: float
    data_cost: float


@dataclass(frozen=True)
class PenaltyPath:
    """Optimal model size as a function of the penalty. Piece i covers [lambda_low, lambda_high), the first
    piece starts at 0 (excluded) and the last one ends at +inf; k decreases from left to right."""

    pieces: tuple[PathPiece, ...]

    def piece_at(self, penalty: float) -> PathPiece:
        lows = [p.lambda_low for p in self.pieces]
        return self.pieces[max(bisect.bisect_right(lows, penalty) - 1, 0)]

    def model_size(self, penalty: float) -> int:
        return self.piece_at(penalty).k


@dataclass(frozen=True)
class ErrorPiece:
    loglam_low: float
    loglam_high: float
    fp: int
    fn: int
    k: int

    @property
    def errors(self) -> int:
        return self.fp + self.fn


@dataclass(frozen=True)
class ErrorFunction:
    """Label errors as a piecewise-constant function of log(lambda). A boundary belongs to the piece on its
    right. `k_max` and `labels_key` identify the inputs the function was computed from."""

    sequence_id: str
    pieces: tuple[ErrorPiece, ...]
    n_labels: int
    kmax_warning: bool = False
    k_max: int = 0
    labels_key: str = ""

    @property
    def min_errors(self) -> int:
        return min(p.errors for p in self.pieces)

    def piece_at(self, loglam: float) -> ErrorPiece:
        lows = [p.loglam_low for p in self.pieces]
        return self.pieces[max(bisect.bisect_right(lows, loglam) - 1, 0)]


@dataclass(frozen=True)
class TargetInterval:
    """Interval of log(lambda) minimizing the label errors; either bound may be infinite"""

    lower: float
    upper: float

    @property
    def censoring(self) -> str:
        match (math.isinf(self.lower), math.isinf(self.upper)):
            case (True, True):
                return "none"
            case (True, False):
                return "left"
            case (False, True):
                return "right"
            case _:
                return "interval"

    def __contains__(self, loglam: float) -> bool:
        return self.lower < loglam < self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def model_selection_path(costs: SegmentCosts) -> PenaltyPath:
    """Exact penalty path from the lower convex hull of the points (k - 1, C_k)

    Args:
        costs (SegmentCosts): non-increasing segment neighborhood costs

    Returns:
        PenaltyPath: the pieces, k decreasing as lambda increases; at a crossing penalty the smaller k wins
    """
    values = numpy.asarray(costs.costs, dtype=float)
    k = int(numpy.argmin(values)) + 1
    low = 0.0
    pieces: list[PathPiece] = []

    while k > 1:
        smaller = numpy.arange(1, k)
        crossings = (values[smaller - 1] - values[k - 1]) / (k - smaller)
        crossing = float(crossings.min())
        # collinear hull points: jump straight to the smallest model
        j = int(smaller[numpy.flatnonzero(crossings == crossing)[0]])
        pieces.append(PathPiece(k, low, crossing, float(values[k - 1])))
        low, k = crossing, j

    pieces.append(PathPiece(1, low, math.inf, float(values[0])))
    return PenaltyPath(tuple(pieces))


def count_label_errors(positions: Iterable[float], labels: Iterable[Label]) -> tuple[int, int]:
    """Count false positives (more changes than expected) and false negatives (fewer) over labels

    Args:
        positions (Iterable[float]): changepoint midpoint coordinates
        labels (Iterable[Label]): the labels, closed intervals [start, end]

    Returns:
        tuple[int, int]: (fp, fn)
    """
    points = numpy.sort(numpy.asarray(list(positions), dtype=float))
    fp = fn = 0
    for label in labels:
        inside = int(
            numpy.searchsorted(points, label.end, side="right") - numpy.searchsorted(points, label.start, side="left")
        )
        if inside > label.changes:
            fp += 1
        elif inside < label.changes:
            fn += 1
    return fp, fn


def default_kmax(n: int, k_max: Optional[int] = None) -> int:
    return min(n, k_max if k_max is not None else penaltylearn.const.DEFAULT_KMAX)


def labels_key(labels: Iterable[Label]) -> str:
    """Digest of the labels an error function is computed from"""
    text = ";".join(f"{int(label.start)},{int(label.end)},{int(label.changes)}" for label in labels)
    return format(penaltylearn.utils.stable_hash(text), "016x")


def error_function(seq: Sequence, labels: list[Label], k_max: Optional[int] = None) -> ErrorFunction:
    """Label errors of the optimal segmentation of every penalty path piece, in log(lambda) coordinates

    Args:
        seq (Sequence): the data
        labels (list[Label]): labels of `seq`
        k_max (Optional[int], optional): largest model size; defaults to min(N, 25)

    Returns:
        ErrorFunction: the pieces; `kmax_warning` is set when the minimal error is only reached on the
        largest model and that model is capped by k_max
    """
    k_max = default_kmax(len(seq), k_max)
    costs = segment_costs(seq, k_max)
    path = model_selection_path(costs)

    pieces: list[ErrorPiece] = []
    for piece in path.pieces:
        positions = changepoint_positions(seq, costs.changepoints(piece.k))
        fp, fn = count_label_errors(positions, labels)
        pieces.append(
            ErrorPiece(
                math.log(piece.lambda_low) if piece.lambda_low > 0 else -math.inf,
                math.log(piece.lambda_high),
                fp,
                fn,
                piece.k,
            )
        )

    minimum = min(p.errors for p in pieces)
    capped = pieces[0].k == k_max and k_max < len(seq)
    at_minimum = [p.errors == minimum for p in pieces]
    kmax_warning = capped and at_minimum[0] and not any(at_minimum[1:])
    if kmax_warning:
        warn(f"Sequence '{seq.id}': minimal label error only reached with k_max={k_max} segments")

    dbg(f"Error function of '{seq.id}': {len(pieces)} pieces, minimum {minimum}")
    return ErrorFunction(seq.id, tuple(pieces), len(labels), kmax_warning, k_max, labels_key(labels))


def target_interval(err: ErrorFunction) -> TargetInterval:
    """Widest run of consecutive pieces reaching the minimal error count (an infinite run always wins, ties
    go to the smallest lower bound)"""
    minimum = err.min_errors
    best: Optional[TargetInterval] = None
    run_low: Optional[float] = None

    for idx, piece in enumerate(err.pieces):
        if piece.errors == minimum:
            if run_low is None:
                run_low = piece.loglam_low
            last = idx == len(err.pieces) - 1
            if last or err.pieces[idx + 1].errors != minimum:
                candidate = TargetInterval(run_low, piece.loglam_high)
                if best is None or candidate.width > best.width:
                    best = candidate
                run_low = None

    assert best is not None
    return best


def eval_errors_at(err: ErrorFunction, loglam: float) -> tuple[int, int]:
    piece = err.piece_at(loglam)
    return piece.fp, piece.fn


def write_error_function(path: Optional[pathlib.Path], err: ErrorFunction) -> None:
    rows = [
        (p.loglam_low, p.loglam_high, p.fp, p.fn, p.k, err.n_labels, err.k_max, err.labels_key, int(err.kmax_warning))
        for p in err.pieces
    ]
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.ERRFUN_COLUMNS)))
    return


def read_error_function(path: pathlib.Path, sequence_id: str) -> ErrorFunction:
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.ERRFUN_COLUMNS, dtypes={"labels_key": str})
    if df.empty:
        raise FormatError(f"Empty error function file '{path}'")
    pieces = tuple(
        ErrorPiece(float(row.min_log_lambda), float(row.max_log_lambda), int(row.fp), int(row.fn), int(row.segments))
        for row in df.itertuples(index=False)
    )
    first = df.iloc[0]
    return ErrorFunction(
        sequence_id,
        pieces,
        int(first["labels"]),
        bool(int(first["kmax_warning"])),
        int(first["k_max"]),
        str(first["labels_key"]),
    )


def error_functions(
    sequences: SequenceSet,
    labels: LabelSet,
    k_max: Optional[int] = None,
    cache_dir: Optional[pathlib.Path] = None,
) -> dict[str, ErrorFunction]:
    """Error functions of every labeled sequence, read from / written to `cache_dir` when given. A cached
    function computed with another k_max or other labels is recomputed and overwritten."""
    result: dict[str, ErrorFunction] = {}
    for sequence_id in sorted(labels):
        if not labels[sequence_id]:
            continue
        seq = sequences[sequence_id]
        cached = pathlib.Path(cache_dir) / f"{sequence_id}.csv" if cache_dir else None
        if cached is not None and cached.is_file():
            try:
                err = read_error_function(cached, sequence_id)
            except FormatError as e:
                warn(f"Ignoring unreadable cache file: {e}")
            else:
                if (err.k_max, err.labels_key) == (default_kmax(len(seq), k_max), labels_key(labels[sequence_id])):
                    result[sequence_id] = err
                    continue
                dbg(f"Cached error function of '{sequence_id}' is stale, recomputing")
        err = error_function(seq, labels[sequence_id], k_max)
        if cached is not None:
            write_error_function(cached, err)
        result[sequence_id] = err
    return result


def write_targets(path: Optional[pathlib.Path], targets: dict[str, TargetInterval]) -> None:
    rows = [(sid, t.lower, t.upper) for sid, t in sorted(targets.items())]
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.TARGETS_COLUMNS)))
    return


def read_targets(path: pathlib.Path) -> dict[str, TargetInterval]:
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.TARGETS_COLUMNS, dtypes={"sequenceID": str})
    return {
        str(row.sequenceID): TargetInterval(float(row.min_log_lambda), float(row.max_log_lambda))
        for row in df.itertuples(index=False)
    }


def write_path(path: Optional[pathlib.Path], paths: dict[str, PenaltyPath]) -> None:
    rows = [
        (sid, piece.k, piece.lambda_low, piece.lambda_high, piece.data_cost)
        for sid, penalty_path in sorted(paths.items())
        for piece in penalty_path.pieces
    ]
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.PATH_COLUMNS)))
    return
