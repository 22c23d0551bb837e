import logging
import math
import pathlib
import tempfile
import unittest

import numpy
import pytest

import penaltylearn.log
from penaltylearn.data import Label, Sequence, SyntheticConfig, generate_synthetic
from penaltylearn.penaltypath import (
    ErrorFunction,
    ErrorPiece,
    PathPiece,
    count_label_errors,
    error_function,
    error_functions,
    eval_errors_at,
    model_selection_path,
    read_targets,
    target_interval,
    write_targets,
)
from penaltylearn.segment import SegmentCosts, opart, segment_costs

LOGGER = logging.getLogger(__name__)
penaltylearn.log.register_sink(LOGGER.debug)

STEP = Sequence("s1", numpy.arange(1, 7), [1, 1, 1, 5, 5, 5])


def costs_of(values: list[float]) -> SegmentCosts:
    n = len(values)
    return SegmentCosts(numpy.asarray(values, dtype=float), n, n, numpy.zeros((n + 1, n + 1), dtype=numpy.int64))


def pieces_of(errors: list[int], bounds: list[float]) -> ErrorFunction:
    """Error function with the given per-piece error counts (as false negatives) on log(lambda) bounds"""
    lows = [-math.inf] + bounds
    highs = bounds + [math.inf]
    return ErrorFunction("x", tuple(ErrorPiece(lo, hi, 0, e, 1) for lo, hi, e in zip(lows, highs, errors)), 5)


def penalty_inside(piece: PathPiece) -> float:
    if piece.lambda_low == 0:
        return piece.lambda_high / 2 if math.isfinite(piece.lambda_high) else 1.0
    if math.isinf(piece.lambda_high):
        return 2 * piece.lambda_low
    return math.sqrt(piece.lambda_low * piece.lambda_high)


class PenaltyPathTest(unittest.TestCase):
    def test_step_costs(self):
        path = model_selection_path(costs_of([24, 0, 0]))
        assert [(p.k, p.lambda_low, p.lambda_high) for p in path.pieces] == [(2, 0.0, 24.0), (1, 24.0, math.inf)]
        assert path.model_size(1.0) == 2
        assert path.model_size(24.0) == 1
        assert path.model_size(1e9) == 1

    def test_single_model(self):
        path = model_selection_path(costs_of([0]))
        assert [(p.k, p.lambda_low, p.lambda_high) for p in path.pieces] == [(1, 0.0, math.inf)]

    def test_skipped_model(self):
        path = model_selection_path(costs_of([10, 6, 0]))
        assert [(p.k, p.lambda_low, p.lambda_high) for p in path.pieces] == [(3, 0.0, 5.0), (1, 5.0, math.inf)]
        for penalty in numpy.linspace(0.1, 10, 100):
            totals = [c + penalty * k for k, c in enumerate([10, 6, 0])]
            if not math.isclose(penalty, 5.0):
                assert path.model_size(penalty) == int(numpy.argmin(totals)) + 1

    def test_model_size_decreases(self):
        rng = numpy.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(2, 40))
            seq = Sequence("r", numpy.arange(n), rng.normal(size=n) + numpy.repeat(rng.normal(scale=4, size=4), 10)[:n])
            path = model_selection_path(segment_costs(seq, n))
            sizes = [p.k for p in path.pieces]
            assert all(a > b for a, b in zip(sizes, sizes[1:]))
            assert sizes[-1] == 1
            assert path.pieces[0].lambda_low == 0.0

    def test_data_cost_matches_segmentation(self):
        rng = numpy.random.default_rng(8)
        for idx in range(100):
            n = int(rng.integers(2, 50))
            seq = Sequence("r", numpy.arange(n), rng.normal(size=n) + numpy.repeat(rng.normal(scale=4, size=5), 10)[:n])
            costs = segment_costs(seq, n)
            for piece in model_selection_path(costs).pieces:
                assert piece.data_cost == costs.cost(piece.k)
                if piece.lambda_low > 0 and piece.lambda_high < piece.lambda_low * (1 + 1e-6):
                    continue
                penalty = penalty_inside(piece)
                seg = opart(seq, penalty)
                assert seg.size == piece.k, (idx, penalty)
                assert seg.data_cost == pytest.approx(piece.data_cost, rel=1e-9, abs=1e-9)


class LabelErrorTest(unittest.TestCase):
    def test_counts(self):
        assert count_label_errors([3.5], [Label("s1", 2, 5, 1)]) == (0, 0)
        assert count_label_errors([3.5], [Label("s1", 2, 5, 0)]) == (1, 0)
        assert count_label_errors([], [Label("s1", 2, 5, 1)]) == (0, 1)
        assert count_label_errors([2.0, 3.0], [Label("s1", 2, 5, 1)]) == (1, 0)


class ErrorFunctionTest(unittest.TestCase):
    def test_step_example(self):
        err = error_function(STEP, [Label("s1", 2, 5, 1)], 6)
        assert [p.errors for p in err.pieces] == [0, 1]
        assert err.pieces[0].loglam_low == -math.inf
        assert err.pieces[0].loglam_high == pytest.approx(math.log(24), abs=1e-9)
        assert err.pieces[1].loglam_high == math.inf

        target = target_interval(err)
        assert target.lower == -math.inf
        assert target.upper == pytest.approx(math.log(24), abs=1e-9)
        assert target.censoring == "left"

    def test_boundary_belongs_to_right_piece(self):
        err = error_function(STEP, [Label("s1", 2, 5, 1)], 6)
        assert eval_errors_at(err, err.pieces[0].loglam_high) == (0, 1)
        assert eval_errors_at(err, -1e9) == (0, 0)
        assert eval_errors_at(err, 0.0) == (0, 0)

    def test_extra_negative_label(self):
        err = error_function(STEP, [Label("s1", 1, 2, 0), Label("s1", 2, 5, 1)], 6)
        assert [p.errors for p in err.pieces] == [0, 1]
        assert all(p.fp == 0 for p in err.pieces)
        assert err.n_labels == 2

    def test_constant_sequence(self):
        seq = Sequence("c", numpy.arange(1, 9), [3.0] * 8)
        err = error_function(seq, [Label("c", 2, 6, 0)])
        assert err.min_errors == 0
        assert all(p.errors == 0 for p in err.pieces)
        target = target_interval(err)
        assert (target.lower, target.upper) == (-math.inf, math.inf)
        assert target.censoring == "none"

    def test_kmax_warning(self):
        seq = Sequence("w", numpy.arange(1, 9), [0, 0, 10, 10, 0, 0, 10, 10])
        labels = [Label("w", 2, 3, 1), Label("w", 4, 5, 1), Label("w", 6, 7, 1)]
        assert error_function(seq, labels, 2).kmax_warning
        assert not error_function(seq, labels, 8).kmax_warning

    def test_matches_direct_evaluation(self):
        config = SyntheticConfig(n_sequences=50, min_length=10, max_length=60, max_segments=6, label_coverage=0.8)
        sequences, labels = generate_synthetic(config, 9)
        grid = numpy.logspace(-3, 4, 100)
        for sid, seq in sequences.items():
            n = len(seq)
            costs = segment_costs(seq, n)
            path = model_selection_path(costs)
            err = error_function(seq, labels[sid], n)
            for penalty in grid:
                seg = opart(seq, penalty)
                assert path.model_size(penalty) == seg.size, (sid, penalty)
                assert eval_errors_at(err, math.log(penalty)) == count_label_errors(seg.positions(seq), labels[sid])


class TargetIntervalTest(unittest.TestCase):
    def test_widest_run(self):
        err = pieces_of([2, 0, 1, 0, 3], [0.0, 1.0, 2.0, 5.0])
        target = target_interval(err)
        assert (target.lower, target.upper) == (2.0, 5.0)
        assert target.censoring == "interval"
        assert 3.0 in target
        assert 5.0 not in target

    def test_infinite_run_wins(self):
        err = pieces_of([1, 0, 1, 0], [0.0, 1.0, 100.0])
        target = target_interval(err)
        assert (target.lower, target.upper) == (100.0, math.inf)
        assert target.censoring == "right"

    def test_tie_smallest_lower_bound(self):
        err = pieces_of([1, 0, 1, 0, 1], [0.0, 1.0, 2.0, 3.0])
        target = target_interval(err)
        assert (target.lower, target.upper) == (0.0, 1.0)

    def test_merged_run(self):
        err = pieces_of([0, 0, 1], [0.0, 1.0])
        target = target_interval(err)
        assert (target.lower, target.upper) == (-math.inf, 1.0)

    def test_target_is_sound(self):
        config = SyntheticConfig(n_sequences=60, min_length=10, max_length=60, max_segments=6, label_coverage=0.8)
        sequences, labels = generate_synthetic(config, 21)
        rng = numpy.random.default_rng(21)
        for sid in sorted(labels):
            seq = sequences[sid]
            err = error_function(seq, labels[sid], len(seq))
            target = target_interval(err)
            low = target.lower if math.isfinite(target.lower) else min(target.upper, 5.0) - 10.0
            high = target.upper if math.isfinite(target.upper) else low + 10.0
            for loglam in rng.uniform(low, high, size=10):
                if loglam not in target:
                    continue
                assert sum(eval_errors_at(err, loglam)) == err.min_errors
                fp, fn = count_label_errors(opart(seq, math.exp(loglam)).positions(seq), labels[sid])
                assert fp + fn == err.min_errors, (sid, loglam)


class CacheTest(unittest.TestCase):
    def test_error_function_cache(self):
        sequences, labels = generate_synthetic(SyntheticConfig(n_sequences=4, max_length=40), 2)
        with tempfile.TemporaryDirectory() as tmp:
            cache = pathlib.Path(tmp) / "errfun"
            first = error_functions(sequences, labels, 10, cache)
            assert sorted(p.name for p in cache.iterdir()) == [f"{sid}.csv" for sid in sorted(labels)]
            second = error_functions(sequences, labels, 10, cache)
            for sid in first:
                assert second[sid] == first[sid]

    def test_stale_cache_is_recomputed(self):
        seq = Sequence("w", numpy.arange(1, 9), [0, 0, 10, 10, 0, 0, 10, 10])
        labels = [Label("w", 2, 3, 1), Label("w", 4, 5, 1), Label("w", 6, 7, 1)]
        with tempfile.TemporaryDirectory() as tmp:
            cache = pathlib.Path(tmp)
            capped = error_functions({"w": seq}, {"w": labels}, 2, cache)["w"]
            assert capped.kmax_warning
            assert capped.min_errors > 0

            reread = error_functions({"w": seq}, {"w": labels}, 2, cache)["w"]
            assert reread == capped
            assert reread.kmax_warning

            wider = error_functions({"w": seq}, {"w": labels}, 8, cache)["w"]
            assert wider == error_function(seq, labels, 8)
            assert wider.min_errors == 0
            assert not wider.kmax_warning

            fewer = error_functions({"w": seq}, {"w": labels[:1]}, 8, cache)["w"]
            assert fewer.n_labels == 1
            assert fewer == error_function(seq, labels[:1], 8)

            (cache / "w.csv").write_text("min_log_lambda,max_log_lambda\n0,1\n")
            assert error_functions({"w": seq}, {"w": labels}, 8, cache)["w"] == wider

    def test_targets_file(self):
        targets = {"a": target_interval(pieces_of([1, 0], [2.0])), "b": target_interval(pieces_of([0, 1], [-1.5]))}
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "targets.csv"
            write_targets(path, targets)
            assert read_targets(path) == targets
