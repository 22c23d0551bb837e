import json
import logging
import math
import os
import pathlib
import tempfile
import unittest
from unittest import mock

import numpy
import pytest

import penaltylearn.log
from penaltylearn.data import SyntheticConfig, assign_folds, generate_synthetic, labeled_ids
from penaltylearn.errors import ConfigError, MetricError, TrainingError
from penaltylearn.harness import (
    CVResult,
    ExperimentConfig,
    accuracy,
    inner_split_seed,
    read_results,
    report,
    results_frame,
    run_cv,
    select_config,
    select_mlp_config,
    selection_grid,
    task_seed,
    write_results,
)
from penaltylearn.learn import Models
from penaltylearn.learn.mlp import MLPModel, init_mlp
from penaltylearn.learn.optim import TrainingHistory, minimize
from penaltylearn.penaltypath import ErrorFunction, ErrorPiece, count_label_errors, error_functions, target_interval
from penaltylearn.segment import opart

LOGGER = logging.getLogger(__name__)
penaltylearn.log.register_sink(LOGGER.debug)

SMALL = dict(
    synthetic={"n_sequences": 24, "max_length": 80},
    models=["BIC.1", "linear.2", "mmit.1", "mlp.1"],
    folds=3,
    kmax=10,
    learning_rate=0.01,
    max_iterations=200,
    mlp_layers=[1],
    mlp_widths=[2, 4],
    mmit_max_depth=[1, 2],
    mmit_min_samples_split=[2],
    mmit_margin=[0.0, 1.0],
    threads=2,
)


def flat_errfun(sequence_id: str, fp: int, fn: int, labels: int) -> ErrorFunction:
    return ErrorFunction(sequence_id, (ErrorPiece(-math.inf, math.inf, fp, fn, 1),), labels)


def constant_mlp(data, layers, width, settings, seed) -> MLPModel:
    model = init_mlp(data.n_features, layers, width, seed)
    return MLPModel(tuple(numpy.zeros_like(w) for w in model.weights), model.biases, seed)


def outcome(result: CVResult) -> tuple:
    return result.model, result.fold, result.accuracy, result.fp, result.fn, result.labels, result.chosen_config


def assert_early_stopping(history: TrainingHistory, patience: int, min_improvement: float, max_iterations: int):
    assert len(history.losses) == history.stop_iteration + 1
    assert history.stop_iteration <= max_iterations
    best, best_iteration, waited = math.inf, 0, 0
    for iteration, loss in enumerate(history.losses):
        if loss < best and best - loss >= min_improvement:
            best, best_iteration, waited = loss, iteration, 0
        else:
            waited += 1
        if iteration < history.stop_iteration:
            assert waited < patience
    assert history.best_iteration == best_iteration
    assert waited >= patience or history.stop_iteration == max_iterations


class AccuracyTest(unittest.TestCase):
    def test_percent(self):
        errfuns = {"a": flat_errfun("a", 4, 5, 100)}
        score = accuracy({"a": 0.0}, errfuns)
        assert score.percent == 91.0
        assert (score.fp, score.fn, score.labels) == (4, 5, 100)

        errfuns = {"a": flat_errfun("a", 0, 0, 3), "b": flat_errfun("b", 0, 0, 2)}
        assert accuracy({"a": 1.0, "b": -1.0}, errfuns).percent == 100.0

    def test_undefined(self):
        with pytest.raises(MetricError):
            accuracy({"x": 0.0}, {"a": flat_errfun("a", 0, 0, 1)})
        with pytest.raises(MetricError):
            accuracy({"a": 0.0}, {"a": flat_errfun("a", 0, 0, 0)})

    def test_matches_segmentation(self):
        sequences, labels = generate_synthetic(SyntheticConfig(n_sequences=25, max_length=60), 12)
        errfuns = error_functions(sequences, labels, 10**6)
        rng = numpy.random.default_rng(12)
        for sid in sorted(errfuns):
            for loglam in rng.uniform(-2, 6, size=5):
                score = accuracy({sid: float(loglam)}, errfuns)
                seg = opart(sequences[sid], math.exp(loglam))
                fp, fn = count_label_errors(seg.positions(sequences[sid]), labels[sid])
                assert (score.fp, score.fn) == (fp, fn), (sid, loglam)


class SelectionTest(unittest.TestCase):
    def setUp(self):
        self.sequences, labels = generate_synthetic(SyntheticConfig(n_sequences=12, max_length=60), 4)
        self.ids = labeled_ids(self.sequences, labels)
        self.errfuns = error_functions(self.sequences, labels, 10)
        self.targets = {sid: target_interval(err) for sid, err in self.errfuns.items()}
        self.config = ExperimentConfig(synthetic={})

    def test_grids(self):
        assert len(selection_grid(Models.find("mlp.4"), self.config)) == 36
        assert selection_grid(Models.find("mlp.4"), self.config)[:2] == [
            {"layers": 1, "width": 2},
            {"layers": 1, "width": 4},
        ]
        mmit_grid = selection_grid(Models.find("mmit.2"), self.config)
        assert len(mmit_grid) == 36
        assert mmit_grid[0] == {"max_depth": 1, "min_samples_split": 2, "margin": 0.0}
        assert selection_grid(Models.find("linear.full"), self.config)[0] == {"l1": 10.0}
        assert selection_grid(Models.find("linear.2"), self.config) == [{"l1": 0.0}]
        assert selection_grid(Models.find("BIC.1"), self.config) == [{}]

    def test_inner_trainings(self):
        with mock.patch("penaltylearn.learn.mlp.train_mlp", side_effect=constant_mlp) as train:
            select_mlp_config(self.sequences, self.ids, self.errfuns, self.targets, self.config, 3)
        assert train.call_count == 72

    def test_tie_goes_to_simplest(self):
        with mock.patch("penaltylearn.learn.mlp.train_mlp", side_effect=constant_mlp):
            chosen = select_mlp_config(self.sequences, self.ids, self.errfuns, self.targets, self.config, 3)
        assert chosen == {"layers": 1, "width": 2}

    def test_too_few_sequences(self):
        with mock.patch("penaltylearn.learn.mlp.train_mlp", side_effect=constant_mlp) as train:
            chosen = select_config(
                Models.find("mlp.2"), self.sequences, self.ids[:3], self.errfuns, self.targets, self.config, 3
            )
        assert chosen == {"layers": 1, "width": 2}
        assert train.call_count == 0

    def test_task_seed(self):
        assert task_seed(1, "mlp.4", 2) == task_seed(1, "mlp.4", 2)
        assert task_seed(1, "mlp.4", 2) != task_seed(1, "mlp.4", 3)
        assert task_seed(1, "mlp.4", 2) != task_seed(2, "mlp.4", 2)

    def test_inner_split_shared_by_models(self):
        config = ExperimentConfig(**(SMALL | {"models": ["mmit.1", "mlp.1"]}))
        with mock.patch("penaltylearn.harness.assign_folds", side_effect=assign_folds) as split:
            run_cv(config)
        inner = [c.args for c in split.call_args_list if c.args[1] == 2]
        assert len(inner) == 6
        seeds: dict[tuple[str, ...], set[int]] = {}
        for ids, _, seed in inner:
            seeds.setdefault(tuple(ids), set()).add(seed)
        assert len(seeds) == 3
        assert all(len(s) == 1 for s in seeds.values())
        assert set().union(*seeds.values()) == {inner_split_seed(config.seed, fold) for fold in (1, 2, 3)}


class CrossValidationTest(unittest.TestCase):
    def test_rows(self):
        results = run_cv(ExperimentConfig(**SMALL))
        assert [(r.model, r.fold) for r in results] == [
            (model, fold) for model in SMALL["models"] for fold in (1, 2, 3)
        ]
        for r in results:
            assert not r.failed, r.error
            assert 0 <= r.accuracy <= 100
            assert r.fp + r.fn <= r.labels
        assert "iterations" in results[-1].chosen_config
        assert results[3].chosen_config == {"l1": 0.0, "iterations": results[3].chosen_config["iterations"]}

    def test_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            folder = pathlib.Path(tmp)
            write_results(folder / "a.csv", run_cv(ExperimentConfig(**SMALL)))
            write_results(folder / "b.csv", run_cv(ExperimentConfig(**(SMALL | {"threads": 1}))))
            assert (folder / "a.csv").read_bytes() == (folder / "b.csv").read_bytes()

    def test_baseline_independent_of_other_models(self):
        alone = run_cv(ExperimentConfig(**(SMALL | {"models": ["BIC.1"]})))
        together = run_cv(ExperimentConfig(**(SMALL | {"models": ["mmit.1", "BIC.1"]})))
        assert [outcome(r) for r in alone] == [outcome(r) for r in together if r.model == "BIC.1"]

    def test_failed_fold(self):
        config = ExperimentConfig(**(SMALL | {"models": ["linear.1"]}))
        with mock.patch("penaltylearn.learn.linear.train_linear", side_effect=TrainingError("diverged", 7)):
            results = run_cv(config)
        assert all(r.failed for r in results)
        assert "iteration 7" in results[0].error
        summary = report(results)
        assert summary["model"].tolist() == ["linear.1"]
        assert math.isnan(summary["median"][0])
        assert json.loads(results_frame(results)["chosen_config"][0])["error"] == results[0].error

    def test_fold_file(self):
        sequences, labels = generate_synthetic(SyntheticConfig(n_sequences=6, max_length=40), 2)
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "folds.csv"
            rows = "".join(f"{sid},{i % 2 + 1}\n" for i, sid in enumerate(sorted(sequences)))
            path.write_text("sequenceID,fold\n" + rows)
            config = ExperimentConfig(synthetic={}, models=["BIC.1"], folds_file=str(path))
            results = run_cv(config, sequences, labels)
        assert [r.fold for r in results] == [1, 2]

    def test_early_stopping_contract(self):
        config = ExperimentConfig(**(SMALL | {"models": ["linear.2", "mlp.1"], "patience": 5, "learning_rate": 0.05}))
        histories: list[TrainingHistory] = []

        def recording(*args, **kwargs):
            best, history = minimize(*args, **kwargs)
            histories.append(history)
            return best, history

        with mock.patch("penaltylearn.learn.linear.minimize", side_effect=recording), mock.patch(
            "penaltylearn.learn.mlp.minimize", side_effect=recording
        ):
            results = run_cv(config)
        assert not any(r.failed for r in results)
        # linear: one fit per fold; network: one refit and 2 inner folds x 2 widths per fold
        assert len(histories) == 3 + 3 * (1 + 2 * 2)
        for history in histories:
            assert_early_stopping(history, config.patience, config.min_improvement, config.max_iterations)


class ReportTest(unittest.TestCase):
    def test_quantiles(self):
        results = [CVResult("m", i + 1, acc, 0, 0, 10) for i, acc in enumerate([90, 92, 94, 96, 98, 100])]
        results.append(CVResult("m", 7, error="boom"))
        summary = report(results)
        assert summary.iloc[0].tolist() == ["m", 95.0, 92.5, 97.5]

    def test_results_file(self):
        results = [
            CVResult("BIC.1", 1, 75.0, 1, 0, 4, {}, 1.5),
            CVResult("mlp.4", 1, 50.0, 1, 1, 4, {"layers": 1, "width": 2, "iterations": 40}, 2.0),
            CVResult("mlp.4", 2, error="Training loss is not finite (iteration 3)"),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "results.csv"
            write_results(path, results)
            lines = path.read_text().splitlines()
            loaded = read_results(path)
        assert lines[0] == "model,fold,accuracy,fp,fn,labels,chosen_config,seconds"
        assert lines[1] == "BIC.1,1,75,1,0,4,{},"
        assert [outcome(r) for r in loaded] == [outcome(r) for r in results]
        assert loaded[2].error == results[2].error


class ExperimentConfigTest(unittest.TestCase):
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"foldz": 3})

    def test_validate(self):
        ExperimentConfig(synthetic={}).validate()
        for bad in ({"folds": 1}, {"models": ["svm.1"]}, {"selection_metric": "auc"}, {"mlp_widths": [3]}):
            with pytest.raises(ConfigError):
                ExperimentConfig(**({"synthetic": {}} | bad)).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig().validate()

    def test_json_layering(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = pathlib.Path(tmp) / "experiment.json"
            path.write_text(json.dumps({"sequences": "data/seq.csv", "labels": "/abs/labels.csv", "folds": 4}))
            base = ExperimentConfig(seed=9, folds=6)
            config = ExperimentConfig.from_json(path, base).updated(folds=None, seed=3)
            assert config.sequences == str(pathlib.Path(tmp) / "data" / "seq.csv")
            assert config.labels == "/abs/labels.csv"
            assert config.folds == 4
            assert config.seed == 3

            path.write_text("[1, 2]")
            with pytest.raises(ConfigError):
                ExperimentConfig.from_json(path)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(pathlib.Path(tmp) / "missing.json")


class ScaledCorpusTest(unittest.TestCase):
    def test_learned_penalty_beats_bic(self):
        config = ExperimentConfig(
            synthetic={
                "n_sequences": 90,
                "max_length": 120,
                "min_scale": 0.1,
                "max_scale": 10.0,
                "label_coverage": 0.8,
            },
            models=["BIC.1", "linear.2", "mlp.2"],
            learning_rate=0.01,
            max_iterations=3000,
            mlp_layers=[1],
            mlp_widths=[2, 4],
        )
        results = run_cv(config)
        assert len(results) == 18
        assert not any(r.failed for r in results)
        medians = report(results).set_index("model")["median"]
        assert medians["linear.2"] > medians["BIC.1"]


@pytest.mark.skipif(os.getenv("PENALTYLEARN_BENCHMARK") != "1", reason="set PENALTYLEARN_BENCHMARK=1 to run")
class BenchmarkTest(unittest.TestCase):
    def test_synthetic_benchmark(self):
        config = ExperimentConfig(
            synthetic={"n_sequences": 300, "min_scale": 0.1, "max_scale": 10.0, "label_coverage": 0.8},
            seed=1,
        )
        results = run_cv(config)
        assert len(results) == 78
        medians = report(results).set_index("model")["median"]
        assert medians["linear.2"] >= 90
        assert medians["mlp.4"] >= 90
        assert medians["BIC.1"] < medians["mlp.4"]
