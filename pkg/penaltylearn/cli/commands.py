"""Subcommand adapters: parse the files, call the library, write the outputs"""

from __future__ import annotations

import argparse
import json
import math
import pathlib
from typing import TYPE_CHECKING, Optional

import penaltylearn.data
import penaltylearn.features
import penaltylearn.harness
import penaltylearn.penaltypath
import penaltylearn.segment
from penaltylearn.errors import ConfigError, UnknownSequenceError
from penaltylearn.learn import Models
from penaltylearn.learn.persist import load_model, read_predictions, save_model, write_predictions
from penaltylearn.log import info, ok

if TYPE_CHECKING:
    from penaltylearn.core import GlobalContext


def _out(args: argparse.Namespace) -> Optional[pathlib.Path]:
    return pathlib.Path(args.out) if args.out else None


def experiment_config(args: argparse.Namespace, context: GlobalContext) -> penaltylearn.harness.ExperimentConfig:
    """Settings defaults, then the JSON file, then the command-line flags"""
    config = penaltylearn.harness.ExperimentConfig.from_settings(context.settings)
    if getattr(args, "config", None):
        config = penaltylearn.harness.ExperimentConfig.from_json(pathlib.Path(args.config), config)

    models = getattr(args, "models", None)
    return config.updated(
        sequences=getattr(args, "sequences", None),
        labels=getattr(args, "labels", None),
        folds_file=getattr(args, "folds_file", None),
        models=models.split(",") if models else None,
        folds=getattr(args, "folds", None),
        seed=getattr(args, "seed", None),
        kmax=getattr(args, "kmax", None),
        threads=getattr(args, "threads", None),
        selection_metric=getattr(args, "selection_metric", None),
        cache_dir=getattr(args, "cache_dir", None),
        record_timings=getattr(args, "record_timings", None),
    )


def segment(args: argparse.Namespace, context: GlobalContext) -> None:
    sequences = penaltylearn.data.load_sequences(pathlib.Path(args.sequences))
    if args.predictions:
        predictions = read_predictions(pathlib.Path(args.predictions))
        unknown = sorted(set(predictions) - set(sequences))
        if unknown:
            raise UnknownSequenceError(f"Predictions for unknown sequence '{unknown[0]}'")
        penalties = {sid: math.exp(loglam) for sid, loglam in predictions.items()}
    else:
        penalties = {sid: args.penalty for sid in sequences}

    results = {sid: penaltylearn.segment.opart(sequences[sid], penalty) for sid, penalty in sorted(penalties.items())}
    penaltylearn.segment.write_segmentations(_out(args), sequences, results)
    info(f"Segmented {len(results)} sequence(s)")
    return


def path(args: argparse.Namespace, context: GlobalContext) -> None:
    sequences = penaltylearn.data.load_sequences(pathlib.Path(args.sequences))
    kmax = args.kmax if args.kmax is not None else context.kmax
    paths = {}
    for sid, seq in sorted(sequences.items()):
        costs = penaltylearn.segment.segment_costs(seq, penaltylearn.penaltypath.default_kmax(len(seq), kmax))
        paths[sid] = penaltylearn.penaltypath.model_selection_path(costs)
    penaltylearn.penaltypath.write_path(_out(args), paths)
    return


def targets(args: argparse.Namespace, context: GlobalContext) -> None:
    sequences = penaltylearn.data.load_sequences(pathlib.Path(args.sequences))
    labels = penaltylearn.data.load_labels(pathlib.Path(args.labels), sequences)
    kmax = args.kmax if args.kmax is not None else context.kmax
    cache_dir = pathlib.Path(args.cache_dir) if args.cache_dir else None
    errfuns = penaltylearn.penaltypath.error_functions(sequences, labels, kmax, cache_dir)
    intervals = {sid: penaltylearn.penaltypath.target_interval(err) for sid, err in errfuns.items()}
    penaltylearn.penaltypath.write_targets(_out(args), intervals)
    return


def features(args: argparse.Namespace, context: GlobalContext) -> None:
    sequences = penaltylearn.data.load_sequences(pathlib.Path(args.sequences))
    penaltylearn.features.write_features(_out(args), sequences)
    return


def train(args: argparse.Namespace, context: GlobalContext) -> None:
    spec = Models.find(args.model)
    config = experiment_config(args, context)
    config.validate()
    sequences, labels = penaltylearn.harness.load_experiment_data(config)

    ids = penaltylearn.data.labeled_ids(sequences, labels)
    errfuns = penaltylearn.penaltypath.error_functions(
        sequences,
        {sid: labels[sid] for sid in ids},
        config.kmax,
        pathlib.Path(config.cache_dir) if config.cache_dir else None,
    )
    intervals = {sid: penaltylearn.penaltypath.target_interval(err) for sid, err in errfuns.items()}
    model, chosen = penaltylearn.harness.fit_selected(
        spec, sequences, ids, errfuns, intervals, config, penaltylearn.harness.task_seed(config.seed, spec.name)
    )
    save_model(pathlib.Path(args.out), model)
    ok(f"Trained {spec} on {len(ids)} sequences with {json.dumps(chosen, sort_keys=True)}")
    return


def predict(args: argparse.Namespace, context: GlobalContext) -> None:
    model = load_model(pathlib.Path(args.model))
    sequences = penaltylearn.data.load_sequences(pathlib.Path(args.sequences))
    write_predictions(_out(args), model.predict(sequences, sorted(sequences)))
    return


def cv(args: argparse.Namespace, context: GlobalContext) -> None:
    config = experiment_config(args, context)
    results = penaltylearn.harness.run_cv(config)
    out = pathlib.Path(args.out)
    penaltylearn.harness.write_results(out, results, config.record_timings)
    penaltylearn.harness.write_summary(out.with_name("summary.csv"), penaltylearn.harness.report(results))
    ok(f"Results written to '{out}'")
    return


def report(args: argparse.Namespace, context: GlobalContext) -> None:
    results = penaltylearn.harness.read_results(pathlib.Path(args.results))
    if not results:
        raise ConfigError(f"No result rows in '{args.results}'")
    penaltylearn.harness.write_summary(_out(args), penaltylearn.harness.report(results))
    return


def synth(args: argparse.Namespace, context: GlobalContext) -> None:
    values = {}
    if args.config:
        config_path = pathlib.Path(args.config)
        if not config_path.is_file():
            raise ConfigError(f"Configuration file '{config_path}' not found")
        try:
            values = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Cannot parse '{config_path}': {e}") from e
    if args.n_sequences is not None:
        values["n_sequences"] = args.n_sequences

    config = penaltylearn.data.SyntheticConfig.from_dict(values)
    seed = args.seed if args.seed is not None else context.seed
    sequences, labels = penaltylearn.data.generate_synthetic(config, seed)

    out = pathlib.Path(args.out)
    penaltylearn.data.write_sequences(out / "sequences.csv", sequences)
    penaltylearn.data.write_labels(out / "labels.csv", labels)
    ok(f"Synthetic corpus written to '{out}'")
    return
