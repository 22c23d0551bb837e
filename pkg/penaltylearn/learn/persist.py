import json
import pathlib
from typing import Optional

import pandas

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.errors import FormatError
from penaltylearn.features import FeaturePipeline, Standardizer
from penaltylearn.learn import Models, TrainedModel
from penaltylearn.learn.linear import LinearModel
from penaltylearn.learn.mlp import MLPModel
from penaltylearn.learn.mmit import TreeModel
from penaltylearn.log import dbg

DOCUMENT_KEYS = ("model_type", "feature_names", "standardizer", "parameters", "hyperparameters", "seed", "margin")


def model_document(model: TrainedModel) -> dict:
    """Self-describing JSON-compatible representation of a trained model"""
    return {
        "model_type": model.spec.name,
        "feature_names": list(model.pipeline.names) if model.pipeline else [],
        "standardizer": model.pipeline.standardizer.to_dict() if model.pipeline else None,
        "parameters": model.estimator.to_dict() if model.estimator else {},
        "hyperparameters": model.hyperparameters,
        "seed": model.seed,
        "margin": model.margin,
        "version": penaltylearn.const.VERSION,
    }


def model_from_document(document: dict) -> TrainedModel:
    """
    Raises:
        FormatError: if a key is missing or the parameters do not match the model type
    """
    missing = [key for key in DOCUMENT_KEYS if key not in document]
    if missing:
        raise FormatError(f"Model document lacks {', '.join(missing)}")

    spec = Models.find(document["model_type"])
    hyperparameters = dict(document["hyperparameters"])
    parameters = document["parameters"]
    pipeline = None
    if document["standardizer"] is not None:
        pipeline = FeaturePipeline(tuple(document["feature_names"]), Standardizer.from_dict(document["standardizer"]))

    try:
        match spec.family:
            case "BIC":
                estimator = None
            case "linear":
                estimator = LinearModel.from_dict(parameters)
            case "mlp":
                estimator = MLPModel.from_dict(parameters, int(document["seed"]))
            case "mmit":
                estimator = TreeModel.from_dict(parameters, hyperparameters)
            case _:
                raise FormatError(f"Unsupported model family '{spec.family}'")
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Invalid parameters for '{spec}': {e}") from e

    return TrainedModel(spec, estimator, pipeline, hyperparameters, int(document["seed"]), float(document["margin"]))


def save_model(path: pathlib.Path, model: TrainedModel) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_document(model), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    dbg(f"Model '{model.spec}' saved to '{path}'")
    return


def load_model(path: pathlib.Path) -> TrainedModel:
    path = pathlib.Path(path)
    if not path.is_file():
        raise FormatError(f"Model file '{path}' not found")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"Cannot parse model file '{path}': {e}") from e
    return model_from_document(document)


def write_predictions(path: Optional[pathlib.Path], predictions: dict[str, float]) -> None:
    rows = sorted(predictions.items())
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.PREDICTIONS_COLUMNS)))
    return


def read_predictions(path: pathlib.Path) -> dict[str, float]:
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.PREDICTIONS_COLUMNS, dtypes={"sequenceID": str})
    return {str(row.sequenceID): float(row.pred_log_lambda) for row in df.itertuples(index=False)}
