import hashlib
import pathlib
import sys
from typing import Iterable, Optional, Sequence

import numpy
import pandas

import penaltylearn.const
from penaltylearn.errors import FormatError


def seed_for(*coordinates: int | str) -> numpy.random.SeedSequence:
    """Derive a seed sequence from task coordinates (global seed, fold, model, grid point...). Strings are
    hashed so that the derivation does not depend on `PYTHONHASHSEED`.

    Returns:
        numpy.random.SeedSequence: the seed sequence for that task
    """
    entropy: list[int] = []
    for c in coordinates:
        if isinstance(c, str):
            entropy.append(stable_hash(c))
        else:
            entropy.append(int(c) & 0xFFFFFFFFFFFFFFFF)
    return numpy.random.SeedSequence(entropy)


def rng_for(*coordinates: int | str) -> numpy.random.Generator:
    return numpy.random.default_rng(seed_for(*coordinates))


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def quantiles(values: Iterable[float], probs: Sequence[float]) -> list[float]:
    """Linear-interpolation quantiles"""
    arr = numpy.asarray(list(values), dtype=float)
    return [float(q) for q in numpy.quantile(arr, probs)]


def read_csv(path: pathlib.Path, columns: Sequence[str], dtypes: dict | None = None) -> pandas.DataFrame:
    """Read a CSV file and make sure the mandatory columns are present

    Args:
        path (pathlib.Path): the file to read
        columns (Sequence[str]): mandatory header names
        dtypes (dict | None, optional): column types forwarded to pandas

    Raises:
        FormatError: if the file is missing, unparsable, or a column is missing

    Returns:
        pandas.DataFrame: the content
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise FormatError(f"File '{path}' not found")

    try:
        df = pandas.read_csv(
            path, dtype=dtypes, keep_default_na=True, encoding="utf-8", float_precision="round_trip"
        )
    except (ValueError, pandas.errors.ParserError) as e:
        raise FormatError(f"Cannot parse '{path}': {e}") from e

    for column in columns:
        if column not in df.columns:
            raise FormatError(f"Missing column '{column}' in '{path}'")

    return df


def write_csv(path: Optional[pathlib.Path], df: pandas.DataFrame) -> None:
    """Write `df` with the shared float format; to the standard output when `path` is None"""
    if path is None:
        df.to_csv(sys.stdout, index=False, float_format=penaltylearn.const.CSV_FLOAT_FORMAT, lineterminator="\n")
        return
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=penaltylearn.const.CSV_FLOAT_FORMAT, lineterminator="\n")
    return
