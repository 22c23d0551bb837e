from __future__ import annotations

import math
import pathlib
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Optional

import numpy
import pandas

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.errors import (
    ConfigError,
    FormatError,
    LabelRangeError,
    OverlappingLabelsError,
    UnknownSequenceError,
    ValidationError,
)
from penaltylearn.log import dbg, info

SequenceSet = dict[str, "Sequence"]
LabelSet = dict[str, list["Label"]]


@dataclass(frozen=True, eq=False)
class Sequence:
    """One univariate data vector with integer position coordinates"""

    id: str
    positions: numpy.ndarray
    values: numpy.ndarray

    def __post_init__(self):
        positions = numpy.array(self.positions, dtype=numpy.int64)
        values = numpy.array(self.values, dtype=numpy.float64)

        if positions.ndim != 1 or values.ndim != 1 or positions.shape != values.shape:
            raise ValidationError(f"Sequence '{self.id}': positions and values must have equal length")

        if len(values) < 1:
            raise ValidationError(f"Sequence '{self.id}' is empty")

        bad = numpy.flatnonzero(~numpy.isfinite(values))
        if len(bad):
            raise ValidationError(f"Sequence '{self.id}': non-finite value at index {int(bad[0])}")

        steps = numpy.diff(positions)
        if numpy.any(steps <= 0):
            idx = int(numpy.flatnonzero(steps <= 0)[0]) + 1
            raise ValidationError(f"Sequence '{self.id}': positions not strictly increasing at index {idx}")

        positions.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "values", values)
        return

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sequence):
            return False
        return (
            self.id == other.id
            and numpy.array_equal(self.positions, other.positions)
            and numpy.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.id, len(self)))

    def __str__(self) -> str:
        return f"Sequence('{self.id}', N={len(self)}, positions=[{self.first_position}-{self.last_position}])"

    @property
    def first_position(self) -> int:
        return int(self.positions[0])

    @property
    def last_position(self) -> int:
        return int(self.positions[-1])


@dataclass(frozen=True, order=True)
class Label:
    """A region (start, end) of a sequence, annotated with the expected number of changes"""

    sequence_id: str
    start: int
    end: int
    changes: int

    def __post_init__(self):
        if not self.start < self.end:
            raise LabelRangeError(
                f"Label ({self.sequence_id}, {self.start}, {self.end}): start must be smaller than end"
            )
        if self.changes < 0:
            raise ValidationError(f"Label ({self.sequence_id}, {self.start}, {self.end}): negative change count")
        return

    @property
    def is_positive(self) -> bool:
        return self.changes > 0

    def overlaps(self, other: Label) -> bool:
        """Shared endpoints count as overlap"""
        return self.start <= other.end and other.start <= self.end

    def __contains__(self, position: float) -> bool:
        return self.start <= position <= self.end


@dataclass(frozen=True)
class FoldAssignment:
    folds: dict[str, int]
    k: int

    def members(self, fold: int) -> list[str]:
        return sorted(sid for sid, f in self.folds.items() if f == fold)

    def split(self, fold: int) -> tuple[list[str], list[str]]:
        """Returns the (train, test) ids when `fold` is held out"""
        train = sorted(sid for sid, f in self.folds.items() if f != fold)
        return train, self.members(fold)

    def sizes(self) -> list[int]:
        return [len(self.members(f)) for f in range(1, self.k + 1)]


def validate_labels(labels: Iterable[Label], sequence: Sequence) -> list[Label]:
    """Check bounds and pairwise non-overlap of the labels of one sequence

    Args:
        labels (Iterable[Label]): the labels attached to `sequence`
        sequence (Sequence): the sequence

    Raises:
        UnknownSequenceError: if a label references another sequence
        LabelRangeError: if a label is outside the sequence positions
        OverlappingLabelsError: if two labels overlap or share an endpoint

    Returns:
        list[Label]: the labels, sorted by start
    """
    ordered = sorted(labels, key=lambda lbl: (lbl.start, lbl.end))
    for label in ordered:
        if label.sequence_id != sequence.id:
            raise UnknownSequenceError(f"Label {label} does not belong to sequence '{sequence.id}'")
        if label.start < sequence.first_position or label.end > sequence.last_position:
            raise LabelRangeError(
                f"Label ({label.sequence_id}, {label.start}, {label.end}) outside of "
                f"[{sequence.first_position}, {sequence.last_position}]"
            )

    for previous, current in zip(ordered, ordered[1:]):
        if previous.overlaps(current):
            raise OverlappingLabelsError(
                f"Sequence '{sequence.id}': labels ({previous.start}, {previous.end}) and "
                f"({current.start}, {current.end}) overlap"
            )
    return ordered


def load_sequences(path: pathlib.Path) -> SequenceSet:
    """Load `sequences.csv` (sequenceID,position,value)

    Args:
        path (pathlib.Path): the CSV file

    Raises:
        FormatError: missing column, or non-integer positions
        ValidationError: non-finite value or duplicate position

    Returns:
        SequenceSet: one Sequence per distinct id, keyed and sorted by id
    """
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.SEQUENCES_COLUMNS, dtypes={"sequenceID": str})
    df["row"] = numpy.arange(len(df)) + 2

    if not pandas.api.types.is_integer_dtype(df["position"]):
        raise FormatError(f"Column 'position' of '{path}' must contain integers")

    values = pandas.to_numeric(df["value"], errors="coerce")
    bad = df[~numpy.isfinite(values.to_numpy(dtype=float))]
    if len(bad):
        first = bad.iloc[0]
        raise ValidationError(f"Sequence '{first['sequenceID']}': non-finite value at row {first['row']}")
    df["value"] = values

    sequences: SequenceSet = {}
    for sequence_id, group in df.groupby("sequenceID", sort=True):
        group = group.sort_values("position", kind="stable")
        duplicated = group[group["position"].duplicated()]
        if len(duplicated):
            raise ValidationError(
                f"Sequence '{sequence_id}': duplicate position {duplicated.iloc[0]['position']} "
                f"at row {duplicated.iloc[0]['row']}"
            )
        sequences[str(sequence_id)] = Sequence(
            str(sequence_id), group["position"].to_numpy(), group["value"].to_numpy(dtype=float)
        )

    dbg(f"Loaded {len(sequences)} sequences from '{path}'")
    return sequences


def load_labels(path: pathlib.Path, sequences: SequenceSet) -> LabelSet:
    """Load `labels.csv` (sequenceID,start,end,changes)

    Args:
        path (pathlib.Path): the CSV file
        sequences (SequenceSet): the sequences the labels refer to

    Returns:
        LabelSet: validated labels per sequence id, sorted by start
    """
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.LABELS_COLUMNS, dtypes={"sequenceID": str})
    for column in ("start", "end", "changes"):
        if not pandas.api.types.is_integer_dtype(df[column]):
            raise FormatError(f"Column '{column}' of '{path}' must contain integers")

    grouped: dict[str, list[Label]] = {}
    for row in df.itertuples(index=False):
        sequence_id = str(row.sequenceID)
        if sequence_id not in sequences:
            raise UnknownSequenceError(f"Label references unknown sequence '{sequence_id}'")
        label = Label(sequence_id, int(row.start), int(row.end), int(row.changes))
        grouped.setdefault(sequence_id, []).append(label)

    labels: LabelSet = {}
    for sequence_id in sorted(grouped):
        labels[sequence_id] = validate_labels(grouped[sequence_id], sequences[sequence_id])

    dbg(f"Loaded {sum(len(x) for x in labels.values())} labels for {len(labels)} sequences from '{path}'")
    return labels


def write_sequences(path: pathlib.Path, sequences: SequenceSet) -> None:
    frames = [
        pandas.DataFrame({"sequenceID": seq.id, "position": seq.positions, "value": seq.values})
        for seq in sequences.values()
    ]
    if frames:
        df = pandas.concat(frames, ignore_index=True)
    else:
        df = pandas.DataFrame(columns=list(penaltylearn.const.SEQUENCES_COLUMNS))
    penaltylearn.utils.write_csv(path, df)
    return


def write_labels(path: pathlib.Path, labels: LabelSet) -> None:
    rows = [
        (label.sequence_id, label.start, label.end, label.changes)
        for sequence_labels in labels.values()
        for label in sequence_labels
    ]
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.LABELS_COLUMNS)))
    return


def assign_folds(ids: list[str], k: int, seed: int) -> FoldAssignment:
    """Assign sequences to `k` folds: ids are ordered by a stable hash of (seed, id), then dealt round-robin

    Args:
        ids (list[str]): distinct sequence ids
        k (int): fold count, at least 2
        seed (int): the seed mixed in the hash

    Raises:
        ConfigError: if k < 2 or k > len(ids)
        ValidationError: if ids are not distinct

    Returns:
        FoldAssignment: fold index in 1..k per id
    """
    if k < 2:
        raise ConfigError(f"Fold count must be at least 2 (got {k})")
    if len(set(ids)) != len(ids):
        raise ValidationError("Sequence ids must be distinct")
    if k > len(ids):
        raise ConfigError(f"Cannot split {len(ids)} sequences into {k} folds")

    ordered = sorted(ids, key=lambda sid: (penaltylearn.utils.stable_hash(f"{seed}:{sid}"), sid))
    return FoldAssignment({sid: (rank % k) + 1 for rank, sid in enumerate(ordered)}, k)


def load_folds(path: pathlib.Path) -> FoldAssignment:
    """Load `folds.csv` (sequenceID,fold), used instead of the hashed assignment"""
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.FOLDS_COLUMNS, dtypes={"sequenceID": str})
    if not pandas.api.types.is_integer_dtype(df["fold"]):
        raise FormatError(f"Column 'fold' of '{path}' must contain integers")
    if df["sequenceID"].duplicated().any():
        raise ValidationError(f"Duplicate sequenceID in '{path}'")

    folds = {str(row.sequenceID): int(row.fold) for row in df.itertuples(index=False)}
    k = max(folds.values())
    if min(folds.values()) < 1:
        raise ValidationError(f"Fold indices in '{path}' must start at 1")
    return FoldAssignment(folds, k)


def write_folds(path: pathlib.Path, assignment: FoldAssignment) -> None:
    rows = sorted(assignment.folds.items())
    penaltylearn.utils.write_csv(path, pandas.DataFrame(rows, columns=list(penaltylearn.const.FOLDS_COLUMNS)))
    return


@dataclass
class SyntheticConfig:
    """Shape of a synthetic labeled corpus. Both the means and the noise of a sequence are multiplied by a
    per-sequence scale drawn log-uniformly in [min_scale, max_scale]."""

    n_sequences: int = 50
    min_length: int = 20
    max_length: int = 200
    min_segments: int = 1
    max_segments: int = 5
    noise_sd: float = 1.0
    label_coverage: float = 0.5
    jump_size: float = 4.0
    min_scale: float = 1.0
    max_scale: float = 1.0

    def validate(self) -> None:
        if self.n_sequences < 1:
            raise ConfigError("n_sequences must be positive")
        if not 2 <= self.min_length <= self.max_length:
            raise ConfigError(f"Invalid length range [{self.min_length}, {self.max_length}]")
        if not 1 <= self.min_segments <= self.max_segments:
            raise ConfigError(f"Invalid segment range [{self.min_segments}, {self.max_segments}]")
        if self.max_segments > self.min_length:
            raise ConfigError(
                f"Infeasible configuration: {self.max_segments} segments for sequences of {self.min_length} points"
            )
        if not (self.noise_sd > 0 and math.isfinite(self.noise_sd)):
            raise ConfigError("noise_sd must be positive")
        if not 0 <= self.label_coverage <= 1:
            raise ConfigError("label_coverage must be in [0, 1]")
        if not self.jump_size > 0:
            raise ConfigError("jump_size must be positive")
        if not 0 < self.min_scale <= self.max_scale:
            raise ConfigError(f"Invalid scale range [{self.min_scale}, {self.max_scale}]")
        return

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> SyntheticConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown synthetic configuration keys: {', '.join(sorted(unknown))}")
        return cls(**values)


@dataclass
class SyntheticCorpus:
    sequences: SequenceSet = field(default_factory=dict)
    labels: LabelSet = field(default_factory=dict)
    changepoints: dict[str, list[int]] = field(default_factory=dict)
    """Generated changepoint indices i (change between points i and i+1, 1-based)"""


def _place_labels(
    rng: numpy.random.Generator, n: int, changepoints: list[int], coverage: float
) -> list[tuple[int, int, int]]:
    """Lay out non-overlapping labels on point indices (0-based, inclusive). A positive label spans exactly one
    generated change, a negative label lies inside a single segment."""
    bounds = [0] + changepoints + [n]
    positives: list[tuple[int, int, int]] = []
    last_end = -1

    for j, i in enumerate(changepoints):
        # the change lies between points i-1 and i
        left_lo = max(i - 1 - (i - bounds[j] - 1) // 2, last_end + 1)
        left_hi = i - 1
        right_lo = i
        right_hi = i + (bounds[j + 2] - 1 - i) // 2
        if left_lo > left_hi:
            continue
        if rng.random() >= coverage:
            continue
        start = int(rng.integers(left_lo, left_hi + 1))
        end = int(rng.integers(right_lo, right_hi + 1))
        positives.append((start, end, 1))
        last_end = end

    negatives: list[tuple[int, int, int]] = []
    for j in range(len(bounds) - 1):
        lo, hi = bounds[j], bounds[j + 1] - 1
        free_lo, free_hi = lo, hi
        for start, end, _ in positives:
            if lo <= end <= hi:
                free_lo = max(free_lo, end + 1)
            if lo <= start <= hi:
                free_hi = min(free_hi, start - 1)
        lo, hi = free_lo, free_hi
        if hi - lo < 1 or rng.random() >= coverage:
            continue
        start = int(rng.integers(lo, hi))
        end = int(rng.integers(start + 1, hi + 1))
        negatives.append((start, end, 0))

    placed = sorted(positives + negatives)
    if not placed:
        if changepoints:
            placed = [(changepoints[0] - 1, changepoints[0], 1)]
        else:
            placed = [(0, n - 1, 0)]
    return placed


def generate_synthetic_with_truth(config: SyntheticConfig, seed: int) -> SyntheticCorpus:
    """Generate piecewise-constant sequences with Gaussian noise, and labels consistent with the generated
    changes; deterministic given `seed`

    Args:
        config (SyntheticConfig): the corpus shape
        seed (int): the generator seed

    Raises:
        ConfigError: if the configuration is infeasible

    Returns:
        SyntheticCorpus: sequences, labels, and the generated changepoints
    """
    config.validate()
    rng = numpy.random.default_rng(seed)
    corpus = SyntheticCorpus()
    width = len(str(config.n_sequences))

    for idx in range(config.n_sequences):
        sequence_id = f"seq{idx + 1:0{width}d}"
        n = int(rng.integers(config.min_length, config.max_length + 1))
        n_segments = int(rng.integers(config.min_segments, config.max_segments + 1))
        changepoints = sorted(int(c) + 1 for c in rng.choice(n - 1, size=n_segments - 1, replace=False))

        scale = math.exp(rng.uniform(math.log(config.min_scale), math.log(config.max_scale)))
        jumps = rng.uniform(1.0, 2.0, size=n_segments - 1) * config.jump_size
        jumps *= rng.choice([-1.0, 1.0], size=n_segments - 1)
        levels = numpy.concatenate([[0.0], numpy.cumsum(jumps)])
        means = numpy.repeat(levels, numpy.diff([0] + changepoints + [n]))
        values = scale * (means + config.noise_sd * rng.standard_normal(n))
        positions = numpy.arange(1, n + 1)

        sequence = Sequence(sequence_id, positions, values)
        corpus.sequences[sequence_id] = sequence
        corpus.changepoints[sequence_id] = changepoints
        corpus.labels[sequence_id] = [
            Label(sequence_id, int(positions[start]), int(positions[end]), changes)
            for start, end, changes in _place_labels(rng, n, changepoints, config.label_coverage)
        ]
        validate_labels(corpus.labels[sequence_id], sequence)

    info(
        f"Generated {len(corpus.sequences)} sequences with "
        f"{sum(len(x) for x in corpus.labels.values())} labels (seed={seed})"
    )
    return corpus


def generate_synthetic(config: SyntheticConfig, seed: int) -> tuple[SequenceSet, LabelSet]:
    corpus = generate_synthetic_with_truth(config, seed)
    return corpus.sequences, corpus.labels


def subset(sequences: SequenceSet, ids: Iterable[str]) -> SequenceSet:
    return {sid: sequences[sid] for sid in ids}


def labeled_ids(sequences: SequenceSet, labels: LabelSet, fold_ids: Optional[Iterable[str]] = None) -> list[str]:
    """Ids of the sequences carrying at least one label, optionally restricted to `fold_ids`"""
    candidates = fold_ids if fold_ids is not None else sequences.keys()
    return sorted(sid for sid in candidates if labels.get(sid))
