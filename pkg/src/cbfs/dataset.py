"""Labeled data matrices: loading, validation, saving and synthetic instances.

Matrices follow the microarray convention: features are rows and samples are
columns.  Cluster indices are 0-based everywhere inside the package.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    DuplicateNameError,
    GeneratorError,
    LabelError,
    ParseError,
)

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

ROLES = ("train", "validation")


def _duplicates(names):
    seen, dup = set(), []
    for name in names:
        if name in seen and name not in dup:
            dup.append(name)
        seen.add(name)
    return dup


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An m x n real matrix with feature (row) and sample (column) names."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    sample_names: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"matrix must be 2-dimensional, got shape {values.shape}")
        m, n = values.shape
        if m < 1 or n < 1:
            raise DimensionError(f"matrix must have at least one feature and one sample, got {m}x{n}")
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise DimensionError(f"non-finite value at feature {i}, sample {j}")
        features = tuple(str(s) for s in self.feature_names)
        samples = tuple(str(s) for s in self.sample_names)
        if len(features) != m:
            raise DimensionError(f"{len(features)} feature names for {m} rows")
        if len(samples) != n:
            raise DimensionError(f"{len(samples)} sample names for {n} columns")
        for kind, names in (("feature", features), ("sample", samples)):
            dup = _duplicates(names)
            if dup:
                raise DuplicateNameError(f"duplicate {kind} names: {dup[:5]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", features)
        object.__setattr__(self, "sample_names", samples)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, feature_names=None, sample_names=None) -> "DataMatrix":
        values = np.asarray(values, dtype=float)
        m, n = values.shape if values.ndim == 2 else (0, 0)
        if feature_names is None:
            feature_names = [f"f{i + 1}" for i in range(m)]
        if sample_names is None:
            sample_names = [f"s{j + 1}" for j in range(n)]
        return cls(values, tuple(feature_names), tuple(sample_names))

    def feature_index(self, names: Sequence[str]) -> np.ndarray:
        lookup = {name: i for i, name in enumerate(self.feature_names)}
        missing = [name for name in names if name not in lookup]
        if missing:
            raise LabelError(f"unknown feature names: {missing[:5]}")
        return np.array([lookup[name] for name in names], dtype=int)


@dataclass(frozen=True, eq=False)
class SampleClassification:
    """Partition of the n samples into k non-empty disjoint clusters.

    ``labels[j]`` is the 0-based cluster of sample ``j``.  ``class_names``
    optionally carries the original class name of every cluster.
    """

    labels: np.ndarray
    k: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int)
        k = int(self.k)
        if labels.ndim != 1 or labels.size == 0:
            raise LabelError("labels must be a non-empty 1-d sequence")
        if k < 1:
            raise LabelError(f"k must be positive, got {k}")
        if labels.min() < 0 or labels.max() >= k:
            raise LabelError(f"cluster indices must lie in 0..{k - 1}")
        sizes = np.bincount(labels, minlength=k)
        if np.any(sizes == 0):
            raise LabelError(f"empty class(es): {np.flatnonzero(sizes == 0).tolist()}")
        if self.class_names is not None:
            names = tuple(str(c) for c in self.class_names)
            if len(names) != k:
                raise LabelError(f"{len(names)} class names for k={k}")
            object.__setattr__(self, "class_names", names)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "k", k)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.labels == r)

    def name_of(self, r: int | None) -> str:
        if r is None:
            return ""
        return self.class_names[r] if self.class_names else str(r)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    matrix: DataMatrix
    labels: SampleClassification
    role: str = "train"
    # planted feature cluster per feature, -1 for noise rows; generator output only
    planted: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise LabelError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.labels.n != self.matrix.n:
            raise LabelError(f"{self.labels.n} labels for {self.matrix.n} samples")


def load_matrix(path) -> DataMatrix:
    """Read a matrix CSV: header ``feature,<sample_1>,...`` then ``name,v1,...,vn`` rows."""
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open matrix file: {exc.strerror}", path) from exc
    with handle:
        try:
            rows = list(csv.reader(handle))
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(f"malformed CSV: {exc}", path) from exc
    rows = [(lineno, row) for lineno, row in enumerate(rows, start=1)
            if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError("empty file", path)
    header = [cell.strip() for cell in rows[0][1]]
    if len(header) < 2:
        raise ParseError("header needs a feature column and at least one sample", path, rows[0][0])
    samples = header[1:]
    n = len(samples)
    features, values = [], []
    for lineno, row in rows[1:]:
        if len(row) != n + 1:
            raise DimensionError(f"{path}, line {lineno}: expected {n + 1} cells, got {len(row)}")
        name = row[0].strip()
        vals = []
        for sample, cell in zip(samples, row[1:]):
            text = cell.strip()
            if not _NUMBER.match(text):
                raise ParseError(f"non-numeric value {cell!r} for feature {name!r}", path, lineno, sample)
            vals.append(float(text))
        features.append(name)
        values.append(vals)
    if not features:
        raise ParseError("no feature rows", path)
    return DataMatrix(np.array(values, dtype=float), tuple(features), tuple(samples))


def save_matrix(matrix: DataMatrix, path) -> None:
    """Write a matrix CSV; floats use ``repr`` so loading round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["feature", *matrix.sample_names])
        for name, row in zip(matrix.feature_names, matrix.values):
            writer.writerow([name, *(repr(float(v)) for v in row)])


def parse_labels(pairs, matrix: DataMatrix, source=None) -> SampleClassification:
    """Map ``(sample, class)`` pairs onto the matrix samples; classes indexed by first appearance."""
    class_index: dict[str, int] = {}
    assigned: dict[str, int] = {}
    known = set(matrix.sample_names)
    for lineno, (sample, cls) in pairs:
        if sample not in known:
            raise LabelError(f"{source or 'labels'}, line {lineno}: unknown sample name {sample!r}")
        if sample in assigned:
            raise LabelError(f"{source or 'labels'}, line {lineno}: sample {sample!r} labeled twice")
        assigned[sample] = class_index.setdefault(cls, len(class_index))
    unlabeled = [s for s in matrix.sample_names if s not in assigned]
    if unlabeled:
        raise LabelError(f"unlabeled sample(s): {unlabeled[:5]}")
    if len(class_index) < 2:
        raise LabelError(f"at least 2 classes are required, got {len(class_index)}")
    labels = np.array([assigned[s] for s in matrix.sample_names], dtype=int)
    return SampleClassification(labels, len(class_index), tuple(class_index))


def load_labels(path, matrix: DataMatrix) -> SampleClassification:
    """Read a header-less ``sample_name,class_name`` CSV."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise ParseError(f"cannot open label file: {exc.strerror}", path) from exc
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed CSV: {exc}", path) from exc
    pairs = []
    for lineno, row in enumerate(rows, start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 'sample,class', got {len(row)} cells", path, lineno)
        pairs.append((lineno, (row[0].strip(), row[1].strip())))
    return parse_labels(pairs, matrix, source=path)


def save_labels(dataset: LabeledDataset, path) -> None:
    labels = dataset.labels
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for sample, r in zip(dataset.matrix.sample_names, labels.labels):
            writer.writerow([sample, labels.name_of(int(r))])


def load_dataset(matrix_path, labels_path, role="train") -> LabeledDataset:
    matrix = load_matrix(matrix_path)
    return LabeledDataset(matrix, load_labels(labels_path, matrix), role)


def generate_planted(m, n, k, signal=10.0, noise_features=0, seed=0, jitter=0.1) -> LabeledDataset:
    """Synthesize a dataset whose first ``m - noise_features`` rows are consistent by construction.

    Planted feature ``i`` of cluster ``r`` takes ``signal`` on the samples of
    ``S_r`` and 0 elsewhere, plus uniform jitter in ``[-jitter*signal, jitter*signal]``.
    A noise row is classified into some cluster ``r`` by its sample centroids
    but carries one spike on a sample of another cluster large enough to flip
    that sample's feature-centroid comparison whenever the row is selected.
    """
    m, n, k, noise_features = int(m), int(n), int(k), int(noise_features)
    if not signal > 0:
        raise GeneratorError(f"signal must be positive, got {signal}")
    if not 0 <= jitter < 0.5:
        raise GeneratorError(f"jitter must be in [0, 0.5), got {jitter}")
    if k < 2 or n < k:
        raise GeneratorError(f"need n >= k >= 2, got n={n}, k={k}")
    if noise_features < 0 or m - noise_features < k:
        raise GeneratorError(
            f"need m - noise_features >= k so every cluster gets a planted feature "
            f"(m={m}, noise_features={noise_features}, k={k})")

    rng = np.random.default_rng(seed)
    sample_labels = rng.permutation(np.arange(n) % k)
    planted_count = m - noise_features
    planted = np.full(m, -1, dtype=int)
    planted[:planted_count] = np.arange(planted_count) % k

    amp = jitter * signal
    values = rng.uniform(-amp, amp, size=(m, n)) if amp > 0 else np.zeros((m, n))
    for i in range(planted_count):
        values[i, sample_labels == planted[i]] += signal

    per_cluster = np.bincount(planted[:planted_count], minlength=k)
    for i in range(planted_count, m):
        home, other = rng.choice(k, size=2, replace=False)
        spike_sample = rng.choice(np.flatnonzero(sample_labels == other))
        spike = (per_cluster[home] + 2) * signal * (1.0 + rng.uniform())
        values[i, sample_labels == home] += 1.5 * spike
        values[i, spike_sample] += spike

    matrix = DataMatrix.from_array(values, [f"g{i + 1}" for i in range(m)],
                                   [f"s{j + 1}" for j in range(n)])
    labels = SampleClassification(sample_labels, k, tuple(f"class{r + 1}" for r in range(k)))
    planted.setflags(write=False)
    return LabeledDataset(matrix, labels, "train", planted)
