"""Validation-set scoring, centroid margin diagnostics and an exhaustive oracle."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .core import (
    PLAIN,
    TIE_RTOL,
    ConsistencyMode,
    FeatureAssignment,
    classify_features,
    constraint_pairs,
    feature_centroids,
    sample_centroids,
    _strict_argmax,
)
from .dataset import LabeledDataset
from .errors import EnumerationLimitError, FeatureMismatchError

VALIDATION_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SampleVerdict:
    sample: str
    true_class: str
    predicted_class: str | None   # None on a tie
    margin: float                 # best minus runner-up feature centroid

    @property
    def correct(self) -> bool:
        return self.predicted_class is not None and self.predicted_class == self.true_class


@dataclass(frozen=True)
class ValidationReport:
    err: int
    per_sample: tuple[SampleVerdict, ...]

    def to_dict(self) -> dict:
        return {
            "schema_version": VALIDATION_SCHEMA_VERSION,
            "err": self.err,
            "samples": [
                {"sample": v.sample, "true_class": v.true_class,
                 "predicted_class": v.predicted_class, "margin": v.margin}
                for v in self.per_sample
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample", "true_class", "predicted_class", "margin", "correct"])
        for v in self.per_sample:
            writer.writerow([v.sample, v.true_class, v.predicted_class or "", repr(v.margin),
                             int(v.correct)])
        return buf.getvalue()


def classify_validation(train: LabeledDataset, f: FeatureAssignment, x,
                        validation: LabeledDataset) -> ValidationReport:
    """Score unseen samples with the feature classification learned on ``train``.

    Each validation sample goes to the feature cluster whose mean over the
    selected features is the strict maximum.  Classes are matched by name, so
    the two label files may list classes in different orders.  Ties count as
    errors.
    """
    if validation.matrix.feature_names != train.matrix.feature_names:
        raise FeatureMismatchError("validation features differ from training features "
                                   "(names or order)")
    C_F = feature_centroids(validation.matrix, f, x)
    pred, tied, top = _strict_argmax(C_F, TIE_RTOL)
    verdicts = []
    for j, sample in enumerate(validation.matrix.sample_names):
        true_name = validation.labels.name_of(int(validation.labels.labels[j]))
        pred_name = None if tied[j] else train.labels.name_of(int(pred[j]))
        verdicts.append(SampleVerdict(sample, true_name, pred_name, float(top[j, 0] - top[j, 1])))
    err = sum(not v.correct for v in verdicts)
    return ValidationReport(err, tuple(verdicts))


@dataclass(frozen=True)
class FeatureMargin:
    feature: str
    cluster: int
    margin: float


@dataclass(frozen=True)
class MarginReport:
    margins: tuple[FeatureMargin, ...]   # ascending by margin
    epsilon: float | None
    count_within_epsilon: int | None

    def summary(self) -> str:
        if not self.margins:
            return "no features"
        vals = np.array([fm.margin for fm in self.margins])
        text = (f"feature centroid margins: min={vals.min():.6g} "
                f"median={np.median(vals):.6g} max={vals.max():.6g}")
        if self.epsilon is not None:
            text += f"; {self.count_within_epsilon} feature(s) with margin <= {self.epsilon:g}"
        return text


def margin_report(A, B_S, epsilon: float | None = None) -> MarginReport:
    """Per-feature gap between the winning sample centroid and the closest rival."""
    C_S = sample_centroids(A, B_S)
    best, _, top = _strict_argmax(C_S, TIE_RTOL)
    gaps = top[:, 0] - top[:, 1]
    names = getattr(A, "feature_names", None) or [str(i) for i in range(C_S.shape[0])]
    order = np.argsort(gaps, kind="stable")
    margins = tuple(FeatureMargin(names[i], int(best[i]), float(gaps[i])) for i in order)
    count = None if epsilon is None else int(np.sum(gaps <= epsilon))
    return MarginReport(margins, epsilon, count)


@dataclass(frozen=True)
class OracleResult:
    max_count: int
    witness: np.ndarray | None    # None when no selection is consistent

    @property
    def feasible(self) -> bool:
        return self.witness is not None


def _consistent_rows(X, values, f, labels, mode, tol):
    """Vectorized true-denominator consistency test for a block of 0/1 selections."""
    s = X.shape[0]
    m, n = values.shape
    k = f.k
    F = f.membership
    counts = X @ F
    ok = np.all(counts > 0, axis=1)
    if f.tied.any():
        ok &= ~np.any(X[:, f.tied] > 0, axis=1)
    T = (values[:, :, None] * F[:, None, :]).reshape(m, n * k)
    with np.errstate(divide="ignore", invalid="ignore"):
        C = (X @ T).reshape(s, n, k) / counts[:, None, :]
    C = np.where(ok[:, None, None], C, 0.0)

    top = np.sort(C, axis=2)[:, :, :-3:-1]
    scale = np.maximum(np.abs(top[..., 0]), np.abs(top[..., 1]))
    ok &= ~np.any(top[..., 0] - top[..., 1] <= tol * scale, axis=1)

    J, R, Xi = constraint_pairs(labels)
    lhs = C[:, J, R]
    rhs = mode.offset + mode.kappa * C[:, J, Xi]
    ok &= np.all(lhs - rhs > tol * np.maximum(np.abs(lhs), np.abs(rhs)), axis=1)
    return ok


def brute_force_max_consistent(A, B_S, mode: ConsistencyMode = PLAIN, max_m: int = 20,
                               chunk: int = 1 << 15, tol=TIE_RTOL) -> OracleResult:
    """Largest consistent selection by enumerating every non-empty subset.

    Among maximum-cardinality selections the lexicographically smallest 0/1
    vector is returned.  When nothing is consistent the result is
    ``max_count=0`` with ``witness=None``.
    """
    values = A.values if hasattr(A, "values") else np.asarray(A, dtype=float)
    m = values.shape[0]
    if m > max_m:
        raise EnumerationLimitError(f"m={m} exceeds the enumeration limit {max_m}")
    f = classify_features(sample_centroids(A, B_S), allow_ties=True, tol=tol)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    best_count, best_code = 0, None
    total = 1 << m
    for start in range(1, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        X = ((codes[:, None] & weights[None, :]) > 0).astype(float)
        ok = _consistent_rows(X, values, f, B_S, mode, tol)
        if not ok.any():
            continue
        sizes = X[ok].sum(axis=1).astype(int)
        top = sizes.max()
        if top > best_count:
            best_count, best_code = int(top), int(codes[ok][np.argmax(sizes == top)])
    if best_code is None:
        return OracleResult(0, None)
    witness = ((best_code & weights) > 0).astype(float)
    return OracleResult(best_count, witness)
