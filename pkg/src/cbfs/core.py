"""Centroids, two-way classification, consistency checks and the violation function g.

A biclustering is consistent when classifying every feature by the cluster
where its sample centroid is largest, and then classifying every sample by
the feature cluster whose (selected-feature) centroid is largest, gives back
the sample classification we started from.  The alpha and beta variants
demand an additive or multiplicative winning margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dataset import DataMatrix, SampleClassification
from .errors import EmptyClusterError, ProportionError, TieError

# Top-two values within this relative distance are a tie.
TIE_RTOL = 1e-12

MODE_KINDS = ("plain", "alpha", "beta")


@dataclass(frozen=True)
class ConsistencyMode:
    """Which consistency notion to enforce.

    ``alpha`` requires ``c_win > value + c_other`` and ``beta`` requires
    ``c_win > value * c_other``.  ``alpha`` with value 0 and ``beta`` with
    value 1 both coincide with ``plain``.
    """

    kind: str = "plain"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise ValueError(f"mode kind must be one of {MODE_KINDS}, got {self.kind!r}")
        value = float(self.value)
        if self.kind == "plain":
            value = 0.0
        elif self.kind == "alpha" and not value >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.value}")
        elif self.kind == "beta" and not value >= 1:
            raise ValueError(f"beta must be >= 1, got {self.value}")
        object.__setattr__(self, "value", value)

    @classmethod
    def plain(cls) -> "ConsistencyMode":
        return cls("plain", 0.0)

    @classmethod
    def alpha(cls, value: float) -> "ConsistencyMode":
        return cls("alpha", value)

    @classmethod
    def beta(cls, value: float) -> "ConsistencyMode":
        return cls("beta", value)

    @property
    def kappa(self) -> float:
        """Multiplier on the losing centroid."""
        return self.value if self.kind == "beta" else 1.0

    @property
    def offset(self) -> float:
        """Additive margin on the losing centroid."""
        return self.value if self.kind == "alpha" else 0.0

    def __str__(self):
        return "plain" if self.kind == "plain" else f"{self.kind}={self.value:g}"


PLAIN = ConsistencyMode()


@dataclass(frozen=True)
class TieReport:
    kind: str                 # "feature" or "sample"
    indices: np.ndarray       # rows whose maximum is not strict
    top_values: np.ndarray    # (len(indices), 2) best and runner-up

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class FeatureAssignment:
    """Feature i belongs to feature cluster ``labels[i]``.

    ``tied`` marks features whose sample-centroid maximum is not strict; they
    carry the first maximizing cluster as a nominal label and cannot be part
    of a consistent selection.
    """

    labels: np.ndarray
    k: int
    tied: np.ndarray | None = field(default=None)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=int)
        if labels.ndim != 1:
            raise ValueError("feature labels must be 1-d")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"feature cluster indices must lie in 0..{self.k - 1}")
        tied = np.zeros(labels.size, bool) if self.tied is None else np.array(self.tied, dtype=bool)
        if tied.shape != labels.shape:
            raise ValueError("tied mask must match labels")
        labels.setflags(write=False)
        tied.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "tied", tied)
        object.__setattr__(self, "k", int(self.k))

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def membership(self) -> np.ndarray:
        """The m x k 0/1 matrix f; every row sums to 1."""
        f = np.zeros((self.m, self.k))
        f[np.arange(self.m), self.labels] = 1.0
        return f

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @classmethod
    def from_membership(cls, f) -> "FeatureAssignment":
        f = np.asarray(f)
        if f.ndim != 2 or not np.all((f == 0) | (f == 1)) or not np.all(f.sum(axis=1) == 1):
            raise ValueError("membership must be 0/1 with exactly one 1 per row")
        return cls(np.argmax(f, axis=1), f.shape[1])


class Violation(NamedTuple):
    sample: int
    cluster: int      # true cluster of the sample
    other: int        # competing cluster
    margin: float     # lhs - rhs, <= 0 (or below tie tolerance) for a violation


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    violations: list[Violation]
    feature_ties: np.ndarray
    sample_ties: np.ndarray
    min_margin: float

    def __bool__(self):
        return self.consistent


def _values(A) -> np.ndarray:
    return A.values if isinstance(A, DataMatrix) else np.asarray(A, dtype=float)


def _labels(B_S) -> tuple[np.ndarray, int]:
    if isinstance(B_S, SampleClassification):
        return B_S.labels, B_S.k
    labels = np.asarray(B_S, dtype=int)
    return labels, int(labels.max()) + 1


def _strict_argmax(C: np.ndarray, tol: float):
    """First argmax per row and a mask of rows whose top two are within ``tol``."""
    C = np.asarray(C, dtype=float)
    best = np.argmax(C, axis=1)
    if C.shape[1] < 2:
        return best, np.zeros(C.shape[0], bool), np.column_stack([C[:, 0], C[:, 0]])
    top = np.sort(C, axis=1)[:, :-3:-1]
    scale = np.maximum(np.abs(top[:, 0]), np.abs(top[:, 1]))
    tied = (top[:, 0] - top[:, 1]) <= tol * scale
    return best, tied, top


def is_binary(x) -> bool:
    x = np.asarray(x)
    return bool(np.all((x == 0) | (x == 1)))


def sample_centroids(A, B_S) -> np.ndarray:
    """m x k matrix of per-cluster means of every feature over the samples of the cluster."""
    values = _values(A)
    labels, k = _labels(B_S)
    onehot = np.zeros((labels.size, k))
    onehot[np.arange(labels.size), labels] = 1.0
    return (values @ onehot) / onehot.sum(axis=0)


def classify_features(C_S, allow_ties=False, tol=TIE_RTOL) -> FeatureAssignment:
    """Assign each feature to the cluster where its sample centroid is the strict maximum.

    Raises :class:`TieError` for non-strict maxima unless ``allow_ties``, in
    which case the tied rows are flagged in ``FeatureAssignment.tied``.
    """
    C_S = np.asarray(C_S, dtype=float)
    best, tied, top = _strict_argmax(C_S, tol)
    if tied.any() and not allow_ties:
        idx = np.flatnonzero(tied)
        raise TieError(TieReport("feature", idx, top[idx]))
    return FeatureAssignment(best, C_S.shape[1], tied)


def feature_centroids(A, f: FeatureAssignment, x) -> np.ndarray:
    """n x k matrix: mean of every sample over the selected features of each feature cluster."""
    values = _values(A)
    x = np.asarray(x, dtype=float)
    weights = f.membership * x[:, None]
    counts = weights.sum(axis=0)
    empty = np.flatnonzero(counts <= 0)
    if empty.size:
        raise EmptyClusterError(empty)
    return (values.T @ weights) / counts


def classify_samples(C_F, allow_ties=False, tol=TIE_RTOL) -> np.ndarray:
    """Cluster of every sample by strict maximum of its feature centroids.

    The result may leave some clusters empty, so it is returned as a plain
    label array rather than a :class:`SampleClassification`.  With
    ``allow_ties`` the tie mask is returned as a second value.
    """
    best, tied, top = _strict_argmax(C_F, tol)
    if allow_ties:
        return best, tied
    if tied.any():
        idx = np.flatnonzero(tied)
        raise TieError(TieReport("sample", idx, top[idx]))
    return best


def constraint_pairs(B_S, k: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays (sample, own cluster, other cluster), samples major, n*(k-1) entries."""
    labels, inferred = _labels(B_S)
    k = inferred if k is None else int(k)
    J = np.repeat(np.arange(labels.size), k - 1)
    R = labels[J]
    others = np.array([[xi for xi in range(k) if xi != r] for r in range(k)], dtype=int)
    X = others[labels].ravel()
    return J, R, X


def constraint_terms(A, B_S, f: FeatureAssignment, x, y, mode: ConsistencyMode = PLAIN):
    """Both sides of every denominator-substituted constraint.

    ``lhs = (1/y_r) * sum_i a_ij f_ir x_i`` for the sample's own cluster ``r``;
    ``rhs = offset + kappa * (1/y_xi) * sum_i a_ij f_ixi x_i`` for each rival ``xi``.
    ``y`` only has to be positive; it is not renormalized here.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (f.k,):
        raise ProportionError(f"y must have length k={f.k}, got shape {y.shape}")
    if not np.all(y > 0):
        raise ProportionError(f"every proportion must be positive, got {y.tolist()}")
    values = _values(A)
    x = np.asarray(x, dtype=float)
    scaled = (values.T @ (f.membership * x[:, None])) / y
    J, R, X = constraint_pairs(B_S, f.k)
    lhs = scaled[J, R]
    rhs = mode.offset + mode.kappa * scaled[J, X]
    return lhs, rhs


def g_evaluate(A, B_S, f: FeatureAssignment, x, y, mode: ConsistencyMode = PLAIN) -> float:
    """Sum over all substituted constraints of the positive part of ``rhs - lhs``."""
    lhs, rhs = constraint_terms(A, B_S, f, x, y, mode)
    return float(np.maximum(rhs - lhs, 0.0).sum())


def substituted_satisfied(A, B_S, f, x, y, mode=PLAIN, slack=TIE_RTOL) -> np.ndarray:
    """Per-constraint ``lhs >= rhs`` with a relative comparison slack."""
    lhs, rhs = constraint_terms(A, B_S, f, x, y, mode)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return lhs - rhs >= -slack * scale


def true_proportions(f: FeatureAssignment, x) -> np.ndarray:
    """Share of the selected features falling in each feature cluster."""
    counts = f.membership.T @ np.asarray(x, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyClusterError(range(f.k))
    return counts / total


def check_proportions(y, lo=0.0, tol=1e-9) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(y > lo) or not np.all(y <= 1.0 + tol):
        raise ProportionError(f"proportions must lie in ({lo}, 1], got {y.tolist()}")
    if abs(y.sum() - 1.0) > tol:
        raise ProportionError(f"proportions must sum to 1, got {y.sum()!r}")
    return y


def is_consistent(A, B_S, x, mode: ConsistencyMode = PLAIN, f: FeatureAssignment | None = None,
                  tol=TIE_RTOL) -> ConsistencyReport:
    """Check the selection ``x`` against the true-denominator consistency definition.

    A selected feature with a tied sample-centroid maximum, or a sample whose
    feature-centroid maximum is tied, makes the result inconsistent.
    Raises :class:`EmptyClusterError` when a feature cluster has nothing selected.
    """
    x = np.asarray(x, dtype=float)
    if not is_binary(x):
        raise ValueError("is_consistent needs a binary selection")
    labels, k = _labels(B_S)
    if f is None:
        f = classify_features(sample_centroids(A, B_S), allow_ties=True, tol=tol)
    feature_ties = np.flatnonzero(f.tied & (x == 1))
    C_F = feature_centroids(A, f, x)
    _, sample_tied = classify_samples(C_F, allow_ties=True, tol=tol)
    sample_ties = np.flatnonzero(sample_tied)

    J, R, X = constraint_pairs(labels)
    lhs = C_F[J, R]
    rhs = mode.offset + mode.kappa * C_F[J, X]
    margin = lhs - rhs
    ok = margin > tol * np.maximum(np.abs(lhs), np.abs(rhs))
    violations = [Violation(int(j), int(r), int(xi), float(d))
                  for j, r, xi, d in zip(J[~ok], R[~ok], X[~ok], margin[~ok])]
    consistent = not violations and feature_ties.size == 0 and sample_ties.size == 0
    min_margin = float(margin.min()) if margin.size else float("inf")
    return ConsistencyReport(consistent, violations, feature_ties, sample_ties, min_margin)
