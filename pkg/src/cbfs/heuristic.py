"""Bilevel search over feature-cluster proportions.

The outer level walks over proportion vectors ``y`` (positive, summing to 1)
that stand in for the unknown denominators of the fractional constraints.
For each ``y`` the inner LP picks as many features as possible, the result is
rounded, and g measures how badly the substituted constraints are violated.
The neighbourhood width ``range`` widens while g does not improve and snaps
back when it does; the search stops at g = 0 or once the width exceeds
``max_range``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    PLAIN,
    ConsistencyMode,
    FeatureAssignment,
    classify_features,
    g_evaluate,
    is_consistent,
    sample_centroids,
)
from .dataset import DataMatrix, SampleClassification
from .errors import EmptyClusterError, InputError, IterationLimitError, NoSolutionError
from .lp import build_inner, round_selection, solve

log = logging.getLogger("cbfs.heuristic")


@dataclass(frozen=True)
class HeuristicConfig:
    starting_range: float = 0.05
    max_range: float = 0.5
    range_growth: float = 1.5
    restarts: int = 10
    seed: int = 0
    mode: ConsistencyMode = PLAIN
    strict_margin: float = 0.0
    perturb_retry_cap: int = 100
    min_proportion: float = 1e-6
    # safety net only; the range schedule normally ends the search long before
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0 < self.starting_range <= 0.5:
            raise InputError(f"starting_range must be in (0, 0.5], got {self.starting_range}")
        if not self.max_range >= self.starting_range:
            raise InputError("max_range must be >= starting_range")
        if not self.range_growth > 1:
            raise InputError(f"range_growth must be > 1, got {self.range_growth}")
        if int(self.restarts) < 1:
            raise InputError(f"restarts must be positive, got {self.restarts}")
        if int(self.seed) < 0:
            raise InputError(f"seed must be non-negative, got {self.seed}")
        if not self.strict_margin >= 0:
            raise InputError(f"strict_margin must be >= 0, got {self.strict_margin}")
        if int(self.perturb_retry_cap) < 1:
            raise InputError("perturb_retry_cap must be positive")
        if not 0 < self.min_proportion < 0.5:
            raise InputError("min_proportion must be in (0, 0.5)")
        if int(self.max_iterations) < 1:
            raise InputError("max_iterations must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = {"kind": self.mode.kind, "value": self.mode.value}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HeuristicConfig":
        d = dict(d)
        mode = d.pop("mode", None) or {"kind": "plain", "value": 0.0}
        return cls(mode=ConsistencyMode(mode["kind"], mode["value"]), **d)


@dataclass(frozen=True)
class IterationRecord:
    restart: int
    iteration: int
    g: float
    range: float
    selected: int
    lp_status: str
    y: tuple[float, ...] = ()

    def line(self) -> str:
        ys = ",".join(f"{v:.9g}" for v in self.y)
        return (f"restart={self.restart} iter={self.iteration} g={self.g:.12g} "
                f"range={self.range:.6g} selected={self.selected} lp={self.lp_status} y={ys}")


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: np.ndarray
    y: np.ndarray
    g_value: float
    selected_count: int
    consistent: bool
    iterations: int
    restart_index: int
    seed: int
    error: str | None = None
    improvements: int = 0
    history: tuple[IterationRecord, ...] = field(default=(), repr=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def rank_key(self):
        return (not self.consistent, -self.selected_count, self.g_value, self.restart_index)


@dataclass(frozen=True, eq=False)
class RunOutcome:
    best: SolveResult
    results: tuple[SolveResult, ...]
    assignment: FeatureAssignment


def initialize(A, B_S, f: FeatureAssignment):
    """All features selected (tied ones excepted) and ``y_r`` = share of features in cluster r."""
    x = np.where(f.tied, 0.0, 1.0)
    y = f.sizes / f.m
    return x, y


def perturb(y, range_, rng, lo=1e-6, retry_cap=100):
    """Move one random proportion within ``range_`` and rebalance another so the sum stays 1.

    Returns ``(y_new, moved)``.  When no acceptable draw is found within
    ``retry_cap`` attempts the input is returned unchanged with ``moved=False``.
    """
    y = np.asarray(y, dtype=float)
    k = y.size
    for _ in range(retry_cap):
        r1 = int(rng.integers(k))
        low = max(y[r1] - range_, lo)
        high = min(y[r1] + range_, 1.0)
        if high <= low:
            continue
        value = float(rng.uniform(low, high))
        r2 = int(rng.integers(k - 1))
        if r2 >= r1:
            r2 += 1
        if value <= lo:
            continue
        new = y.copy()
        new[r1] = value
        new[r2] = 0.0
        new[r2] = 1.0 - new.sum()
        if lo < new[r2] <= 1.0:
            return new, True
    return y.copy(), False


def run_single(A, B_S, f: FeatureAssignment, config: HeuristicConfig, restart_index: int = 0) -> SolveResult:
    """One randomized descent from the all-features start."""
    mode = config.mode
    seed = int(config.seed) + int(restart_index)
    rng = np.random.default_rng(seed)
    x, y = initialize(A, B_S, f)
    g = g_evaluate(A, B_S, f, x, y, mode)
    best_g, best_x, best_y = g, x, y
    range_ = config.starting_range
    iterations = 0
    improvements = 0
    history = []

    while g > 0 and range_ <= config.max_range and iterations < config.max_iterations:
        iterations += 1
        lp = build_inner(A, B_S, f, y, mode, config.strict_margin)
        try:
            sol = solve(lp)
            status = sol.status.value
        except IterationLimitError:
            sol, status = None, "iteration_limit"
        solved = sol is not None and sol.optimal
        if solved:
            x = round_selection(sol.x)
            g = g_evaluate(A, B_S, f, x, y, mode)
        record = IterationRecord(restart_index, iterations, g, range_, int(x.sum()), status,
                                 tuple(float(v) for v in y))
        history.append(record)
        log.info(record.line())
        if g > 0:
            range_ *= config.range_growth
            if solved and g < best_g:
                best_g, best_x, best_y = g, x, y
                improvements += 1
                range_ = config.starting_range
            y, _ = perturb(y, range_, rng, config.min_proportion, config.perturb_retry_cap)
            g = g_evaluate(A, B_S, f, x, y, mode)

    if g == 0:
        best_g, best_x, best_y = g, x, y
    error = None
    try:
        consistent = is_consistent(A, B_S, best_x, mode, f=f).consistent
    except EmptyClusterError as exc:
        consistent, error = False, str(exc)
    return SolveResult(best_x, best_y, float(best_g), int(best_x.sum()), bool(consistent),
                       iterations, int(restart_index), seed, error, improvements, tuple(history))


def check_instance(A, B_S) -> None:
    m, n = A.values.shape if isinstance(A, DataMatrix) else np.shape(A)
    k = B_S.k if isinstance(B_S, SampleClassification) else int(np.max(B_S)) + 1
    if k < 2:
        raise InputError("at least 2 sample clusters are required")
    if k > min(m, n):
        raise InputError(f"k={k} exceeds min(m, n)={min(m, n)}")


def run(A, B_S, config: HeuristicConfig = HeuristicConfig(), workers: int = 1) -> RunOutcome:
    """``config.restarts`` independent searches (seeds ``seed``, ``seed+1``, ...) and the best one.

    Results are ranked by consistency, then selected count, then g, then
    restart index, so the pick does not depend on completion order.
    """
    check_instance(A, B_S)
    f = classify_features(sample_centroids(A, B_S), allow_ties=True)
    indices = range(int(config.restarts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_single(A, B_S, f, config, i), indices))
    else:
        results = [run_single(A, B_S, f, config, i) for i in indices]
    usable = [r for r in results if not r.failed]
    if not usable:
        raise NoSolutionError(f"all {len(results)} restarts failed: {results[0].error}")
    best = min(usable, key=SolveResult.rank_key)
    return RunOutcome(best, tuple(results), f)


