"""Continuous inner problem: construction, an exact simplex engine, and 1/2-rounding.

For fixed proportions ``y`` the inner problem is a linear 0-1 program over the
selection ``x``.  We relax ``x`` to ``[0, 1]``, solve the LP exactly, then
round.  The instances are wide (one variable per feature, thousands) and
shallow (``n*(k-1)`` constraints, tens), so the engine keeps a dense inverse
of the basis, whose dimension is the number of constraints, and handles the
``[lo, hi]`` variable bounds implicitly instead of as extra rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import PLAIN, ConsistencyMode, FeatureAssignment, _values, constraint_pairs
from .errors import IterationLimitError, ProportionError

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10
OPT_TOL = 1e-9
REFACTOR_EVERY = 50
# consecutive degenerate pivots before switching to Bland's rule
DEGENERACY_PATIENCE = 20


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """maximize ``objective @ x`` s.t. ``coeffs @ x >= rhs`` and ``lower <= x <= upper``.

    Lower bounds must be finite; upper bounds may be ``inf``.
    """

    objective: np.ndarray
    coeffs: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).ravel()
        nv = c.size
        G = np.array(self.coeffs, dtype=float).reshape(-1, nv)
        h = np.array(self.rhs, dtype=float).ravel()
        lo = np.broadcast_to(np.array(self.lower, dtype=float), (nv,)).copy()
        hi = np.broadcast_to(np.array(self.upper, dtype=float), (nv,)).copy()
        if h.size != G.shape[0]:
            raise ValueError(f"{h.size} right-hand sides for {G.shape[0]} constraints")
        for name, arr in (("objective", c), ("coeffs", G), ("rhs", h), ("lower", lo)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("every variable needs lower <= upper")
        for name, arr in (("objective", c), ("coeffs", G), ("rhs", h), ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    @property
    def constraints(self):
        return [(row, ">=", float(b)) for row, b in zip(self.coeffs, self.rhs)]

    def residuals(self, x) -> np.ndarray:
        return self.coeffs @ np.asarray(x, dtype=float) - self.rhs


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    """Bounded-variable revised simplex on ``M z = b``, ``l <= z <= u``, minimizing ``cost @ z``."""

    def __init__(self, M, b, lower, upper, z, basis, max_iter, feas_tol, piv_tol):
        self.M = M
        self.b = b
        self.lower = lower
        self.upper = upper
        self.z = z
        self.basis = basis
        self.max_iter = max_iter
        self.feas_tol = feas_tol
        self.piv_tol = piv_tol
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.M[:, self.basis]
        self.B_inv = np.linalg.inv(B)
        nonbasic = np.ones(self.z.size, bool)
        nonbasic[self.basis] = False
        self.z[self.basis] = self.B_inv @ (self.b - self.M[:, nonbasic] @ self.z[nonbasic])

    def run(self, cost, pricing="dantzig"):
        """Iterate to optimality; returns False if the objective is unbounded below."""
        n_total = self.z.size
        is_basic = np.zeros(n_total, bool)
        is_basic[self.basis] = True
        bland = pricing == "bland"
        degenerate = 0
        since_refactor = 0
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimitError(f"simplex exceeded {self.max_iter} iterations")
            duals = cost[self.basis] @ self.B_inv
            reduced = cost - duals @ self.M
            at_upper = self.z >= self.upper - self.feas_tol
            at_lower = self.z <= self.lower + self.feas_tol
            movable = self.upper > self.lower
            can_up = ~is_basic & movable & at_lower & (reduced < -OPT_TOL)
            can_down = ~is_basic & movable & at_upper & ~at_lower & (reduced > OPT_TOL)
            eligible = can_up | can_down
            if not eligible.any():
                return True
            candidates = np.flatnonzero(eligible)
            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(reduced[candidates]))])
            sigma = 1.0 if can_up[q] else -1.0

            w = self.B_inv @ self.M[:, q]
            delta = sigma * w
            zb = self.z[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]
            ratios = np.full(delta.size, np.inf)
            dec = delta > self.piv_tol
            inc = delta < -self.piv_tol
            ratios[dec] = (zb[dec] - lb[dec]) / delta[dec]
            inc_finite = inc & np.isfinite(ub)
            ratios[inc_finite] = (ub[inc_finite] - zb[inc_finite]) / -delta[inc_finite]
            np.maximum(ratios, 0.0, out=ratios)
            t_ratio = ratios.min() if ratios.size else np.inf
            t_flip = self.upper[q] - self.lower[q]
            if not np.isfinite(t_ratio) and not np.isfinite(t_flip):
                return False
            self.iterations += 1

            if t_flip <= t_ratio:
                step = t_flip
                self.z[q] = self.upper[q] if sigma > 0 else self.lower[q]
                self.z[self.basis] = zb - step * delta
                degenerate = 0
                continue

            step = t_ratio
            ties = np.flatnonzero(ratios <= t_ratio + self.feas_tol * 1e-3)
            if bland:
                p = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                p = int(ties[np.argmax(np.abs(delta[ties]))])
            leaving = self.basis[p]
            self.z[self.basis] = zb - step * delta
            self.z[leaving] = self.lower[leaving] if delta[p] > 0 else self.upper[leaving]
            self.z[q] = self.z[q] + sigma * step

            pivot = w[p]
            row = self.B_inv[p] / pivot
            self.B_inv -= np.outer(w, row)
            self.B_inv[p] = row
            self.basis[p] = q
            is_basic[leaving] = False
            is_basic[q] = True

            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            if step <= self.feas_tol:
                degenerate += 1
                if degenerate >= DEGENERACY_PATIENCE:
                    bland = True
            else:
                degenerate = 0


def solve(lp: LinearProgram, *, feas_tol=FEAS_TOL, piv_tol=PIVOT_TOL, max_iter=None,
          pricing="dantzig") -> LpSolution:
    """Solve ``lp`` to optimality with a two-phase bounded simplex.

    Constraint rows are normalized to unit max-coefficient internally, and
    feasibility is certified on the normalized rows.  ``pricing`` is
    ``"dantzig"`` (largest reduced cost, falling back to Bland's rule after
    a run of degenerate pivots) or ``"bland"`` throughout.  The result is a
    deterministic function of the input.
    """
    if pricing not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    if np.any(np.isinf(lp.lower)):
        raise ValueError("lower bounds must be finite")
    nv, nc = lp.num_vars, lp.num_constraints
    if max_iter is None:
        max_iter = 50 * (nv + nc)

    x0 = np.where((lp.objective > 0) & np.isfinite(lp.upper), lp.upper, lp.lower).astype(float)
    if nc == 0:
        if np.any((lp.objective > 0) & np.isinf(lp.upper)):
            return LpSolution(LpStatus.UNBOUNDED, x0, np.inf)
        return LpSolution(LpStatus.OPTIMAL, x0, float(lp.objective @ x0))

    scale = np.abs(lp.coeffs).max(axis=1)
    scale[scale == 0] = 1.0
    G = lp.coeffs / scale[:, None]
    h = lp.rhs / scale
    residual = h - G @ x0
    needs_art = np.flatnonzero(residual > 0)
    na = needs_art.size

    M = np.zeros((nc, nv + nc + na))
    M[:, :nv] = G
    M[:, nv:nv + nc] = -np.eye(nc)
    M[needs_art, nv + nc + np.arange(na)] = 1.0
    lower = np.concatenate([lp.lower, np.zeros(nc + na)])
    upper = np.concatenate([lp.upper, np.full(nc, np.inf), np.full(na, np.inf)])
    z = np.concatenate([x0, np.zeros(nc + na)])
    basis = list(range(nv, nv + nc))
    for slot, t in enumerate(needs_art):
        basis[t] = nv + nc + slot

    engine = _Simplex(M, h, lower, upper, z, basis, max_iter, feas_tol, piv_tol)
    if na:
        cost1 = np.zeros(z.size)
        cost1[nv + nc:] = 1.0
        engine.run(cost1, pricing)
        engine.refactor()
        if engine.z[nv + nc:].sum() > feas_tol:
            x = np.clip(engine.z[:nv], lp.lower, lp.upper)
            return LpSolution(LpStatus.INFEASIBLE, x, float("nan"), engine.iterations)
        engine.upper[nv + nc:] = 0.0
        engine.z[nv + nc:] = np.clip(engine.z[nv + nc:], 0.0, 0.0)
    cost2 = np.zeros(z.size)
    cost2[:nv] = -lp.objective
    if not engine.run(cost2, pricing):
        return LpSolution(LpStatus.UNBOUNDED, np.clip(engine.z[:nv], lp.lower, lp.upper),
                          np.inf, engine.iterations)
    engine.refactor()
    x = np.clip(engine.z[:nv], lp.lower, lp.upper)
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.objective @ x), engine.iterations)


def build_inner(A, B_S, f: FeatureAssignment, y, mode: ConsistencyMode = PLAIN,
                strict_margin: float = 0.0) -> LinearProgram:
    """Continuous relaxation of the inner selection problem at fixed proportions ``y``.

    One constraint per sample ``j`` and rival cluster ``xi`` (samples major):
    ``sum_i a_ij (f_ir / y_r - kappa * f_ixi / y_xi) x_i >= offset + strict_margin``
    where ``r`` is the sample's own cluster.  Features with a tied
    sample-centroid maximum are pinned to 0.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (f.k,) or not np.all(y > 0):
        raise ProportionError(f"y must be {f.k} positive proportions, got {y.tolist()}")
    values = _values(A)
    W = f.membership / y
    J, R, X = constraint_pairs(B_S, f.k)
    coeffs = (values[:, J] * (W[:, R] - mode.kappa * W[:, X])).T
    rhs = np.full(J.size, mode.offset + strict_margin)
    upper = np.where(f.tied, 0.0, 1.0)
    return LinearProgram(np.ones(f.m), coeffs, rhs, np.zeros(f.m), upper)


def round_selection(x_frac) -> np.ndarray:
    """Entries above 1/2 become 1, the rest (including exactly 1/2) become 0."""
    x_frac = np.asarray(x_frac, dtype=float)
    if np.any(x_frac < -FEAS_TOL) or np.any(x_frac > 1 + FEAS_TOL):
        raise ValueError("relaxed selection entries must lie in [0, 1]")
    return (x_frac > 0.5).astype(float)


def format_lp(lp: LinearProgram, precision: int = 12) -> str:
    """Plain-text dump, one constraint per line, fixed precision, for external cross-checks."""
    fmt = f"{{:+.{precision}e}}"

    def terms(row):
        return " ".join(f"{fmt.format(v)} x{i + 1}" for i, v in enumerate(row) if v != 0) or "0"

    lines = [f"# maximize; {lp.num_vars} variables; {lp.num_constraints} constraints",
             f"max: {terms(lp.objective)}"]
    for t, (row, _, b) in enumerate(lp.constraints):
        lines.append(f"c{t + 1}: {terms(row)} >= {fmt.format(b)}")
    for i, (lo, hi) in enumerate(zip(lp.lower, lp.upper)):
        lines.append(f"bound x{i + 1}: {fmt.format(lo)} <= x{i + 1} <= {fmt.format(hi)}")
    return "\n".join(lines) + "\n"


def dump_lp(lp: LinearProgram, path, precision: int = 12) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(format_lp(lp, precision))
