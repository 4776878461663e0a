"""Zeroth-order gradient estimators with exact query accounting.

All estimators take their samples and Gaussian directions explicitly, so a
caller can reuse the same draws at two points (the variance-reduction
coupling) and tests can replay them.  Each returns the number of oracle
queries it spent and, if a :class:`QueryCounter` is given, charges it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument, OracleFailure

X_BLOCK = "x"
Y_BLOCK = "y"
BOTH = "both"


@dataclass
class QueryCounter:
    total: int = 0
    breakdown: dict = field(default_factory=dict)

    def add(self, count: int, phase: str = "other") -> None:
        if count < 0:
            raise InvalidArgument("query counts are non-negative")
        self.total += int(count)
        self.breakdown[phase] = self.breakdown.get(phase, 0) + int(count)


@dataclass(frozen=True)
class SmoothingConfig:
    mu1: float
    mu2: float
    tau: float = 1e-3
    delta: float = 1e-3

    def __post_init__(self):
        for name in ("mu1", "mu2", "tau", "delta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be positive and finite, got {value!r}")


@dataclass
class GradEstimate:
    v: np.ndarray
    u: np.ndarray
    queries_used: int = 0


def _charge(counter, count, phase):
    if counter is not None:
        counter.add(count, phase)


def _checked(values):
    if not np.all(np.isfinite(values)):
        raise OracleFailure("oracle returned a non-finite value")
    return values


def _check_batch(batch, dirs, dim):
    m = len(batch)
    if m < 1:
        raise InvalidArgument("empty sample batch")
    dirs = np.asarray(dirs, dtype=float)
    if dirs.shape != (m, dim):
        raise InvalidArgument(f"expected {m} directions of dimension {dim}, got shape {dirs.shape}")
    return dirs


def gauss_grad_x(problem, x, y, batch, dirs, mu1, counter: Optional[QueryCounter] = None,
                 phase: str = "gauss_x"):
    """Forward-difference Gaussian estimate of grad_x f_{mu1}(x, y)."""
    dirs = _check_batch(batch, dirs, problem.d1)
    m = len(batch)
    X = np.vstack([x + mu1 * dirs, np.broadcast_to(x, (m, problem.d1))])
    Y = np.broadcast_to(y, (2 * m, problem.d2))
    vals = _checked(problem.evaluate(X, Y, _repeat(batch, 2)))
    _charge(counter, 2 * m, phase)
    coef = (vals[:m] - vals[m:]) / mu1
    return coef @ dirs / m, 2 * m


def gauss_grad_y(problem, x, y, batch, dirs, mu2, counter: Optional[QueryCounter] = None,
                 phase: str = "gauss_y"):
    """Forward-difference Gaussian estimate of grad_y f_{mu2}(x, y)."""
    dirs = _check_batch(batch, dirs, problem.d2)
    m = len(batch)
    X = np.broadcast_to(x, (2 * m, problem.d1))
    Y = np.vstack([y + mu2 * dirs, np.broadcast_to(y, (m, problem.d2))])
    vals = _checked(problem.evaluate(X, Y, _repeat(batch, 2)))
    _charge(counter, 2 * m, phase)
    coef = (vals[:m] - vals[m:]) / mu2
    return coef @ dirs / m, 2 * m


def gauss_grad_joint(objective, w, batch, dirs, tau, counter: Optional[QueryCounter] = None,
                     phase: str = "gauss_joint"):
    """Gaussian estimate of grad p_tau(w) for a single-block objective."""
    w = np.asarray(w, dtype=float)
    dirs = _check_batch(batch, dirs, w.size)
    m = len(batch)
    W = np.vstack([w + tau * dirs, np.broadcast_to(w, (m, w.size))])
    vals = _checked(objective.evaluate(W, _repeat(batch, 2)))
    _charge(counter, 2 * m, phase)
    coef = (vals[:m] - vals[m:]) / tau
    return coef @ dirs / m, 2 * m


def _repeat(batch, times):
    batch = np.asarray(batch)
    return np.concatenate([batch] * times, axis=0)


def _central_rows(base, delta, samples):
    """Rows base +/- delta e_j for every sample, ordered sample-major."""
    d = base.size
    steps = np.vstack([delta * np.eye(d), -delta * np.eye(d)])
    S = len(samples)
    pts = np.tile(base + steps, (S, 1))
    idx = np.repeat(np.arange(S), 2 * d)
    return pts, np.asarray(samples)[idx]


def _central_reduce(vals, S, d, delta):
    vals = vals.reshape(S, 2, d)
    return (vals[:, 0, :] - vals[:, 1, :]).sum(axis=0) / (2.0 * delta * S)


def coord_grad(problem, x, y, batch, delta, block: str = BOTH,
               counter: Optional[QueryCounter] = None, phase: str = "snapshot") -> GradEstimate:
    """Coordinate-wise central-difference estimate over a sample batch.

    The block not requested is returned as zeros and not charged.
    """
    if not delta > 0:
        raise InvalidArgument(f"delta must be > 0, got {delta!r}")
    if block not in (X_BLOCK, Y_BLOCK, BOTH):
        raise InvalidArgument(f"unknown block {block!r}")
    S = len(batch)
    if S < 1:
        raise InvalidArgument("empty sample batch")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.zeros(problem.d1)
    u = np.zeros(problem.d2)
    queries = 0
    if block in (X_BLOCK, BOTH):
        X, smp = _central_rows(x, delta, batch)
        vals = _checked(problem.evaluate(X, np.broadcast_to(y, (len(X), problem.d2)), smp))
        v = _central_reduce(vals, S, problem.d1, delta)
        queries += len(X)
    if block in (Y_BLOCK, BOTH):
        Y, smp = _central_rows(y, delta, batch)
        vals = _checked(problem.evaluate(np.broadcast_to(x, (len(Y), problem.d1)), Y, smp))
        u = _central_reduce(vals, S, problem.d2, delta)
        queries += len(Y)
    _charge(counter, queries, phase)
    return GradEstimate(v, u, queries)


def coord_grad_objective(objective, w, batch, delta, counter: Optional[QueryCounter] = None,
                         phase: str = "snapshot"):
    """Central-difference gradient of a single-block objective; 2*d*|batch| queries."""
    if not delta > 0:
        raise InvalidArgument(f"delta must be > 0, got {delta!r}")
    S = len(batch)
    if S < 1:
        raise InvalidArgument("empty sample batch")
    w = np.asarray(w, dtype=float)
    W, smp = _central_rows(w, delta, batch)
    vals = _checked(objective.evaluate(W, smp))
    _charge(counter, len(W), phase)
    return _central_reduce(vals, S, w.size, delta), len(W)


def spider_update(prev: GradEstimate, point_new, point_old, problem, batches, dirs,
                  cfg: SmoothingConfig, counter: Optional[QueryCounter] = None,
                  phase: str = "inner") -> GradEstimate:
    """Recursive estimator step: prev + estimate(new) - estimate(old).

    ``batches = (M_x, M_y)`` and ``dirs = (nu, omega)``; the same draws are
    used at both points.  Costs 4|M_x| + 4|M_y| queries.
    """
    if not (np.all(np.isfinite(prev.v)) and np.all(np.isfinite(prev.u))):
        raise OracleFailure("carried estimator is not finite")
    (x_new, y_new), (x_old, y_old) = point_new, point_old
    mx, my = batches
    nu, omega = dirs
    if len(mx) != len(nu) or len(my) != len(omega):
        raise InvalidArgument("sample and direction batches must have matching lengths")
    if len(mx) < 1 or len(my) < 1:
        raise InvalidArgument("empty sample batch")
    nu = _check_batch(mx, nu, problem.d1)
    omega = _check_batch(my, omega, problem.d2)
    dv = _coupled_difference(problem, (x_new, y_new), (x_old, y_old), mx, nu, cfg.mu1, 0)
    du = _coupled_difference(problem, (x_new, y_new), (x_old, y_old), my, omega, cfg.mu2, 1)
    queries = 4 * len(mx) + 4 * len(my)
    _charge(counter, queries, phase)
    return GradEstimate(prev.v + dv, prev.u + du, queries)


def _coupled_difference(problem, new, old, batch, dirs, radius, block):
    """Gaussian estimate at ``new`` minus the one at ``old`` with shared draws, in one oracle call."""
    m = len(batch)
    rows = []
    for x, y in (new, old):
        x = np.broadcast_to(np.asarray(x, dtype=float), (m, problem.d1))
        y = np.broadcast_to(np.asarray(y, dtype=float), (m, problem.d2))
        if block == 0:
            rows += [(x + radius * dirs, y), (x, y)]
        else:
            rows += [(x, y + radius * dirs), (x, y)]
    X = np.vstack([r[0] for r in rows])
    Y = np.vstack([r[1] for r in rows])
    vals = _checked(problem.evaluate(X, Y, _repeat(batch, 4))).reshape(4, m)
    coef = ((vals[0] - vals[1]) - (vals[2] - vals[3])) / radius
    return coef @ dirs / m


def smoothing_value_bound(tau: float, l: float, d: int) -> float:
    """Upper bound on |h(x) - h_tau(x)| for an l-smooth h on R^d."""
    return 0.5 * tau**2 * l * d


def smoothing_grad_bound(tau: float, l: float, d: int) -> float:
    """Upper bound on ||grad h_tau(x) - grad h(x)||^2 for an l-smooth h on R^d."""
    return 0.25 * tau**2 * l**2 * (d + 3) ** 3
