"""ZO-iSARAH: recursive variance-reduced zeroth-order minimization.

Used to initialize y in ZO-VRGDA (on w -> -F(x0, w)) and usable as a
standalone solver for strongly convex stochastic problems.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument, OracleFailure
from .estimators import QueryCounter, coord_grad_objective, gauss_grad_joint
from .problems import sample_batch

LARGE_BATCH = "large-batch"
FULL_SUM = "full-sum"


@dataclass
class IsarahParams:
    gamma: float
    inner_len: int
    outer_len: int
    snapshot_batch: int
    inner_batch: int
    tau: float
    delta: float
    snapshot_mode: str = LARGE_BATCH

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgument("gamma must be > 0")
        if self.inner_len < 1 or self.outer_len < 1:
            raise InvalidArgument("inner_len and outer_len must be >= 1")
        if self.snapshot_batch < 1 or self.inner_batch < 1:
            raise InvalidArgument("batch sizes must be >= 1")
        if not (self.tau > 0 and self.delta > 0):
            raise InvalidArgument("tau and delta must be > 0")
        if self.snapshot_mode not in (LARGE_BATCH, FULL_SUM):
            raise InvalidArgument(f"unknown snapshot mode {self.snapshot_mode!r}")

    def queries_per_outer(self, d: int, n: Optional[int] = None) -> int:
        snap = n if self.snapshot_mode == FULL_SUM else self.snapshot_batch
        return 2 * d * snap + 4 * self.inner_batch * (self.inner_len - 1)


@dataclass
class IsarahResult:
    w_out: np.ndarray
    trace: list = field(default_factory=list)  # (outer_iter, grad_norm_sq or None, queries)
    iterates: list = field(default_factory=list)


def isarah_defaults(l, mu, sigma, d, eps, grad0_norm_sq, snapshot_mode=LARGE_BATCH) -> IsarahParams:
    """Parameter schedule that guarantees E||grad p_tau(w_T)||^2 <= eps.

    The full-sum schedule uses the tighter snapshot constants available
    when the snapshot gradient carries no sampling noise.
    """
    if min(l, mu, d, eps, grad0_norm_sq) <= 0 or sigma < 0:
        raise InvalidArgument("l, mu, d, eps, grad0_norm_sq must be positive; sigma >= 0")
    kappa = l / mu
    full = snapshot_mode == FULL_SUM
    factor = 4.0 if full else 5.0
    if eps >= grad0_norm_sq:
        warnings.warn("eps >= initial gradient norm; clamping outer_len to 1", stacklevel=2)
        outer = 1
    else:
        outer = max(1, math.ceil(math.log2(factor * grad0_norm_sq / eps)))
    if full:
        delta = math.sqrt(eps) / (3 * l * math.sqrt(d))
        tau = min(math.sqrt(eps) / (3 * l * (d + 3) ** 1.5), math.sqrt(eps / (2 * l * mu * d)))
    else:
        delta = 2 * math.sqrt(eps) / (5 * l * math.sqrt(d))
        tau = min(math.sqrt(eps) / (3 * l * (d + 3) ** 1.5), math.sqrt(2 * eps / (5 * l * mu * d)))
    return IsarahParams(
        gamma=2.0 / (9.0 * l),
        inner_len=max(1, math.ceil(36 * kappa) - 1),
        outer_len=outer,
        snapshot_batch=max(1, math.ceil(25 * sigma**2 / eps)),
        inner_batch=int(d),
        tau=tau,
        delta=delta,
        snapshot_mode=snapshot_mode,
    )


def isarah_noise_floor(params: IsarahParams, l, mu, sigma, d) -> float:
    """Stationary level of the per-epoch bound on E||grad p_tau||^2."""
    sampling = 0.0 if params.snapshot_mode == FULL_SUM else 5 * sigma**2 / params.snapshot_batch
    return (sampling + 1.25 * d * l**2 * params.delta**2
            + 11.0 / 8.0 * params.tau**2 * l**2 * (d + 3) ** 3
            + 0.5 * params.tau**2 * l * mu * d)


def _snapshot(objective, w, params, rng, counter):
    if params.snapshot_mode == FULL_SUM:
        if objective.n is None:
            raise InvalidArgument("full-sum snapshots need a finite-sum objective")
        batch = objective.all_samples()
    else:
        batch = sample_batch(objective, params.snapshot_batch, rng)
    return coord_grad_objective(objective, w, batch, params.delta, counter, "init-snapshot")[0]


def estimate_grad0(objective, w0, delta, batch_size, rng, counter=None, full_sum=False):
    """One coordinate-difference probe of ||grad p(w0)||^2, charged as 'init-probe'."""
    batch = objective.all_samples() if full_sum else sample_batch(objective, batch_size, rng)
    g, _ = coord_grad_objective(objective, w0, batch, delta, counter, "init-probe")
    return float(g @ g)


def isarah_run(objective, w0, params: IsarahParams, rng: np.random.Generator,
               counter: Optional[QueryCounter] = None) -> IsarahResult:
    """Run ``params.outer_len`` epochs and return the last selected iterate."""
    counter = QueryCounter() if counter is None else counter
    w_tilde = np.array(w0, dtype=float)
    result = IsarahResult(w_tilde.copy())
    d = objective.d
    for t in range(1, params.outer_len + 1):
        try:
            iterates = [w_tilde.copy()]
            v = _snapshot(objective, w_tilde, params, rng, counter)
            iterates.append(iterates[0] - params.gamma * v)
            for _ in range(1, params.inner_len):
                batch = sample_batch(objective, params.inner_batch, rng)
                psi = rng.standard_normal((params.inner_batch, d))
                g_new, _ = gauss_grad_joint(objective, iterates[-1], batch, psi, params.tau, counter, "init-inner")
                g_old, _ = gauss_grad_joint(objective, iterates[-2], batch, psi, params.tau, counter, "init-inner")
                v = v + g_new - g_old
                iterates.append(iterates[-1] - params.gamma * v)
        except OracleFailure as exc:
            exc.trace = result
            raise
        # I+1 candidates w_0..w_I; with I == 1 the inner loop is empty.
        w_tilde = iterates[rng.integers(0, len(iterates))].copy()
        grad_sq = None
        if objective.has_true_grad:
            g = objective.true_grad(w_tilde)
            grad_sq = float(g @ g)
        result.trace.append((t, grad_sq, counter.total))
        result.iterates.append(w_tilde.copy())
    result.w_out = w_tilde
    return result
