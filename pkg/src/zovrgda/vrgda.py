"""ZO-VRGDA outer loop and its parameter schedules."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .concave_maximizer import InnerState, inner_queries, maximize_step
from .dro import project_simplex
from .errors import InvalidArgument, OracleFailure
from .estimators import BOTH, QueryCounter, SmoothingConfig, coord_grad
from .isarah import FULL_SUM, LARGE_BATCH, IsarahParams, estimate_grad0, isarah_defaults, isarah_run
from .problems import SIMPLEX, sample_batch
from .trace import Evaluator, RunTrace, TraceRecord, named_streams

THEORY = "theory"
PRACTICAL = "practical"


@dataclass
class VrgdaParams:
    zeta: float
    alpha: float
    beta: float
    epoch_len: int
    inner_len: int
    snapshot_batch: int
    batch_x: int
    batch_y: int
    outer_len: int
    smoothing: SmoothingConfig
    snapshot_mode: str = LARGE_BATCH
    init: Optional[IsarahParams] = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidArgument("alpha and beta must be > 0")
        if self.epoch_len < 1 or self.outer_len < 1:
            raise InvalidArgument("epoch_len and outer_len must be >= 1")
        if self.inner_len < 0:
            raise InvalidArgument("inner_len must be >= 0")
        if min(self.snapshot_batch, self.batch_x, self.batch_y) < 1:
            raise InvalidArgument("batch sizes must be >= 1")
        if self.snapshot_mode not in (LARGE_BATCH, FULL_SUM):
            raise InvalidArgument(f"unknown snapshot mode {self.snapshot_mode!r}")

    def snapshot_queries(self, d1, d2, n=None):
        size = n if self.snapshot_mode == FULL_SUM else self.snapshot_batch
        return 2 * size * (d1 + d2)

    def iteration_queries(self):
        return inner_queries(self.inner_len, self.batch_x, self.batch_y)


def _ceil(v):
    return max(1, math.ceil(v - 1e-9 * abs(v)))


def vrgda_defaults(l, mu, sigma, d1, d2, eps, phi_gap_estimate, profile=THEORY,
                   n=None, max_batch=None) -> VrgdaParams:
    """Hyperparameters for ZO-VRGDA.

    ``theory`` returns the convergence-guaranteeing schedule verbatim (with
    ceilings on integer quantities).  For finite sums it switches to
    full-sample snapshots, with the sqrt(n)-scaled batches when n >= kappa^2
    and constant batches with q = 1 otherwise.  ``practical`` keeps the same
    scalings with small constants.
    """
    if min(l, mu, d1, d2, phi_gap_estimate) <= 0 or sigma < 0:
        raise InvalidArgument("l, mu, d1, d2, phi_gap_estimate must be positive; sigma >= 0")
    if not 0 < eps < 1:
        raise InvalidArgument("eps must lie in (0, 1)")
    kappa = l / mu
    smoothing = SmoothingConfig(
        mu1=eps / (71 * kappa**2.5 * l * (d1 + 6) ** 1.5),
        mu2=eps / (71 * kappa**2.5 * l * (d2 + 6) ** 1.5),
        tau=eps / (71 * kappa**2.5 * l * (d2 + 6) ** 1.5),
        delta=eps / (71 * kappa * l * math.sqrt(d1 + d2)),
    )
    if profile == THEORY:
        mode = LARGE_BATCH
        s1 = _ceil(40320 * sigma**2 * kappa**2 / eps**2) if sigma > 0 else 1
        sx = _ceil(5600 * (d1 + 4) * kappa / eps)
        sy = _ceil(5600 * (d2 + 4) * kappa / eps)
        q = _ceil(2800 * kappa / (13 * eps * (kappa + 1)))
        if n is not None:
            mode = FULL_SUM
            s1 = n
            if n >= kappa**2:
                sx = _ceil(5600 * (d1 + 4) * kappa * math.sqrt(n))
                sy = _ceil(5600 * (d2 + 4) * kappa * math.sqrt(n))
                q = _ceil(2800 * kappa * math.sqrt(n) / (13 * (kappa + 1)))
            else:
                sx = 56 * (d1 + 4) + 420
                sy = 56 * (d2 + 4) + 420
                q = 1
        return VrgdaParams(
            zeta=1.0 / kappa,
            alpha=1.0 / (24 * (kappa + 1) * l),
            beta=2.0 / (13 * l),
            epoch_len=q,
            inner_len=_ceil(104 * kappa) - 1,
            snapshot_batch=s1,
            batch_x=sx,
            batch_y=sy,
            outer_len=_ceil(max(1728 * (kappa + 1) * l * phi_gap_estimate / eps**2, 810 * kappa / eps**2)),
            smoothing=smoothing,
            snapshot_mode=mode,
        )
    if profile == PRACTICAL:
        s1 = _ceil(sigma**2 * kappa**2 / eps**2) if sigma > 0 else 1
        mode = LARGE_BATCH
        if n is not None and s1 >= n:
            s1, mode = n, FULL_SUM
        sx = _ceil((d1 + 4) * kappa / eps)
        sy = _ceil((d2 + 4) * kappa / eps)
        if max_batch is not None:
            sx, sy = min(sx, max_batch), min(sy, max_batch)
        return VrgdaParams(
            zeta=1.0 / kappa,
            alpha=1.0 / (2 * (kappa + 1) * l),
            beta=1.0 / (3 * l),
            epoch_len=_ceil(1 / eps),
            inner_len=_ceil(2 * kappa),
            snapshot_batch=s1,
            batch_x=sx,
            batch_y=sy,
            outer_len=_ceil(max((kappa + 1) * l * phi_gap_estimate / eps**2, kappa / eps**2)),
            smoothing=smoothing,
            snapshot_mode=mode,
        )
    raise InvalidArgument(f"unknown profile {profile!r}")


def _projection(problem):
    return project_simplex if problem.y_constraint == SIMPLEX else None


def initialize_y(problem, x0, params: VrgdaParams, rng, counter):
    """Approximately maximize f(x0, .) with ZO-iSARAH to accuracy zeta.

    The schedule uses the smoothness constant of the y-block, which is the
    constant of the minimization problem ZO-iSARAH actually solves.
    """
    objective = problem.inner_objective(x0)
    init = params.init
    w0 = problem.default_y0()
    if init is None:
        full = problem.n is not None and params.snapshot_mode == FULL_SUM
        mode = FULL_SUM if full else LARGE_BATCH
        sigma = problem.variance_sigma
        l_y = max(problem.y_lipschitz, problem.strong_concavity_mu)
        probe = isarah_defaults(l_y, problem.strong_concavity_mu, sigma,
                                problem.d2, params.zeta, 1.0, mode)
        g0 = estimate_grad0(objective, w0, probe.delta, probe.snapshot_batch, rng, counter, full)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            init = isarah_defaults(l_y, problem.strong_concavity_mu, sigma,
                                   problem.d2, params.zeta, max(g0, 1e-300), mode)
    y0 = isarah_run(objective, w0, init, rng, counter).w_out
    proj = _projection(problem)
    return proj(y0) if proj is not None else y0


def vrgda_run(problem, x0, params: VrgdaParams, rng, evaluator: Optional[Evaluator] = None,
              counter: Optional[QueryCounter] = None, y0=None,
              query_budget: Optional[int] = None) -> RunTrace:
    """Run ZO-VRGDA from ``x0``.

    ``rng`` is a seed or Generator; it is split into named streams so the
    init, snapshot, inner-loop and output draws are independent.  When ``y0``
    is given the ZO-iSARAH initialization is skipped.  The run stops before
    any iteration that would push the counter past ``query_budget``.
    """
    streams = named_streams(rng)
    counter = QueryCounter() if counter is None else counter
    trace = RunTrace()
    proj = _projection(problem)
    try:
        if y0 is None:
            y = initialize_y(problem, x0, params, streams["init"], counter)
        else:
            y = np.array(y0, dtype=float)
        trace.init_queries = counter.total
        x = np.array(x0, dtype=float)
        full = params.snapshot_mode == FULL_SUM
        if full and problem.n is None:
            raise InvalidArgument("full-sum snapshots need a finite-sum problem")
        v = u = None
        for t in range(params.outer_len):
            snap = t % params.epoch_len == 0
            cost = params.iteration_queries()
            if snap:
                cost += params.snapshot_queries(problem.d1, problem.d2, problem.n)
            if query_budget is not None and counter.total + cost > query_budget:
                trace.stopped_on_budget = True
                break
            rec = TraceRecord(t, counter.total, x.copy())
            if snap:
                batch = problem.all_samples() if full else sample_batch(
                    problem, params.snapshot_batch, streams["snapshot"])
                est = coord_grad(problem, x, y, batch, params.smoothing.delta, BOTH, counter)
                v, u = est.v, est.u
                trace.snapshot_iters.append(t)
            x_next = x - params.alpha * v
            trace.step_sizes.append(params.alpha)
            state = InnerState(x, x_next, y, v, u, params.beta, params.inner_len,
                               params.batch_x, params.batch_y)
            inner = maximize_step(state, problem, params.smoothing, proj, streams["inner"], counter)
            if evaluator is not None and evaluator.due(t):
                evaluator.fill(rec, y, v, u)
            trace.records.append(rec)
            x, y, v, u = x_next, inner.y_next, inner.v_carry, inner.u_carry
    except OracleFailure as exc:
        exc.trace = trace
        raise
    if evaluator is not None:
        trace.eval_queries = evaluator.eval_queries
    trace.finish(streams["output"])
    return trace


def vrgda_query_total(params: VrgdaParams, iterations: int, d1: int, d2: int, n=None,
                      init_queries: int = 0) -> int:
    """Closed-form query count of ``iterations`` outer steps."""
    epochs = math.ceil(iterations / params.epoch_len)
    return (epochs * params.snapshot_queries(d1, d2, n)
            + iterations * params.iteration_queries() + init_queries)


def with_overrides(params: VrgdaParams, **changes) -> VrgdaParams:
    return replace(params, **{k: v for k, v in changes.items() if v is not None})
