"""ZO-SGDA and ZO-SGDMSA reference baselines.

Both are reconstructions from the published descriptions: ZO-SGDA is a
simultaneous two-timescale descent-ascent (y moves with ``eta``, x with
``eta / kappa_pow3``); ZO-SGDMSA runs ``msa_inner_len`` ascent steps on y
followed by one descent step on x, both with ``eta``.  Gradients come from
fresh Gaussian estimators every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dro import project_simplex
from .errors import InvalidArgument, OracleFailure
from .estimators import QueryCounter, SmoothingConfig, gauss_grad_x, gauss_grad_y
from .problems import SIMPLEX, sample_batch
from .trace import Evaluator, RunTrace, TraceRecord, named_streams


@dataclass
class BaselineParams:
    eta: float
    batch_x: int
    batch_y: int
    smoothing: SmoothingConfig
    outer_len: int
    kappa_pow3: float = 10.0
    msa_inner_len: int = 10

    def __post_init__(self):
        if self.eta < 0:
            raise InvalidArgument("eta must be >= 0")
        if self.batch_x < 1 or self.batch_y < 1:
            raise InvalidArgument("batch sizes must be >= 1")
        if self.outer_len < 1 or self.msa_inner_len < 1:
            raise InvalidArgument("outer_len and msa_inner_len must be >= 1")
        if not self.kappa_pow3 > 0:
            raise InvalidArgument("kappa_pow3 must be > 0")


def baseline_batches(d1, d2, eps=0.1, C=0.1):
    """Mini-batch sizes C d/eps^2 used for both baselines."""
    return max(1, int(np.ceil(C * d1 / eps**2))), max(1, int(np.ceil(C * d2 / eps**2)))


def sgda_iteration_queries(params: BaselineParams) -> int:
    return 2 * (params.batch_x + params.batch_y)


def sgdmsa_iteration_queries(params: BaselineParams) -> int:
    return 2 * params.batch_y * params.msa_inner_len + 2 * params.batch_x


def _grad_x(problem, x, y, params, rng, counter):
    batch = sample_batch(problem, params.batch_x, rng)
    dirs = rng.standard_normal((params.batch_x, problem.d1))
    return gauss_grad_x(problem, x, y, batch, dirs, params.smoothing.mu1, counter, "baseline_x")[0]


def _grad_y(problem, x, y, params, rng, counter):
    batch = sample_batch(problem, params.batch_y, rng)
    dirs = rng.standard_normal((params.batch_y, problem.d2))
    return gauss_grad_y(problem, x, y, batch, dirs, params.smoothing.mu2, counter, "baseline_y")[0]


def _run(step, per_iter, problem, x0, params, rng, counter, evaluator, y0, query_budget):
    streams = named_streams(rng)
    counter = QueryCounter() if counter is None else counter
    proj = project_simplex if problem.y_constraint == SIMPLEX else None
    trace = RunTrace()
    x = np.array(x0, dtype=float)
    y = problem.default_y0() if y0 is None else np.array(y0, dtype=float)
    try:
        for t in range(params.outer_len):
            if query_budget is not None and counter.total + per_iter > query_budget:
                trace.stopped_on_budget = True
                break
            rec = TraceRecord(t, counter.total, x.copy())
            if evaluator is not None and evaluator.due(t):
                evaluator.fill(rec, y)
            trace.records.append(rec)
            x, y = step(x, y, streams["inner"], counter, proj)
    except OracleFailure as exc:
        exc.trace = trace
        raise
    if evaluator is not None:
        trace.eval_queries = evaluator.eval_queries
    trace.finish(streams["output"])
    return trace


def zo_sgda_run(problem, x0, params: BaselineParams, rng, counter: Optional[QueryCounter] = None,
                evaluator: Optional[Evaluator] = None, y0=None, query_budget=None) -> RunTrace:
    eta_x = params.eta / params.kappa_pow3

    def step(x, y, g, counter, proj):
        v = _grad_x(problem, x, y, params, g, counter)
        u = _grad_y(problem, x, y, params, g, counter)
        y_next = y + params.eta * u
        return x - eta_x * v, proj(y_next) if proj is not None else y_next

    return _run(step, sgda_iteration_queries(params), problem, x0, params, rng, counter,
                evaluator, y0, query_budget)


def zo_sgdmsa_run(problem, x0, params: BaselineParams, rng, counter: Optional[QueryCounter] = None,
                  evaluator: Optional[Evaluator] = None, y0=None, query_budget=None) -> RunTrace:
    def step(x, y, g, counter, proj):
        for _ in range(params.msa_inner_len):
            y = y + params.eta * _grad_y(problem, x, y, params, g, counter)
            if proj is not None:
                y = proj(y)
        v = _grad_x(problem, x, y, params, g, counter)
        return x - params.eta * v, y

    return _run(step, sgdmsa_iteration_queries(params), problem, x0, params, rng, counter,
                evaluator, y0, query_budget)
