"""ZO-ConcaveMaximizer: the variance-reduced inner ascent loop on y."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument
from .estimators import GradEstimate, QueryCounter, SmoothingConfig, spider_update
from .problems import sample_batch


@dataclass
class InnerState:
    x_old: np.ndarray
    x_new: np.ndarray
    y: np.ndarray
    v: np.ndarray
    u: np.ndarray
    step_beta: float
    m: int
    batch_x: int
    batch_y: int

    def __post_init__(self):
        if not self.step_beta > 0:
            raise InvalidArgument("step_beta must be > 0")
        if self.m < 0:
            raise InvalidArgument("m must be >= 0")
        if self.batch_x < 1 or self.batch_y < 1:
            raise InvalidArgument("inner batch sizes must be >= 1")


@dataclass
class InnerResult:
    y_next: np.ndarray
    v_carry: np.ndarray
    u_carry: np.ndarray
    chosen_index: int
    queries: int
    candidates: Optional[list] = None


def inner_queries(m: int, batch_x: int, batch_y: int) -> int:
    return 4 * (batch_x + batch_y) * (m + 2)


def _draws(problem, state, rng):
    mx = sample_batch(problem, state.batch_x, rng)
    my = sample_batch(problem, state.batch_y, rng)
    nu = rng.standard_normal((state.batch_x, problem.d1))
    omega = rng.standard_normal((state.batch_y, problem.d2))
    return (mx, my), (nu, omega)


def maximize_step(state: InnerState, problem, cfg: SmoothingConfig,
                  projection: Optional[Callable] = None, rng: np.random.Generator = None,
                  counter: Optional[QueryCounter] = None, keep_candidates: bool = False) -> InnerResult:
    """Advance y by m+2 recursive ascent steps with x frozen at ``x_new``.

    The first (bridge) step carries the estimators across the x move, the
    loop then runs m+1 further steps.  Candidates ``y_0..y_m`` are recorded
    with the estimators evaluated at them; one is returned uniformly at
    random together with its own estimator pair.
    """
    rng = np.random.default_rng() if rng is None else rng
    counter = QueryCounter() if counter is None else counter
    start = counter.total
    x_new = np.asarray(state.x_new, dtype=float)
    est = GradEstimate(np.asarray(state.v, dtype=float), np.asarray(state.u, dtype=float))
    y_cur = np.asarray(state.y, dtype=float)

    batches, dirs = _draws(problem, state, rng)
    est = spider_update(est, (x_new, y_cur), (state.x_old, y_cur), problem, batches, dirs, cfg, counter)
    candidates = [(y_cur.copy(), est.v.copy(), est.u.copy())]

    for k in range(1, state.m + 2):
        y_next = y_cur + state.step_beta * est.u
        if projection is not None:
            y_next = projection(y_next)
        batches, dirs = _draws(problem, state, rng)
        est = spider_update(est, (x_new, y_next), (x_new, y_cur), problem, batches, dirs, cfg, counter)
        y_cur = y_next
        if k <= state.m:
            candidates.append((y_cur.copy(), est.v.copy(), est.u.copy()))

    idx = int(rng.integers(0, state.m + 1))
    y_out, v_out, u_out = candidates[idx]
    return InnerResult(y_out, v_out, u_out, idx, counter.total - start,
                       candidates if keep_candidates else None)
