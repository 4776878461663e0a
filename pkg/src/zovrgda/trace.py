"""Per-iteration run records shared by ZO-VRGDA and the baselines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import UnsupportedDiagnostic
from .problems import estimation_error, tracking_error


@dataclass
class TraceRecord:
    t: int
    queries: int
    x: np.ndarray
    phi: Optional[float] = None
    grad_phi_norm: Optional[float] = None
    delta_t: Optional[float] = None
    Delta_t: Optional[float] = None


@dataclass
class RunTrace:
    records: List[TraceRecord] = field(default_factory=list)
    x_hat: Optional[np.ndarray] = None
    output_index: Optional[int] = None
    init_queries: int = 0
    eval_queries: int = 0
    snapshot_iters: List[int] = field(default_factory=list)
    step_sizes: List[float] = field(default_factory=list)
    stopped_on_budget: bool = False

    @property
    def queries(self):
        return [r.queries for r in self.records]

    def best(self) -> Optional[TraceRecord]:
        scored = [r for r in self.records if r.grad_phi_norm is not None]
        return min(scored, key=lambda r: r.grad_phi_norm) if scored else None

    def finish(self, rng: np.random.Generator) -> None:
        """Draw the output iterate uniformly from the recorded x_t."""
        if self.records:
            self.output_index = int(rng.integers(0, len(self.records)))
            self.x_hat = self.records[self.output_index].x.copy()


class Evaluator:
    """Fills optional diagnostics of a record every ``every`` iterations.

    Evaluation calls never touch the algorithm's query counter; the cost of
    Phi evaluations reported by the problem is accumulated separately.
    """

    def __init__(self, problem, every: int = 1, diagnostics: bool = True,
                 on_record: Optional[Callable[[TraceRecord], None]] = None):
        self.problem = problem
        self.every = max(1, int(every))
        self.diagnostics = diagnostics
        self.on_record = on_record
        self.eval_queries = 0

    def due(self, t: int) -> bool:
        return t % self.every == 0

    def fill(self, rec: TraceRecord, y, v=None, u=None) -> None:
        try:
            phi, grad = self.problem.phi_and_grad(rec.x)
            rec.phi = float(phi)
            rec.grad_phi_norm = float(np.linalg.norm(grad))
            self.eval_queries += int(getattr(self.problem, "phi_eval_cost", 0))
        except UnsupportedDiagnostic:
            pass
        if self.diagnostics and self.problem.has_true_grad:
            try:
                rec.delta_t = tracking_error(self.problem, rec.x, y)
                if v is not None and u is not None:
                    rec.Delta_t = estimation_error(self.problem, rec.x, y, v, u)
            except UnsupportedDiagnostic:
                pass
        if self.on_record is not None:
            self.on_record(rec)


STREAM_NAMES = ("init", "snapshot", "inner", "output")


def named_streams(seed) -> dict:
    """Independent generators for each randomness consumer of a run.

    ``seed`` may be an int or a Generator; the same seed always yields the
    same four streams regardless of how many draws any one of them makes.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63 - 1))
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAM_NAMES, children)}
