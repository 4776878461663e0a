"""Small problems with hand-checkable answers shared by the test modules."""

import numpy as np

from zovrgda.problems import MinimaxProblem, Objective


def linear_problem(a, b, n=1):
    """F(x, y; i) = a'x + b'y for every component."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return MinimaxProblem(len(a), len(b), lambda x, y, i: a @ x + b @ y, n=n)


def counting(problem):
    """Wrap ``problem.evaluate`` so every row it receives is tallied."""
    calls = {"rows": 0}
    inner = problem.evaluate

    def evaluate(X, Y, samples):
        calls["rows"] += len(samples)
        return inner(X, Y, samples)

    problem.evaluate = evaluate
    return calls


def separable_objective(g, d):
    """Noiseless single-block objective sum_j g(w_j)."""
    return Objective(d, lambda W, s: np.sum(g(np.atleast_2d(W)), axis=1), n=1)
