import numpy as np
import pytest

from helpers import counting
from zovrgda.concave_maximizer import InnerState, inner_queries, maximize_step
from zovrgda.dro import project_simplex
from zovrgda.errors import InvalidArgument, OracleFailure
from zovrgda.estimators import QueryCounter, SmoothingConfig
from zovrgda.problems import QuadraticSaddle

CFG = SmoothingConfig(mu1=1e-4, mu2=1e-4)


def _state(prob, x, y, m, beta=0.3, bx=3, by=4, x_new=None):
    v, u = prob.true_grad(x, y)
    return InnerState(x, x if x_new is None else x_new, y, v, u, beta, m, bx, by)


def test_m_zero_single_candidate():
    rng = np.random.default_rng(0)
    prob = QuadraticSaddle.random(2, 3, 2.0, 0.1, rng, n=5)
    x, y = rng.standard_normal(2), rng.standard_normal(3)
    for seed in range(5):
        out = maximize_step(_state(prob, x, y, 0, x_new=x + 0.1), prob, CFG,
                            rng=np.random.default_rng(seed), keep_candidates=True)
        assert out.chosen_index == 0
        assert len(out.candidates) == 1
        assert np.array_equal(out.y_next, y)


def test_pure_concave_quadratic_contracts():
    d = 3
    prob = QuadraticSaddle(np.eye(2), np.zeros((2, d)), np.eye(d), np.zeros(2), np.zeros(d), n=1)
    y0 = np.array([1.0, -2.0, 0.5])
    beta = 0.25
    # the coupled Gaussian differences are exact only in expectation, so use a big batch
    out = maximize_step(_state(prob, np.zeros(2), y0, 6, beta, 1, 20000), prob, CFG,
                        rng=np.random.default_rng(1), keep_candidates=True)
    for k, (y, _, _) in enumerate(out.candidates):
        assert np.linalg.norm(y - (1 - beta) ** k * y0) <= 0.03 * np.linalg.norm(y0)


@pytest.mark.parametrize("m,bx,by", [(0, 1, 1), (3, 2, 5), (7, 4, 1)])
def test_query_formula(m, bx, by):
    rng = np.random.default_rng(2)
    prob = QuadraticSaddle.random(3, 2, 2.0, 0.1, rng, n=6)
    calls = counting(prob)
    counter = QueryCounter()
    out = maximize_step(_state(prob, np.ones(3), np.ones(2), m, bx=bx, by=by), prob, CFG,
                        rng=np.random.default_rng(0), counter=counter)
    assert out.queries == counter.total == calls["rows"] == inner_queries(m, bx, by)
    assert inner_queries(m, bx, by) == 4 * (bx + by) * (m + 2)


def test_returned_estimators_match_chosen_candidate():
    rng = np.random.default_rng(3)
    prob = QuadraticSaddle.random(3, 3, 3.0, 0.2, rng, n=8)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    for seed in range(10):
        out = maximize_step(_state(prob, x, y, 5, x_new=x - 0.05), prob, CFG,
                            rng=np.random.default_rng(seed), keep_candidates=True)
        assert 0 <= out.chosen_index <= 5
        y_c, v_c, u_c = out.candidates[out.chosen_index]
        assert np.array_equal(out.y_next, y_c)
        assert np.array_equal(out.v_carry, v_c)
        assert np.array_equal(out.u_carry, u_c)


def test_projection_keeps_simplex():
    rng = np.random.default_rng(4)
    prob = QuadraticSaddle.random(2, 5, 2.0, 0.5, rng, n=4)
    y0 = np.full(5, 0.2)
    out = maximize_step(_state(prob, np.ones(2), y0, 8, beta=2.0), prob, CFG, project_simplex,
                        np.random.default_rng(0), keep_candidates=True)
    for y, _, _ in out.candidates:
        assert abs(y.sum() - 1.0) <= 1e-12 and y.min() >= 0


def test_inner_loop_reduces_tracking_error():
    rng = np.random.default_rng(5)
    prob = QuadraticSaddle.random(4, 4, 3.0, 0.0, rng, n=1)
    x = rng.standard_normal(4)
    beta = 2.0 / (13 * prob.lipschitz_l)
    wins = 0
    for seed in range(20):
        y = prob.y_star(x) + rng.standard_normal(4)
        before = np.sum(prob.true_grad(x, y)[1] ** 2)
        out = maximize_step(_state(prob, x, y, 104 * 3 - 1, beta, 20, 20), prob, CFG,
                            rng=np.random.default_rng(seed))
        after = np.sum(prob.true_grad(x, out.y_next)[1] ** 2)
        wins += after < before
    assert wins >= 18


def test_state_validation():
    with pytest.raises(InvalidArgument):
        InnerState(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0.0, 1, 1, 1)
    with pytest.raises(InvalidArgument):
        InnerState(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0.1, -1, 1, 1)


def test_non_finite_carry_aborts():
    prob = QuadraticSaddle.random(2, 2, 2.0, 0.1, np.random.default_rng(0), n=2)
    state = InnerState(np.zeros(2), np.zeros(2), np.zeros(2), np.array([np.nan, 0.0]),
                       np.zeros(2), 0.1, 2, 1, 1)
    with pytest.raises(OracleFailure):
        maximize_step(state, prob, CFG, rng=np.random.default_rng(0))
