import numpy as np
import pytest

from helpers import counting
from zovrgda.baselines import (
    BaselineParams,
    baseline_batches,
    sgda_iteration_queries,
    sgdmsa_iteration_queries,
    zo_sgda_run,
    zo_sgdmsa_run,
)
from zovrgda.dro import DroInstance, synthetic_dataset
from zovrgda.errors import InvalidArgument
from zovrgda.estimators import QueryCounter, SmoothingConfig
from zovrgda.problems import QuadraticSaddle
from zovrgda.trace import Evaluator

SMOOTH = SmoothingConfig(mu1=1e-4, mu2=1e-4)
RUNS = [zo_sgda_run, zo_sgdmsa_run]


def _params(**kw):
    base = dict(eta=0.05, batch_x=3, batch_y=4, smoothing=SMOOTH, outer_len=6, msa_inner_len=3)
    base.update(kw)
    return BaselineParams(**base)


def test_baseline_batch_sizes():
    assert baseline_batches(112, 50) == (1120, 500)
    assert baseline_batches(3, 2, eps=0.5, C=1.0) == (12, 8)


@pytest.mark.parametrize("run", RUNS)
def test_zero_step_freezes_iterates(run):
    prob = QuadraticSaddle.random(3, 3, 2.0, 0.1, np.random.default_rng(0), n=4)
    tr = run(prob, np.ones(3), _params(eta=0.0), 0)
    assert all(np.array_equal(r.x, np.ones(3)) for r in tr.records)


@pytest.mark.parametrize("run,per_iter", [(zo_sgda_run, sgda_iteration_queries),
                                          (zo_sgdmsa_run, sgdmsa_iteration_queries)])
def test_query_formula(run, per_iter):
    prob = QuadraticSaddle.random(3, 2, 2.0, 0.1, np.random.default_rng(1), n=5)
    calls = counting(prob)
    counter = QueryCounter()
    params = _params()
    run(prob, np.ones(3), params, 0, counter)
    assert counter.total == 6 * per_iter(params) == calls["rows"]
    assert sgda_iteration_queries(params) == 2 * (3 + 4)
    assert sgdmsa_iteration_queries(params) == 2 * 4 * 3 + 2 * 3


@pytest.mark.parametrize("run", RUNS)
def test_inner_ascent_with_frozen_x(run):
    prob = QuadraticSaddle.random(2, 3, 2.0, 0.0, np.random.default_rng(2), n=1)
    x0 = np.array([0.5, -0.5])
    # eta_x is eta / kappa_pow3 for SGDA; a huge ratio freezes x for it
    params = _params(eta=0.3, batch_y=200, outer_len=60, kappa_pow3=1e12)
    tr = run(prob, x0, params, 0, evaluator=Evaluator(prob))
    if run is zo_sgda_run:
        assert np.allclose(tr.records[-1].x, x0, atol=1e-9)
    assert tr.records[-1].delta_t < 0.05 * tr.records[0].delta_t


@pytest.mark.parametrize("run", RUNS)
def test_simplex_respected(run):
    ds = synthetic_dataset(12, 6, np.random.default_rng(3), active=3)
    inst = DroInstance(ds)
    seen = []

    class Spy:
        def __init__(self):
            self.every, self.eval_queries = 1, 0

        def due(self, t):
            return True

        def fill(self, rec, y, v=None, u=None):
            seen.append(np.array(y))

    run(inst, np.zeros(6), _params(eta=0.5, outer_len=5), 0, evaluator=Spy())
    for y in seen:
        assert abs(y.sum() - 1) < 1e-12 and y.min() >= 0


def test_budget_respected():
    prob = QuadraticSaddle.random(3, 3, 2.0, 0.1, np.random.default_rng(4))
    counter = QueryCounter()
    tr = zo_sgdmsa_run(prob, np.ones(3), _params(outer_len=1000), 0, counter, query_budget=500)
    assert tr.stopped_on_budget and counter.total <= 500


def test_param_validation():
    with pytest.raises(InvalidArgument):
        _params(eta=-1.0)
    with pytest.raises(InvalidArgument):
        _params(batch_x=0)
    with pytest.raises(InvalidArgument):
        _params(kappa_pow3=0.0)
