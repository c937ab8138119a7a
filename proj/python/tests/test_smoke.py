import math

import numpy as np
import pytest

import logsinkhorn as ls


def test_grid_solve_converges():
    cost, mu, nu = ls.generate_grid_problem(128, 128, seed=0)
    assert cost.shape == (128, 128)
    assert mu.sum() == pytest.approx(1.0)
    cfg = ls.config(epsilon=0.01, precision="double")
    report, alpha, beta = ls.solve(cost, mu, nu, cfg)
    assert report["status"] == "converged"
    assert report["marginal_error"] < 1e-6
    plan = ls.materialize_plan(cost, mu, nu, alpha, beta, 0.01)
    assert np.allclose(plan.sum(axis=1), mu, atol=1e-6)
    assert np.allclose(plan.sum(axis=0), nu, atol=1e-6)
    assert ls.kkt_residual(cost, mu, nu, plan, alpha, beta, 0.01) < 1e-9
    assert report["transport_cost"] == pytest.approx(float((plan * cost).sum()), rel=1e-9)


def test_log_sum_exp():
    x = np.array([1000.0, 1000.0])
    assert ls.log_sum_exp(x) == pytest.approx(1000.0 + math.log(2.0), abs=1e-12)
    assert ls.log_sum_exp(np.array([-math.inf, -math.inf])) == -math.inf


def test_standard_domain_underflows_in_single():
    cost, mu, nu = ls.generate_grid_problem(64, 64, seed=1)
    report, _, _ = ls.solve_standard_domain(cost, mu, nu, ls.config(epsilon=0.001, precision="single"))
    assert report["status"] == "numerical_failure"


def test_point_cloud_identity():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(30, 2))
    matches, report = ls.match_point_clouds(x, x, 0.001)
    assert report["status"] == "converged"
    assert [(i, j) for i, j, _ in matches] == [(i, i) for i in range(30)]


def test_rigid_pair_and_cost():
    src, tgt, truth = ls.generate_rigid_pair(20, 3, 0.0, [0.0, 0.0, 0.0], 0.0, seed=2)
    c = ls.squared_euclidean_cost(src, tgt)
    assert c.shape == (20, 20)
    assert all(c[i, truth[i]] == 0.0 for i in range(20))


def test_errors_raise():
    with pytest.raises(ls.Error):
        ls.solve(np.ones((3, 3)), np.full(3, 1 / 3), np.full(4, 0.25))
    with pytest.raises(ls.Error):
        ls.config(epsilon=-1.0)
    with pytest.raises(TypeError):
        ls.config(bogus=1)
