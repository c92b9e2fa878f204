"""
分割法ドライバのテスト
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core import L1Norm, Quadratic, Zero
from counterexamples import one_d_drs_example
from errors import InvalidArgumentError, InvalidConfigError, NonConvergenceError
from km import RelaxationSchedule, run_km
from problems import build_problem
from splitting import (
    FBSConfig,
    certificate_at,
    check_certificate_optimality,
    check_drs_1d,
    check_drs_subgradient_identity,
    check_ergodic_fpr,
    check_fbs_rates,
    check_step_identity,
    ergodic_average,
    fbs_subgradients,
    fixed_point_reference,
    run_drs,
    run_fbs,
    run_ppa,
    run_prs,
    run_relaxed_prs,
)


@pytest.fixture
def one_d():
    f, g, z0 = one_d_drs_example()
    certificate = fixed_point_reference(f, g, 1.0, z0, closed_form=np.zeros(1))
    return f, g, z0, certificate


def test_fbs_config_validation():
    with pytest.raises(InvalidConfigError):
        FBSConfig(2.0, 1.0)
    with pytest.raises(InvalidConfigError):
        FBSConfig(0.0, 1.0)
    assert FBSConfig(1.0, np.inf).alpha == pytest.approx(0.5)
    assert FBSConfig(1.5, 1.0).alpha == pytest.approx(0.8)


def test_one_d_certificate(one_d):
    _, _, _, certificate = one_d
    assert certificate.closed_form
    assert_allclose(certificate.xstar, [1.0])
    assert certificate.dist0 == pytest.approx(2.5)
    assert certificate.obj_star == pytest.approx(1.0)
    assert certificate.residual == 0.0
    assert set(certificate.summary()) >= {'dist0', 'dual_norm', 'obj_star', 'residual'}


def test_drs_identities_on_one_d(one_d):
    f, g, z0, certificate = one_d
    trace = run_drs(f, g, 1.0, z0, 200, zstar=certificate.zstar)
    assert_allclose(trace.lambdas, 0.5)
    assert check_step_identity(trace).passed
    assert check_drs_subgradient_identity(trace).passed
    assert check_drs_1d(trace, certificate).passed
    assert check_ergodic_fpr(trace, certificate).passed
    assert_allclose(trace.x_g[-1], [1.0], atol=1e-6)


def test_drs_1d_requires_half_relaxation(one_d):
    f, g, z0, certificate = one_d
    trace = run_prs(f, g, 1.0, z0, 10)
    with pytest.raises(InvalidArgumentError):
        check_drs_1d(trace, certificate)
    with pytest.raises(InvalidArgumentError):
        check_drs_subgradient_identity(trace)


def test_relaxed_prs_step_identity():
    problem = build_problem('quadratic_l1', {'dim': 6, 'seed': 3})
    schedule = RelaxationSchedule.explicit(np.linspace(0.3, 1.0, 51))
    trace = run_relaxed_prs(problem.f, problem.g, 0.7, schedule, problem.z0, 50)
    assert check_step_identity(trace).passed
    xbar_g, xbar_f = ergodic_average(trace)
    assert xbar_g.shape == xbar_f.shape == (51, 6)
    assert trace.objective.shape == (51,)


def test_reference_certificate_is_optimal():
    problem = build_problem('quadratic_l1', {'dim': 10, 'seed': 0})
    certificate = fixed_point_reference(problem.f, problem.g, 1.0, problem.z0)
    assert not certificate.closed_form
    assert certificate.residual <= 1e-8
    assert check_certificate_optimality(certificate, problem.f, problem.g).passed


def test_reference_errors(one_d):
    f, g, z0, _ = one_d
    with pytest.raises(InvalidArgumentError):
        fixed_point_reference(f, g, 1.0, z0, budget=10)
    with pytest.raises(NonConvergenceError):
        fixed_point_reference(f, g, 1.0, z0, closed_form=[5.0])


def test_fbs_requires_smooth_g():
    with pytest.raises(InvalidConfigError):
        run_fbs(L1Norm(1.0), L1Norm(1.0), FBSConfig(1.0, 1.0), [1.0], 10)
    with pytest.raises(InvalidConfigError):
        run_fbs(L1Norm(1.0), Quadratic([[2.0]]), FBSConfig(0.5, 1.0), [1.0], 10)


def test_ppa_on_absolute_value():
    trace = run_ppa(L1Norm(1.0), 1.0, [5.5], 8)
    assert_allclose(trace.z[:, 0], [5.5, 4.5, 3.5, 2.5, 1.5, 0.5, 0.0, 0.0, 0.0])
    assert_allclose(trace.fpr, [1.0, 1.0, 1.0, 1.0, 1.0, 0.25, 0.0, 0.0, 0.0])
    assert_allclose(trace.objective, np.abs(trace.z[:, 0]))
    assert trace.algorithm == 'ppa'


@pytest.mark.parametrize("factor", [1.0, 1.5])
def test_fbs_rates_on_lasso(factor):
    problem = build_problem('lasso', {'dim': 5, 'rows': 10, 'mu': 0.1, 'seed': 0})
    beta = problem.g.beta
    certificate = fixed_point_reference(problem.f, problem.g, beta, problem.z0)
    config = FBSConfig(factor * beta, beta)
    trace = run_fbs(problem.f, problem.g, config, problem.z0, 200, zstar=certificate.xstar)
    report = check_fbs_rates(trace, certificate, config)
    assert report.passed, report.summary()
    assert 'displayed_bound_violations' in report.notes


def test_fbs_subgradients_lie_in_l1_subdifferential():
    problem = build_problem('lasso', {'dim': 5, 'rows': 10, 'mu': 0.1, 'seed': 1})
    config = FBSConfig(problem.g.beta, problem.g.beta)
    trace = run_fbs(problem.f, problem.g, config, problem.z0, 50)
    subgradients = fbs_subgradients(trace, problem.g, config.gamma)
    assert subgradients.shape == (50, 5)
    assert np.all(np.abs(subgradients) <= 0.1 + 1e-10)


def test_ergodic_average_requires_triangles():
    trace = run_km(lambda z: z / 2.0, RelaxationSchedule.constant(0.5), [1.0], 5)
    with pytest.raises(InvalidArgumentError):
        ergodic_average(trace)


def test_certificate_at_zero_problem():
    certificate = certificate_at(Zero(), Zero(), 1.0, [1.0, 2.0], [0.0, 0.0])
    assert certificate.residual == 0.0
    assert certificate.dual_norm == 0.0
    assert certificate.dist0 == pytest.approx(np.sqrt(5.0))
