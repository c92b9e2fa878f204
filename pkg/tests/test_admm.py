"""
ADMMモジュールのテスト
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from admm import (
    DistributedProblem,
    LinearlyConstrainedProblem,
    admm_certificate,
    admm_feasibility_bounds,
    admm_primal_bounds,
    audit_messages,
    check_admm_bands,
    check_admm_fundamental,
    check_distributed_bands,
    check_distributed_equivalence,
    check_dual_equivalence,
    check_step_identity_admm,
    check_subgradient_inclusions,
    distributed_as_admm,
    dual_prox_g,
    edge_penalty,
    load_edge_list,
    run_distributed_admm,
    run_relaxed_admm,
    split_across_examples,
    split_across_features,
    split_auxiliary,
)
from core import L1Norm, Quadratic
from errors import ConfigParseError, InvalidArgumentError
from km import RelaxationSchedule
from problems import build_problem, consensus_minimizer, path_consensus

HALF = RelaxationSchedule.constant(0.5)


@pytest.fixture
def lasso_1d():
    # min ½x² + |y| s.t. 2y − x = 3 の解は y = 1.25、x = −0.5
    return build_problem('lasso_1d')


def test_problem_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        LinearlyConstrainedProblem(Quadratic(np.eye(2)), L1Norm(1.0), np.eye(2), np.eye(3), np.zeros(2))


def test_admm_converges_on_lasso_1d(lasso_1d):
    trace = run_relaxed_admm(lasso_1d.constrained, 1.0, HALF, lasso_1d.z0, 1000)
    assert trace.solver_modes == {'f': 'quadratic', 'g': 'orthogonal'}
    assert_allclose(trace.x[-1], [-0.5], atol=1e-6)
    assert_allclose(trace.y[-1], [1.25], atol=1e-6)
    assert_allclose(trace.fpr, 4.0 * trace.residual_sq)
    assert check_step_identity_admm(trace).passed


def test_dual_equivalence(lasso_1d):
    report = check_dual_equivalence(lasso_1d.constrained, 1.0, HALF, lasso_1d.z0, 50)
    assert report.passed, report.summary()
    relaxed = RelaxationSchedule.constant(0.8)
    assert check_dual_equivalence(lasso_1d.constrained, 0.5, relaxed, lasso_1d.z0, 50, atol=1e-10).passed


def test_certificate_recovers_primal_solution(lasso_1d):
    certificate = admm_certificate(lasso_1d.constrained, 1.0, lasso_1d.z0)
    assert_allclose(certificate.xstar, [-0.5], atol=1e-8)
    assert_allclose(certificate.ystar, [1.25], atol=1e-8)
    assert certificate.obj_star == pytest.approx(1.375, abs=1e-8)
    assert certificate.primal_residual < 1e-8
    assert set(certificate.summary()) >= {'dist0', 'wstar_norm', 'obj_star'}


def test_fundamental_inequalities_on_lasso_1d(lasso_1d):
    problem = lasso_1d.constrained
    certificate = admm_certificate(problem, 1.0, lasso_1d.z0)
    trace = run_relaxed_admm(problem, 1.0, HALF, lasso_1d.z0, 200)
    report = check_admm_fundamental(trace, certificate, problem)
    assert report.passed, report.summary()
    assert check_subgradient_inclusions(trace, problem).passed


def test_bands_on_constrained_lasso():
    instance = build_problem('constrained_lasso')
    problem = instance.constrained
    certificate = admm_certificate(problem, 1.0, instance.z0)
    trace = run_relaxed_admm(problem, 1.0, HALF, instance.z0, 300)
    assert trace.solver_modes == {'f': 'quadratic', 'g': 'inner'}
    report = check_admm_bands(trace, certificate)
    assert report.passed, report.summary()
    assert 'stated_ergodic_feasibility_violations' in report.notes


def test_bound_forms(lasso_1d):
    certificate = admm_certificate(lasso_1d.constrained, 1.0, lasso_1d.z0)
    k = np.arange(5)
    stated, _ = admm_primal_bounds(certificate, 2.0, HALF, k, 'nonergodic', form='stated')
    derived, _ = admm_primal_bounds(certificate, 2.0, HALF, k, 'nonergodic', form='derived')
    asserted, _ = admm_primal_bounds(certificate, 2.0, HALF, k, 'nonergodic', form='asserted')
    assert_allclose(asserted, np.minimum(stated, derived))
    with pytest.raises(InvalidArgumentError):
        admm_primal_bounds(certificate, 1.0, HALF, k, 'nonergodic', form='loose')
    with pytest.raises(InvalidArgumentError):
        admm_feasibility_bounds(certificate, 1.0, HALF, k, 'uniform')
    with pytest.raises(InvalidArgumentError):
        admm_feasibility_bounds(certificate, 1.0, RelaxationSchedule.constant(1.0), k, 'nonergodic')


def test_dual_prox_g_relation():
    y, v_next = dual_prox_g(L1Norm(1.0), [[2.0]], [3.0], 1.0, [0.5])
    assert_allclose(y, [1.5])
    assert_allclose(v_next, 0.5 - (2.0 * y - 3.0))


def test_split_shapes():
    M = np.arange(6, dtype=float).reshape(3, 2)
    auxiliary = split_auxiliary(Quadratic(np.eye(3)), L1Norm(1.0), M, np.ones(3))
    assert auxiliary.dims == (3, 2, 3)
    assert_allclose(auxiliary.A, -np.eye(3))

    blocks = [np.ones((2, 3)), np.eye(2, 3)]
    examples = split_across_examples([Quadratic(np.eye(2))] * 2, L1Norm(1.0), blocks, [np.zeros(2)] * 2)
    assert examples.dims == (6, 3, 6)
    assert_allclose(examples.B, -np.vstack([np.eye(3), np.eye(3)]))

    features = split_across_features(Quadratic(np.eye(2)), [L1Norm(1.0)] * 2, [np.ones((2, 1)), np.eye(2)], np.ones(2))
    assert features.dims == (4, 3, 4)
    with pytest.raises(InvalidArgumentError):
        split_across_examples([Quadratic(np.eye(2))], L1Norm(1.0), blocks, [np.zeros(2)] * 2)


@pytest.mark.parametrize("count, edges", [
    (1, []),
    (3, [(0, 5)]),
    (3, [(0, 1), (1, 1)]),
    (3, [(0, 1), (1, 0), (1, 2)]),
    (4, [(0, 1), (2, 3)]),
])
def test_distributed_problem_validation(count, edges):
    functions = [Quadratic([[1.0]])] * count
    with pytest.raises(InvalidArgumentError):
        DistributedProblem(tuple(functions), tuple(edges))


def test_load_edge_list(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text("0 1\n1 2  # 中央\n\n2 0\n", encoding='utf-8')
    assert load_edge_list(path) == (3, ((0, 1), (1, 2), (2, 0)))

    path.write_text("0 1\n1 x\n", encoding='utf-8')
    with pytest.raises(ConfigParseError) as excinfo:
        load_edge_list(path)
    assert excinfo.value.line == 2

    path.write_text("# 空\n", encoding='utf-8')
    with pytest.raises(ConfigParseError):
        load_edge_list(path)


def test_path_consensus_converges():
    network = path_consensus([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0])
    trace = run_distributed_admm(network, 1.0, 5000)
    assert_allclose(trace.x[-1].ravel(), 1.4375, atol=1e-6)
    assert consensus_minimizer([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0]) == pytest.approx(1.4375)
    report = audit_messages(trace, network)
    assert report.passed
    assert report.notes['messages'] == 8
    assert trace.disagreement[-1] < 1e-10


def test_distributed_matches_edge_admm():
    network = path_consensus([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0])
    trace = run_distributed_admm(network, 1.0, 60)
    edge = run_relaxed_admm(distributed_as_admm(network), edge_penalty(1.0), HALF, np.zeros(8), 59)
    assert_allclose(trace.x[1:].reshape(60, -1), edge.x, atol=1e-10)
    assert_allclose(trace.objective[1:], edge.obj_f, atol=1e-10)
    assert check_distributed_equivalence(trace, network).passed


def test_distributed_equivalence_needs_doubled_penalty():
    network = path_consensus([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0])
    trace = run_distributed_admm(network, 1.0, 30)
    assert not check_distributed_equivalence(replace(trace, gamma=0.5), network).passed
    with pytest.raises(InvalidArgumentError):
        check_distributed_equivalence(trace, path_consensus([1.0, 1.0], [0.0, 1.0]))


@pytest.mark.slow
def test_distributed_bands():
    network = path_consensus([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0])
    trace = run_distributed_admm(network, 1.0, 300)
    report = check_distributed_bands(trace, network)
    assert report.passed, report.summary()
    assert report.notes['edge_penalty'] == 2.0
    assert report.notes['obj_star'] == pytest.approx(network.objective([np.array([1.4375])] * 5))
