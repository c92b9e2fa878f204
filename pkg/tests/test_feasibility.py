"""
凸実行可能性問題のテスト
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core import IndicatorAffine, IndicatorSubspace
from errors import InvalidArgumentError, InvalidConfigError
from feasibility import (
    ConvexSetPair,
    check_distance_gaps,
    check_ergodic_membership,
    check_feasibility_rates,
    check_idempotent,
    feasibility_certificate,
    feasibility_gap_bounds,
    intersect_affine,
    run_feasibility,
)
from km import RelaxationSchedule
from problems import build_problem, random_affine_pair
from splitting import check_certificate_optimality, run_drs

HALF = RelaxationSchedule.constant(0.5)


@pytest.fixture
def affine_setup():
    pair = random_affine_pair(6, 3, 3, 0)
    z0 = np.random.default_rng(1).standard_normal(6) * 5.0
    return pair, z0, feasibility_certificate(pair, z0)


def test_intersect_axes():
    meeting = intersect_affine(IndicatorSubspace([[1.0], [0.0]]), IndicatorSubspace([[0.0], [1.0]]))
    assert meeting.basis.shape == (2, 0)
    assert_allclose(meeting.project(np.array([3.0, 4.0])), [0.0, 0.0], atol=1e-12)


def test_intersect_parallel_lines_is_empty():
    with pytest.raises(InvalidConfigError):
        intersect_affine(IndicatorAffine([[1.0], [0.0]], [0.0, 0.0]), IndicatorAffine([[1.0], [0.0]], [0.0, 1.0]))


def test_pair_requires_projections():
    with pytest.raises(InvalidArgumentError):
        ConvexSetPair(IndicatorSubspace([[1.0], [0.0]]), object())


def test_affine_certificate_is_optimal(affine_setup):
    pair, _, certificate = affine_setup
    assert pair.is_affine
    assert certificate.closed_form
    assert certificate.residual < 1e-10
    assert check_certificate_optimality(certificate, pair.C_f, pair.C_g).passed


def test_affine_feasibility_run(affine_setup):
    pair, z0, certificate = affine_setup
    trace = run_feasibility(pair, HALF, z0, 200, zstar=certificate.zstar)
    assert set(trace.extras) == {'dist_g_of_xf', 'dist_f_of_xg', 'ergodic_dist_f', 'ergodic_dist_g'}
    for report in (
        check_distance_gaps(trace),
        check_ergodic_membership(trace),
        check_feasibility_rates(trace, certificate, HALF),
    ):
        assert report.passed, report.summary()


def test_box_ball_feasibility():
    problem = build_problem('box_ball')
    assert check_idempotent(problem.pair, 2).passed
    certificate = feasibility_certificate(problem.pair, problem.z0)
    assert not certificate.closed_form
    trace = run_feasibility(problem.pair, HALF, problem.z0, 100)
    assert check_feasibility_rates(trace, certificate).passed
    assert problem.pair.C_f.contains(trace.x_f[-1])


def test_square_prs_skips_nonergodic_bound():
    problem = build_problem('square')
    certificate = feasibility_certificate(problem.pair, problem.z0)
    assert_allclose(certificate.zstar, [0.0, 0.0], atol=1e-12)
    trace = run_feasibility(problem.pair, RelaxationSchedule.constant(1.0), problem.z0, 20)
    report = check_feasibility_rates(trace, certificate)
    assert report.passed
    assert 'nonergodic' in report.notes


def test_gap_bound_arguments(affine_setup):
    _, _, certificate = affine_setup
    bounds = feasibility_gap_bounds(certificate, HALF, np.arange(3))
    assert_allclose(bounds, certificate.dist0_sq / (4.0 * 0.25 * np.arange(1, 4)))
    assert isinstance(feasibility_gap_bounds(certificate, HALF, 2, mode='ergodic'), float)
    with pytest.raises(InvalidArgumentError):
        feasibility_gap_bounds(certificate, HALF, -1)
    with pytest.raises(InvalidArgumentError):
        feasibility_gap_bounds(certificate, HALF, 3, mode='uniform')


def test_distance_checks_require_feasibility_trace():
    problem = build_problem('one_d')
    trace = run_drs(problem.f, problem.g, 1.0, problem.z0, 5)
    with pytest.raises(InvalidArgumentError):
        check_distance_gaps(trace)
    with pytest.raises(InvalidArgumentError):
        check_ergodic_membership(trace)
