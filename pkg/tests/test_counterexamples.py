"""
反例構成のテスト
閉形式との照合、下界の例、遅い収束の例
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from counterexamples import (
    RotationSpaceSpec,
    SlowSequenceSpec,
    abs_example_oracle,
    abs_tightness,
    arbitrarily_slow_setup,
    build_rotation_operator,
    check_optimal_fpr,
    check_oracle_match,
    check_ppa_lower,
    check_rotation_operator,
    check_rotation_trace,
    check_slow_distance,
    compare_distance_equivalence,
    dv_initial_point,
    dv_lower_bound_setup,
    feasibility_square_oracle,
    invert_decreasing,
    run_abs_example,
    run_dv_example,
    run_optimal_fpr,
    run_ppa_lower,
    run_square_example,
    slow_target,
    thm_optimal_fpr_setup,
)
from errors import InvalidArgumentError, InvalidConfigError
from km import RelaxationSchedule, run_km


def test_square_example_matches_oracle():
    trace = run_square_example(10)
    assert check_oracle_match(trace, feasibility_square_oracle).passed
    assert_allclose(trace.ergodic_gap[::2], np.sqrt(2.0) / np.arange(1, 12, 2))


def test_abs_example_matches_oracle():
    trace = run_abs_example(0.1, 20)
    report = check_oracle_match(trace, lambda k: abs_example_oracle(0.1, k))
    assert report.passed, report.summary()


def test_abs_tightness_ratios():
    ratios = abs_tightness(0.1, 5)
    assert ratios['upper_ratio'] == pytest.approx(0.9 / 0.9025)
    assert ratios['lipschitz_ratio'] == pytest.approx(2.475)
    assert ratios['feasibility_ratio'] == pytest.approx(3.8)
    with pytest.raises(InvalidArgumentError):
        abs_tightness(1.0, 5)


def test_oracles_reject_negative_k():
    with pytest.raises(InvalidArgumentError):
        feasibility_square_oracle(-1)
    with pytest.raises(InvalidArgumentError):
        abs_example_oracle(0.5, -1)


def test_rotation_operator_matches_drs():
    spec = RotationSpaceSpec.from_angles([0.3, 1.0, np.pi / 2])
    assert check_rotation_operator(spec).passed
    z0 = np.array([1.0, 2.0, -1.0, 0.5, 3.0, 0.0])
    trace = run_km(build_rotation_operator(spec), RelaxationSchedule.constant(1.0), z0, 15,
                   zstar=np.zeros(6), store_vectors=False)
    assert check_rotation_trace(trace, spec, z0).passed


@pytest.mark.parametrize("factory", [
    lambda: RotationSpaceSpec.from_cosines(1.0),
    lambda: RotationSpaceSpec.from_cosines(-0.2),
    lambda: RotationSpaceSpec.from_gaps(0.0),
    lambda: RotationSpaceSpec.from_angles([]),
])
def test_rotation_spec_validation(factory):
    with pytest.raises(InvalidArgumentError):
        factory()


def test_optimal_fpr_setup_guards():
    with pytest.raises(InvalidConfigError):
        thm_optimal_fpr_setup(0.75, 100, 300)
    with pytest.raises(InvalidArgumentError):
        thm_optimal_fpr_setup(0.5, 1000, 10)


def test_optimal_fpr_small_case():
    trace = run_optimal_fpr(0.75, 500, 20)
    report = check_optimal_fpr(trace, 0.75)
    assert report.passed, report.summary()


def test_invert_decreasing():
    assert invert_decreasing(lambda t: 1.0 / (1.0 + t), 3.0) == pytest.approx(3.0)
    with pytest.raises(InvalidArgumentError):
        invert_decreasing(lambda t: 0.2, 1.0)


def test_slow_sequence_requires_valid_h():
    with pytest.raises(InvalidArgumentError):
        SlowSequenceSpec(lambda t: 1.0 / (1.0 + t), 3)
    with pytest.raises(InvalidArgumentError):
        SlowSequenceSpec(lambda t: 0.75, 3)
    with pytest.raises(InvalidArgumentError):
        slow_target(0.0)


def test_arbitrarily_slow_small_horizon():
    h, inverse = slow_target(0.05)
    spec, z0, slow = arbitrarily_slow_setup(h, horizon=20, inverse=inverse)
    assert slow.blocks == 1
    assert_allclose(slow.witnesses(20), 0)
    assert slow.check_witness(20).passed
    trace = run_km(build_rotation_operator(spec), RelaxationSchedule.constant(1.0), z0, 20,
                   zstar=np.zeros_like(z0), store_vectors=False)
    assert check_slow_distance(trace, h).passed


def test_dv_gamma_precondition():
    with pytest.raises(InvalidConfigError):
        dv_lower_bound_setup(0.75, 50, gamma=0.1)
    _, _, z0, gamma, _ = dv_lower_bound_setup(0.75, 50)
    assert gamma == pytest.approx(np.linalg.norm(z0))


def test_distance_equivalence():
    gamma = float(np.linalg.norm(dv_initial_point(0.75, 50)))
    result = compare_distance_equivalence(0.75, 50, 30, gamma)
    assert result['precondition']
    assert result['coincide'], result
    small = compare_distance_equivalence(0.75, 50, 30, 0.1)
    assert not small['precondition']


def test_dv_example_records_distance():
    trace = run_dv_example(0.75, 50, 20)
    values = trace.extras['dv_xg']
    assert values.shape == (21,)
    assert np.all(values >= 0)


def test_ppa_lower_small_case():
    trace = run_ppa_lower(1.0, 1.0, 300, 20)
    report = check_ppa_lower(trace, 1.0, 1.0, 20)
    assert report.passed, report.summary()
