"""
収束率モジュールのテスト
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from core import DiagonalQuadratic, L1Norm, function_lipschitz_modulus
from errors import InvalidArgumentError, InvalidConfigError, UnsupportedScheduleError
from km import RelaxationSchedule
from rates import (
    SequenceCheck,
    check_fundamental_inequalities,
    check_lipschitz_bounds,
    check_lipschitz_on_ball,
    check_objective_bands,
    ergodic_objective_bounds,
    fbs_constant,
    fit_decay_exponent,
    lipschitz_objective_bounds,
    nonergodic_objective_bounds,
    verify_summable_lemma,
)
from splitting import fixed_point_reference, run_relaxed_prs

values = st.floats(min_value=0.0, max_value=100.0, allow_nan=False)
weights = st.floats(min_value=0.01, max_value=1.0)


@pytest.fixture
def centered_problem():
    # f = |x − c|₁、g = ½‖x‖²、c = (3, −3) で x* = (1, −1)、z* = 2x*（γ = 1）
    f = L1Norm(1.0, center=[3.0, -3.0])
    g = DiagonalQuadratic([1.0, 1.0])
    z0 = np.array([6.0, 5.0])
    certificate = fixed_point_reference(f, g, 1.0, z0, closed_form=[2.0, -2.0])
    return f, g, z0, certificate


@given(st.lists(st.tuples(values, weights), min_size=1, max_size=40))
@settings(max_examples=50, deadline=None)
def test_summable_lemma_monotone(pairs):
    a = sorted((value for value, _ in pairs), reverse=True)
    lambdas = [lam for _, lam in pairs]
    assert verify_summable_lemma(SequenceCheck.of(a, lambdas)).passed


@given(st.lists(st.tuples(values, weights), min_size=1, max_size=40))
@settings(max_examples=50, deadline=None)
def test_summable_lemma_running_minimum(pairs):
    a = [value for value, _ in pairs]
    lambdas = [lam for _, lam in pairs]
    assert verify_summable_lemma(SequenceCheck.of(a, lambdas, part=4)).passed


def test_summable_lemma_with_errors():
    check = SequenceCheck.of([1.0, 1.5, 1.2], [1.0, 1.0, 1.0], part=2, e=[0.5, 0.0, 0.0])
    assert verify_summable_lemma(check).passed


def test_summable_lemma_telescoping():
    check = SequenceCheck.of([1.0, 0.5, 0.25], [1.0, 1.0, 1.0], part=3, e=[0.0, 0.0, 0.0], b=[3.0, 2.0, 1.0, 0.0])
    report = verify_summable_lemma(check)
    assert report.passed
    assert set(report.notes['parts']) == {'telescoping_hypothesis', 'part3_bound'}


def test_summable_lemma_detects_broken_hypothesis():
    report = verify_summable_lemma(SequenceCheck.of([1.0, 2.0], [1.0, 1.0]))
    assert not report.passed
    assert not report.notes['parts']['monotone_hypothesis']['passed']


@pytest.mark.parametrize("kwargs", [
    {'a': [-1.0], 'lambdas': [1.0]},
    {'a': [1.0, 2.0], 'lambdas': [1.0]},
    {'a': [1.0], 'lambdas': [1.0], 'part': 5},
    {'a': [1.0], 'lambdas': [1.0], 'part': 2},
    {'a': [1.0], 'lambdas': [1.0], 'part': 3, 'e': [0.0], 'b': [1.0]},
])
def test_sequence_check_rejects_invalid_input(kwargs):
    with pytest.raises(InvalidArgumentError):
        SequenceCheck.of(**kwargs)


def test_fbs_constant():
    assert fbs_constant(1.0, 2.0) == pytest.approx(0.5)
    assert fbs_constant(1.5, 1.0) == pytest.approx(1.0)
    with pytest.raises(InvalidConfigError):
        fbs_constant(2.0, 1.0)


def test_fit_decay_exponent():
    k = np.arange(100)
    fit = fit_decay_exponent((k + 1.0) ** -2)
    assert fit.exponent == pytest.approx(-2.0, abs=1e-9)
    assert (fit.k_lo, fit.k_hi) == (10, 99)
    with pytest.raises(InvalidArgumentError):
        fit_decay_exponent((k + 1.0) ** -2, window=(0, 5))
    with pytest.raises(InvalidArgumentError):
        fit_decay_exponent((k + 1.0) ** -2, window=(5, 100))
    with pytest.raises(InvalidArgumentError):
        fit_decay_exponent(np.zeros(20))


def test_bound_argument_errors(centered_problem):
    _, _, _, certificate = centered_problem
    with pytest.raises(InvalidArgumentError):
        ergodic_objective_bounds(certificate, [1.0, 0.0])
    with pytest.raises(UnsupportedScheduleError):
        nonergodic_objective_bounds(certificate, 0.0, 3)
    with pytest.raises(InvalidArgumentError):
        lipschitz_objective_bounds(certificate, 1.0, 'harmonic', 3)
    with pytest.raises(InvalidArgumentError):
        lipschitz_objective_bounds(certificate, 1.0, 'nonergodic', 3)
    with pytest.raises(InvalidArgumentError):
        lipschitz_objective_bounds(certificate, -1.0, 'ergodic', 3.0)


def test_ergodic_bounds_scale_with_cumulative(centered_problem):
    _, _, _, certificate = centered_problem
    lower, upper = ergodic_objective_bounds(certificate, np.array([1.0, 2.0]))
    assert_allclose(upper[0], 2.0 * upper[1])
    assert_allclose(lower[0], 2.0 * lower[1])
    assert np.all(lower < 0) and np.all(upper > 0)


def test_fundamental_inequalities_and_bands(centered_problem):
    f, g, z0, certificate = centered_problem
    trace = run_relaxed_prs(f, g, 1.0, RelaxationSchedule.constant(0.7), z0, 200, zstar=certificate.zstar)
    fundamental = check_fundamental_inequalities(trace, certificate)
    assert fundamental.passed, fundamental.summary()
    bands = check_objective_bands(trace, certificate)
    assert bands.passed, bands.summary()
    assert bands.notes['tau_lower'] == pytest.approx(0.21)


def test_lipschitz_bounds(centered_problem):
    f, g, z0, certificate = centered_problem
    trace = run_relaxed_prs(f, g, 1.0, RelaxationSchedule.constant(0.5), z0, 200)
    modulus = function_lipschitz_modulus(f, 2)
    report = check_lipschitz_bounds(trace, certificate, f, g, modulus, side='f')
    assert report.passed, report.summary()
    with pytest.raises(InvalidArgumentError):
        check_lipschitz_bounds(trace, certificate, f, g, modulus, side='h')


def test_lipschitz_on_ball():
    f = L1Norm(1.0)
    assert check_lipschitz_on_ball(f, np.zeros(3), 1.0, np.sqrt(3.0)).passed
    report = check_lipschitz_on_ball(f, np.zeros(3), 1.0, 0.1)
    assert not report.passed
    assert 'sampled_modulus_estimate' in report.notes
    with pytest.raises(InvalidArgumentError):
        check_lipschitz_on_ball(f, np.zeros(3), 0.0, 1.0)
