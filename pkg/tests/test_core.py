"""
基本演算のテスト
近接写像の閉形式、射影、堅非拡大性などの性質
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from core import (
    BlockSeparable,
    Custom,
    DiagonalQuadratic,
    DistanceToSet,
    IndicatorAffine,
    IndicatorBall,
    IndicatorBox,
    IndicatorSubspace,
    L1Norm,
    Quadratic,
    Zero,
    AffineComposite,
    apply_prs_operator,
    as_vector,
    check_averaged_contraction,
    check_firm_nonexpansive,
    check_gamma,
    check_refl_nonexpansive,
    check_resolvent_optimality,
    compose_affine,
    function_lipschitz_modulus,
    orthonormal_basis,
    prox,
    prox_distance,
    prs_operator,
    refl,
)
from errors import InvalidArgumentError, UnsupportedError

coordinates = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
points = st.lists(coordinates, min_size=3, max_size=3)
pairs = st.lists(st.tuples(points, points), min_size=1, max_size=5)


def test_l1_prox_is_soft_threshold():
    result = prox(L1Norm(1.0), 1.0, [3.0, -0.5, -2.0])
    assert_allclose(result, [2.0, 0.0, -1.0])


def test_l1_prox_with_center():
    f = L1Norm(2.0, center=[1.0, 1.0])
    assert_allclose(prox(f, 0.5, [4.0, 1.5]), [3.0, 1.0])
    assert f.value([2.0, 0.0]) == pytest.approx(4.0)


def test_l1_lipschitz_modulus():
    assert function_lipschitz_modulus(L1Norm(0.5), 4) == pytest.approx(1.0)
    assert function_lipschitz_modulus(Quadratic(np.eye(2)), 2) is None


def test_quadratic_prox_solves_linear_system():
    f = Quadratic([[2.0]], [1.0])
    # (1 + 2)x = 3 − 1
    assert_allclose(prox(f, 1.0, [3.0]), [2.0 / 3.0])
    assert f.beta == pytest.approx(0.5)


def test_quadratic_rejects_invalid_matrices():
    with pytest.raises(InvalidArgumentError):
        Quadratic([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InvalidArgumentError):
        Quadratic([[-1.0]])
    with pytest.raises(InvalidArgumentError):
        Quadratic(np.eye(2), [1.0])


def test_diagonal_quadratic_prox():
    f = DiagonalQuadratic([1.0, 3.0])
    assert_allclose(prox(f, 1.0, [2.0, 4.0]), [1.0, 1.0])
    assert f.beta == pytest.approx(1.0 / 3.0)


def test_projections():
    box = IndicatorBox([0.0, 0.0], [1.0, 1.0])
    assert_allclose(box.project(np.array([2.0, -1.0])), [1.0, 0.0])
    ball = IndicatorBall([0.0, 0.0], 1.0)
    assert_allclose(ball.project(np.array([3.0, 4.0])), [0.6, 0.8])
    line = IndicatorSubspace([[1.0], [1.0]])
    assert_allclose(line.project(np.array([2.0, 0.0])), [1.0, 1.0])
    affine = IndicatorAffine([[1.0], [0.0]], [0.0, 2.0])
    assert_allclose(affine.project(np.array([5.0, 0.0])), [5.0, 2.0])


def test_indicator_value_is_extended_real():
    box = IndicatorBox([0.0], [1.0])
    assert box.value([0.5]) == 0.0
    assert box.value([1.5]) == np.inf
    assert box.contains([1.0 + 1e-12])


def test_distance_prox_moves_towards_set():
    f = DistanceToSet(IndicatorSubspace([[1.0], [0.0]]))
    assert_allclose(prox(f, 1.0, [0.0, 3.0]), [0.0, 2.0])
    assert_allclose(prox(f, 5.0, [0.0, 3.0]), [0.0, 0.0])
    assert_allclose(prox_distance([[1.0], [0.0]], 1.0, [4.0, 3.0]), [4.0, 2.0])


def test_refl_is_twice_prox_minus_identity():
    f = L1Norm(1.0)
    x = np.array([3.0, -0.25])
    assert_allclose(refl(f, 1.0, x), 2.0 * prox(f, 1.0, x) - x)


def test_triangle_matches_prs_operator():
    f, g = L1Norm(1.0), Quadratic(np.diag([1.0, 2.0]), [0.5, -1.0])
    z = np.array([1.5, -3.0])
    triangle = apply_prs_operator(f, g, 0.7, z)
    assert_allclose(triangle.prs_image, prs_operator(f, g, 0.7)(z))
    assert triangle.fpr == pytest.approx(float(np.sum((triangle.prs_image - z) ** 2)))
    assert not triangle.x_g.flags.writeable


@given(pairs)
@settings(max_examples=50, deadline=None)
def test_prox_is_firmly_nonexpansive(sample):
    assert check_firm_nonexpansive(L1Norm(0.5), 1.3, sample).passed
    assert check_firm_nonexpansive(IndicatorBall([0.0, 1.0, 0.0], 2.0), 1.0, sample).passed


@given(pairs)
@settings(max_examples=50, deadline=None)
def test_reflection_is_nonexpansive(sample):
    assert check_refl_nonexpansive(Quadratic(np.diag([1.0, 0.5, 2.0])), 0.8, sample).passed


@given(pairs, st.floats(min_value=0.1, max_value=1.0))
@settings(max_examples=50, deadline=None)
def test_relaxed_prs_is_averaged(sample, lam):
    operator = prs_operator(L1Norm(1.0), IndicatorBox(np.zeros(3), np.ones(3)), 1.0)
    assert check_averaged_contraction(operator, lam, sample).passed


@given(points, st.lists(points, min_size=1, max_size=5))
@settings(max_examples=50, deadline=None)
def test_resolvent_optimality(x, probes):
    assert check_resolvent_optimality(L1Norm(1.0), 0.5, x, probes).passed


def test_averaged_contraction_rejects_bad_lambda():
    with pytest.raises(InvalidArgumentError):
        check_averaged_contraction(lambda z: z, 1.5, [([0.0], [1.0])])


@pytest.mark.parametrize("value", [[np.nan], [[1.0, 2.0], [3.0, 4.0]], []])
def test_as_vector_rejects_invalid_input(value):
    with pytest.raises(InvalidArgumentError):
        as_vector(value)


@pytest.mark.parametrize("gamma", [0.0, -1.0, np.inf, np.nan])
def test_check_gamma(gamma):
    with pytest.raises(InvalidArgumentError):
        check_gamma(gamma)


def test_degenerate_basis():
    with pytest.raises(InvalidArgumentError):
        orthonormal_basis([[1.0, 2.0], [1.0, 2.0]])
    basis = orthonormal_basis([[1.0, 1.0], [0.0, 1.0]])
    assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)


def test_custom_prox_requires_accuracy():
    with pytest.raises(InvalidArgumentError):
        Custom(lambda x: 0.0, prox=lambda gamma, x: x)
    with pytest.raises(UnsupportedError):
        Custom(lambda x: 0.0).prox(1.0, np.zeros(1))


def test_zero_and_unsupported_operations():
    assert_allclose(prox(Zero(), 1.0, [1.0, 2.0]), [1.0, 2.0])
    with pytest.raises(UnsupportedError):
        L1Norm(1.0).gradient(np.zeros(2))


def test_block_separable_prox():
    f = BlockSeparable([L1Norm(1.0), DiagonalQuadratic([1.0])], [2, 1])
    assert_allclose(prox(f, 1.0, [2.0, -0.5, 4.0]), [1.0, 0.0, 2.0])
    assert f.value([1.0, -1.0, 2.0]) == pytest.approx(4.0)
    with pytest.raises(InvalidArgumentError):
        f.value([1.0, 2.0])


def test_compose_affine_expands_quadratic():
    M = np.array([[1.0, 2.0], [0.0, 1.0], [1.0, -1.0]])
    b = np.array([1.0, 0.5, -2.0])
    f = compose_affine(Quadratic(np.eye(3)), M, b)
    assert isinstance(f, Quadratic)
    x = np.array([0.3, -1.2])
    residual = M @ x - b
    assert f.value(x) == pytest.approx(0.5 * residual @ residual)


def test_compose_affine_wraps_smooth_custom():
    def softplus(x):
        return float(np.sum(np.logaddexp(0.0, x)))

    def sigmoid(x):
        return 0.5 * (1.0 + np.tanh(0.5 * x))

    outer = Custom(softplus, gradient=sigmoid, beta=4.0)
    M = np.array([[1.0, 0.5], [-0.5, 2.0]])
    f = compose_affine(outer, M, [0.0, 1.0])
    assert isinstance(f, AffineComposite)
    v = np.array([1.0, -2.0])
    point = f.prox(0.5, v)
    assert np.linalg.norm(f.gradient(point) + (point - v) / 0.5) < 1e-8
