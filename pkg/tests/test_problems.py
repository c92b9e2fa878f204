"""
問題レジストリのテスト
"""

import numpy as np
import pytest

from errors import InvalidArgumentError, InvalidConfigError
from problems import (
    PROBLEMS,
    build_problem,
    consensus_minimizer,
    path_consensus,
    random_lasso,
    supported_algorithms,
)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_every_problem_builds(name):
    problem = build_problem(name)
    assert problem.name == name
    assert problem.algorithms == supported_algorithms(name)
    assert problem.kind in {'splitting', 'admm', 'distributed'}
    assert np.all(np.isfinite(problem.z0))
    if problem.kind == 'splitting':
        assert problem.f is not None and problem.g is not None
    elif problem.kind == 'admm':
        assert problem.constrained.b.size == problem.z0.size
    else:
        assert problem.network.size == problem.z0.size


def test_unknown_problem():
    with pytest.raises(InvalidConfigError):
        build_problem('hexagon')
    with pytest.raises(InvalidConfigError):
        supported_algorithms('hexagon')


def test_supported_algorithms():
    assert supported_algorithms('ppa_diag') == {'ppa'}
    assert supported_algorithms('path_consensus') == {'dadmm'}
    assert 'feasibility' in supported_algorithms('square')
    assert 'fbs' not in supported_algorithms('one_d')
    assert build_problem('lasso_1d').supports('admm')
    assert not build_problem('lasso_1d').supports('drs')


def test_problem_parameters():
    problem = build_problem('lasso', {'dim': 4, 'rows': 6, 'mu': 0.3, 'seed': 2})
    assert problem.z0.shape == (4,)
    assert problem.params == {'dim': 4, 'rows': 6, 'mu': 0.3, 'seed': 2}
    assert build_problem('one_d', {'z0': 4.0}).z0[0] == 4.0
    assert build_problem('abs_example', {'eps': 0.25}).z0[0] == pytest.approx(1.75)


def test_random_lasso_is_seeded():
    M1, b1, _ = random_lasso(3, 5, 7)
    M2, b2, smooth = random_lasso(3, 5, 7)
    np.testing.assert_array_equal(M1, M2)
    np.testing.assert_array_equal(b1, b2)
    x = np.array([0.5, -1.0, 2.0])
    assert smooth.value(x) == pytest.approx(0.5 * np.sum((M1 @ x - b1) ** 2))


def test_consensus_minimizer():
    assert consensus_minimizer([1.0, 2.0, 1.0, 3.0, 1.0], [1.0, -2.0, 0.5, 4.0, 2.0]) == pytest.approx(1.4375)
    network = path_consensus([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    assert network.edges == ((0, 1), (1, 2))


@pytest.mark.parametrize("weights, targets", [
    ([1.0], [1.0]),
    ([1.0, 2.0], [1.0]),
    ([1.0, -2.0], [1.0, 2.0]),
])
def test_path_consensus_validation(weights, targets):
    with pytest.raises(InvalidArgumentError):
        path_consensus(weights, targets)
