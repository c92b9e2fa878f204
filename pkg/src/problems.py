"""
問題レジストリモジュール
実験設定の problem 名から関数の組・初期点・既知の解を組み立てる
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, FrozenSet, Optional, Tuple

import numpy as np

from admm import DistributedProblem, LinearlyConstrainedProblem, split_auxiliary
from core import (
    IndicatorAffine,
    IndicatorBall,
    IndicatorBox,
    L1Norm,
    ProxFunction,
    Quadratic,
    Zero,
)
from counterexamples import (
    abs_problem,
    dv_lower_bound_setup,
    one_d_drs_example,
    optimal_fpr_cosines,
    ppa_diag_setup,
    RotationSpaceSpec,
    square_problem,
)
from errors import InvalidArgumentError, InvalidConfigError
from feasibility import ConvexSetPair, feasibility_certificate

PAIRED = frozenset({'prs', 'drs'})
SETS = frozenset({'prs', 'drs', 'feasibility'})
PROXIMAL = frozenset({'prs', 'drs', 'fbs', 'ppa'})


@dataclass(frozen=True)
class ProblemInstance:
    """
    実験1回分の問題

    kind は 'splitting'（f, g）、'admm'（線形制約つき）、'distributed'（グラフ上の和）。
    zstar は既知の不動点（無ければ参照実行で求める）。
    """

    name: str
    kind: str
    z0: np.ndarray
    f: Optional[ProxFunction] = None
    g: Optional[ProxFunction] = None
    zstar: Optional[np.ndarray] = None
    gamma: Optional[float] = None
    constrained: Optional[LinearlyConstrainedProblem] = None
    network: Optional[DistributedProblem] = None
    pair: Optional[ConvexSetPair] = None
    params: Dict = field(default_factory=dict)
    algorithms: FrozenSet[str] = frozenset()

    def supports(self, algorithm: str) -> bool:
        return algorithm in self.algorithms


def _rng(params: Dict) -> np.random.Generator:
    return np.random.default_rng(int(params.get('seed', 0)))


def build_abs_example(params: Dict) -> ProblemInstance:
    """f = |x|、g = 0、z0 = 2 − ε"""
    epsilon = float(params.get('eps', 0.1))
    f, g, z0 = abs_problem(epsilon)
    return ProblemInstance('abs_example', 'splitting', z0, f, g, zstar=np.zeros(1), params={'eps': epsilon})


def build_one_d(params: Dict) -> ProblemInstance:
    """f = |x|、g = |x − 1|、z0 = 2.5"""
    f, g, z0 = one_d_drs_example()
    z0 = np.array([float(params.get('z0', z0[0]))])
    return ProblemInstance('one_d', 'splitting', z0, f, g, zstar=np.zeros(1), params={'z0': float(z0[0])})


def build_square(params: Dict) -> ProblemInstance:
    f, g, z0 = square_problem()
    pair = ConvexSetPair(f, g)
    return ProblemInstance('square', 'splitting', z0, f, g, zstar=np.zeros(2), pair=pair)


def random_lasso(dim: int, rows: int, seed: int):
    """(M, b) と ½‖Mx − b‖² の Quadratic"""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((rows, dim)) / np.sqrt(rows)
    b = rng.standard_normal(rows)
    smooth = Quadratic(M.T @ M, -M.T @ b, 0.5 * float(b @ b))
    return M, b, smooth


def build_lasso(params: Dict) -> ProblemInstance:
    """min mu‖x‖₁ + ½‖Mx − b‖²（f = L1、g = 二次）"""
    dim = int(params.get('dim', 10))
    rows = int(params.get('rows', 20))
    mu = float(params.get('mu', 0.1))
    seed = int(params.get('seed', 0))
    _, _, smooth = random_lasso(dim, rows, seed)
    z0 = np.random.default_rng(seed + 1).standard_normal(dim)
    return ProblemInstance(
        'lasso', 'splitting', z0, L1Norm(mu), smooth,
        params={'dim': dim, 'rows': rows, 'mu': mu, 'seed': seed},
    )


def build_quadratic_l1(params: Dict) -> ProblemInstance:
    """無作為な半正定値二次関数と L1 ノルムの組"""
    dim = int(params.get('dim', 10))
    rng = _rng(params)
    G = rng.standard_normal((dim, dim))
    Q = G.T @ G / dim
    smooth = Quadratic(Q, rng.standard_normal(dim))
    f = L1Norm(float(rng.uniform(0.1, 1.0)), center=rng.standard_normal(dim))
    z0 = rng.standard_normal(dim) * 3.0
    return ProblemInstance('quadratic_l1', 'splitting', z0, f, smooth, params={'dim': dim, 'seed': int(params.get('seed', 0))})


def random_affine_pair(dim: int, rank_f: int, rank_g: int, seed: int) -> ConvexSetPair:
    """共通点を持つ2つのアフィン部分空間"""
    rng = np.random.default_rng(seed)
    common = rng.standard_normal(dim)
    C_f = IndicatorAffine(rng.standard_normal((dim, rank_f)), common)
    C_g = IndicatorAffine(rng.standard_normal((dim, rank_g)), common)
    return ConvexSetPair(C_f, C_g)


def build_affine_pair(params: Dict) -> ProblemInstance:
    dim = int(params.get('dim', 20))
    rank_f = int(params.get('rank_f', dim // 2))
    rank_g = int(params.get('rank_g', dim // 2))
    seed = int(params.get('seed', 0))
    pair = random_affine_pair(dim, rank_f, rank_g, seed)
    z0 = np.random.default_rng(seed + 1).standard_normal(dim) * 5.0
    certificate = feasibility_certificate(pair, z0)
    return ProblemInstance(
        'affine_pair', 'splitting', z0, pair.C_f, pair.C_g,
        zstar=np.array(certificate.zstar), pair=pair,
        params={'dim': dim, 'rank_f': rank_f, 'rank_g': rank_g, 'seed': seed},
    )


def build_box_ball(params: Dict) -> ProblemInstance:
    """箱 [0, 1]^n と中心 (1.5, …) の球"""
    dim = int(params.get('dim', 2))
    radius = float(params.get('radius', 1.0))
    C_f = IndicatorBox(np.zeros(dim), np.ones(dim))
    C_g = IndicatorBall(np.full(dim, 1.5), radius)
    z0 = np.array(params.get('z0', [-1.0] * dim), dtype=float)
    pair = ConvexSetPair(C_f, C_g)
    return ProblemInstance('box_ball', 'splitting', z0, C_f, C_g, pair=pair, params={'dim': dim, 'radius': radius})


def build_rotation(params: Dict) -> ProblemInstance:
    """c_i = (i/(i+1))^{1/2} の部分空間の組（ι_V, ι_U）"""
    alpha = float(params.get('alpha', 0.75))
    blocks = int(params.get('N', 2000))
    spec = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(blocks))
    V, U = spec.subspaces()
    z0 = np.zeros(spec.dim)
    z0[0::2] = 1.0 / np.arange(1, blocks + 1, dtype=float) ** alpha
    return ProblemInstance(
        'rotation', 'splitting', z0, V, U, zstar=np.zeros(spec.dim),
        pair=ConvexSetPair(V, U), params={'alpha': alpha, 'N': blocks},
    )


def build_dv_lower(params: Dict) -> ProblemInstance:
    alpha = float(params.get('alpha', 0.75))
    blocks = int(params.get('N', 2000))
    gamma = params.get('gamma')
    f, g, z0, gamma, _ = dv_lower_bound_setup(alpha, blocks, None if gamma is None else float(gamma))
    return ProblemInstance(
        'dv_lower', 'splitting', z0, f, g, zstar=np.zeros_like(z0),
        gamma=gamma, params={'alpha': alpha, 'N': blocks, 'gamma': gamma},
    )


def build_ppa_diag(params: Dict) -> ProblemInstance:
    alpha = float(params.get('alpha', 1.0))
    gamma = float(params.get('gamma', 1.0))
    blocks = int(params.get('N', 20000))
    horizon = int(params.get('horizon', 300))
    f, z0 = ppa_diag_setup(alpha, gamma, blocks, horizon)
    return ProblemInstance(
        'ppa_diag', 'splitting', z0, f, Zero(), zstar=np.zeros_like(z0),
        gamma=gamma, params={'alpha': alpha, 'gamma': gamma, 'N': blocks, 'horizon': horizon},
    )


def build_constrained_lasso(params: Dict) -> ProblemInstance:
    """補助変数分割の lasso: min ½‖x‖² + mu‖y‖₁ s.t. My − x = b"""
    dim = int(params.get('dim', 5))
    rows = int(params.get('rows', 8))
    mu = float(params.get('mu', 0.5))
    seed = int(params.get('seed', 0))
    M, b, _ = random_lasso(dim, rows, seed)
    problem = split_auxiliary(Quadratic(np.eye(rows)), L1Norm(mu), M, b)
    return ProblemInstance(
        'constrained_lasso', 'admm', np.zeros(rows), constrained=problem,
        params={'dim': dim, 'rows': rows, 'mu': mu, 'seed': seed},
    )


def build_lasso_1d(params: Dict) -> ProblemInstance:
    """1次元 lasso min ½x² + mu|y| s.t. m·y − x = b"""
    m = float(params.get('m', 2.0))
    b = float(params.get('b', 3.0))
    mu = float(params.get('mu', 1.0))
    problem = split_auxiliary(Quadratic([[1.0]]), L1Norm(mu), [[m]], [b])
    return ProblemInstance(
        'lasso_1d', 'admm', np.array([float(params.get('z0', 1.0))]),
        constrained=problem, params={'m': m, 'b': b, 'mu': mu},
    )


def path_consensus(weights, targets) -> DistributedProblem:
    """経路グラフ上の f_i(x) = ½a_i(x − c_i)²"""
    weights = np.asarray(weights, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if weights.shape != targets.shape or weights.size < 2 or np.any(weights <= 0):
        raise InvalidArgumentError("重みと目標値は同じ長さ（2以上）で、重みは正である必要があります")
    functions = [
        Quadratic([[a]], [-a * c], 0.5 * a * c * c)
        for a, c in zip(weights, targets)
    ]
    edges = [(i, i + 1) for i in range(weights.size - 1)]
    return DistributedProblem(tuple(functions), tuple(edges))


def consensus_minimizer(weights, targets) -> float:
    """Σ½a_i(x − c_i)² の最小点 Σa_ic_i/Σa_i"""
    weights = np.asarray(weights, dtype=float)
    return float(weights @ np.asarray(targets, dtype=float) / weights.sum())


def build_path_consensus(params: Dict) -> ProblemInstance:
    weights = params.get('weights', [1.0, 2.0, 1.0, 3.0, 1.0])
    targets = params.get('targets', [1.0, -2.0, 0.5, 4.0, 2.0])
    network = path_consensus(weights, targets)
    return ProblemInstance(
        'path_consensus', 'distributed', np.zeros(network.size), network=network,
        params={'weights': list(weights), 'targets': list(targets)},
    )


PROBLEMS: Dict[str, Tuple[Callable[[Dict], ProblemInstance], FrozenSet[str]]] = {
    'abs_example': (build_abs_example, PROXIMAL),
    'one_d': (build_one_d, PAIRED),
    'square': (build_square, SETS),
    'lasso': (build_lasso, PROXIMAL),
    'quadratic_l1': (build_quadratic_l1, PROXIMAL),
    'affine_pair': (build_affine_pair, SETS),
    'box_ball': (build_box_ball, SETS),
    'rotation': (build_rotation, SETS),
    'dv_lower': (build_dv_lower, PAIRED),
    'ppa_diag': (build_ppa_diag, frozenset({'ppa'})),
    'constrained_lasso': (build_constrained_lasso, frozenset({'admm'})),
    'lasso_1d': (build_lasso_1d, frozenset({'admm'})),
    'path_consensus': (build_path_consensus, frozenset({'dadmm'})),
}


def supported_algorithms(name: str) -> FrozenSet[str]:
    """問題を組み立てずに対応アルゴリズムを返す"""
    entry = PROBLEMS.get(name)
    if entry is None:
        raise InvalidConfigError(f"未知の問題です: {name}（利用可能: {', '.join(sorted(PROBLEMS))}）")
    return entry[1]


def build_problem(name: str, params: Optional[Dict] = None) -> ProblemInstance:
    """
    名前とパラメータから問題を組み立てる

    Raises:
        InvalidConfigError: 未知の問題名
    """
    algorithms = supported_algorithms(name)
    builder = PROBLEMS[name][0]
    return replace(builder(dict(params or {})), algorithms=algorithms)
