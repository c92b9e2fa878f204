"""
反例構成モジュール
下界・最適性の例を厳密に構成し、閉形式のオラクルと汎用エンジンの結果を照合する
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from core import (
    DiagonalQuadratic,
    DistanceToSubspace,
    IndicatorSubspace,
    L1Norm,
    Zero,
    averaged,
    frozen,
    prs_operator,
)
from errors import InvalidArgumentError, InvalidConfigError
from km import IterationTrace, RelaxationSchedule, run_km
from report import BoundReport, lower_check, merge_reports, upper_check
from splitting import certificate_at, run_drs, run_ppa, run_prs

# 打ち切りで失う下界の割合の上限
TRUNCATION_LOSS = 0.01
TRUNCATION_FACTOR = 1.0 - TRUNCATION_LOSS
# 逆関数の二分法の許容誤差
INVERSE_TOL = 1e-12

# 下界の再現で使う既定の打ち切りと反復数
DEFAULT_BLOCKS = 100000
LOWER_BOUND_HORIZON = 300


@dataclass(frozen=True)
class RotationSpaceSpec:
    """
    2次元ブロックの直和 R^{2N} 上の部分空間の組

    U = ⊕ R(1, 0)、V = ⊕ R(cos θ_i, sin θ_i)。DRS 作用素はブロックごとに c_i R_{θ_i}（c_i = cos θ_i）。
    """

    angles: np.ndarray
    cosines: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        cosines = np.asarray(self.cosines, dtype=float)
        if angles.ndim != 1 or angles.size == 0 or angles.shape != cosines.shape:
            raise InvalidArgumentError("角度と余弦は同じ長さの空でない1次元配列である必要があります")
        if np.any(~((angles > 0) & (angles <= np.pi / 2))):
            raise InvalidArgumentError("角度は (0, π/2] の範囲である必要があります")
        # δ_i が丸め誤差以下のとき c_i = 1.0 になり得るので角度の正値性で判定する
        if np.any(~((cosines >= 0) & (cosines <= 1))):
            raise InvalidArgumentError("余弦 c_i は [0, 1) の範囲である必要があります")
        if np.max(np.abs(np.cos(angles) - cosines)) > 1e-12:
            raise InvalidArgumentError("角度と余弦が一致しません")
        object.__setattr__(self, 'angles', frozen(angles))
        object.__setattr__(self, 'cosines', frozen(cosines))

    @classmethod
    def from_angles(cls, angles) -> 'RotationSpaceSpec':
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        return cls(angles=angles, cosines=np.cos(angles))

    @classmethod
    def from_cosines(cls, cosines) -> 'RotationSpaceSpec':
        cosines = np.atleast_1d(np.asarray(cosines, dtype=float))
        if np.any(~((cosines >= 0) & (cosines < 1))):
            raise InvalidArgumentError("余弦 c_i は [0, 1) の範囲である必要があります")
        return cls(angles=np.arccos(cosines), cosines=cosines)

    @classmethod
    def from_gaps(cls, gaps) -> 'RotationSpaceSpec':
        """δ_i = 1 − c_i から構成（c_i が 1 に近いときも角度を精度よく保つ）"""
        gaps = np.atleast_1d(np.asarray(gaps, dtype=float))
        if np.any(~((gaps > 0) & (gaps <= 1))):
            raise InvalidArgumentError("δ_i = 1 − c_i は (0, 1] の範囲である必要があります")
        return cls(angles=2.0 * np.arcsin(np.sqrt(gaps / 2.0)), cosines=1.0 - gaps)

    @property
    def blocks(self) -> int:
        return int(self.angles.size)

    @property
    def dim(self) -> int:
        return 2 * self.blocks

    def subspaces(self) -> Tuple[IndicatorSubspace, IndicatorSubspace]:
        """(ι_V, ι_U) を疎な正規直交基底で返す"""
        n = self.blocks
        columns = np.arange(n)
        U = sp.csr_matrix((np.ones(n), (2 * columns, columns)), shape=(2 * n, n))
        rows = np.concatenate([2 * columns, 2 * columns + 1])
        values = np.concatenate([np.cos(self.angles), np.sin(self.angles)])
        V = sp.csr_matrix((values, (rows, np.concatenate([columns, columns]))), shape=(2 * n, n))
        return IndicatorSubspace(V), IndicatorSubspace(U)

    def distance_pair(self) -> Tuple[DistanceToSubspace, IndicatorSubspace]:
        """(d_V, ι_U)"""
        V, U = self.subspaces()
        return DistanceToSubspace(V.basis), U

    def block_norms_sq(self, z) -> np.ndarray:
        blocks = np.asarray(z, dtype=float).reshape(self.blocks, 2)
        return np.einsum('ij,ij->i', blocks, blocks)


def build_rotation_operator(spec: RotationSpaceSpec) -> Callable[[np.ndarray], np.ndarray]:
    """
    ブロック対角作用素 c_0R_{θ_0} ⊕ c_1R_{θ_1} ⊕ … を返す

    f = ι_V, g = ι_U の (T_PRS)_{1/2} と一致する。
    """
    cos_part = spec.cosines * np.cos(spec.angles)
    sin_part = spec.cosines * np.sin(spec.angles)

    def operator(z):
        blocks = np.asarray(z, dtype=float).reshape(spec.blocks, 2)
        image = np.empty_like(blocks)
        image[:, 0] = cos_part * blocks[:, 0] - sin_part * blocks[:, 1]
        image[:, 1] = sin_part * blocks[:, 0] + cos_part * blocks[:, 1]
        return image.ravel()

    return operator


def check_rotation_operator(spec: RotationSpaceSpec, samples: int = 5, seed: int = 0) -> BoundReport:
    """ブロック作用素と部分空間の組から作った DRS 作用素の一致を無作為な点で検証"""
    V, U = spec.subspaces()
    drs = averaged(prs_operator(V, U, 1.0), 0.5)
    operator = build_rotation_operator(spec)
    rng = np.random.default_rng(seed)
    defects, bounds = [], []
    for _ in range(samples):
        z = rng.standard_normal(spec.dim)
        defects.append(np.max(np.abs(operator(z) - drs(z))))
        bounds.append(1e-12 * max(1.0, float(np.max(np.abs(z)))))
    return upper_check('rotation_operator', defects, bounds, atol=0.0, rtol=0.0)


def _block_powers(spec: RotationSpaceSpec, weights: np.ndarray, k) -> np.ndarray:
    squares = spec.cosines ** 2
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return np.array([weights @ squares ** step for step in k])


def rotation_norm_sq(spec: RotationSpaceSpec, z0, k) -> np.ndarray:
    """‖z^k‖² = Σ c_i^{2k}‖z0_i‖²（DRS、z* = 0）"""
    return _block_powers(spec, spec.block_norms_sq(z0), k)


def rotation_fpr(spec: RotationSpaceSpec, z0, k) -> np.ndarray:
    """‖Tz^k − z^k‖² = Σ sin²θ_i c_i^{2k}‖z0_i‖²"""
    return _block_powers(spec, spec.block_norms_sq(z0) * np.sin(spec.angles) ** 2, k)


def check_rotation_trace(trace: IterationTrace, spec: RotationSpaceSpec, z0) -> BoundReport:
    """エンジンの ‖z^k‖² と FPR がブロックの閉形式と 1e-10 で一致することを検証"""
    if trace.dist_sq is None:
        raise InvalidArgumentError("回転例の照合には zstar = 0 を渡した実行が必要です")
    k = np.arange(len(trace))
    norms = rotation_norm_sq(spec, z0, k)
    fpr = rotation_fpr(spec, z0, k)
    scale = max(1.0, float(norms[0]))
    return merge_reports('rotation_trace', [
        upper_check('rotation_norm', np.abs(trace.dist_sq - norms), 0.0, atol=1e-10 * scale, rtol=0.0),
        upper_check('rotation_fpr', np.abs(trace.fpr - fpr), 0.0, atol=1e-10 * scale, rtol=0.0),
    ])


def _interleave(first: np.ndarray) -> np.ndarray:
    """各ブロックの第1成分に first を置いたベクトル"""
    z = np.zeros(2 * first.size)
    z[0::2] = first
    return z


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0.5:
        raise InvalidArgumentError(f"α は 1/2 より大きい必要があります: {alpha}")
    return alpha


def _check_truncation(ratio: float, alpha: float, blocks: int, horizon: int) -> None:
    loss = ratio ** (2.0 * alpha)
    if loss > TRUNCATION_LOSS:
        raise InvalidConfigError(
            f"打ち切り N={blocks} が反復 K={horizon} に対して小さすぎます（損失 {loss:.3e} > {TRUNCATION_LOSS}）"
        )


def optimal_fpr_cosines(blocks: int) -> np.ndarray:
    """c_i = (i/(i+1))^{1/2}"""
    i = np.arange(blocks, dtype=float)
    return np.sqrt(i / (i + 1.0))


def thm_optimal_fpr_setup(alpha: float, N: int = DEFAULT_BLOCKS, horizon: int = LOWER_BOUND_HORIZON):
    """
    FPR の下界 ‖Tz^k − z^k‖² ≥ 1/(k+1)^{2α} を与える DRS の例

    c_i = (i/(i+1))^{1/2}、z0 = (√(2αe)(1/(j+1)^α, 0))_j。打ち切りの損失
    ((K+1)/(N+2))^{2α} が 1% 以下になる N を要求する。

    Returns:
        (spec, z0)
    """
    alpha = _check_alpha(alpha)
    if N < 1:
        raise InvalidArgumentError(f"ブロック数は1以上である必要があります: {N}")
    _check_truncation((horizon + 1.0) / (N + 2.0), alpha, N, horizon)
    spec = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(N))
    j = np.arange(N, dtype=float)
    z0 = _interleave(np.sqrt(2.0 * alpha * np.e) / (j + 1.0) ** alpha)
    return spec, z0


def optimal_fpr_lower_bound(alpha: float, k) -> np.ndarray:
    """打ち切りを考慮した 0.99/(k+1)^{2α}"""
    return TRUNCATION_FACTOR / (np.asarray(k, dtype=float) + 1.0) ** (2.0 * alpha)


def run_optimal_fpr(alpha: float, N: int = DEFAULT_BLOCKS, horizon: int = LOWER_BOUND_HORIZON) -> IterationTrace:
    """回転作用素に λ ≡ 1 の KM（= DRS）を適用"""
    spec, z0 = thm_optimal_fpr_setup(alpha, N, horizon)
    return run_km(
        build_rotation_operator(spec), RelaxationSchedule.constant(1.0), z0, horizon,
        zstar=np.zeros_like(z0), store_vectors=False,
    )


def check_optimal_fpr(trace: IterationTrace, alpha: float) -> BoundReport:
    """1 ≤ k ≤ K で fpr_k ≥ 0.99/(k+1)^{2α}"""
    k = np.arange(1, len(trace))
    return lower_check('optimal_fpr', trace.fpr[1:], optimal_fpr_lower_bound(alpha, k), atol=0.0, rtol=0.0)


def invert_decreasing(h: Callable[[float], float], target: float, tol: float = INVERSE_TOL) -> float:
    """
    h₂ = (1/h − 1)^{−1} を評価（φ(y) = 1/h(y) − 1 = target を二分法で解く）
    """
    def phi(y):
        return 1.0 / h(y) - 1.0 - target

    lower = 0.0
    if phi(lower) > 0:
        raise InvalidArgumentError(f"h の値域が 1/({target}+1) を含みません")
    if phi(lower) == 0:
        return 0.0
    upper = 1.0
    while phi(upper) < 0:
        lower, upper = upper, upper * 2.0
        if upper > 1e300:
            raise InvalidArgumentError(f"h が 0 に減少しないため h₂({target}) を求められません")
    return float(brentq(phi, lower, upper, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=1000))


@dataclass(frozen=True)
class SlowSequenceSpec:
    """
    任意に遅い収束の列

    c_j = h₂(j+1)/(1 + h₂(j+1))、証拠添字 n_k は n_k + 1 = [1/h(k+1)]。
    gaps は δ_j = 1 − c_j = 1/(1 + h₂(j+1))。
    """

    h: Callable[[float], float]
    blocks: int
    inverse: Optional[Callable[[float], float]] = None
    gaps: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.blocks < 1:
            raise InvalidArgumentError(f"ブロック数は1以上である必要があります: {self.blocks}")
        start = float(self.h(0.0))
        if not 0.5 <= start < 1.0:
            raise InvalidArgumentError(f"h(0) は [1/2, 1) にある必要があります: {start}")
        probes = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, 200)])
        values = np.array([self.h(t) for t in probes])
        if np.any(values <= 0) or np.any(np.diff(values) >= 0):
            raise InvalidArgumentError("h は正で狭義単調減少である必要があります")
        inverse = self.inverse or (lambda x: invert_decreasing(self.h, x))
        h2 = np.array([inverse(j + 1.0) for j in range(self.blocks)])
        if np.any(h2 < 0):
            raise InvalidArgumentError("h₂ が負の値を返しました")
        object.__setattr__(self, 'gaps', frozen(1.0 / (1.0 + h2)))

    @property
    def cosines(self) -> np.ndarray:
        return 1.0 - self.gaps

    def witnesses(self, horizon: int) -> np.ndarray:
        """k = 0..horizon の n_k"""
        k = np.arange(horizon + 1)
        return np.array([int(np.floor(1.0 / self.h(i + 1.0))) - 1 for i in k])

    def check_witness(self, horizon: int) -> BoundReport:
        """c_{n_k}^{k+1}/(n_k+1) > h(k+1)/e を全ての k ≤ horizon で検証"""
        n = self.witnesses(horizon)
        if n.max() >= self.blocks:
            raise InvalidConfigError(f"証拠添字 n_K={n.max()} がブロック数 {self.blocks} を超えています")
        k = np.arange(horizon + 1, dtype=float)
        # c^{k+1} = exp((k+1)·log1p(−δ))
        measured = np.exp((k + 1.0) * np.log1p(-self.gaps[n])) / (n + 1.0)
        bound = np.array([self.h(i + 1.0) for i in k]) / np.e
        report = lower_check('slow_witness', measured, bound, atol=0.0, rtol=0.0)
        strict = bool(np.all(measured > bound))
        return merge_reports('slow_witness', [report], notes={'strict': strict})


def slow_target(exponent: float = 0.05) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    """h(t) = (t+2)^{−p} と閉形式の h₂(x) = (x+1)^{1/p} − 2"""
    if not 0 < exponent:
        raise InvalidArgumentError(f"指数は正である必要があります: {exponent}")

    def h(t):
        return (t + 2.0) ** (-exponent)

    def inverse(x):
        return (x + 1.0) ** (1.0 / exponent) - 2.0

    return h, inverse


def arbitrarily_slow_setup(
    h: Callable[[float], float],
    N: Optional[int] = None,
    horizon: int = 200,
    inverse: Optional[Callable[[float], float]] = None,
):
    """
    ‖z^k − z*‖ ≥ h(k)/e となる DRS の例

    ‖z0_j‖ = 1/(j+1) を固定し、空間（角度）を h に合わせて選ぶ。
    N を省略すると証拠添字 n_K を含む最小のブロック数を使う。

    Returns:
        (spec, z0, slow)
    """
    if N is None:
        h_end = float(h(horizon + 1.0))
        if not h_end > 0:
            raise InvalidArgumentError("h は正である必要があります")
        N = int(np.floor(1.0 / h_end))
    slow = SlowSequenceSpec(h, int(N), inverse=inverse)
    if slow.witnesses(horizon).max() >= slow.blocks:
        raise InvalidConfigError(f"ブロック数 N={N} が証拠添字を含みません")
    spec = RotationSpaceSpec.from_gaps(slow.gaps)
    z0 = _interleave(1.0 / np.arange(1, slow.blocks + 1, dtype=float))
    return spec, z0, slow


def check_slow_distance(trace: IterationTrace, h: Callable[[float], float]) -> BoundReport:
    """‖z^k − z*‖ ≥ h(k)/e（z* = 0）"""
    if trace.dist_sq is None:
        raise InvalidArgumentError("距離の記録が必要です")
    k = np.arange(len(trace), dtype=float)
    bound = np.array([h(i) for i in k]) / np.e
    return lower_check('slow_distance', np.sqrt(trace.dist_sq), bound, atol=0.0, rtol=0.0)


@dataclass(frozen=True)
class OracleState:
    """閉形式の反復値"""

    z: np.ndarray
    x_g: np.ndarray
    x_f: np.ndarray
    xbar_g: np.ndarray
    xbar_f: np.ndarray
    values: Dict[str, float] = field(default_factory=dict)


def square_problem():
    """f = ι_{x₁=0}、g = ι_{x₂=0}、z0 = (1, 1)"""
    f = IndicatorSubspace([[0.0], [1.0]])
    g = IndicatorSubspace([[1.0], [0.0]])
    return f, g, np.array([1.0, 1.0])


def feasibility_square_oracle(k: int) -> OracleState:
    """
    直交する2直線への PRS（λ ≡ 1）の閉形式

    偶数 k: z = (1,1), x_g = (1,0), x_f = (0,−1)、奇数 k: 符号反転。
    エルゴード平均は偶数 k で (1/(k+1), 0), (0, −1/(k+1))、奇数 k で 0。
    """
    if k < 0:
        raise InvalidArgumentError(f"k は非負である必要があります: {k}")
    sign = 1.0 if k % 2 == 0 else -1.0
    weight = 1.0 / (k + 1) if k % 2 == 0 else 0.0
    return OracleState(
        z=np.array([sign, sign]),
        x_g=np.array([sign, 0.0]),
        x_f=np.array([0.0, -sign]),
        xbar_g=np.array([weight, 0.0]),
        xbar_f=np.array([0.0, -weight]),
        values={'ergodic_gap': float(np.sqrt(2.0) * weight)},
    )


def abs_problem(epsilon: float):
    """f = |x|、g = 0、γ = 1、z0 = 2 − ε"""
    _check_epsilon(epsilon)
    return L1Norm(1.0), Zero(), np.array([2.0 - epsilon])


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise InvalidArgumentError(f"ε は (0, 1) の範囲である必要があります: {epsilon}")


def abs_example_oracle(epsilon: float, k: int) -> OracleState:
    """
    f = |x|, g = 0 への PRS（λ ≡ 1, γ = 1, z0 = 2 − ε）の閉形式

    k ≥ 1 で z^k = x_g^k = (−1)^k ε、x_f^k = 0。
    x̄_f^k = (1−ε)/(k+1)、x̄_g^k は偶数 k で (2−ε)/(k+1)、奇数 k で (2−2ε)/(k+1)。
    """
    _check_epsilon(epsilon)
    if k < 0:
        raise InvalidArgumentError(f"k は非負である必要があります: {k}")
    if k == 0:
        z, x_g, x_f = 2.0 - epsilon, 2.0 - epsilon, 1.0 - epsilon
    else:
        z = x_g = (-1.0) ** k * epsilon
        x_f = 0.0
    xbar_f = (1.0 - epsilon) / (k + 1)
    xbar_g = (2.0 - epsilon if k % 2 == 0 else 2.0 - 2.0 * epsilon) / (k + 1)
    return OracleState(
        z=np.array([z]),
        x_g=np.array([x_g]),
        x_f=np.array([x_f]),
        xbar_g=np.array([xbar_g]),
        xbar_f=np.array([xbar_f]),
        values={
            'ergodic_error_f': xbar_f,
            'ergodic_error_g': xbar_g,
            'ergodic_gap': abs(xbar_g - xbar_f),
        },
    )


def abs_tightness(epsilon: float, k: int) -> Dict[str, float]:
    """
    ε を与えたときの上界と実測の比

    upper_ratio: 実測 (1−ε)/(k+1) ÷ 上界 ((1−ε) + ε²/4)/(k+1)
    lipschitz_ratio: 上界 (5 − 3ε + ε²/4)/(k+1) ÷ 偶数 k の実測 (2−ε)/(k+1)
    feasibility_ratio: 上界 2(2−ε)/(k+1) ÷ 偶数 k の実測 1/(k+1)
    """
    _check_epsilon(epsilon)
    scale = 1.0 / (k + 1)
    upper = ((1.0 - epsilon) + epsilon ** 2 / 4.0) * scale
    lipschitz = (5.0 - 3.0 * epsilon + epsilon ** 2 / 4.0) * scale
    return {
        'upper_bound': upper,
        'lipschitz_bound': lipschitz,
        'feasibility_bound': 2.0 * (2.0 - epsilon) * scale,
        'upper_ratio': (1.0 - epsilon) * scale / upper,
        'lipschitz_ratio': lipschitz / ((2.0 - epsilon) * scale),
        'feasibility_ratio': 2.0 * (2.0 - epsilon),
    }


def check_oracle_match(trace: IterationTrace, oracle: Callable[[int], OracleState], atol: float = 1e-12) -> BoundReport:
    """エンジンのトレースと閉形式を座標ごとに照合"""
    trace.require_vectors()
    if trace.x_g is None:
        raise InvalidArgumentError("オラクル照合には三角分解の記録が必要です")
    defects = []
    for k in range(len(trace)):
        state = oracle(k)
        defects.append(max(
            np.max(np.abs(trace.z[k] - state.z)),
            np.max(np.abs(trace.x_g[k] - state.x_g)),
            np.max(np.abs(trace.x_f[k] - state.x_f)),
            np.max(np.abs(trace.xbar_g[k] - state.xbar_g)),
            np.max(np.abs(trace.xbar_f[k] - state.xbar_f)),
        ))
    return upper_check('oracle_match', defects, 0.0, atol=atol, rtol=0.0)


def run_square_example(iters: int) -> IterationTrace:
    f, g, z0 = square_problem()
    return run_prs(f, g, 1.0, z0, iters, zstar=np.zeros(2))


def run_abs_example(epsilon: float, iters: int) -> IterationTrace:
    f, g, z0 = abs_problem(epsilon)
    return run_prs(f, g, 1.0, z0, iters, zstar=np.zeros(1))


def dv_initial_point(alpha: float, N: int) -> np.ndarray:
    """z0 = ((1/(j+1)^α, 0))_j"""
    alpha = _check_alpha(alpha)
    return _interleave(1.0 / np.arange(1, N + 1, dtype=float) ** alpha)


def dv_lower_bound_setup(alpha: float, N: int = DEFAULT_BLOCKS, gamma: Optional[float] = None):
    """
    f = d_V, g = ι_U の DRS 下界の例

    γ ≥ ‖z0‖ のとき (ι_V, ι_U) と同じ列を生成し、目的関数誤差は d_V(x_g^k)。
    γ を省略すると γ = ‖z0‖。

    Returns:
        (f, g, z0, gamma, spec)
    """
    spec = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(N))
    z0 = dv_initial_point(alpha, N)
    norm = float(np.linalg.norm(z0))
    gamma = norm if gamma is None else float(gamma)
    if gamma < norm:
        raise InvalidConfigError(f"同値性には γ ≥ ‖z0‖ = {norm:.6g} が必要です: γ={gamma}")
    f, g = spec.distance_pair()
    return f, g, z0, gamma, spec


def dv_certificate(f, g, gamma: float, z0):
    """z* = 0, x* = 0 の閉形式の証明書"""
    return certificate_at(f, g, gamma, np.zeros_like(z0), z0, closed_form=True)


def run_dv_example(alpha: float, N: int, iters: int, gamma: Optional[float] = None, store_vectors: bool = False) -> IterationTrace:
    """d_V 問題の DRS を実行し、extras['dv_xg'] に d_V(x_g^k) を記録"""
    f, g, z0, gamma, _ = dv_lower_bound_setup(alpha, N, gamma)
    probes = {'dv_xg': lambda k, triangle, xbar_g, xbar_f: f.value(triangle.x_g)}
    return run_drs(f, g, gamma, z0, iters, zstar=np.zeros_like(z0), store_vectors=store_vectors, probes=probes)


def compare_distance_equivalence(alpha: float, N: int, iters: int, gamma: float) -> Dict:
    """
    (ι_V, ι_U) と (d_V, ι_U) の DRS の z 列を比較

    γ < ‖z0‖ でも実行し、乖離量だけを報告する。
    """
    spec = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(N))
    z0 = dv_initial_point(alpha, N)
    V, U = spec.subspaces()
    dV, _ = spec.distance_pair()
    indicator = run_drs(V, U, gamma, z0, iters)
    distance = run_drs(dV, U, gamma, z0, iters)
    deviation = float(np.max(np.abs(indicator.z - distance.z)))
    return {
        'gamma': float(gamma),
        'z0_norm': float(np.linalg.norm(z0)),
        'precondition': bool(gamma >= np.linalg.norm(z0)),
        'max_deviation': deviation,
        'coincide': deviation <= 1e-10,
    }


def ppa_diag_setup(alpha: float, gamma: float = 1.0, N: int = DEFAULT_BLOCKS, horizon: int = LOWER_BOUND_HORIZON):
    """
    PPA の下界の例 f = ½Σ x_j²/j、z0_j = 1/(j+γ)^α（j = 1..N）

    Returns:
        (f, z0)
    """
    alpha = _check_alpha(alpha)
    if not gamma > 0:
        raise InvalidArgumentError(f"γ は正である必要があります: {gamma}")
    _check_truncation((horizon + 1.0 + gamma) / (N + gamma), alpha, N, horizon)
    j = np.arange(1, N + 1, dtype=float)
    return DiagonalQuadratic(1.0 / j), 1.0 / (j + gamma) ** alpha


def ppa_lower_bounds(alpha: float, gamma: float, k) -> Tuple[np.ndarray, np.ndarray]:
    """
    打ち切りを考慮した (FPR の下界, f(z^{k+1}) − f* の下界)

    0.99γ²/((1+2α)e^{2γ}(k+γ)^{1+2α}) と 0.99/(4αe^{2γ}(k+1+γ)^{2α})。
    """
    k = np.asarray(k, dtype=float)
    fpr = TRUNCATION_FACTOR * gamma ** 2 / ((1.0 + 2.0 * alpha) * np.exp(2.0 * gamma) * (k + gamma) ** (1.0 + 2.0 * alpha))
    objective = TRUNCATION_FACTOR / (4.0 * alpha * np.exp(2.0 * gamma) * (k + 1.0 + gamma) ** (2.0 * alpha))
    return fpr, objective


def run_ppa_lower(alpha: float, gamma: float = 1.0, N: int = DEFAULT_BLOCKS, horizon: int = LOWER_BOUND_HORIZON) -> IterationTrace:
    f, z0 = ppa_diag_setup(alpha, gamma, N, horizon)
    return run_ppa(f, gamma, z0, horizon + 1, zstar=np.zeros_like(z0), store_vectors=False)


def check_ppa_lower(trace: IterationTrace, alpha: float, gamma: float, horizon: int) -> BoundReport:
    """1 ≤ k ≤ K で FPR と f(z^{k+1}) − f* の下界を検証"""
    k = np.arange(1, horizon + 1)
    fpr_bound, objective_bound = ppa_lower_bounds(alpha, gamma, k)
    return merge_reports('ppa_lower', [
        lower_check('ppa_fpr_lower', trace.fpr[k], fpr_bound, atol=0.0, rtol=0.0),
        lower_check('ppa_objective_lower', trace.objective[k + 1], objective_bound, atol=0.0, rtol=0.0),
    ])


def one_d_drs_example():
    """f = |x|、g = |x − 1|、z0 = 2.5（z* = 0, x* = 1）"""
    return L1Norm(1.0), L1Norm(1.0, center=[1.0]), np.array([2.5])


if __name__ == "__main__":
    print("=" * 70)
    print("🧪 反例構成の動作確認")
    print("=" * 70)

    spec = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(50))
    report = check_rotation_operator(spec)
    print(f"{'✅' if report.passed else '❌'} 回転作用素の一致: worst={report.worst_margin:.3e}")

    trace = run_square_example(10)
    report = check_oracle_match(trace, feasibility_square_oracle)
    print(f"{'✅' if report.passed else '❌'} 直交2直線のオラクル照合")

    trace = run_abs_example(0.1, 10)
    report = check_oracle_match(trace, lambda k: abs_example_oracle(0.1, k))
    print(f"{'✅' if report.passed else '❌'} |x| 例のオラクル照合")

    h, inverse = slow_target()
    slow = SlowSequenceSpec(h, 2, inverse=inverse)
    report = slow.check_witness(200)
    print(f"{'✅' if report.passed else '❌'} 遅い列の証拠不等式")
