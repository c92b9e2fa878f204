"""
基本演算モジュール
有限次元ヒルベルト空間の点、凸関数記述子、近接写像・反射、PRS作用素を提供
"""

from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from errors import InvalidArgumentError, SolverFailureError, UnsupportedError
from report import BoundReport, lower_check, upper_check

# 指示関数の実行可能判定に使う許容誤差
INDICATOR_TOL = 1e-9
# 基底の直交化で退化とみなす閾値
BASIS_TOL = 1e-12
# 実行不可能点での値（拡張実数値の +∞）
INFEASIBLE = np.inf


def as_vector(x, name: str = "x") -> np.ndarray:
    """
    入力を有限な1次元 float 配列に変換

    Args:
        x: スカラーまたは配列
        name: エラーメッセージ用の変数名

    Returns:
        新しく確保された1次元配列
    """
    vector = np.atleast_1d(np.array(x, dtype=float))
    if vector.ndim != 1:
        raise InvalidArgumentError(f"{name} は1次元ベクトルである必要があります: shape={vector.shape}")
    if vector.size == 0:
        raise InvalidArgumentError(f"{name} の次元が0です")
    if not np.all(np.isfinite(vector)):
        raise InvalidArgumentError(f"{name} に非有限値 (NaN/Inf) が含まれています")
    return vector


def frozen(x) -> np.ndarray:
    """読み取り専用のコピーを返す"""
    array = np.array(x, dtype=float)
    array.flags.writeable = False
    return array


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidArgumentError(f"γ は正の有限値である必要があります: {gamma}")
    return gamma


def orthonormal_basis(basis, tol: float = BASIS_TOL):
    """
    部分空間の基底を正規直交化

    密行列は QR 分解で直交化し、対角成分が tol 以下なら退化とみなす。
    疎行列は既に正規直交であることを要求し、QᵀQ ≈ I を検証する。

    Args:
        basis: (n, r) 行列。列が部分空間を張る
        tol: 退化判定の閾値

    Returns:
        正規直交基底 (n, r)
    """
    if sp.issparse(basis):
        q = sp.csr_matrix(basis, dtype=float)
        if q.shape[1] == 0:
            return q
        gram = (q.T @ q).tocsr() - sp.identity(q.shape[1], format='csr')
        deviation = abs(gram).max() if gram.nnz else 0.0
        if deviation > 1e-10:
            raise InvalidArgumentError(f"疎な基底が正規直交ではありません (偏差 {deviation:.3e})")
        return q

    matrix = np.array(basis, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2:
        raise InvalidArgumentError(f"基底は2次元配列である必要があります: shape={matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidArgumentError("基底に非有限値が含まれています")
    if matrix.shape[1] == 0:
        return matrix
    if matrix.shape[1] > matrix.shape[0]:
        raise InvalidArgumentError(f"基底の列数が次元を超えています: shape={matrix.shape}")

    q, r = np.linalg.qr(matrix)
    diagonal = np.abs(np.diag(r))
    if diagonal.min() <= tol * max(1.0, diagonal.max()):
        raise InvalidArgumentError("退化した基底です（列が一次従属）")
    return q


class ProxFunction:
    """
    閉真凸関数の記述子の基底クラス

    サブクラスは value と prox を実装する。β は ∇f が (1/β)-Lipschitz となる定数で、
    滑らかな関数のみが持つ。
    """

    kind = "base"
    beta: Optional[float] = None

    def value(self, x: np.ndarray) -> float:
        raise UnsupportedError(f"{self.kind} は関数値を評価できません")

    def prox(self, gamma: float, x: np.ndarray) -> np.ndarray:
        raise UnsupportedError(f"{self.kind} は近接写像を持ちません")

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise UnsupportedError(f"{self.kind} は微分可能ではありません")

    @property
    def is_smooth(self) -> bool:
        return self.beta is not None

    def lipschitz_modulus(self, dim: int) -> Optional[float]:
        """関数自体の Lipschitz 定数（無ければ None）"""
        return None

    def quadratic_form(self, dim: int) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
        """½xᵀQx + qᵀx + c の形で書ける場合は (Q, q, c) を返す"""
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Zero(ProxFunction):
    """恒等的に0の関数"""

    kind = "zero"
    beta = np.inf

    def value(self, x):
        return 0.0

    def prox(self, gamma, x):
        return np.array(x, dtype=float)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def lipschitz_modulus(self, dim):
        return 0.0

    def quadratic_form(self, dim):
        return np.zeros((dim, dim)), np.zeros(dim), 0.0


class L1Norm(ProxFunction):
    """scale·‖x − center‖₁（近接写像はソフト閾値処理）"""

    kind = "l1"

    def __init__(self, scale: float = 1.0, center=None):
        if not np.isfinite(scale) or scale <= 0:
            raise InvalidArgumentError(f"L1Norm の scale は正の値である必要があります: {scale}")
        self.scale = float(scale)
        self.center = None if center is None else frozen(as_vector(center, "center"))

    def _shift(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.center is None else x - self.center

    def value(self, x):
        return self.scale * float(np.sum(np.abs(self._shift(x))))

    def prox(self, gamma, x):
        shifted = self._shift(x)
        shrunk = np.sign(shifted) * np.maximum(np.abs(shifted) - gamma * self.scale, 0.0)
        return shrunk if self.center is None else shrunk + self.center

    def lipschitz_modulus(self, dim):
        # ℓ2 ノルムに関する定数（1次元では scale に一致）
        return self.scale * float(np.sqrt(dim))

    def __repr__(self):
        return f"L1Norm(scale={self.scale})"


class IndicatorSet(ProxFunction):
    """
    閉凸集合の指示関数

    近接写像は射影。値は距離が INDICATOR_TOL 以下なら 0、それ以外は +∞。
    """

    kind = "indicator"

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float = INDICATOR_TOL) -> bool:
        return self.distance(x) <= tol

    def value(self, x):
        return 0.0 if self.contains(x) else INFEASIBLE

    def prox(self, gamma, x):
        return self.project(np.asarray(x, dtype=float))


class IndicatorSubspace(IndicatorSet):
    """部分空間の指示関数（正規直交基底で保持）"""

    kind = "subspace"

    def __init__(self, basis):
        self.basis = orthonormal_basis(basis)
        self.dim = self.basis.shape[0]

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.basis.shape[1] == 0:
            return np.zeros_like(x)
        return np.asarray(self.basis @ (self.basis.T @ x)).ravel()

    def __repr__(self):
        return f"IndicatorSubspace(dim={self.dim}, rank={self.basis.shape[1]})"


class IndicatorAffine(IndicatorSet):
    """アフィン集合 offset + span(basis) の指示関数"""

    kind = "affine"

    def __init__(self, basis, offset):
        self.offset = frozen(as_vector(offset, "offset"))
        matrix = basis
        if not sp.issparse(basis):
            matrix = np.array(basis, dtype=float)
            if matrix.ndim == 1 and matrix.size == 0:
                matrix = np.zeros((self.offset.size, 0))
        self.subspace = IndicatorSubspace(matrix)
        if self.subspace.dim != self.offset.size:
            raise InvalidArgumentError("基底と offset の次元が一致しません")
        self.dim = self.offset.size

    @property
    def basis(self):
        return self.subspace.basis

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return self.offset + self.subspace.project(x - self.offset)

    def __repr__(self):
        return f"IndicatorAffine(dim={self.dim}, rank={self.basis.shape[1]})"


class IndicatorBox(IndicatorSet):
    """箱型集合 [lower, upper] の指示関数"""

    kind = "box"

    def __init__(self, lower, upper):
        self.lower = frozen(np.atleast_1d(np.array(lower, dtype=float)))
        self.upper = frozen(np.atleast_1d(np.array(upper, dtype=float)))
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise InvalidArgumentError("箱の下限と上限が不正です")

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


class IndicatorBall(IndicatorSet):
    """閉球 B(center, radius) の指示関数"""

    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = frozen(as_vector(center, "center"))
        if not np.isfinite(radius) or radius <= 0:
            raise InvalidArgumentError(f"半径は正の値である必要があります: {radius}")
        self.radius = float(radius)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        offset = x - self.center
        norm = np.linalg.norm(offset)
        if norm <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / norm)


class Quadratic(ProxFunction):
    """
    ½xᵀQx + qᵀx + c（Q は対称半正定値）

    近接写像は (I + γQ) の Cholesky 分解を γ ごとにキャッシュして解く。
    """

    kind = "quadratic"

    def __init__(self, Q, q=None, c: float = 0.0):
        matrix = np.atleast_2d(np.array(Q, dtype=float))
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidArgumentError(f"Q は正方行列である必要があります: shape={matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidArgumentError("Q に非有限値が含まれています")
        scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
        if np.max(np.abs(matrix - matrix.T)) > 1e-10 * scale:
            raise InvalidArgumentError("Q が対称ではありません")
        eigenvalues = np.linalg.eigvalsh(matrix)
        if eigenvalues.min() < -1e-10 * scale:
            raise InvalidArgumentError(f"Q が半正定値ではありません (最小固有値 {eigenvalues.min():.3e})")

        self.Q = frozen(0.5 * (matrix + matrix.T))
        n = matrix.shape[0]
        self.q = frozen(np.zeros(n) if q is None else as_vector(q, "q"))
        if self.q.size != n:
            raise InvalidArgumentError("q の次元が Q と一致しません")
        self.c = float(c)
        largest = max(float(eigenvalues.max()), 0.0)
        self.beta = np.inf if largest <= 0 else 1.0 / largest
        self._factors = {}

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x + self.c)

    def gradient(self, x):
        return self.Q @ np.asarray(x, dtype=float) + self.q

    def _factor(self, gamma: float):
        factor = self._factors.get(gamma)
        if factor is None:
            factor = cho_factor(np.eye(self.Q.shape[0]) + gamma * self.Q)
            self._factors[gamma] = factor
        return factor

    def prox(self, gamma, x):
        rhs = np.asarray(x, dtype=float) - gamma * self.q
        return cho_solve(self._factor(gamma), rhs)

    def quadratic_form(self, dim):
        return np.array(self.Q), np.array(self.q), self.c

    def __repr__(self):
        return f"Quadratic(dim={self.Q.shape[0]})"


class DiagonalQuadratic(ProxFunction):
    """½Σ w_j x_j²（近接写像は成分ごとに x_j/(1 + γw_j)）"""

    kind = "diagonal_quadratic"

    def __init__(self, weights):
        self.weights = frozen(as_vector(weights, "weights"))
        if np.any(self.weights < 0):
            raise InvalidArgumentError("重みは非負である必要があります")
        largest = float(self.weights.max())
        self.beta = np.inf if largest <= 0 else 1.0 / largest

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.sum(self.weights * x * x))

    def gradient(self, x):
        return self.weights * np.asarray(x, dtype=float)

    def prox(self, gamma, x):
        return np.asarray(x, dtype=float) / (1.0 + gamma * self.weights)

    def quadratic_form(self, dim):
        return np.diag(self.weights), np.zeros(self.weights.size), 0.0

    def __repr__(self):
        return f"DiagonalQuadratic(dim={self.weights.size})"


class DistanceToSet(ProxFunction):
    """
    集合への距離関数 d_C

    prox_{γd_C}(x) = θP_C(x) + (1−θ)x、ただし γ ≤ d_C(x) なら θ = γ/d_C(x)、それ以外は θ = 1。
    """

    kind = "distance"

    def __init__(self, target: IndicatorSet):
        if not isinstance(target, IndicatorSet):
            raise InvalidArgumentError("距離関数の対象は射影を持つ集合である必要があります")
        self.target = target

    def value(self, x):
        return self.target.distance(x)

    def prox(self, gamma, x):
        x = np.asarray(x, dtype=float)
        projected = self.target.project(x)
        distance = float(np.linalg.norm(x - projected))
        if gamma >= distance:
            return projected
        theta = gamma / distance
        return theta * projected + (1.0 - theta) * x

    def lipschitz_modulus(self, dim):
        return 1.0


class DistanceToSubspace(DistanceToSet):
    """部分空間への距離関数"""

    def __init__(self, basis):
        super().__init__(IndicatorSubspace(basis))

    @property
    def basis(self):
        return self.target.basis


class Custom(ProxFunction):
    """
    コールバックで定義する関数

    prox を渡す場合は精度 accuracy の申告が必要（検証では厳密な prox として扱う）。
    """

    kind = "custom"

    def __init__(
        self,
        evaluate: Callable[[np.ndarray], float],
        prox: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        beta: Optional[float] = None,
        lipschitz: Optional[float] = None,
        accuracy: Optional[float] = None,
    ):
        if prox is not None and accuracy is None:
            raise InvalidArgumentError("Custom の prox には精度 accuracy の申告が必要です")
        if (gradient is None) != (beta is None):
            raise InvalidArgumentError("gradient と beta は同時に指定してください")
        self._evaluate = evaluate
        self._prox = prox
        self._gradient = gradient
        self.beta = beta
        self.lipschitz = lipschitz
        self.accuracy = accuracy

    def value(self, x):
        return float(self._evaluate(np.asarray(x, dtype=float)))

    def prox(self, gamma, x):
        if self._prox is None:
            raise UnsupportedError("Custom 関数に prox コールバックが設定されていません")
        return np.asarray(self._prox(gamma, np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        if self._gradient is None:
            return super().gradient(x)
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def lipschitz_modulus(self, dim):
        return self.lipschitz


class BlockSeparable(ProxFunction):
    """ブロック分離可能な和 Σ f_i(x_i)"""

    kind = "block"

    def __init__(self, parts: Sequence[ProxFunction], sizes: Sequence[int]):
        if len(parts) != len(sizes) or not parts:
            raise InvalidArgumentError("ブロック関数とサイズの数が一致しません")
        if any(int(s) <= 0 for s in sizes):
            raise InvalidArgumentError("ブロックサイズは正の整数である必要があります")
        self.parts = list(parts)
        self.sizes = [int(s) for s in sizes]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        betas = [p.beta for p in self.parts]
        self.beta = None if any(b is None for b in betas) else float(min(betas))

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def _blocks(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.dim:
            raise InvalidArgumentError(f"ブロック次元 {self.dim} と入力次元 {x.size} が一致しません")
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.parts))]

    def value(self, x):
        return float(sum(p.value(b) for p, b in zip(self.parts, self._blocks(x))))

    def prox(self, gamma, x):
        return np.concatenate([p.prox(gamma, b) for p, b in zip(self.parts, self._blocks(x))])

    def gradient(self, x):
        return np.concatenate([p.gradient(b) for p, b in zip(self.parts, self._blocks(x))])

    def lipschitz_modulus(self, dim):
        moduli = [p.lipschitz_modulus(s) for p, s in zip(self.parts, self.sizes)]
        if any(m is None for m in moduli):
            return None
        return float(np.sqrt(np.sum(np.square(moduli))))

    def quadratic_form(self, dim):
        forms = [p.quadratic_form(s) for p, s in zip(self.parts, self.sizes)]
        if any(f is None for f in forms):
            return None
        Q = np.zeros((self.dim, self.dim))
        q = np.zeros(self.dim)
        c = 0.0
        for i, (Qi, qi, ci) in enumerate(forms):
            lo, hi = self.offsets[i], self.offsets[i + 1]
            Q[lo:hi, lo:hi] = Qi
            q[lo:hi] = qi
            c += ci
        return Q, q, c


class AffineComposite(ProxFunction):
    """
    滑らかな l の合成 l(Mx − b)

    近接写像は強凸な内部問題を勾配法で解く（許容誤差 1e-12、上限 1e5 反復）。
    """

    kind = "composite"

    def __init__(self, outer: ProxFunction, M, b):
        if not outer.is_smooth:
            raise UnsupportedError("非滑らかな関数とアフィン写像の合成の prox はサポートしていません")
        self.outer = outer
        self.M = frozen(np.atleast_2d(np.array(M, dtype=float)))
        self.b = frozen(as_vector(b, "b"))
        norm_sq = float(np.linalg.norm(self.M, 2) ** 2)
        self.beta = np.inf if norm_sq == 0 or np.isinf(outer.beta) else outer.beta / norm_sq

    def value(self, x):
        return self.outer.value(self.M @ np.asarray(x, dtype=float) - self.b)

    def gradient(self, x):
        return self.M.T @ self.outer.gradient(self.M @ np.asarray(x, dtype=float) - self.b)

    def prox(self, gamma, x, tol: float = 1e-12, max_iter: int = 100000):
        v = np.asarray(x, dtype=float)
        curvature = 0.0 if np.isinf(self.beta) else 1.0 / self.beta
        step = 1.0 / (curvature + 1.0 / gamma)
        point = v.copy()
        for _ in range(max_iter):
            grad = self.gradient(point) + (point - v) / gamma
            update = step * grad
            point = point - update
            if np.linalg.norm(update) <= tol * max(1.0, np.linalg.norm(point)):
                return point
        raise SolverFailureError("合成関数の prox 内部反復が収束しませんでした", float(np.linalg.norm(update)))


def compose_affine(outer: ProxFunction, M, b) -> ProxFunction:
    """
    l(Mx − b) を表す関数を作る

    l が二次形式で書ける場合は Quadratic に展開し、それ以外の滑らかな l は
    AffineComposite で包む。
    """
    M = np.atleast_2d(np.array(M, dtype=float))
    b = as_vector(b, "b")
    if M.shape[0] != b.size:
        raise InvalidArgumentError(f"M の行数 {M.shape[0]} と b の次元 {b.size} が一致しません")
    form = outer.quadratic_form(M.shape[0])
    if form is not None:
        Q, q, c = form
        return Quadratic(
            M.T @ Q @ M,
            M.T @ (q - Q @ b),
            0.5 * b @ Q @ b - q @ b + c,
        )
    return AffineComposite(outer, M, b)


def function_lipschitz_modulus(f: ProxFunction, dim: int) -> Optional[float]:
    """関数の解析的な Lipschitz 定数"""
    return f.lipschitz_modulus(dim)


def prox(f: ProxFunction, gamma: float, x) -> np.ndarray:
    """
    近接写像 prox_{γf}(x) = argmin_y f(y) + ‖y − x‖²/(2γ)

    Args:
        f: 凸関数記述子
        gamma: 正のステップ幅
        x: 入力点

    Returns:
        近接点
    """
    gamma = check_gamma(gamma)
    x = as_vector(x)
    return np.asarray(f.prox(gamma, x), dtype=float)


def refl(f: ProxFunction, gamma: float, x) -> np.ndarray:
    """反射 refl_{γf} = 2prox_{γf} − I"""
    x = as_vector(x)
    return 2.0 * prox(f, gamma, x) - x


def prox_distance(basis, gamma: float, x) -> np.ndarray:
    """部分空間 span(basis) への距離関数の近接写像"""
    return prox(DistanceToSubspace(basis), gamma, x)


@dataclass(frozen=True)
class TriangleIterate:
    """
    緩和PRSの1ステップの三角分解

    x_g = prox_{γg}(z)、x_f = prox_{γf}(2x_g − z)、
    ∇̃g = (z − x_g)/γ、∇̃f = (2x_g − z − x_f)/γ。
    """

    z: np.ndarray
    x_g: np.ndarray
    x_f: np.ndarray
    subgrad_g: np.ndarray
    subgrad_f: np.ndarray
    gamma: float

    @property
    def prs_image(self) -> np.ndarray:
        """T_PRS(z) = z + 2(x_f − x_g)"""
        return self.z + 2.0 * (self.x_f - self.x_g)

    @property
    def gap(self) -> np.ndarray:
        return self.x_f - self.x_g

    @property
    def fpr(self) -> float:
        """‖T_PRS z − z‖² = 4‖x_f − x_g‖²"""
        gap = self.gap
        return float(4.0 * gap @ gap)


def apply_prs_operator(f: ProxFunction, g: ProxFunction, gamma: float, z) -> TriangleIterate:
    """
    PRS作用素を1回評価して三角分解を返す

    Args:
        f: 2番目に評価する関数
        g: 先に評価する関数
        gamma: ステップ幅
        z: 駆動点

    Returns:
        TriangleIterate
    """
    gamma = check_gamma(gamma)
    z = as_vector(z, "z")
    x_g = np.asarray(g.prox(gamma, z), dtype=float)
    reflected = 2.0 * x_g - z
    x_f = np.asarray(f.prox(gamma, reflected), dtype=float)
    return TriangleIterate(
        z=frozen(z),
        x_g=frozen(x_g),
        x_f=frozen(x_f),
        subgrad_g=frozen((z - x_g) / gamma),
        subgrad_f=frozen((reflected - x_f) / gamma),
        gamma=gamma,
    )


def prs_operator(f: ProxFunction, g: ProxFunction, gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """T_PRS = refl_{γf} ∘ refl_{γg} を関数として返す"""
    gamma = check_gamma(gamma)

    def operator(z):
        z = np.asarray(z, dtype=float)
        reflected = 2.0 * np.asarray(g.prox(gamma, z), dtype=float) - z
        return 2.0 * np.asarray(f.prox(gamma, reflected), dtype=float) - reflected

    return operator


def averaged(operator: Callable, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    """T_λ = (1 − λ)I + λT"""
    def relaxed(z):
        z = np.asarray(z, dtype=float)
        return (1.0 - lam) * z + lam * np.asarray(operator(z), dtype=float)
    return relaxed


def _pairs(sample_pairs) -> List[Tuple[np.ndarray, np.ndarray]]:
    pairs = [(as_vector(x), as_vector(y)) for x, y in sample_pairs]
    if not pairs:
        raise InvalidArgumentError("サンプル対が空です")
    return pairs


def check_firm_nonexpansive(
    f: ProxFunction,
    gamma: float,
    sample_pairs: Iterable,
    atol: float = 1e-10,
) -> BoundReport:
    """
    prox の堅非拡大性 ‖p_x − p_y‖² ≤ ⟨p_x − p_y, x − y⟩ をサンプル対で検証

    Args:
        f: 凸関数記述子
        gamma: ステップ幅
        sample_pairs: (x, y) の組の列
        atol: 許容誤差

    Returns:
        BoundReport（最大違反は worst_margin）
    """
    measured, bound = [], []
    for x, y in _pairs(sample_pairs):
        diff = prox(f, gamma, x) - prox(f, gamma, y)
        measured.append(diff @ diff)
        bound.append(diff @ (x - y))
    return upper_check("firm_nonexpansive", measured, bound, atol=atol, rtol=0.0)


def check_refl_nonexpansive(f: ProxFunction, gamma: float, sample_pairs: Iterable, atol: float = 1e-10) -> BoundReport:
    measured, bound = [], []
    for x, y in _pairs(sample_pairs):
        measured.append(np.linalg.norm(refl(f, gamma, x) - refl(f, gamma, y)))
        bound.append(np.linalg.norm(x - y))
    return upper_check("refl_nonexpansive", measured, bound, atol=atol, rtol=0.0)


def check_averaged_contraction(
    operator: Callable,
    lam: float,
    sample_pairs: Iterable,
    atol: float = 1e-9,
) -> BoundReport:
    """
    平均化作用素の縮小性
    ‖T_λx − T_λy‖² ≤ ‖x − y‖² − ((1−λ)/λ)‖(I−T_λ)x − (I−T_λ)y‖²
    """
    if not 0 < lam <= 1:
        raise InvalidArgumentError(f"λ は (0, 1] の範囲である必要があります: {lam}")
    relaxed = averaged(operator, lam)
    measured, bound = [], []
    for x, y in _pairs(sample_pairs):
        tx, ty = relaxed(x), relaxed(y)
        residual = (x - tx) - (y - ty)
        measured.append((tx - ty) @ (tx - ty) + ((1.0 - lam) / lam) * (residual @ residual))
        bound.append((x - y) @ (x - y))
    return upper_check("averaged_contraction", measured, bound, atol=atol, rtol=0.0)


def check_resolvent_optimality(
    f: ProxFunction,
    gamma: float,
    x,
    probes: Iterable,
    atol: float = 1e-10,
) -> BoundReport:
    """p = prox_{γf}(x) について f(u) ≥ f(p) + ⟨u − p, (x − p)/γ⟩ を検証"""
    x = as_vector(x)
    point = prox(f, gamma, x)
    subgradient = (x - point) / gamma
    base = f.value(point)
    measured, bound = [], []
    for u in probes:
        u = as_vector(u, "probe")
        measured.append(f.value(u))
        bound.append(base + (u - point) @ subgradient)
    return lower_check("resolvent_optimality", measured, bound, atol=atol, rtol=0.0)
