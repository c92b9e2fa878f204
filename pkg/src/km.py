"""
KM反復モジュール
Krasnosel'skii–Mann 反復、緩和スケジュール、誤差注入、FPR の記録と検証
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core import as_vector, frozen
from errors import InvalidArgumentError, UnsupportedScheduleError
from report import BoundReport, lower_check, merge_reports, upper_check

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RelaxationSchedule:
    """
    緩和パラメータ列 λ_k

    kind は 'constant'（λ_k ≡ value）、'explicit'（values を順に使う）、
    'polynomial'（λ_k = (k+1)^exponent, exponent ≤ 0）のいずれか。
    """

    kind: str = 'constant'
    value: float = 0.5
    values: Tuple[float, ...] = ()
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind == 'constant':
            if not 0 < self.value <= 1:
                raise InvalidArgumentError(f"λ は (0, 1] の範囲である必要があります: {self.value}")
        elif self.kind == 'explicit':
            if not self.values:
                raise InvalidArgumentError("明示的な λ 列が空です")
            array = np.asarray(self.values, dtype=float)
            if not np.all((array > 0) & (array <= 1)):
                raise InvalidArgumentError("明示的な λ 列に (0, 1] 外の値が含まれています")
        elif self.kind == 'polynomial':
            if not np.isfinite(self.exponent) or self.exponent > 0:
                raise InvalidArgumentError(f"多項式スケジュールの指数は 0 以下である必要があります: {self.exponent}")
        else:
            raise InvalidArgumentError(f"未知の緩和スケジュール種別です: {self.kind}")

    @classmethod
    def constant(cls, lam: float) -> 'RelaxationSchedule':
        return cls(kind='constant', value=float(lam))

    @classmethod
    def explicit(cls, values: Sequence[float]) -> 'RelaxationSchedule':
        return cls(kind='explicit', values=tuple(float(v) for v in values))

    @classmethod
    def polynomial(cls, exponent: float) -> 'RelaxationSchedule':
        return cls(kind='polynomial', exponent=float(exponent))

    def lambdas(self, count: int) -> np.ndarray:
        """λ_0, …, λ_{count−1}"""
        if count < 0:
            raise InvalidArgumentError(f"個数は非負である必要があります: {count}")
        if self.kind == 'constant':
            return np.full(count, self.value)
        if self.kind == 'explicit':
            if count > len(self.values):
                raise InvalidArgumentError(
                    f"明示的な λ 列の長さ {len(self.values)} が必要な反復数 {count} に足りません"
                )
            return np.asarray(self.values[:count], dtype=float)
        return np.power(np.arange(1, count + 1, dtype=float), self.exponent)

    def lam(self, k: int) -> float:
        return float(self.lambdas(k + 1)[k])

    def cumulative(self, count: int) -> np.ndarray:
        """Λ_k = Σ_{i≤k} λ_i（逐次加算なので Λ_k = Λ_{k−1} + λ_k が厳密に成立）"""
        return np.cumsum(self.lambdas(count))

    def taus(self, count: int) -> np.ndarray:
        """τ_k = λ_k(1 − λ_k)"""
        lambdas = self.lambdas(count)
        return lambdas * (1.0 - lambdas)

    def tau_lower(self, horizon: int) -> float:
        """反復 0..horizon での τ の下限"""
        return float(np.min(self.taus(horizon + 1)))

    def describe(self) -> str:
        if self.kind == 'constant':
            return f"λ≡{self.value:g}"
        if self.kind == 'polynomial':
            return f"λ_k=(k+1)^{self.exponent:g}"
        return f"explicit[{len(self.values)}]"


@dataclass(frozen=True)
class ErrorSchedule:
    """
    注入誤差 e^k の生成器

    ‖e^k‖ = scale·(k+1)^(−exponent)。direction が無ければ seed から k ごとの
    単位ベクトルを決定的に生成する。申告される包絡線は ω_k = scale·(k+1)^(−exponent)。
    """

    scale: float
    exponent: float = 1.5
    direction: Optional[Tuple[float, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale < 0:
            raise InvalidArgumentError(f"誤差の大きさは非負である必要があります: {self.scale}")
        if self.exponent <= 1:
            raise InvalidArgumentError(f"包絡線が総和可能であるには指数 > 1 が必要です: {self.exponent}")

    @classmethod
    def power_law(cls, scale: float = 1.0, exponent: float = 1.5, direction=None, seed: int = 0) -> 'ErrorSchedule':
        if direction is not None:
            unit = as_vector(direction, "direction")
            norm = np.linalg.norm(unit)
            if norm == 0:
                raise InvalidArgumentError("誤差の方向ベクトルが0です")
            direction = tuple(unit / norm)
        return cls(scale=float(scale), exponent=float(exponent), direction=direction, seed=seed)

    def envelope(self, count: int) -> np.ndarray:
        return self.scale * np.power(np.arange(1, count + 1, dtype=float), -self.exponent)

    def error(self, k: int, dim: int) -> np.ndarray:
        magnitude = self.scale * (k + 1.0) ** (-self.exponent)
        if self.direction is not None:
            unit = np.asarray(self.direction, dtype=float)
            if unit.size != dim:
                raise InvalidArgumentError(f"誤差方向の次元 {unit.size} が反復の次元 {dim} と一致しません")
        else:
            rng = np.random.default_rng([self.seed, k])
            unit = rng.standard_normal(dim)
            unit /= np.linalg.norm(unit)
        return magnitude * unit


@dataclass(frozen=True)
class IterationTrace:
    """
    反復の記録

    スカラー列（fpr, lambdas, cumulative など）は常に記録し、長さは反復回数 + 1。
    ベクトル列（z, x_g, x_f, xbar_g, xbar_f）は store_vectors=True のときだけ保持する。
    step_sq と error_norm は各ステップの記録で長さは反復回数。
    """

    algorithm: str
    z0: np.ndarray
    final_z: np.ndarray
    fpr: np.ndarray
    step_sq: np.ndarray
    lambdas: np.ndarray
    cumulative: np.ndarray
    gamma: Optional[float] = None
    z: Optional[np.ndarray] = None
    dist_sq: Optional[np.ndarray] = None
    error_norm: Optional[np.ndarray] = None
    x_g: Optional[np.ndarray] = None
    x_f: Optional[np.ndarray] = None
    xbar_g: Optional[np.ndarray] = None
    xbar_f: Optional[np.ndarray] = None
    final_xbar_g: Optional[np.ndarray] = None
    final_xbar_f: Optional[np.ndarray] = None
    obj_f: Optional[np.ndarray] = None
    obj_g: Optional[np.ndarray] = None
    obj_f_ergodic: Optional[np.ndarray] = None
    obj_g_ergodic: Optional[np.ndarray] = None
    gap_sq: Optional[np.ndarray] = None
    ergodic_gap: Optional[np.ndarray] = None
    extras: Dict[str, np.ndarray] = field(default_factory=dict)
    aborted: bool = False
    diagnostic: str = ""

    def __len__(self) -> int:
        return int(self.fpr.size)

    @property
    def iterations(self) -> int:
        return len(self) - 1

    @property
    def has_triangles(self) -> bool:
        return self.gap_sq is not None

    @property
    def objective(self) -> Optional[np.ndarray]:
        """f(x_f^k) + g(x_g^k)"""
        if self.obj_f is None:
            return None
        return self.obj_f + self.obj_g

    @property
    def objective_ergodic(self) -> Optional[np.ndarray]:
        """f(x̄_f^k) + g(x̄_g^k)"""
        if self.obj_f_ergodic is None:
            return None
        return self.obj_f_ergodic + self.obj_g_ergodic

    def require_vectors(self) -> None:
        if self.z is None:
            raise InvalidArgumentError("この操作にはベクトル列の記録 (store_vectors=True) が必要です")


class TraceRecorder:
    """
    反復ドライバ共通の記録器

    z^k と（あれば）三角分解を受け取り、エルゴード平均を λ 重みで逐次更新する。
    """

    def __init__(
        self,
        algorithm: str,
        z0: np.ndarray,
        lambdas: np.ndarray,
        gamma: Optional[float] = None,
        zstar=None,
        store_vectors: bool = True,
        probes: Optional[Dict[str, Callable]] = None,
    ):
        self.algorithm = algorithm
        self.z0 = frozen(z0)
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.gamma = gamma
        self.zstar = None if zstar is None else as_vector(zstar, "zstar")
        if self.zstar is not None and self.zstar.size != self.z0.size:
            raise InvalidArgumentError("zstar と z0 の次元が一致しません")
        self.store_vectors = store_vectors
        self.probes = dict(probes or {})

        self._z: List[np.ndarray] = []
        self._fpr: List[float] = []
        self._step_sq: List[float] = []
        self._error_norm: List[float] = []
        self._dist_sq: List[float] = []
        self._x_g: List[np.ndarray] = []
        self._x_f: List[np.ndarray] = []
        self._xbar_g: List[np.ndarray] = []
        self._xbar_f: List[np.ndarray] = []
        self._objectives: Dict[str, List[float]] = {'f': [], 'g': [], 'f_erg': [], 'g_erg': []}
        self._gap_sq: List[float] = []
        self._ergodic_gap: List[float] = []
        self._extras: Dict[str, List[float]] = {name: [] for name in self.probes}
        self._sum_g = None
        self._sum_f = None
        self._weight = 0.0
        self._last_z = self.z0
        self._last_xbar = (None, None)

    @property
    def count(self) -> int:
        return len(self._fpr)

    def record(self, z, fpr: float, x_g=None, x_f=None, f=None, g=None, triangle=None) -> None:
        """反復 k = count の状態を記録"""
        k = self.count
        self._last_z = z
        self._fpr.append(float(fpr))
        if self.store_vectors:
            self._z.append(np.array(z, dtype=float))
        if self.zstar is not None:
            diff = z - self.zstar
            self._dist_sq.append(float(diff @ diff))
        if x_g is None:
            return

        lam = self.lambdas[k]
        if self._sum_g is None:
            self._sum_g = np.zeros_like(x_g)
            self._sum_f = np.zeros_like(x_f)
        self._sum_g = self._sum_g + lam * x_g
        self._sum_f = self._sum_f + lam * x_f
        self._weight += lam
        xbar_g = self._sum_g / self._weight
        xbar_f = self._sum_f / self._weight
        self._last_xbar = (xbar_g, xbar_f)

        gap = x_f - x_g
        self._gap_sq.append(float(gap @ gap))
        self._ergodic_gap.append(float(np.linalg.norm(xbar_f - xbar_g)))
        if self.store_vectors:
            self._x_g.append(np.array(x_g))
            self._x_f.append(np.array(x_f))
            self._xbar_g.append(xbar_g)
            self._xbar_f.append(xbar_f)
        if f is not None:
            self._objectives['f'].append(f.value(x_f))
            self._objectives['g'].append(g.value(x_g))
            self._objectives['f_erg'].append(f.value(xbar_f))
            self._objectives['g_erg'].append(g.value(xbar_g))
        for name, probe in self.probes.items():
            self._extras[name].append(float(probe(k, triangle, xbar_g, xbar_f)))

    def record_step(self, z, z_next, error=None) -> None:
        step = z_next - z
        self._step_sq.append(float(step @ step))
        if error is not None:
            self._error_norm.append(float(np.linalg.norm(error)))

    def finish(self, aborted: bool = False, diagnostic: str = "") -> IterationTrace:
        count = self.count
        # 中断時は記録済みの反復に揃える
        steps = self._step_sq[:max(count - 1, 0)]
        lambdas = self.lambdas[:count]

        def column(values):
            return frozen(values) if values else None

        def stack(values):
            return frozen(np.vstack(values)) if values else None

        has_objectives = bool(self._objectives['f'])
        xbar_g, xbar_f = self._last_xbar
        return IterationTrace(
            algorithm=self.algorithm,
            z0=self.z0,
            final_z=frozen(self._last_z),
            fpr=frozen(self._fpr),
            step_sq=frozen(steps),
            lambdas=frozen(lambdas),
            cumulative=frozen(np.cumsum(lambdas)),
            gamma=self.gamma,
            z=stack(self._z),
            dist_sq=column(self._dist_sq),
            error_norm=column(self._error_norm[:len(steps)]),
            x_g=stack(self._x_g),
            x_f=stack(self._x_f),
            xbar_g=stack(self._xbar_g),
            xbar_f=stack(self._xbar_f),
            final_xbar_g=None if xbar_g is None else frozen(xbar_g),
            final_xbar_f=None if xbar_f is None else frozen(xbar_f),
            obj_f=column(self._objectives['f']) if has_objectives else None,
            obj_g=column(self._objectives['g']) if has_objectives else None,
            obj_f_ergodic=column(self._objectives['f_erg']) if has_objectives else None,
            obj_g_ergodic=column(self._objectives['g_erg']) if has_objectives else None,
            gap_sq=column(self._gap_sq),
            ergodic_gap=column(self._ergodic_gap),
            extras={name: frozen(values) for name, values in self._extras.items()},
            aborted=aborted,
            diagnostic=diagnostic,
        )


def abort_message(algorithm: str, k: int) -> str:
    message = f"{algorithm}: 反復 k={k} で非有限値を検出したため中断しました"
    print(f"❌ {message}")
    return message


def check_iters(iters: int) -> int:
    if int(iters) != iters or iters < 1:
        raise InvalidArgumentError(f"反復回数は1以上の整数である必要があります: {iters}")
    return int(iters)


def km_step(T: Operator, lam: float, z, e=None) -> np.ndarray:
    """
    KM の1ステップ z⁺ = (1 − λ)z + λT(z) + λe

    Args:
        T: 非拡大写像
        lam: 緩和パラメータ (0, 1]
        z: 現在の点
        e: 注入誤差（省略時は0）

    Returns:
        次の点
    """
    if not 0 < lam <= 1:
        raise InvalidArgumentError(f"λ は (0, 1] の範囲である必要があります: {lam}")
    z = as_vector(z, "z")
    result = (1.0 - lam) * z + lam * np.asarray(T(z), dtype=float)
    if e is not None:
        result = result + lam * as_vector(e, "e")
    return result


def run_km(
    T: Operator,
    schedule: RelaxationSchedule,
    z0,
    iters: int,
    errors: Optional[ErrorSchedule] = None,
    zstar=None,
    store_vectors: bool = True,
) -> IterationTrace:
    """
    KM 反復を iters 回実行

    各 k で T(z^k) を1回だけ評価し、FPR ‖Tz^k − z^k‖² を記録したうえで
    z^{k+1} = z^k + λ_k(Tz^k − z^k) + λ_k e^k を計算する。

    Args:
        T: 非拡大写像
        schedule: 緩和スケジュール
        z0: 初期点
        iters: 反復回数
        errors: 注入誤差（省略可）
        zstar: 距離を記録する参照不動点（省略可）
        store_vectors: z^k を全て保持するか

    Returns:
        IterationTrace（非有限値で中断した場合は aborted=True）
    """
    iters = check_iters(iters)
    z = as_vector(z0, "z0")
    lambdas = schedule.lambdas(iters + 1)
    recorder = TraceRecorder('km', z, lambdas, zstar=zstar, store_vectors=store_vectors)

    for k in range(iters + 1):
        image = np.asarray(T(z), dtype=float)
        if not np.all(np.isfinite(image)):
            return recorder.finish(aborted=True, diagnostic=abort_message('km', k))
        residual = image - z
        recorder.record(z, residual @ residual)
        if k == iters:
            break
        lam = lambdas[k]
        error = None if errors is None else errors.error(k, z.size)
        z_next = z + lam * residual
        if error is not None:
            z_next = z_next + lam * error
        if not np.all(np.isfinite(z_next)):
            return recorder.finish(aborted=True, diagnostic=abort_message('km', k + 1))
        recorder.record_step(z, z_next, error)
        z = z_next

    return recorder.finish()


def fpr_bounds(schedule: RelaxationSchedule, dist0_sq: float, count: int) -> np.ndarray:
    """k = 0..count−1 の FPR 上界 dist0_sq / Σ_{i≤k} τ_i"""
    if dist0_sq < 0:
        raise InvalidArgumentError(f"dist0_sq は非負である必要があります: {dist0_sq}")
    taus = schedule.taus(count)
    if np.any(taus <= 0):
        first = int(np.argmax(taus <= 0))
        raise UnsupportedScheduleError(f"τ_{first} = 0 のスケジュール ({schedule.describe()}) では FPR 上界を評価できません")
    return dist0_sq / np.cumsum(taus)


def fpr_bound(schedule: RelaxationSchedule, dist0_sq: float, k: int) -> float:
    """
    FPR 上界 ‖Tz^k − z^k‖² ≤ ‖z0 − z*‖² / Σ_{i=0}^{k} τ_i

    Args:
        schedule: 緩和スケジュール
        dist0_sq: ‖z0 − z*‖²
        k: 反復番号

    Returns:
        上界値
    """
    return float(fpr_bounds(schedule, dist0_sq, k + 1)[k])


def _distances(trace: IterationTrace, zstar) -> np.ndarray:
    if zstar is not None and trace.z is not None:
        diff = trace.z - as_vector(zstar, "zstar")
        return np.einsum('ij,ij->i', diff, diff)
    if trace.dist_sq is not None:
        return trace.dist_sq
    raise InvalidArgumentError("距離の計算には z の記録か dist_sq が必要です")


def check_fejer(trace: IterationTrace, zstar=None, atol: float = 1e-10) -> BoundReport:
    """‖z^{k+1} − z*‖² ≤ ‖z^k − z*‖² を検証（誤差なしの実行のみ）"""
    dist = _distances(trace, zstar)
    return upper_check('fejer', dist[1:], dist[:-1], atol=atol)


def check_fpr_summability(trace: IterationTrace, schedule: RelaxationSchedule, dist0_sq: float) -> BoundReport:
    """Σ_{i≤k} τ_i·fpr_i ≤ dist0_sq を全ての k で検証"""
    partial = np.cumsum(schedule.taus(len(trace)) * trace.fpr)
    return upper_check('fpr_summability', partial, dist0_sq)


def check_fpr_monotone(trace: IterationTrace, atol: float = 1e-10) -> BoundReport:
    return upper_check('fpr_monotone', trace.fpr[1:], trace.fpr[:-1], atol=atol)


def check_fpr_bound(trace: IterationTrace, schedule: RelaxationSchedule, dist0_sq: float) -> BoundReport:
    bounds = fpr_bounds(schedule, dist0_sq, len(trace))
    return upper_check('fpr_bound', trace.fpr, bounds)


def check_little_o_tail(trace: IterationTrace, atol: float = 1e-12) -> BoundReport:
    """
    o(1/k) の代理指標

    max_{k∈[K/2,K]} (k+1)fpr_k ≤ max_{k∈[K/4,K/2]} (k+1)fpr_k を検証する（K ≥ 1000）。
    """
    horizon = trace.iterations
    if horizon < 1000:
        raise InvalidArgumentError(f"末尾チェックには K ≥ 1000 が必要です: K={horizon}")
    weighted = trace.fpr * np.arange(1, len(trace) + 1)
    late = np.max(weighted[horizon // 2:])
    early = np.max(weighted[horizon // 4:horizon // 2 + 1])
    return upper_check('little_o_tail', [late], [early], atol=atol)


def inexact_fpr_bound(trace: IterationTrace, schedule: RelaxationSchedule) -> np.ndarray:
    """
    誤差つき実行の FPR 上界（全ての和は実行から集計）

    ‖(I−T)z^{k+1}‖ ≤ ‖(I−T)z^k‖ + 2λ_k‖e^k‖ と τ 重みの総和評価から
    fpr_k ≤ (D_k + Σ_{j<k} T_j ε_j) / T_k を得る。
    D_k = ‖z0 − z*‖² + Σ_{i≤k} 2λ_i‖e^i‖‖z^{i+1} − z*‖、
    ε_j = 4λ_j‖e^j‖√fpr_j + 4λ_j²‖e^j‖²、T_k = Σ_{i≤k} τ_i。
    """
    if trace.dist_sq is None or trace.error_norm is None:
        raise InvalidArgumentError("誤差つき上界には dist_sq と error_norm の記録が必要です")
    # D_k は z^{k+1} を使うので最後の記録を除く k = 0..K−1 で評価する
    steps = trace.error_norm.size
    taus = schedule.taus(steps)
    if np.any(taus <= 0):
        raise UnsupportedScheduleError(f"τ_k = 0 のスケジュール ({schedule.describe()}) では評価できません")
    weighted_error = trace.lambdas[:steps] * trace.error_norm

    xi = 2.0 * weighted_error * np.sqrt(trace.dist_sq[1:steps + 1])
    drift = trace.dist_sq[0] + np.cumsum(xi)
    epsilon = 4.0 * weighted_error * np.sqrt(trace.fpr[:steps]) + 4.0 * weighted_error ** 2
    tau_sums = np.cumsum(taus)
    carried = np.concatenate([[0.0], np.cumsum(tau_sums[:-1] * epsilon[:-1])])
    return (drift + carried) / tau_sums


def check_inexact_fpr(trace: IterationTrace, schedule: RelaxationSchedule) -> BoundReport:
    bound = inexact_fpr_bound(trace, schedule)
    return upper_check('inexact_fpr', trace.fpr[:bound.size], bound)


def check_envelope(trace: IterationTrace, envelope) -> BoundReport:
    """
    注入誤差が申告された包絡線に収まることを検証

    λ_k‖e^k‖ ≤ ω_k と ω の非負・単調非増加性を調べる。envelope は ω の配列
    （反復回数以上の長さ）か ErrorSchedule（その ω_k を使う）。
    """
    if trace.error_norm is None:
        raise InvalidArgumentError("誤差の記録がありません")
    count = trace.error_norm.size
    if isinstance(envelope, ErrorSchedule):
        omega = envelope.envelope(count)
    else:
        omega = np.asarray(envelope, dtype=float)
        if omega.ndim != 1 or omega.size < count:
            raise InvalidArgumentError(f"包絡線の長さ {omega.size} が反復回数 {count} に足りません")
        omega = omega[:count]
    dominated = upper_check('envelope', trace.lambdas[:count] * trace.error_norm, omega)
    monotone = upper_check('envelope_monotone', omega[1:], omega[:-1], atol=0.0, rtol=0.0)
    nonnegative = lower_check('envelope_nonnegative', omega, 0.0, atol=0.0, rtol=0.0)
    return merge_reports('envelope', [dominated, monotone, nonnegative])


def check_ergodic_consistency(
    trace: IterationTrace,
    samples: int = 3,
    seed: int = 0,
    atol: float = 1e-10,
) -> BoundReport:
    """
    逐次更新したエルゴード平均を無作為な k で直接再計算して照合

    Args:
        trace: x_g, x_f, xbar_g, xbar_f を保持したトレース
        samples: 照合する k の数
        seed: 乱数シード
        atol: 許容誤差（値のスケールで相対化）

    Returns:
        BoundReport
    """
    if trace.x_g is None or trace.xbar_g is None:
        raise InvalidArgumentError("エルゴード平均の照合には三角分解のベクトル記録が必要です")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(trace), size=min(samples, len(trace)), replace=False)
    measured, bounds = [], []
    for k in sorted(int(p) for p in picks):
        weights = trace.lambdas[:k + 1]
        total = weights.sum()
        for points, averages in ((trace.x_g, trace.xbar_g), (trace.x_f, trace.xbar_f)):
            direct = weights @ points[:k + 1] / total
            measured.append(np.max(np.abs(direct - averages[k])))
            bounds.append(atol * max(1.0, np.max(np.abs(direct))))
    return upper_check('ergodic_consistency', measured, bounds, atol=0.0, rtol=0.0)
