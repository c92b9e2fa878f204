"""
分割法ドライバモジュール
緩和PRS・DRS・PRS・FBS・PPA の実行、解の証明書の構築、反復ごとの恒等式と収束率の検証
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from core import (
    ProxFunction,
    Zero,
    apply_prs_operator,
    as_vector,
    check_gamma,
    frozen,
    prs_operator,
)
from errors import InvalidArgumentError, InvalidConfigError, NonConvergenceError
from km import (
    IterationTrace,
    RelaxationSchedule,
    TraceRecorder,
    abort_message,
    check_iters,
)
from rates import fbs_bounds, fbs_fpr_bound_derived
from report import BoundReport, merge_reports, upper_check

__all__ = [
    'FBSConfig',
    'SolutionCertificate',
    'certificate_at',
    'check_certificate_optimality',
    'check_drs_1d',
    'check_drs_subgradient_identity',
    'check_ergodic_fpr',
    'check_fbs_rates',
    'check_step_identity',
    'ergodic_average',
    'fbs_subgradients',
    'fixed_point_reference',
    'prs_operator',
    'run_drs',
    'run_fbs',
    'run_ppa',
    'run_prs',
    'run_relaxed_prs',
]

# 参照実行の目標残差と受理残差
REFERENCE_TARGET = 1e-12
REFERENCE_TOL = 1e-8
MIN_REFERENCE_BUDGET = 100000


@dataclass(frozen=True)
class SolutionCertificate:
    """
    T_PRS の不動点 z* と対応する解 x* = prox_{γg}(z*)

    dual_norm は ‖z* − x*‖/γ = ‖∇̃g(x*)‖。
    """

    zstar: np.ndarray
    xstar: np.ndarray
    z0: np.ndarray
    dist0: float
    dual_norm: float
    obj_star: float
    gamma: float
    residual: float
    closed_form: bool = False

    @property
    def dist0_sq(self) -> float:
        return self.dist0 ** 2

    @property
    def anchor_norm(self) -> float:
        """‖z* − x*‖"""
        return self.gamma * self.dual_norm

    @property
    def initial_gap(self) -> float:
        """‖z0 − x*‖"""
        return float(np.linalg.norm(self.z0 - self.xstar))

    def summary(self) -> Dict:
        return {
            'dist0': self.dist0,
            'dual_norm': self.dual_norm,
            'obj_star': self.obj_star,
            'gamma': self.gamma,
            'residual': self.residual,
            'closed_form': self.closed_form,
        }


@dataclass(frozen=True)
class FBSConfig:
    """FBS のステップ設定（0 < γ < 2β）"""

    gamma: float
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidConfigError(f"FBS の γ は正の有限値である必要があります: {self.gamma}")
        if self.beta is None or self.beta <= 0:
            raise InvalidConfigError(f"FBS の β は正の値である必要があります: {self.beta}")
        if self.gamma >= 2 * self.beta:
            raise InvalidConfigError(f"FBS には γ < 2β が必要です: γ={self.gamma}, β={self.beta}")

    @property
    def alpha(self) -> float:
        """α_FBS = 2β/(4β − γ)"""
        if np.isinf(self.beta):
            return 0.5
        return 2 * self.beta / (4 * self.beta - self.gamma)


def run_relaxed_prs(
    f: ProxFunction,
    g: ProxFunction,
    gamma: float,
    schedule: RelaxationSchedule,
    z0,
    iters: int,
    zstar=None,
    store_vectors: bool = True,
    probes: Optional[Dict[str, Callable]] = None,
) -> IterationTrace:
    """
    緩和PRS（T = refl_{γf} ∘ refl_{γg} の KM 反復）

    z^{k+1} = z^k + 2λ_k(x_f^k − x_g^k)。f は x_f、g は x_g でのみ評価する。

    Args:
        f: 2番目に評価する関数
        g: 先に評価する関数
        gamma: ステップ幅
        schedule: 緩和スケジュール
        z0: 初期点
        iters: 反復回数
        zstar: 距離を記録する参照不動点
        store_vectors: ベクトル列を保持するか
        probes: 名前 → (k, triangle, xbar_g, xbar_f) を受け取るスカラー関数

    Returns:
        IterationTrace
    """
    gamma = check_gamma(gamma)
    iters = check_iters(iters)
    z = as_vector(z0, "z0")
    lambdas = schedule.lambdas(iters + 1)
    recorder = TraceRecorder(
        'relaxed_prs', z, lambdas, gamma=gamma, zstar=zstar,
        store_vectors=store_vectors, probes=probes,
    )

    for k in range(iters + 1):
        triangle = apply_prs_operator(f, g, gamma, z)
        if not (np.all(np.isfinite(triangle.x_g)) and np.all(np.isfinite(triangle.x_f))):
            return recorder.finish(aborted=True, diagnostic=abort_message('relaxed_prs', k))
        gap = triangle.x_f - triangle.x_g
        recorder.record(z, 4.0 * (gap @ gap), triangle.x_g, triangle.x_f, f, g, triangle)
        if k == iters:
            break
        z_next = z + 2.0 * lambdas[k] * gap
        recorder.record_step(z, z_next)
        z = z_next

    return recorder.finish()


def run_drs(f, g, gamma, z0, iters, **kwargs) -> IterationTrace:
    """DRS（λ ≡ 1/2）"""
    return run_relaxed_prs(f, g, gamma, RelaxationSchedule.constant(0.5), z0, iters, **kwargs)


def run_prs(f, g, gamma, z0, iters, **kwargs) -> IterationTrace:
    """PRS（λ ≡ 1）"""
    return run_relaxed_prs(f, g, gamma, RelaxationSchedule.constant(1.0), z0, iters, **kwargs)


def run_fbs(
    f: ProxFunction,
    g: ProxFunction,
    config: FBSConfig,
    z0,
    iters: int,
    zstar=None,
    store_vectors: bool = True,
    algorithm: str = 'fbs',
) -> IterationTrace:
    """
    FBS z^{k+1} = prox_{γf}(z^k − γ∇g(z^k))

    トレースの fpr は ‖T_FBS z^k − z^k‖²、obj_f + obj_g は h(z^k) = f(z^k) + g(z^k)。
    """
    if not g.is_smooth:
        raise InvalidConfigError(f"FBS の g は滑らかである必要があります: {g!r}")
    if config.beta > g.beta * (1 + 1e-12):
        raise InvalidConfigError(f"設定の β={config.beta} が g の β={g.beta} を超えています")
    iters = check_iters(iters)
    gamma = config.gamma
    z = as_vector(z0, "z0")
    recorder = TraceRecorder(algorithm, z, np.ones(iters + 1), gamma=gamma, zstar=zstar, store_vectors=store_vectors)

    for k in range(iters + 1):
        image = np.asarray(f.prox(gamma, z - gamma * g.gradient(z)), dtype=float)
        if not np.all(np.isfinite(image)):
            return recorder.finish(aborted=True, diagnostic=abort_message(algorithm, k))
        residual = image - z
        recorder.record(z, residual @ residual, z, z, f, g)
        if k == iters:
            break
        recorder.record_step(z, image)
        z = image

    return recorder.finish()


def run_ppa(f: ProxFunction, gamma: float, z0, iters: int, **kwargs) -> IterationTrace:
    """PPA z^{k+1} = prox_{γf}(z^k)（g = 0 の FBS）"""
    gamma = check_gamma(gamma)
    return run_fbs(f, Zero(), FBSConfig(gamma, np.inf), z0, iters, algorithm='ppa', **kwargs)


def fbs_subgradients(trace: IterationTrace, g: ProxFunction, gamma: float) -> np.ndarray:
    """∇̃f(z^{k+1}) = (z^k − z^{k+1} − γ∇g(z^k))/γ を各 k について返す"""
    trace.require_vectors()
    z = trace.z
    gradients = np.vstack([g.gradient(point) for point in z[:-1]])
    return (z[:-1] - z[1:] - gamma * gradients) / gamma


def certificate_at(
    f: ProxFunction,
    g: ProxFunction,
    gamma: float,
    zstar,
    z0,
    closed_form: bool = False,
) -> SolutionCertificate:
    """与えられた不動点から証明書を組み立てる"""
    gamma = check_gamma(gamma)
    zstar = as_vector(zstar, "zstar")
    z0 = as_vector(z0, "z0")
    triangle = apply_prs_operator(f, g, gamma, zstar)
    residual = float(2.0 * np.linalg.norm(triangle.gap))
    return SolutionCertificate(
        zstar=frozen(zstar),
        xstar=triangle.x_g,
        z0=frozen(z0),
        dist0=float(np.linalg.norm(z0 - zstar)),
        dual_norm=float(np.linalg.norm(zstar - triangle.x_g) / gamma),
        obj_star=float(f.value(triangle.x_f) + g.value(triangle.x_g)),
        gamma=gamma,
        residual=residual,
        closed_form=closed_form,
    )


def fixed_point_reference(
    f: ProxFunction,
    g: ProxFunction,
    gamma: float,
    z0,
    budget: int = 1000000,
    closed_form=None,
    tol: float = REFERENCE_TOL,
) -> SolutionCertificate:
    """
    参照不動点を計算して証明書を作る

    closed_form があればそれを z* とし、無ければ z0 から DRS を残差 1e-12 または
    budget 反復まで回す。

    Args:
        f, g: 問題の関数
        gamma: ステップ幅
        z0: 初期点（証明書の dist0 の基準）
        budget: 参照実行の反復上限（1e5 以上）
        closed_form: 既知の不動点
        tol: 受理する残差 ‖T_PRS z* − z*‖

    Returns:
        SolutionCertificate

    Raises:
        NonConvergenceError: 残差が tol を超えた
    """
    if budget < MIN_REFERENCE_BUDGET:
        raise InvalidArgumentError(f"参照実行の反復上限は {MIN_REFERENCE_BUDGET} 以上である必要があります: {budget}")
    gamma = check_gamma(gamma)
    start = as_vector(z0, "z0")

    if closed_form is not None:
        certificate = certificate_at(f, g, gamma, closed_form, start, closed_form=True)
        if certificate.residual > tol:
            raise NonConvergenceError(0, certificate.residual)
        return certificate

    z = start.copy()
    residual = np.inf
    for _ in range(int(budget)):
        x_g = np.asarray(g.prox(gamma, z), dtype=float)
        x_f = np.asarray(f.prox(gamma, 2.0 * x_g - z), dtype=float)
        gap = x_f - x_g
        residual = 2.0 * float(np.linalg.norm(gap))
        if not np.isfinite(residual):
            break
        if residual <= REFERENCE_TARGET * max(1.0, float(np.linalg.norm(z))):
            break
        z = z + gap

    if not np.isfinite(residual) or residual > tol:
        print(f"❌ 参照不動点の計算が収束しませんでした（残差 {residual:.3e}）")
        raise NonConvergenceError(int(budget), float(residual))
    return certificate_at(f, g, gamma, z, start)


def ergodic_average(trace: IterationTrace) -> Tuple[np.ndarray, np.ndarray]:
    """
    エルゴード平均の列 (x̄_g^k, x̄_f^k)

    x̄^k = (1/Λ_k)Σ_{i≤k} λ_i x^i。逐次更新値と直接計算の照合は
    km.check_ergodic_consistency で行う。
    """
    if trace.xbar_g is None:
        raise InvalidArgumentError("トレースに三角分解のベクトル記録がありません")
    return trace.xbar_g, trace.xbar_f


def _scale(trace: IterationTrace) -> float:
    return max(1.0, float(np.max(np.abs(trace.z)))) if trace.z is not None else 1.0


def check_step_identity(trace: IterationTrace) -> BoundReport:
    """z^{k+1} − z^k − 2λ_k(x_f^k − x_g^k) = 0 を機械精度で検証"""
    trace.require_vectors()
    if trace.x_g is None:
        raise InvalidArgumentError("トレースに三角分解の記録がありません")
    steps = len(trace) - 1
    expected = 2.0 * trace.lambdas[:steps, None] * (trace.x_f[:steps] - trace.x_g[:steps])
    defect = np.linalg.norm(trace.z[1:] - trace.z[:-1] - expected, axis=1)
    return upper_check('step_identity', defect, 0.0, atol=1e-12 * _scale(trace), rtol=0.0)


def check_drs_subgradient_identity(trace: IterationTrace) -> BoundReport:
    """λ = 1/2 で z^{k+1} = z^k − γ(∇̃f(x_f^k) + ∇̃g(x_g^k)) を検証"""
    trace.require_vectors()
    steps = len(trace) - 1
    if not np.all(trace.lambdas[:steps] == 0.5):
        raise InvalidArgumentError("DRS の劣勾配恒等式は λ ≡ 1/2 のときのみ成立します")
    gamma = trace.gamma
    z, x_g, x_f = trace.z[:-1], trace.x_g[:steps], trace.x_f[:steps]
    subgrad_g = (z - x_g) / gamma
    subgrad_f = (2.0 * x_g - z - x_f) / gamma
    defect = np.linalg.norm(trace.z[1:] - (z - gamma * (subgrad_f + subgrad_g)), axis=1)
    return upper_check('drs_subgradient_identity', defect, 0.0, atol=1e-12 * _scale(trace), rtol=0.0)


def check_certificate_optimality(certificate: SolutionCertificate, f: ProxFunction, g: ProxFunction) -> BoundReport:
    """不動点で ‖x_g − x_f‖ ≤ 1e-8 かつ ∇̃f + ∇̃g ≈ 0"""
    triangle = apply_prs_operator(f, g, certificate.gamma, certificate.zstar)
    gap = upper_check('certificate_gap', [np.linalg.norm(triangle.gap)], REFERENCE_TOL, atol=0.0, rtol=0.0)
    stationarity = upper_check(
        'certificate_stationarity',
        [np.linalg.norm(triangle.subgrad_f + triangle.subgrad_g)],
        REFERENCE_TOL / certificate.gamma,
        atol=0.0,
        rtol=0.0,
    )
    return merge_reports('certificate_optimality', [gap, stationarity])


def check_fbs_rates(trace: IterationTrace, certificate: SolutionCertificate, config: FBSConfig) -> BoundReport:
    """
    FBS の目的関数誤差・FPR・単調性を検証

    目的関数誤差 h(z^{k+1}) − h(x*) ≤ C‖z0 − x*‖²/(k+1) と、FPR の導出上界を判定する。
    表示形の FPR 定数 C‖z0 − x*‖²/((1/γ − 1/(2β))(k+1)²) は判定せず、違反数を notes に残す。
    """
    objective = trace.objective
    if objective is None:
        raise InvalidArgumentError("FBS トレースに目的関数値がありません")
    steps = np.arange(len(trace) - 1)
    obj_bounds, displayed = zip(*(fbs_bounds(certificate, config.gamma, config.beta, int(k)) for k in steps))
    derived = [fbs_fpr_bound_derived(certificate, config.gamma, config.beta, int(k)) for k in steps]

    measured_fpr = trace.fpr[1:]
    displayed_violations = int(np.sum(measured_fpr > np.asarray(displayed) + 1e-9))
    reports = [
        upper_check('fbs_objective', objective[1:] - certificate.obj_star, obj_bounds),
        upper_check(
            'fbs_fpr', measured_fpr, derived,
            notes={'displayed_bound_violations': displayed_violations},
        ),
    ]
    if config.gamma <= config.beta and len(trace) > 2:
        reports.append(upper_check('fbs_objective_monotone', objective[2:], objective[1:-1], atol=1e-10))
    return merge_reports('fbs_rates', reports, notes={'displayed_bound_violations': displayed_violations})


def check_drs_1d(trace: IterationTrace, certificate: SolutionCertificate) -> BoundReport:
    """
    1次元 DRS の FPR 上界

    |(T_PRS)_{1/2} z^{k+1} − z^{k+1}|² = fpr_{k+1}/4 ≤ |z0 − z*|²/((k+1)(k+2)) を判定する。
    表示形 |z0 − z*|²/(2(k+1)²) との等号・不等号の不一致は notes に残す。
    """
    steps = len(trace) - 1
    if trace.final_z.size != 1:
        raise InvalidArgumentError("1次元 DRS のチェックはスカラー問題のみ対象です")
    if not np.all(trace.lambdas[:steps] == 0.5):
        raise InvalidArgumentError("1次元 DRS のチェックは λ ≡ 1/2 のみ対象です")
    k = np.arange(steps, dtype=float)
    half_step = trace.fpr[1:] / 4.0
    derived = certificate.dist0_sq / ((k + 1.0) * (k + 2.0))
    displayed = certificate.dist0_sq / (2.0 * (k + 1.0) ** 2)
    notes = {
        'displayed_upper_violations': int(np.sum(half_step > displayed + 1e-9)),
        'displayed_equality_violations': int(np.sum(~np.isclose(half_step, displayed, rtol=1e-9, atol=1e-12))),
    }
    return upper_check('drs_1d', half_step, derived, notes=notes)


def check_ergodic_fpr(trace: IterationTrace, certificate: SolutionCertificate) -> BoundReport:
    """‖x̄_f^k − x̄_g^k‖ ≤ 2‖z0 − z*‖/Λ_k"""
    if trace.ergodic_gap is None:
        raise InvalidArgumentError("トレースに三角分解の記録がありません")
    return upper_check('ergodic_fpr', trace.ergodic_gap, 2.0 * certificate.dist0 / trace.cumulative)
