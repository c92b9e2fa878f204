"""
収束率モジュール
総和可能列の補題、目的関数誤差の各種上界・下界、減衰指数の推定
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import InvalidArgumentError, InvalidConfigError, UnsupportedScheduleError
from report import BoundReport, lower_check, merge_reports, upper_check

# 減衰指数の推定で捨てる初期反復数
FIT_TRANSIENT = 10


def _sequence(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} に非有限値が含まれています")
    if np.any(array < 0):
        raise InvalidArgumentError(f"{name} に負の値が含まれています")
    return array


@dataclass(frozen=True)
class SequenceCheck:
    """
    総和可能列の補題の入力

    part は 1（単調）、2（誤差つき単調）、3（高速化）、4（単調性なし）。
    part 2 では e_k、part 3 では e_k と長さ n+1 の b_k を与える。
    """

    a: Tuple[float, ...]
    lambdas: Tuple[float, ...]
    part: int = 1
    e: Optional[Tuple[float, ...]] = None
    b: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        a = _sequence(self.a, "a")
        lambdas = _sequence(self.lambdas, "λ")
        if a.size == 0 or a.size != lambdas.size:
            raise InvalidArgumentError(f"a と λ の長さが一致しません: {a.size} != {lambdas.size}")
        if self.part not in (1, 2, 3, 4):
            raise InvalidArgumentError(f"未知の補題の項目です: {self.part}")
        if self.part in (2, 3):
            if self.e is None:
                raise InvalidArgumentError(f"part {self.part} には誤差列 e が必要です")
            if _sequence(self.e, "e").size != a.size:
                raise InvalidArgumentError("e の長さが a と一致しません")
        if self.part == 3:
            if self.b is None or _sequence(self.b, "b").size != a.size + 1:
                raise InvalidArgumentError("part 3 には長さ len(a)+1 の b が必要です")

    @classmethod
    def of(cls, a, lambdas, part: int = 1, e=None, b=None) -> 'SequenceCheck':
        def as_tuple(values):
            return None if values is None else tuple(np.asarray(values, dtype=float).ravel())
        return cls(as_tuple(a), as_tuple(lambdas), part, as_tuple(e), as_tuple(b))


def verify_summable_lemma(check: SequenceCheck) -> BoundReport:
    """
    総和可能列の補題を有限の地平で検証

    無限和は地平内の部分和で置き換える（上界側で使うので主張は弱くなるだけ）。

    Args:
        check: 入力列と対象の項目

    Returns:
        BoundReport（仮定の検証も部分レポートとして含む）
    """
    a = np.asarray(check.a, dtype=float)
    lambdas = np.asarray(check.lambdas, dtype=float)
    weights = np.cumsum(lambdas)
    if np.any(weights <= 0):
        raise InvalidArgumentError("Λ_k が 0 になる重みでは評価できません")
    total = float(lambdas @ a)

    if check.part == 1:
        return merge_reports('summable_lemma_part1', [
            upper_check('monotone_hypothesis', a[1:], a[:-1], atol=0.0, rtol=0.0),
            upper_check('part1_bound', a, total / weights),
        ])

    if check.part == 2:
        e = np.asarray(check.e, dtype=float)
        return merge_reports('summable_lemma_part2', [
            upper_check('error_monotone_hypothesis', a[1:], a[:-1] + e[:-1]),
            upper_check('part2_bound', a, (total + float(weights @ e)) / weights),
        ])

    if check.part == 3:
        e = np.asarray(check.e, dtype=float)
        b = np.asarray(check.b, dtype=float)
        index = np.arange(1, a.size + 1, dtype=float)
        return merge_reports('summable_lemma_part3', [
            upper_check('telescoping_hypothesis', lambdas * a, b[:-1] - b[1:] + e),
            upper_check('part3_bound', np.cumsum(index * lambdas * a), float(b.sum() + index @ e)),
        ])

    best = np.minimum.accumulate(a)
    return merge_reports('summable_lemma_part4', [
        upper_check('running_min_monotone', best[1:], best[:-1], atol=0.0, rtol=0.0),
        upper_check('part4_bound', best, total / weights),
    ])


def _positive(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if np.any(~(array > 0)):
        raise InvalidArgumentError(f"{name} は正である必要があります")
    return array


def ergodic_objective_bounds(certificate, cumulative, k: Optional[int] = None):
    """
    エルゴード平均の目的関数誤差の帯

    lower = −2‖z0 − z*‖‖z* − x*‖/(γΛ_k)、upper = ‖z0 − x*‖²/(4γΛ_k)。
    cumulative は Λ_k（配列も可）。
    """
    cumulative = _positive(cumulative, "Λ_k")
    gamma = certificate.gamma
    lower = -2.0 * certificate.dist0 * certificate.anchor_norm / (gamma * cumulative)
    upper = certificate.initial_gap ** 2 / (4.0 * gamma * cumulative)
    return lower, upper


def ergodic_feasibility_bound(certificate, cumulative):
    """‖x̄_f^k − x̄_g^k‖ ≤ 2‖z0 − z*‖/Λ_k"""
    return 2.0 * certificate.dist0 / _positive(cumulative, "Λ_k")


def _root_horizon(tau_lb: float, k) -> np.ndarray:
    if not tau_lb > 0:
        raise UnsupportedScheduleError(f"τ の下限が正ではありません: {tau_lb}")
    return np.sqrt(tau_lb * (np.asarray(k, dtype=float) + 1.0))


def nonergodic_objective_bounds(certificate, tau_lb: float, k):
    """
    非エルゴードの目的関数誤差の帯

    upper = (d0 + ‖z* − x*‖)d0/(2γ√(τ̲(k+1)))、lower = −d0‖z* − x*‖/(2γ√(τ̲(k+1)))。
    """
    denominator = 2.0 * certificate.gamma * _root_horizon(tau_lb, k)
    dist0 = certificate.dist0
    upper = (dist0 + certificate.anchor_norm) * dist0 / denominator
    lower = -dist0 * certificate.anchor_norm / denominator
    return lower, upper


def sqrt_fpr_objective_bound(certificate, fpr):
    """(有界量)×√FPR の形の上界 (d0 + ‖z* − x*‖)√fpr_k/(2γ)"""
    fpr = np.asarray(fpr, dtype=float)
    return (certificate.dist0 + certificate.anchor_norm) * np.sqrt(fpr) / (2.0 * certificate.gamma)


def lipschitz_objective_bounds(certificate, lipschitz: float, mode: str, value, tau_lb: Optional[float] = None):
    """
    Lipschitz 連続性を仮定した目的関数誤差の上界

    Args:
        certificate: 解の証明書
        lipschitz: Lipschitz 定数 L
        mode: 'ergodic'（value は Λ_k）または 'nonergodic'（value は k）
        value: Λ_k または k
        tau_lb: nonergodic で使う τ̲

    Returns:
        上界値
    """
    if lipschitz < 0:
        raise InvalidArgumentError(f"Lipschitz 定数は非負である必要があります: {lipschitz}")
    gamma = certificate.gamma
    dist0 = certificate.dist0
    if mode == 'ergodic':
        cumulative = _positive(value, "Λ_k")
        return certificate.initial_gap ** 2 / (4.0 * gamma * cumulative) + 2.0 * lipschitz * dist0 / cumulative
    if mode == 'nonergodic':
        if tau_lb is None:
            raise InvalidArgumentError("nonergodic には τ̲ が必要です")
        numerator = (dist0 + certificate.anchor_norm + gamma * lipschitz) * dist0
        return numerator / (2.0 * gamma * _root_horizon(tau_lb, value))
    raise InvalidArgumentError(f"未知のモードです: {mode}")


def fbs_constant(gamma: float, beta: float) -> float:
    """FBS の定数（γ ≤ β なら 1/(2γ)、それ以外は α_FBS 補正つき）"""
    if not gamma > 0 or not beta > 0 or gamma >= 2 * beta:
        raise InvalidConfigError(f"FBS には 0 < γ < 2β が必要です: γ={gamma}, β={beta}")
    if gamma <= beta:
        return 1.0 / (2.0 * gamma)
    alpha = 2.0 * beta / (4.0 * beta - gamma)
    return 1.0 / (2.0 * gamma) + (1.0 / (2.0 * beta) - 1.0 / (2.0 * gamma)) * alpha / (1.0 - alpha)


def _fbs_margin(gamma: float, beta: float) -> float:
    return 1.0 / gamma - (0.0 if np.isinf(beta) else 1.0 / (2.0 * beta))


def fbs_bounds(certificate, gamma: float, beta: float, k: int) -> Tuple[float, float]:
    """
    FBS の目的関数誤差と FPR の上界（表示形）

    objective = C‖z0 − x*‖²/(k+1)、fpr = C‖z0 − x*‖²/((1/γ − 1/(2β))(k+1)²)。
    FPR の表示形は検証では判定に使わず、fbs_fpr_bound_derived を使う。
    """
    constant = fbs_constant(gamma, beta)
    scale = constant * certificate.initial_gap ** 2
    return scale / (k + 1), scale / (_fbs_margin(gamma, beta) * (k + 1) ** 2)


def fbs_fpr_bound_derived(certificate, gamma: float, beta: float, k: int) -> float:
    """
    FBS の FPR 上界（単調性と重みつき総和から得られる形）

    ‖T_FBS z^{k+1} − z^{k+1}‖² ≤ 2C‖z0 − x*‖²/((1/γ − 1/(2β))(k+1)(k+2))
    """
    constant = fbs_constant(gamma, beta)
    return 2.0 * constant * certificate.initial_gap ** 2 / (_fbs_margin(gamma, beta) * (k + 1) * (k + 2))


@dataclass(frozen=True)
class RateFit:
    """両対数最小二乗による減衰指数の推定結果"""

    exponent: float
    k_lo: int
    k_hi: int
    residual: float


def fit_decay_exponent(series: Sequence[float], window: Optional[Tuple[int, int]] = None) -> RateFit:
    """
    log(series_k) を log(k+1) に回帰した傾きを返す

    Args:
        series: 正の列
        window: 推定に使う [k_lo, k_hi]（省略時は最初の 10 反復を捨てた全体）

    Returns:
        RateFit
    """
    values = np.asarray(series, dtype=float).ravel()
    if window is None:
        window = (FIT_TRANSIENT, values.size - 1)
    k_lo, k_hi = int(window[0]), int(window[1])
    if k_lo < 1 or k_hi >= values.size or k_hi <= k_lo:
        raise InvalidArgumentError(f"推定窓が不正です: [{k_lo}, {k_hi}] (系列長 {values.size})")
    segment = values[k_lo:k_hi + 1]
    if np.any(~(segment > 0)):
        raise InvalidArgumentError("推定窓に正でない値が含まれています")
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    coefficients, residuals, _, _, _ = np.polyfit(np.log(k + 1.0), np.log(segment), 1, full=True)
    residual = float(residuals[0]) if residuals.size else 0.0
    return RateFit(exponent=float(coefficients[0]), k_lo=k_lo, k_hi=k_hi, residual=residual)


def trace_tau_lower(trace) -> float:
    taus = trace.lambdas * (1.0 - trace.lambdas)
    return float(np.min(taus))


def check_fundamental_inequalities(trace, certificate, gamma: Optional[float] = None, schedule=None) -> BoundReport:
    """
    上側・下側の基本不等式を反復ごとに検証

    上側: 4γλ_k(f(x_f) + g(x_g) − obj*) ≤ ‖z^k − x*‖² − ‖z^{k+1} − x*‖² + (1 − 1/λ_k)‖z^{k+1} − z^k‖²
    下側: f(x_f) + g(x_g) − obj* ≥ ⟨x_g − x_f, z* − x*⟩/γ
    """
    trace.require_vectors()
    if trace.objective is None or trace.x_g is None:
        raise InvalidArgumentError("基本不等式の検証には三角分解と目的関数値の記録が必要です")
    gamma = trace.gamma if gamma is None else gamma
    steps = len(trace) - 1
    lambdas = trace.lambdas if schedule is None else schedule.lambdas(len(trace))
    error = trace.objective - certificate.obj_star
    xstar = certificate.xstar

    to_star = trace.z - xstar
    dist = np.einsum('ij,ij->i', to_star, to_star)
    step = trace.z[1:] - trace.z[:-1]
    step_sq = np.einsum('ij,ij->i', step, step)
    lam = lambdas[:steps]
    upper = upper_check(
        'upper_fundamental',
        4.0 * gamma * lam * error[:steps],
        dist[:-1] - dist[1:] + (1.0 - 1.0 / lam) * step_sq,
    )
    anchor = certificate.zstar - xstar
    lower = lower_check('lower_fundamental', error, (trace.x_g - trace.x_f) @ anchor / gamma)
    return merge_reports('fundamental_inequalities', [upper, lower])


def check_objective_bands(trace, certificate) -> BoundReport:
    """
    エルゴード・非エルゴードの目的関数誤差が帯に入ることと √FPR 積の上界を検証
    """
    if trace.objective is None:
        raise InvalidArgumentError("トレースに目的関数値がありません")
    error = trace.objective - certificate.obj_star
    ergodic_error = trace.objective_ergodic - certificate.obj_star
    lo, hi = ergodic_objective_bounds(certificate, trace.cumulative)
    reports = [
        upper_check('ergodic_upper', ergodic_error, hi),
        lower_check('ergodic_lower', ergodic_error, lo),
        upper_check('sqrt_fpr_product', error, sqrt_fpr_objective_bound(certificate, trace.fpr)),
    ]
    tau_lb = trace_tau_lower(trace)
    if tau_lb > 0:
        k = np.arange(len(trace))
        lo, hi = nonergodic_objective_bounds(certificate, tau_lb, k)
        reports += [
            upper_check('nonergodic_upper', error, hi),
            lower_check('nonergodic_lower', error, lo),
        ]
    return merge_reports('objective_bands', reports, notes={'tau_lower': tau_lb})


def check_lipschitz_bounds(trace, certificate, f, g, lipschitz: float, side: str = 'f') -> BoundReport:
    """
    片方の関数が Lipschitz のときの同一点での目的関数誤差

    side='f' なら x^k = x_g^k、side='g' なら x^k = x_f^k で f + g を評価する。
    """
    trace.require_vectors()
    if side == 'f':
        points, averages = trace.x_g, trace.xbar_g
    elif side == 'g':
        points, averages = trace.x_f, trace.xbar_f
    else:
        raise InvalidArgumentError(f"side は 'f' か 'g' である必要があります: {side}")
    if points is None:
        raise InvalidArgumentError("トレースに三角分解の記録がありません")

    def error(point):
        return f.value(point) + g.value(point) - certificate.obj_star

    ergodic = np.array([error(p) for p in averages])
    nonergodic = np.array([error(p) for p in points])
    reports = [
        upper_check('lipschitz_ergodic', ergodic, lipschitz_objective_bounds(certificate, lipschitz, 'ergodic', trace.cumulative)),
        lower_check('lipschitz_ergodic_nonnegative', ergodic, 0.0),
        lower_check('lipschitz_nonergodic_nonnegative', nonergodic, 0.0),
    ]
    tau_lb = trace_tau_lower(trace)
    if tau_lb > 0:
        bound = lipschitz_objective_bounds(certificate, lipschitz, 'nonergodic', np.arange(len(trace)), tau_lb=tau_lb)
        reports.append(upper_check('lipschitz_nonergodic', nonergodic, bound))
    return merge_reports('lipschitz_bounds', reports, notes={'lipschitz': lipschitz, 'side': side})


def _ball_samples(rng, center: np.ndarray, radius: float, count: int) -> np.ndarray:
    directions = rng.standard_normal((count, center.size))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / center.size)
    return center + directions * radii[:, None]


def check_lipschitz_on_ball(f, center, radius: float, lipschitz: float, samples: int = 200, seed: int = 0) -> BoundReport:
    """
    閉球 B(center, radius) 上で |f(x) − f(y)| ≤ L‖x − y‖ をサンプル対で検証

    notes には 2倍の球での値の振れ幅 δ から得た推定 δ/radius を残す。
    """
    center = np.asarray(center, dtype=float).ravel()
    if not radius > 0:
        raise InvalidArgumentError(f"半径は正である必要があります: {radius}")
    rng = np.random.default_rng(seed)
    xs = _ball_samples(rng, center, radius, samples)
    ys = _ball_samples(rng, center, radius, samples)
    measured = [abs(f.value(x) - f.value(y)) for x, y in zip(xs, ys)]
    bound = lipschitz * np.linalg.norm(xs - ys, axis=1)

    wide = [f.value(p) for p in _ball_samples(rng, center, 2.0 * radius, samples)]
    spread = float(np.max(wide) - np.min(wide)) if np.all(np.isfinite(wide)) else np.inf
    return upper_check(
        'lipschitz_on_ball', measured, bound,
        notes={'sampled_modulus_estimate': spread / radius},
    )
