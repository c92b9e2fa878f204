"""
凸実行可能性問題モジュール
2つの閉凸集合への射影で DRS/PRS を回し、距離ギャップの収束率を検証する
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space

from core import IndicatorAffine, IndicatorSet, IndicatorSubspace, as_vector
from errors import InvalidArgumentError, InvalidConfigError
from km import IterationTrace, RelaxationSchedule, fpr_bounds
from report import BoundReport, merge_reports, upper_check
from splitting import SolutionCertificate, certificate_at, fixed_point_reference, run_relaxed_prs

# 射影後の所属判定の絶対許容誤差
MEMBERSHIP_TOL = 1e-10
IDEMPOTENT_TOL = 1e-12


@dataclass(frozen=True)
class ConvexSetPair:
    """C_f と C_g の組（どちらも厳密な射影を持つ）"""

    C_f: IndicatorSet
    C_g: IndicatorSet

    def __post_init__(self):
        for name, part in (('C_f', self.C_f), ('C_g', self.C_g)):
            if not isinstance(part, IndicatorSet):
                raise InvalidArgumentError(f"{name} は射影を持つ集合である必要があります: {part!r}")

    @property
    def is_affine(self) -> bool:
        return all(isinstance(part, (IndicatorSubspace, IndicatorAffine)) for part in (self.C_f, self.C_g))


def check_idempotent(pair: ConvexSetPair, dim: int, samples: int = 10, seed: int = 0) -> BoundReport:
    """P(P(x)) = P(x) を無作為な点で検証"""
    rng = np.random.default_rng(seed)
    defects = []
    for _ in range(samples):
        x = rng.standard_normal(dim) * 3.0
        for part in (pair.C_f, pair.C_g):
            once = part.project(x)
            defects.append(float(np.max(np.abs(part.project(once) - once))))
    return upper_check('projection_idempotent', defects, 0.0, atol=IDEMPOTENT_TOL, rtol=0.0)


def _affine_parts(part):
    if isinstance(part, IndicatorAffine):
        basis, offset = part.basis, part.offset
    else:
        basis, offset = part.basis, np.zeros(part.dim)
    if sp.issparse(basis):
        basis = basis.toarray()
    return np.asarray(basis, dtype=float), offset


def intersect_affine(C1, C2) -> IndicatorAffine:
    """
    2つのアフィン集合の共通部分

    Raises:
        InvalidConfigError: 共通部分が空
    """
    B1, o1 = _affine_parts(C1)
    B2, o2 = _affine_parts(C2)
    if o1.size != o2.size:
        raise InvalidArgumentError("集合の次元が一致しません")
    stacked = np.hstack([B1, -B2])
    if stacked.shape[1] == 0:
        if np.linalg.norm(o1 - o2) > MEMBERSHIP_TOL:
            raise InvalidConfigError("共通部分が空です")
        return IndicatorAffine(np.zeros((o1.size, 0)), o1)

    coefficients, *_ = np.linalg.lstsq(stacked, o2 - o1, rcond=None)
    point = o1 + B1 @ coefficients[:B1.shape[1]]
    other = o2 + B2 @ coefficients[B1.shape[1]:]
    if np.linalg.norm(point - other) > MEMBERSHIP_TOL * max(1.0, float(np.linalg.norm(point))):
        raise InvalidConfigError("共通部分が空です")
    kernel = null_space(stacked)
    # B1, B2 が正規直交なので B1 a は核の上で単射
    directions = B1 @ kernel[:B1.shape[1]] if kernel.size else np.zeros((o1.size, 0))
    return IndicatorAffine(directions, point)


def feasibility_certificate(pair: ConvexSetPair, z0, gamma: float = 1.0, budget: int = 1000000) -> SolutionCertificate:
    """
    不動点の証明書

    アフィン集合の組では Fix T = x̂ + (U∩V) + (U+V)^⊥ への z0 の射影を閉形式で使う。
    それ以外は参照 DRS 実行による。
    """
    z0 = as_vector(z0, "z0")
    f, g = pair.C_f, pair.C_g
    if not pair.is_affine:
        return fixed_point_reference(f, g, gamma, z0, budget=budget)

    meeting = intersect_affine(f, g)
    B_f, _ = _affine_parts(f)
    B_g, _ = _affine_parts(g)
    parts = []
    if meeting.basis.shape[1]:
        parts.append(np.asarray(meeting.basis))
    spanned = np.hstack([B_f, B_g])
    complement = null_space(spanned.T) if spanned.shape[1] else np.eye(z0.size)
    if complement.size:
        parts.append(complement)
    zstar = meeting.offset.copy()
    if parts:
        basis = np.hstack(parts)
        q, _ = np.linalg.qr(basis)
        zstar = zstar + q @ (q.T @ (z0 - meeting.offset))
    return certificate_at(f, g, gamma, zstar, z0, closed_form=True)


def run_feasibility(
    pair: ConvexSetPair,
    schedule: RelaxationSchedule,
    z0,
    iters: int,
    zstar=None,
    store_vectors: bool = True,
) -> IterationTrace:
    """
    f = ι_{C_f}, g = ι_{C_g} の緩和 PRS

    extras に d_{C_g}(x_f^k), d_{C_f}(x_g^k) とエルゴード平均の所属距離を記録する。
    指示関数の prox は γ に依存しないので γ = 1 で回す。
    """
    f, g = pair.C_f, pair.C_g
    probes = {
        'dist_g_of_xf': lambda k, triangle, xbar_g, xbar_f: g.distance(triangle.x_f),
        'dist_f_of_xg': lambda k, triangle, xbar_g, xbar_f: f.distance(triangle.x_g),
        'ergodic_dist_f': lambda k, triangle, xbar_g, xbar_f: f.distance(xbar_f),
        'ergodic_dist_g': lambda k, triangle, xbar_g, xbar_f: g.distance(xbar_g),
    }
    return run_relaxed_prs(f, g, 1.0, schedule, z0, iters, zstar=zstar, store_vectors=store_vectors, probes=probes)


def feasibility_gap_bounds(
    certificate: SolutionCertificate,
    schedule: RelaxationSchedule,
    k,
    mode: str = 'nonergodic',
):
    """
    距離ギャップの二乗の上界

    nonergodic: ‖x_f^k − x_g^k‖² = ‖Tz^k − z^k‖²/4 ≤ ‖z0 − z*‖²/(4Σ_{i≤k}τ_i)
    ergodic: ‖x̄_f^k − x̄_g^k‖² ≤ (2‖z0 − z*‖/Λ_k)²

    Args:
        certificate: 不動点の証明書
        schedule: 緩和スケジュール
        k: 反復番号（スカラーまたは配列）
        mode: 'nonergodic' または 'ergodic'

    Returns:
        上界値
    """
    k = np.asarray(k, dtype=int)
    if np.any(k < 0):
        raise InvalidArgumentError("k は非負である必要があります")
    if certificate.dist0 == 0:
        return np.zeros(k.shape) if k.ndim else 0.0
    count = int(np.max(k)) + 1
    if mode == 'nonergodic':
        bounds = fpr_bounds(schedule, certificate.dist0_sq, count)[k] / 4.0
    elif mode == 'ergodic':
        cumulative = schedule.cumulative(count)[k]
        bounds = (2.0 * certificate.dist0 / cumulative) ** 2
    else:
        raise InvalidArgumentError(f"未知のモードです: {mode}")
    return bounds if k.ndim else float(bounds)


def check_distance_gaps(trace: IterationTrace) -> BoundReport:
    """d_{C_g}(x_f^k) と d_{C_f}(x_g^k) が ‖x_f^k − x_g^k‖ 以下であることを検証"""
    if 'dist_g_of_xf' not in trace.extras:
        raise InvalidArgumentError("run_feasibility のトレースが必要です")
    gap = np.sqrt(trace.gap_sq)
    return merge_reports('distance_gaps', [
        upper_check('dist_g_of_xf', trace.extras['dist_g_of_xf'], gap, atol=MEMBERSHIP_TOL),
        upper_check('dist_f_of_xg', trace.extras['dist_f_of_xg'], gap, atol=MEMBERSHIP_TOL),
    ])


def check_ergodic_membership(trace: IterationTrace) -> BoundReport:
    """x̄_f^k ∈ C_f、x̄_g^k ∈ C_g を 1e-10 で検証"""
    if 'ergodic_dist_f' not in trace.extras:
        raise InvalidArgumentError("run_feasibility のトレースが必要です")
    return merge_reports('ergodic_membership', [
        upper_check('ergodic_in_f', trace.extras['ergodic_dist_f'], 0.0, atol=MEMBERSHIP_TOL, rtol=0.0),
        upper_check('ergodic_in_g', trace.extras['ergodic_dist_g'], 0.0, atol=MEMBERSHIP_TOL, rtol=0.0),
    ])


def check_feasibility_rates(
    trace: IterationTrace,
    certificate: SolutionCertificate,
    schedule: Optional[RelaxationSchedule] = None,
) -> BoundReport:
    """非エルゴード（τ > 0 のとき）とエルゴードの距離ギャップ上界を検証"""
    schedule = schedule or RelaxationSchedule.explicit(trace.lambdas)
    k = np.arange(len(trace))
    reports = [
        upper_check(
            'ergodic_gap', trace.ergodic_gap ** 2,
            feasibility_gap_bounds(certificate, schedule, k, mode='ergodic'),
        ),
    ]
    notes = {}
    if np.all(trace.lambdas < 1.0):
        nonergodic = feasibility_gap_bounds(certificate, schedule, k, mode='nonergodic')
        distances = np.maximum(trace.extras['dist_g_of_xf'], trace.extras['dist_f_of_xg']) ** 2
        reports += [
            upper_check('nonergodic_gap', trace.gap_sq, nonergodic),
            upper_check('nonergodic_distance', distances, nonergodic),
        ]
    else:
        notes['nonergodic'] = 'λ_k = 1 を含むため非エルゴード上界は評価しない'
    return merge_reports('feasibility_rates', reports, notes=notes)
