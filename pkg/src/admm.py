"""
ADMMモジュール
双対近接写像による緩和ADMM、主問題の境界検証、モデル当てはめの分割、分散ADMM
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from core import BlockSeparable, ProxFunction, Zero, as_vector, check_gamma, compose_affine, frozen
from errors import ConfigParseError, InvalidArgumentError, SolverFailureError, UnsupportedError
from km import RelaxationSchedule, abort_message, check_iters
from report import BoundReport, lower_check, merge_reports, upper_check
from splitting import fixed_point_reference, run_relaxed_prs

# 内部ソルバーの許容誤差と反復上限
INNER_TOL = 1e-10
INNER_MAX_ITER = 100000


def _matrix(value, name: str) -> np.ndarray:
    matrix = np.atleast_2d(np.array(value, dtype=float))
    if matrix.ndim != 2:
        raise InvalidArgumentError(f"{name} は2次元行列である必要があります")
    if not np.all(np.isfinite(matrix)):
        raise InvalidArgumentError(f"{name} に非有限値が含まれています")
    return matrix


class SubproblemSolver:
    """
    部分問題 argmin_x f(x) + (γ/2)‖Mx − c‖² のソルバー

    二次形式の f は分解をキャッシュした線形方程式、MᵀM = sI なら f の prox、
    ブロック分離可能な f で MᵀM がブロックごとのスカラー倍なら各ブロックの prox、
    それ以外は内部の近接勾配法（許容誤差 1e-10、上限 1e5 反復）で解く。
    """

    def __init__(self, func: ProxFunction, matrix, gamma: float):
        self.func = func
        self.matrix = _matrix(matrix, "M")
        self.gamma = check_gamma(gamma)
        n = self.matrix.shape[1]
        gram = self.matrix.T @ self.matrix
        self._last = np.zeros(n)

        form = func.quadratic_form(n)
        if form is not None:
            Q, q, _ = form
            if Q.shape != (n, n):
                raise InvalidArgumentError(f"関数の次元 {Q.shape[0]} と行列の列数 {n} が一致しません")
            self._q = q
            hessian = Q + self.gamma * gram
            eigenvalues = np.linalg.eigvalsh(hessian)
            if eigenvalues.min() > 1e-12 * max(1.0, eigenvalues.max()):
                self.mode = 'quadratic'
                self._factor = cho_factor(hessian)
            else:
                self.mode = 'quadratic_lstsq'
                self._hessian = hessian
            return

        diagonal = np.diag(gram).copy()
        off_diagonal = gram - np.diag(diagonal)
        scale = max(1.0, float(np.max(np.abs(gram)))) if gram.size else 1.0
        is_diagonal = np.max(np.abs(off_diagonal)) <= 1e-12 * scale if n > 1 else True
        if is_diagonal and diagonal.size and diagonal.min() > 0:
            if np.max(np.abs(diagonal - diagonal[0])) <= 1e-12 * scale:
                self.mode = 'orthogonal'
                self._scale = float(diagonal[0])
                return
            if isinstance(func, BlockSeparable) and self._blockwise_scales(func, diagonal, scale):
                self.mode = 'block_orthogonal'
                return

        norm_sq = float(np.linalg.norm(self.matrix, 2) ** 2)
        if norm_sq == 0:
            raise UnsupportedError(f"線形写像が0の部分問題は解けません: {func!r}")
        self.mode = 'inner'
        self._step = 1.0 / (self.gamma * norm_sq)

    def _blockwise_scales(self, func: BlockSeparable, diagonal: np.ndarray, scale: float) -> bool:
        scales = []
        for i in range(len(func.parts)):
            block = diagonal[func.offsets[i]:func.offsets[i + 1]]
            if np.max(np.abs(block - block[0])) > 1e-12 * scale:
                return False
            scales.append(float(block[0]))
        self._block_scales = scales
        return True

    def solve(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        M, gamma = self.matrix, self.gamma
        if self.mode == 'quadratic':
            return cho_solve(self._factor, gamma * (M.T @ c) - self._q)
        if self.mode == 'quadratic_lstsq':
            return np.linalg.lstsq(self._hessian, gamma * (M.T @ c) - self._q, rcond=None)[0]
        if self.mode == 'orthogonal':
            return np.asarray(self.func.prox(1.0 / (gamma * self._scale), (M.T @ c) / self._scale), dtype=float)
        if self.mode == 'block_orthogonal':
            func = self.func
            target = M.T @ c
            pieces = []
            for i, part in enumerate(func.parts):
                s = self._block_scales[i]
                block = target[func.offsets[i]:func.offsets[i + 1]] / s
                pieces.append(np.asarray(part.prox(1.0 / (gamma * s), block), dtype=float))
            return np.concatenate(pieces)
        return self._solve_inner(c)

    def _solve_inner(self, c: np.ndarray) -> np.ndarray:
        M, gamma, step = self.matrix, self.gamma, self._step
        point = self._last.copy()
        change = np.inf
        for _ in range(INNER_MAX_ITER):
            gradient = gamma * (M.T @ (M @ point - c))
            updated = np.asarray(self.func.prox(step, point - step * gradient), dtype=float)
            change = float(np.linalg.norm(updated - point))
            point = updated
            if change <= INNER_TOL * max(1.0, float(np.linalg.norm(point))):
                self._last = point
                return point
        raise SolverFailureError("ADMM 部分問題の内部反復が許容誤差に達しませんでした", change)


@dataclass(frozen=True)
class LinearlyConstrainedProblem:
    """min f(x) + g(y) s.t. Ax + By = b"""

    f: ProxFunction
    g: ProxFunction
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        b = as_vector(self.b, "b")
        if A.shape[0] != b.size or B.shape[0] != b.size:
            raise InvalidArgumentError(
                f"制約の次元が一致しません: A {A.shape}, B {B.shape}, b {b.size}"
            )
        object.__setattr__(self, 'A', frozen(A))
        object.__setattr__(self, 'B', frozen(B))
        object.__setattr__(self, 'b', frozen(b))

    @property
    def dims(self) -> Tuple[int, int, int]:
        """(dim x, dim y, dim 制約)"""
        return self.A.shape[1], self.B.shape[1], self.b.size

    def residual(self, x, y) -> np.ndarray:
        return self.A @ x + self.B @ y - self.b

    def objective(self, x, y) -> float:
        return float(self.f.value(x) + self.g.value(y))


class DualFunction(ProxFunction):
    """
    双対関数 d_f(w) = f*(Aᵀw) または d_g(w) = g*(Bᵀw) − ⟨w, b⟩

    関数値は持たず（NaN を返す）、近接写像だけを部分問題ソルバー経由で提供する。
    """

    kind = "dual"

    def __init__(self, func: ProxFunction, matrix, offset=None):
        self.func = func
        self.matrix = _matrix(matrix, "M")
        self.offset = np.zeros(self.matrix.shape[0]) if offset is None else as_vector(offset, "b")
        self._solvers: Dict[float, SubproblemSolver] = {}

    def solver(self, gamma: float) -> SubproblemSolver:
        solver = self._solvers.get(gamma)
        if solver is None:
            solver = SubproblemSolver(self.func, self.matrix, gamma)
            self._solvers[gamma] = solver
        return solver

    def primal(self, gamma: float, w) -> Tuple[np.ndarray, np.ndarray]:
        """(主変数の解, 近接点) を返す"""
        w = np.asarray(w, dtype=float)
        point = self.solver(gamma).solve(self.offset + w / gamma)
        return point, w - gamma * (self.matrix @ point - self.offset)

    def prox(self, gamma, w):
        return self.primal(gamma, w)[1]

    def value(self, w):
        return float('nan')


def dual_prox_f(f: ProxFunction, A, gamma: float, w) -> Tuple[np.ndarray, np.ndarray]:
    """
    prox_{γd_f}(w) を主問題の部分問題で計算

    x⁺ = argmin f(x) − ⟨w, Ax⟩ + (γ/2)‖Ax‖²、w⁺ = w − γAx⁺。

    Returns:
        (x⁺, w⁺)
    """
    gamma = check_gamma(gamma)
    return DualFunction(f, A).primal(gamma, as_vector(w, "w"))


def dual_prox_g(g: ProxFunction, B, b, gamma: float, v) -> Tuple[np.ndarray, np.ndarray]:
    """
    prox_{γd_g}(v)

    y⁺ = argmin g(y) − ⟨v, By − b⟩ + (γ/2)‖By − b‖²、v⁺ = v − γ(By⁺ − b)。
    """
    gamma = check_gamma(gamma)
    return DualFunction(g, B, b).primal(gamma, as_vector(v, "v"))


def dual_pair(problem: LinearlyConstrainedProblem) -> Tuple[DualFunction, DualFunction]:
    """双対 PRS 用の (d_f, d_g)"""
    return DualFunction(problem.f, problem.A), DualFunction(problem.g, problem.B, problem.b)


@dataclass(frozen=True)
class ADMMTrace:
    """
    緩和ADMMの記録（全ての列は反復回数 + 1 行）

    エルゴード平均は λ_k 重み。
    """

    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    w_dg: np.ndarray
    w_df: np.ndarray
    residual: np.ndarray
    residual_sq: np.ndarray
    obj_f: np.ndarray
    obj_g: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    wbar_dg: np.ndarray
    wbar_df: np.ndarray
    ergodic_objective: np.ndarray
    ergodic_residual_sq: np.ndarray
    lambdas: np.ndarray
    cumulative: np.ndarray
    gamma: float
    solver_modes: Dict[str, str] = field(default_factory=dict)
    aborted: bool = False
    diagnostic: str = ""

    def __len__(self) -> int:
        return int(self.residual_sq.size)

    @property
    def objective(self) -> np.ndarray:
        return self.obj_f + self.obj_g

    @property
    def fpr(self) -> np.ndarray:
        """‖T_PRS z^k − z^k‖² = 4γ²‖Ax^k + By^k − b‖²"""
        return 4.0 * self.gamma ** 2 * self.residual_sq


def run_relaxed_admm(
    problem: LinearlyConstrainedProblem,
    gamma: float,
    schedule: RelaxationSchedule,
    w_init,
    iters: int,
) -> ADMMTrace:
    """
    緩和ADMM（双対への緩和PRS と同値な4行の漸化式）

    k = −1 で w_dg = z0、x = 0、y = 0、λ = 1/2 から始め、
    y^{k+1}, w_dg^{k+1}, x^{k+1}, w_df^{k+1} の順に更新する。
    駆動点は z^{k+1} = z^k − 2γλ_k(Ax^k + By^k − b) で追跡する。

    Args:
        problem: 線形制約つき問題
        gamma: ペナルティ（ステップ幅）
        schedule: 緩和スケジュール
        w_init: 初期点 z0（= w_dg^{−1}）
        iters: 反復回数

    Returns:
        ADMMTrace
    """
    gamma = check_gamma(gamma)
    iters = check_iters(iters)
    z = as_vector(w_init, "w_init")
    A, B, b = problem.A, problem.B, problem.b
    if z.size != b.size:
        raise InvalidArgumentError(f"初期点の次元 {z.size} が制約の次元 {b.size} と一致しません")
    solve_f = SubproblemSolver(problem.f, A, gamma)
    solve_g = SubproblemSolver(problem.g, B, gamma)
    lambdas = schedule.lambdas(iters + 1)

    # k = −1 からの初期化（λ_{−1} = 1/2 なので補正項は0）
    y = solve_g.solve(b + z / gamma)
    w_dg = z - gamma * (B @ y - b)
    x = solve_f.solve(w_dg / gamma - B @ y + b)
    residual = A @ x + B @ y - b
    w_df = w_dg - gamma * residual

    rows = {key: [] for key in ('z', 'x', 'y', 'w_dg', 'w_df', 'residual')}
    aborted, diagnostic = False, ""
    for k in range(iters + 1):
        for key, value in (('z', z), ('x', x), ('y', y), ('w_dg', w_dg), ('w_df', w_df), ('residual', residual)):
            rows[key].append(value)
        if k == iters:
            break
        lam = lambdas[k]
        correction = (2.0 * lam - 1.0) * residual
        y_next = solve_g.solve(w_dg / gamma - A @ x + b - correction)
        w_dg_next = w_dg - gamma * (A @ x + B @ y_next - b) - gamma * correction
        x_next = solve_f.solve(w_dg_next / gamma - B @ y_next + b)
        residual_next = A @ x_next + B @ y_next - b
        z_next = z - 2.0 * gamma * lam * residual
        if not all(np.all(np.isfinite(v)) for v in (x_next, y_next, w_dg_next, z_next)):
            aborted, diagnostic = True, abort_message('admm', k + 1)
            break
        x, y, w_dg, z, residual = x_next, y_next, w_dg_next, z_next, residual_next
        w_df = w_dg - gamma * residual

    count = len(rows['z'])
    stacked = {key: np.vstack(values) for key, values in rows.items()}
    weights = lambdas[:count]
    cumulative = np.cumsum(weights)

    def ergodic(values):
        return np.cumsum(weights[:, None] * values, axis=0) / cumulative[:, None]

    xbar, ybar = ergodic(stacked['x']), ergodic(stacked['y'])
    ergodic_residual = xbar @ A.T + ybar @ B.T - b
    return ADMMTrace(
        z=frozen(stacked['z']),
        x=frozen(stacked['x']),
        y=frozen(stacked['y']),
        w_dg=frozen(stacked['w_dg']),
        w_df=frozen(stacked['w_df']),
        residual=frozen(stacked['residual']),
        residual_sq=frozen(np.einsum('ij,ij->i', stacked['residual'], stacked['residual'])),
        obj_f=frozen([problem.f.value(v) for v in stacked['x']]),
        obj_g=frozen([problem.g.value(v) for v in stacked['y']]),
        xbar=frozen(xbar),
        ybar=frozen(ybar),
        wbar_dg=frozen(ergodic(stacked['w_dg'])),
        wbar_df=frozen(ergodic(stacked['w_df'])),
        ergodic_objective=frozen([problem.objective(u, v) for u, v in zip(xbar, ybar)]),
        ergodic_residual_sq=frozen(np.einsum('ij,ij->i', ergodic_residual, ergodic_residual)),
        lambdas=frozen(weights),
        cumulative=frozen(cumulative),
        gamma=gamma,
        solver_modes={'f': solve_f.mode, 'g': solve_g.mode},
        aborted=aborted,
        diagnostic=diagnostic,
    )


@dataclass(frozen=True)
class DualCertificate:
    """双対 PRS の不動点 z*、w* = prox_{γd_g}(z*)、復元した主変数の組 (x*, y*)"""

    zstar: np.ndarray
    wstar: np.ndarray
    xstar: np.ndarray
    ystar: np.ndarray
    z0: np.ndarray
    dist0: float
    obj_star: float
    gamma: float
    residual: float
    primal_residual: float

    @property
    def anchor(self) -> np.ndarray:
        """z* − w*"""
        return self.zstar - self.wstar

    @property
    def wstar_norm(self) -> float:
        return float(np.linalg.norm(self.wstar))

    @property
    def initial_anchor_gap(self) -> float:
        """‖z0 − (z* − w*)‖"""
        return float(np.linalg.norm(self.z0 - self.anchor))

    def summary(self) -> Dict:
        return {
            'dist0': self.dist0,
            'wstar_norm': self.wstar_norm,
            'obj_star': self.obj_star,
            'gamma': self.gamma,
            'residual': self.residual,
            'primal_residual': self.primal_residual,
        }


def admm_certificate(
    problem: LinearlyConstrainedProblem,
    gamma: float,
    z0,
    budget: int = 1000000,
    closed_form=None,
) -> DualCertificate:
    """
    双対 DRS の参照実行で ADMM の証明書を作る

    w* = prox_{γd_g}(z*) から y*、x* を部分問題で復元し obj* = f(x*) + g(y*) とする。
    """
    d_f, d_g = dual_pair(problem)
    reference = fixed_point_reference(d_f, d_g, gamma, z0, budget=budget, closed_form=closed_form)
    gamma = reference.gamma
    ystar, wstar = d_g.primal(gamma, reference.zstar)
    xstar, _ = d_f.primal(gamma, 2.0 * wstar - reference.zstar)
    return DualCertificate(
        zstar=reference.zstar,
        wstar=frozen(wstar),
        xstar=frozen(xstar),
        ystar=frozen(ystar),
        z0=reference.z0,
        dist0=reference.dist0,
        obj_star=problem.objective(xstar, ystar),
        gamma=gamma,
        residual=reference.residual,
        primal_residual=float(np.linalg.norm(problem.residual(xstar, ystar))),
    )


def _tau_lower(lambdas: np.ndarray) -> float:
    return float(np.min(lambdas * (1.0 - lambdas)))


def admm_feasibility_bounds(
    certificate: DualCertificate,
    gamma: float,
    schedule: RelaxationSchedule,
    k,
    mode: str,
    form: str = 'stated',
):
    """
    主問題の実行可能性 ‖Ax + By − b‖² の上界

    mode='nonergodic': d0²/(4γ²τ̲(k+1))。
    mode='ergodic': form='stated' は 4d0²/(γΛ_k²)、form='derived' はエルゴード FPR と
    z^{k+1} − z^k = −2γλ_k r_k から得られる 4d0²/(γ²Λ_k²)。
    """
    k = np.asarray(k)
    horizon = int(np.max(k))
    dist_sq = certificate.dist0 ** 2
    if mode == 'nonergodic':
        tau_lb = schedule.tau_lower(horizon)
        if tau_lb <= 0:
            raise InvalidArgumentError("非エルゴードの上界には τ̲ > 0 が必要です")
        return dist_sq / (4.0 * gamma ** 2 * tau_lb * (k + 1.0))
    if mode == 'ergodic':
        cumulative = schedule.cumulative(horizon + 1)[k]
        if form == 'stated':
            return 4.0 * dist_sq / (gamma * cumulative ** 2)
        if form == 'derived':
            return 4.0 * dist_sq / (gamma ** 2 * cumulative ** 2)
        raise InvalidArgumentError(f"未知の form です: {form}")
    raise InvalidArgumentError(f"未知のモードです: {mode}")


def admm_primal_bounds(
    certificate: DualCertificate,
    gamma: float,
    schedule: RelaxationSchedule,
    k,
    mode: str,
    form: str = 'stated',
):
    """
    主問題の目的関数誤差 f + g − obj* の帯 (lower, upper)

    ergodic: [−2‖w*‖d0/(γΛ_k), ‖z0 − (z* − w*)‖²/(4γΛ_k)]。
    nonergodic: upper = d0(d0 + ‖w*‖)/(2γ√(τ̲(k+1)))、lower は form='stated' で
    −d0‖w*‖/(2√(τ̲(k+1)))、form='derived' で −d0‖w*‖/(2γ√(τ̲(k+1)))、
    form='asserted' で両者の小さい方。
    """
    k = np.asarray(k)
    horizon = int(np.max(k))
    dist0, wnorm = certificate.dist0, certificate.wstar_norm
    if mode == 'ergodic':
        cumulative = schedule.cumulative(horizon + 1)[k]
        lower = -2.0 * wnorm * dist0 / (gamma * cumulative)
        upper = certificate.initial_anchor_gap ** 2 / (4.0 * gamma * cumulative)
        return lower, upper
    if mode == 'nonergodic':
        tau_lb = schedule.tau_lower(horizon)
        if tau_lb <= 0:
            raise InvalidArgumentError("非エルゴードの帯には τ̲ > 0 が必要です")
        root = np.sqrt(tau_lb * (k + 1.0))
        upper = dist0 * (dist0 + wnorm) / (2.0 * gamma * root)
        stated = -dist0 * wnorm / (2.0 * root)
        derived = -dist0 * wnorm / (2.0 * gamma * root)
        lower = {'stated': stated, 'derived': derived, 'asserted': np.minimum(stated, derived)}.get(form)
        if lower is None:
            raise InvalidArgumentError(f"未知の form です: {form}")
        return lower, upper
    raise InvalidArgumentError(f"未知のモードです: {mode}")


def _trace_schedule(trace: ADMMTrace) -> RelaxationSchedule:
    return RelaxationSchedule.explicit(trace.lambdas)


def check_admm_bands(trace: ADMMTrace, certificate: DualCertificate) -> BoundReport:
    """
    実行可能性と主目的関数誤差の帯を検証

    エルゴードの実行可能性は導出形を判定し、表示形の違反数は notes に残す。
    非エルゴードの下界は表示形と導出形の弱い方を判定する。
    """
    schedule = _trace_schedule(trace)
    gamma = trace.gamma
    k = np.arange(len(trace))
    error = trace.objective - certificate.obj_star
    ergodic_error = trace.ergodic_objective - certificate.obj_star

    stated = admm_feasibility_bounds(certificate, gamma, schedule, k, 'ergodic', form='stated')
    derived = admm_feasibility_bounds(certificate, gamma, schedule, k, 'ergodic', form='derived')
    notes = {'stated_ergodic_feasibility_violations': int(np.sum(trace.ergodic_residual_sq > stated + 1e-9))}
    lo, hi = admm_primal_bounds(certificate, gamma, schedule, k, 'ergodic')
    reports = [
        upper_check('ergodic_feasibility', trace.ergodic_residual_sq, derived),
        upper_check('ergodic_primal_upper', ergodic_error, hi),
        lower_check('ergodic_primal_lower', ergodic_error, lo),
    ]
    if _tau_lower(trace.lambdas) > 0:
        lo, hi = admm_primal_bounds(certificate, gamma, schedule, k, 'nonergodic', form='asserted')
        stated_lo, _ = admm_primal_bounds(certificate, gamma, schedule, k, 'nonergodic', form='stated')
        notes['stated_nonergodic_lower_violations'] = int(np.sum(error < stated_lo - 1e-9))
        reports += [
            upper_check('nonergodic_feasibility', trace.residual_sq,
                        admm_feasibility_bounds(certificate, gamma, schedule, k, 'nonergodic')),
            upper_check('nonergodic_primal_upper', error, hi),
            lower_check('nonergodic_primal_lower', error, lo),
        ]
    return merge_reports('admm_bands', reports, notes=notes)


def dual_objective(problem: LinearlyConstrainedProblem, x, y, w_df, w_dg) -> float:
    """
    Fenchel–Young の等号による d_f(w_df) + d_g(w_dg)

    d_f(w_df) = ⟨Aᵀw_df, x⟩ − f(x)、d_g(w_dg) = ⟨Bᵀw_dg, y⟩ − g(y) − ⟨w_dg, b⟩。
    """
    d_f = (problem.A.T @ w_df) @ x - problem.f.value(x)
    d_g = (problem.B.T @ w_dg) @ y - problem.g.value(y) - w_dg @ problem.b
    return float(d_f + d_g)


def check_admm_fundamental(
    trace: ADMMTrace,
    certificate: DualCertificate,
    problem: LinearlyConstrainedProblem,
    tol: float = 1e-8,
) -> BoundReport:
    """
    ADMM の基本不等式と主双対の恒等式を反復ごとに検証

    上側: 4γλ_k(f(x^k) + g(y^k) − obj*) ≤ ‖z^k − a‖² − ‖z^{k+1} − a‖² + (1 − 1/λ_k)‖z^k − z^{k+1}‖²（a = z* − w*）
    下側: f(x^k) + g(y^k) − obj* ≥ ⟨w_dg − w_df, w*⟩/γ（エルゴード平均でも同様）
    恒等式: 4γλ(f + g − obj*) = −4γλ(d − d*) + 2(1 − 1/(2λ))‖Δz‖² + 2⟨z^k − z^{k+1}, z^{k+1}⟩
    """
    gamma = trace.gamma
    steps = len(trace) - 1
    lam = trace.lambdas[:steps]
    error = trace.objective - certificate.obj_star
    wstar = certificate.wstar

    to_anchor = trace.z - certificate.anchor
    dist = np.einsum('ij,ij->i', to_anchor, to_anchor)
    step = trace.z[1:] - trace.z[:-1]
    step_sq = np.einsum('ij,ij->i', step, step)
    upper = upper_check(
        'admm_upper_fundamental',
        4.0 * gamma * lam * error[:steps],
        dist[:-1] - dist[1:] + (1.0 - 1.0 / lam) * step_sq,
        atol=tol,
    )
    lower = lower_check('admm_lower_fundamental', error, (trace.w_dg - trace.w_df) @ wstar / gamma, atol=tol)
    ergodic_lower = lower_check(
        'admm_lower_fundamental_ergodic',
        trace.ergodic_objective - certificate.obj_star,
        (trace.wbar_dg - trace.wbar_df) @ wstar / gamma,
        atol=tol,
    )

    dual_star = dual_objective(problem, certificate.xstar, certificate.ystar, wstar, wstar)
    duals = np.array([
        dual_objective(problem, trace.x[i], trace.y[i], trace.w_df[i], trace.w_dg[i]) for i in range(steps)
    ])
    lhs = 4.0 * gamma * lam * error[:steps]
    rhs = (
        -4.0 * gamma * lam * (duals - dual_star)
        + 2.0 * (1.0 - 1.0 / (2.0 * lam)) * step_sq
        + 2.0 * np.einsum('ij,ij->i', -step, trace.z[1:])
    )
    identity = upper_check('primal_dual_identity', np.abs(lhs - rhs), 0.0, atol=tol, rtol=0.0)
    return merge_reports('admm_fundamental', [upper, lower, ergodic_lower, identity])


def check_step_identity_admm(trace: ADMMTrace) -> BoundReport:
    """z^{k+1} − z^k + 2γλ_k r_k = 0 と w_df = w_dg − γr を機械精度で検証"""
    gamma = trace.gamma
    steps = len(trace) - 1
    scale = max(1.0, float(np.max(np.abs(trace.z))), float(np.max(np.abs(trace.w_dg))))
    z_defect = np.linalg.norm(
        trace.z[1:] - trace.z[:-1] + 2.0 * gamma * trace.lambdas[:steps, None] * trace.residual[:-1], axis=1
    )
    w_defect = np.linalg.norm(trace.w_df - trace.w_dg + gamma * trace.residual, axis=1)
    return merge_reports('admm_step_identity', [
        upper_check('z_step', z_defect, 0.0, atol=1e-12 * scale, rtol=0.0),
        upper_check('w_relation', w_defect, 0.0, atol=1e-12 * scale, rtol=0.0),
    ])


def check_subgradient_inclusions(
    trace: ADMMTrace,
    problem: LinearlyConstrainedProblem,
    probes: int = 20,
    samples: int = 5,
    seed: int = 0,
    slack: float = 1e-9,
) -> BoundReport:
    """
    Aᵀw_df^k ∈ ∂f(x^k) と Bᵀw_dg^k ∈ ∂g(y^k) を劣勾配不等式で検証

    試験点 u は prox(1, x^k + ノイズ) として定義域内に取る。
    """
    rng = np.random.default_rng(seed)
    picks = sorted(int(p) for p in rng.choice(len(trace), size=min(samples, len(trace)), replace=False))
    measured, bounds = [], []
    for k in picks:
        pairs = (
            (problem.f, trace.x[k], problem.A.T @ trace.w_df[k]),
            (problem.g, trace.y[k], problem.B.T @ trace.w_dg[k]),
        )
        for func, point, subgradient in pairs:
            base = func.value(point)
            for _ in range(probes):
                u = np.asarray(func.prox(1.0, point + rng.standard_normal(point.size)), dtype=float)
                measured.append(func.value(u))
                bounds.append(base + subgradient @ (u - point))
    return lower_check('subgradient_inclusions', measured, bounds, atol=slack, rtol=1e-12)


def check_dual_equivalence(
    problem: LinearlyConstrainedProblem,
    gamma: float,
    schedule: RelaxationSchedule,
    z0,
    iters: int,
    atol: float = 1e-12,
) -> BoundReport:
    """ADMM の z 列と双対の組への緩和PRS の z 列が一致することを検証"""
    admm = run_relaxed_admm(problem, gamma, schedule, z0, iters)
    d_f, d_g = dual_pair(problem)
    prs = run_relaxed_prs(d_f, d_g, gamma, schedule, z0, iters)
    count = min(len(admm), len(prs))
    scale = max(1.0, float(np.max(np.abs(admm.z[:count]))))
    defect = np.max(np.abs(admm.z[:count] - prs.z[:count]), axis=1)
    return upper_check('dual_equivalence', defect, 0.0, atol=atol * scale, rtol=0.0)


def split_auxiliary(l: ProxFunction, r: ProxFunction, M, b) -> LinearlyConstrainedProblem:
    """
    補助変数による分割 min l(x) + r(y) s.t. My − x = b

    l は残差 x = My − b に作用する（lasso なら l = ½‖·‖²）。
    """
    M = _matrix(M, "M")
    b = as_vector(b, "b")
    if M.shape[0] != b.size:
        raise InvalidArgumentError(f"M の行数 {M.shape[0]} と b の次元 {b.size} が一致しません")
    return LinearlyConstrainedProblem(l, r, -np.eye(M.shape[0]), M, b, name='auxiliary')


def split_across_examples(
    l_blocks: Sequence[ProxFunction],
    r: ProxFunction,
    M_blocks: Sequence,
    b_blocks: Sequence,
) -> LinearlyConstrainedProblem:
    """
    例ごとの分割 min Σ l_i(M_i x_i − b_i) + r(y) s.t. x_i − y = 0

    A = I_{nR}、By = (−y, …, −y)。
    """
    if not (len(l_blocks) == len(M_blocks) == len(b_blocks)) or not l_blocks:
        raise InvalidArgumentError("l・M・b のブロック数が一致しません")
    matrices = [_matrix(M, "M_i") for M in M_blocks]
    n = matrices[0].shape[1]
    if any(M.shape[1] != n for M in matrices):
        raise InvalidArgumentError("M_i の列数が一致しません")
    parts = [compose_affine(l, M, bi) for l, M, bi in zip(l_blocks, matrices, b_blocks)]
    count = len(parts)
    f = BlockSeparable(parts, [n] * count)
    B = -np.vstack([np.eye(n)] * count)
    return LinearlyConstrainedProblem(f, r, np.eye(n * count), B, np.zeros(n * count), name='across_examples')


def split_across_features(
    l: ProxFunction,
    r_blocks: Sequence[ProxFunction],
    M_col_blocks: Sequence,
    b,
) -> LinearlyConstrainedProblem:
    """
    特徴ごとの分割 min l(Σ x_i − b) + Σ r_i(y_i) s.t. x_i − M_i y_i = 0

    A = I_{mC}、By = −(M_1y_1, …, M_Cy_C)。
    """
    if len(r_blocks) != len(M_col_blocks) or not r_blocks:
        raise InvalidArgumentError("r と M のブロック数が一致しません")
    matrices = [_matrix(M, "M_i") for M in M_col_blocks]
    b = as_vector(b, "b")
    m = b.size
    if any(M.shape[0] != m for M in matrices):
        raise InvalidArgumentError("M_i の行数が b の次元と一致しません")
    count = len(matrices)
    f = compose_affine(l, np.hstack([np.eye(m)] * count), b)
    g = BlockSeparable(list(r_blocks), [M.shape[1] for M in matrices])
    B = -scipy.linalg.block_diag(*matrices)
    return LinearlyConstrainedProblem(f, g, np.eye(m * count), B, np.zeros(m * count), name='across_features')


@dataclass(frozen=True)
class DistributedProblem:
    """連結な無向単純グラフ上の min Σ f_i(x)"""

    functions: Tuple[ProxFunction, ...]
    edges: Tuple[Tuple[int, int], ...]
    dim: int = 1

    def __post_init__(self):
        count = len(self.functions)
        if count < 2:
            raise InvalidArgumentError(f"ノード数は2以上である必要があります: {count}")
        normalized = set()
        for i, j in self.edges:
            if not (0 <= i < count and 0 <= j < count):
                raise InvalidArgumentError(f"辺 ({i}, {j}) がノード範囲外です")
            if i == j:
                raise InvalidArgumentError(f"自己ループは許可されていません: ({i}, {j})")
            edge = (min(i, j), max(i, j))
            if edge in normalized:
                raise InvalidArgumentError(f"重複した辺です: ({i}, {j})")
            normalized.add(edge)
        object.__setattr__(self, 'functions', tuple(self.functions))
        object.__setattr__(self, 'edges', tuple(sorted(normalized)))
        rows = [i for i, _ in self.edges]
        cols = [j for _, j in self.edges]
        adjacency = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(count, count))
        components, _ = connected_components(adjacency, directed=False)
        if components != 1:
            raise InvalidArgumentError(f"グラフが連結ではありません（連結成分 {components} 個）")

    @property
    def size(self) -> int:
        return len(self.functions)

    def neighbors(self) -> List[List[int]]:
        adjacency = [[] for _ in range(self.size)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        return adjacency

    def objective(self, points) -> float:
        return float(sum(f.value(p) for f, p in zip(self.functions, points)))


def load_edge_list(path) -> Tuple[int, Tuple[Tuple[int, int], ...]]:
    """
    辺リストを読み込む（1行に "u v"、0始まり、# 以降はコメント）

    Returns:
        (ノード数, 辺のタプル)
    """
    edges = []
    with open(Path(path), encoding='utf-8') as handle:
        for number, line in enumerate(handle, start=1):
            content = line.split('#', 1)[0].strip()
            if not content:
                continue
            tokens = content.split()
            if len(tokens) != 2:
                raise ConfigParseError(f"辺の行は 'u v' の形式である必要があります: {line.strip()!r}", number, 1)
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise ConfigParseError(f"ノード番号が整数ではありません: {line.strip()!r}", number, 1)
            if u < 0 or v < 0:
                raise ConfigParseError(f"ノード番号は0以上である必要があります: {line.strip()!r}", number, 1)
            edges.append((u, v))
    if not edges:
        raise ConfigParseError("辺リストが空です")
    count = max(max(u, v) for u, v in edges) + 1
    return count, tuple(edges)


@dataclass(frozen=True)
class DistributedTrace:
    """分散ADMMの記録（x, alpha は (反復+1, ノード, 次元)）"""

    x: np.ndarray
    alpha: np.ndarray
    objective: np.ndarray
    disagreement: np.ndarray
    messages: FrozenSet[Tuple[int, int]]
    gamma: float

    def __len__(self) -> int:
        return int(self.objective.size)


def _exchange(points: np.ndarray, neighbors: List[List[int]], log: set) -> np.ndarray:
    """隣接ノードの値の和を配送し、(受信, 送信) の組を記録"""
    sums = np.zeros_like(points)
    for receiver, adjacent in enumerate(neighbors):
        for sender in adjacent:
            log.add((receiver, sender))
            sums[receiver] += points[sender]
    return sums


def run_distributed_admm(problem: DistributedProblem, gamma: float, iters: int) -> DistributedTrace:
    """
    分散ADMM（各ノードは隣接ノードの値だけを使う）

    x_i^{k+1} = prox_{f_i/(2γ|N_i|)}((γ(|N_i|x_i^k + Σ_j x_j^k) − α_i^k)/(2γ|N_i|))
    α_i^{k+1} = α_i^k + γ(|N_i|x_i^{k+1} − Σ_j x_j^{k+1})
    初期値は x = α = 0。
    """
    gamma = check_gamma(gamma)
    iters = check_iters(iters)
    neighbors = problem.neighbors()
    degree = np.array([len(adj) for adj in neighbors], dtype=float)[:, None]
    points = np.zeros((problem.size, problem.dim))
    alpha = np.zeros_like(points)
    log: set = set()
    sums = _exchange(points, neighbors, log)

    xs, alphas = [points.copy()], [alpha.copy()]
    for _ in range(iters):
        targets = (gamma * (degree * points + sums) - alpha) / (2.0 * gamma * degree)
        points = np.vstack([
            np.asarray(f.prox(1.0 / (2.0 * gamma * degree[i, 0]), targets[i]), dtype=float)
            for i, f in enumerate(problem.functions)
        ])
        sums = _exchange(points, neighbors, log)
        alpha = alpha + gamma * (degree * points - sums)
        xs.append(points.copy())
        alphas.append(alpha.copy())

    stacked = np.stack(xs)
    edges = np.array(problem.edges)
    gaps = stacked[:, edges[:, 0], :] - stacked[:, edges[:, 1], :]
    return DistributedTrace(
        x=frozen(stacked),
        alpha=frozen(np.stack(alphas)),
        objective=frozen([problem.objective(p) for p in stacked]),
        disagreement=frozen(np.einsum('kej,kej->k', gaps, gaps)),
        messages=frozenset(log),
        gamma=gamma,
    )


def audit_messages(trace: DistributedTrace, problem: DistributedProblem) -> BoundReport:
    """全ての通信が隣接関係の内側にあることを検証"""
    allowed = {(i, j) for i, j in problem.edges} | {(j, i) for i, j in problem.edges}
    outside = [pair for pair in trace.messages if pair not in allowed]
    return upper_check(
        'message_audit', [len(outside)], 0.0, atol=0.0, rtol=0.0,
        notes={'messages': len(trace.messages), 'outside': sorted(outside)},
    )


def distributed_as_admm(problem: DistributedProblem) -> LinearlyConstrainedProblem:
    """
    辺変数による定式化 min Σ f_i(x_i) + 0(y) s.t. x_i − y_ij = 0, x_j − y_ij = 0
    """
    d = problem.dim
    nodes, edges = problem.size, problem.edges
    A = np.zeros((2 * len(edges) * d, nodes * d))
    B = np.zeros((2 * len(edges) * d, len(edges) * d))
    eye = np.eye(d)
    for e, (i, j) in enumerate(edges):
        for side, node in enumerate((i, j)):
            row = (2 * e + side) * d
            A[row:row + d, node * d:node * d + d] = eye
            B[row:row + d, e * d:e * d + d] = -eye
    f = BlockSeparable(list(problem.functions), [d] * nodes)
    return LinearlyConstrainedProblem(f, Zero(), A, B, np.zeros(A.shape[0]), name='distributed_edges')


def edge_penalty(gamma: float) -> float:
    """分散ADMM(γ) と同じ反復を与える辺変数 ADMM のペナルティ 2γ"""
    return 2.0 * check_gamma(gamma)


def _edge_run(trace: DistributedTrace, problem: DistributedProblem):
    if trace.x.shape[1:] != (problem.size, problem.dim):
        raise InvalidArgumentError(
            f"トレースの形 {trace.x.shape[1:]} がネットワーク ({problem.size}, {problem.dim}) と一致しません"
        )
    if len(trace) < 2:
        raise InvalidArgumentError("分散ADMM のトレースには1反復以上が必要です")
    edge_problem = distributed_as_admm(problem)
    return edge_problem, edge_penalty(trace.gamma), np.zeros(edge_problem.b.size)


def check_distributed_equivalence(
    trace: DistributedTrace,
    problem: DistributedProblem,
    atol: float = 1e-9,
) -> BoundReport:
    """
    分散ADMM の x 列が辺変数の定式化への ADMM（ペナルティ 2γ、λ ≡ 1/2、z0 = 0）の
    x 列と1反復ずれて一致することを検証

    分散側の x^0 = 0 は初期値なので、分散側の x^{k+1} と辺側の x^k を比べる。
    """
    edge_problem, penalty, z0 = _edge_run(trace, problem)
    iters = len(trace) - 1
    edge = run_relaxed_admm(edge_problem, penalty, RelaxationSchedule.constant(0.5), z0, iters)
    distributed = trace.x[1:].reshape(iters, -1)
    gap = np.max(np.abs(distributed - edge.x[:iters]), axis=1)
    scale = 1.0 + np.max(np.abs(edge.x[:iters]), axis=1)
    return upper_check('distributed_equivalence', gap, atol * scale, atol=0.0, rtol=0.0)


def check_distributed_bands(
    trace: DistributedTrace,
    problem: DistributedProblem,
    budget: int = 1000000,
) -> BoundReport:
    """
    分散ADMM のトレース自体を非エルゴードの帯で検証

    分散ADMM(γ) は辺変数の定式化へのペナルティ 2γ、λ ≡ 1/2、z0 = 0 の ADMM と
    1反復ずれて一致するので、その双対証明書から帯を作る。
    辺ごとの不一致 Σ‖x_i − x_j‖² は 2‖Ax + By‖² 以下なので、実行可能性の上界の2倍で判定する。
    """
    edge_problem, penalty, z0 = _edge_run(trace, problem)
    schedule = RelaxationSchedule.constant(0.5)
    certificate = admm_certificate(edge_problem, penalty, z0, budget=budget)
    k = np.arange(len(trace) - 1)
    lo, hi = admm_primal_bounds(certificate, penalty, schedule, k, 'nonergodic', form='asserted')
    error = trace.objective[1:] - certificate.obj_star
    feasibility = admm_feasibility_bounds(certificate, penalty, schedule, k, 'nonergodic')
    return merge_reports('distributed_bands', [
        upper_check('distributed_objective_upper', error, hi),
        lower_check('distributed_objective_lower', error, lo),
        upper_check('distributed_disagreement', trace.disagreement[1:], 2.0 * feasibility),
    ], notes={'edge_penalty': penalty, 'obj_star': certificate.obj_star})
