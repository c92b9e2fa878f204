"""
再現レジストリモジュール
名前つきの再現（収束率・下界・同値性の検証）を実行し、合否レポートとプロットデータを書き出す
"""

import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from admm import (
    admm_certificate,
    admm_feasibility_bounds,
    audit_messages,
    check_admm_bands,
    check_admm_fundamental,
    check_distributed_bands,
    check_distributed_equivalence,
    check_dual_equivalence,
    check_step_identity_admm,
    check_subgradient_inclusions,
    run_distributed_admm,
    run_relaxed_admm,
)
from core import IndicatorAffine, L1Norm, Zero, function_lipschitz_modulus
from counterexamples import (
    DEFAULT_BLOCKS,
    RotationSpaceSpec,
    abs_example_oracle,
    abs_problem,
    abs_tightness,
    arbitrarily_slow_setup,
    build_rotation_operator,
    check_optimal_fpr,
    check_oracle_match,
    check_ppa_lower,
    check_rotation_operator,
    check_rotation_trace,
    check_slow_distance,
    compare_distance_equivalence,
    dv_certificate,
    dv_lower_bound_setup,
    feasibility_square_oracle,
    one_d_drs_example,
    optimal_fpr_cosines,
    optimal_fpr_lower_bound,
    ppa_lower_bounds,
    run_abs_example,
    run_dv_example,
    run_optimal_fpr,
    run_ppa_lower,
    run_square_example,
    slow_target,
    square_problem,
    thm_optimal_fpr_setup,
)
from errors import SplittingError, UnknownReproductionError
from experiments import emit_plot_data, write_json
from feasibility import ConvexSetPair, intersect_affine
from km import (
    ErrorSchedule,
    RelaxationSchedule,
    check_envelope,
    check_fejer,
    check_fpr_bound,
    check_fpr_monotone,
    check_fpr_summability,
    check_inexact_fpr,
    check_little_o_tail,
    fpr_bounds,
    inexact_fpr_bound,
    run_km,
)
from problems import build_problem, consensus_minimizer, path_consensus, random_affine_pair
from rates import (
    SequenceCheck,
    check_fundamental_inequalities,
    check_lipschitz_bounds,
    check_lipschitz_on_ball,
    check_objective_bands,
    ergodic_objective_bounds,
    fit_decay_exponent,
    verify_summable_lemma,
)
from report import BoundReport, lower_check, merge_reports, upper_check
from settings import Settings, load_settings
from splitting import (
    FBSConfig,
    certificate_at,
    check_drs_1d,
    check_ergodic_fpr,
    check_fbs_rates,
    check_step_identity,
    fixed_point_reference,
    run_drs,
    run_fbs,
    run_ppa,
    run_relaxed_prs,
)

RUNTIME_CLASSES = ('fast', 'moderate', 'slow')

# 乱数問題の規模
AFFINE_DIM = 20
KM_SEEDS = 50
INEXACT_SEEDS = 10
RANDOM_PROBLEMS = 100
LEMMA_SEQUENCES = 200

DV_ALPHA = 0.75
DV_BLOCKS = 2000
EQUIVALENCE_BLOCKS = 1000
EQUIVALENCE_ITERS = 500
DV_EXPONENT_FLOOR = -0.85
DV_FIT_START = 10

PATH_WEIGHTS = (1.0, 2.0, 1.0, 3.0, 1.0)
PATH_TARGETS = (1.0, -2.0, 0.5, 4.0, 2.0)
CONSENSUS_TOL = 1e-6

ORACLE_TOL = 1e-12
RATIO_TOL = 1e-6
UPPER_RATIO_FLOORS = {0.1: 0.9, 0.01: 0.99}


@dataclass
class ReproductionOutcome:
    """再現1回分の検証結果と出力する系列"""

    report: BoundReport
    series: Dict[str, np.ndarray] = field(default_factory=dict)
    details: Dict = field(default_factory=dict)


def _passed(outcome: ReproductionOutcome) -> bool:
    return outcome.report.passed


@dataclass(frozen=True)
class ReproductionEntry:
    """
    再現の登録情報

    builder は反復数（地平）を受け取って ReproductionOutcome を返す。
    runtime は 'fast'（1秒未満）、'moderate'（10秒未満）、'slow' の目安。
    """

    name: str
    builder: Callable[[int], ReproductionOutcome]
    description: str
    horizon: int
    runtime: str = 'fast'
    acceptance: Callable[[ReproductionOutcome], bool] = _passed

    def __post_init__(self):
        if self.runtime not in RUNTIME_CLASSES:
            raise ValueError(f"未知の実行時間クラスです: {self.runtime}")
        if self.horizon < 1:
            raise ValueError(f"既定の反復数は1以上である必要があります: {self.horizon}")


@dataclass
class ReproductionResult:
    """reproduce の戻り値（success は受理判定に合格かつ例外なし）"""

    name: str
    success: bool
    horizon: int
    report: Optional[BoundReport] = None
    details: Dict = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    error: Optional[str] = None
    elapsed: float = 0.0


def _affine_operator(pair: ConvexSetPair):
    """T = P_{C_f} ∘ P_{C_g}"""
    return lambda z: pair.C_f.project(pair.C_g.project(z))


def _affine_instance(seed: int):
    pair = random_affine_pair(AFFINE_DIM, AFFINE_DIM // 2, AFFINE_DIM // 2, seed)
    z0 = np.random.default_rng(seed + 1).standard_normal(AFFINE_DIM) * 5.0
    meeting: IndicatorAffine = intersect_affine(pair.C_f, pair.C_g)
    return pair, z0, meeting.project(z0)


def _km_fpr(horizon: int) -> ReproductionOutcome:
    schedule = RelaxationSchedule.constant(0.5)
    reports, series = [], {}
    for seed in range(KM_SEEDS):
        pair, z0, zstar = _affine_instance(seed)
        trace = run_km(_affine_operator(pair), schedule, z0, horizon, zstar=zstar, store_vectors=False)
        dist0_sq = float(trace.dist_sq[0])
        reports.append(merge_reports(f"seed_{seed}", [
            check_fpr_bound(trace, schedule, dist0_sq),
            check_fejer(trace),
            check_fpr_monotone(trace),
            check_fpr_summability(trace, schedule, dist0_sq),
        ]))
        if seed == 0:
            series = {'fpr': trace.fpr, 'bound_fpr': fpr_bounds(schedule, dist0_sq, len(trace))}
    return ReproductionOutcome(merge_reports('km-fpr', reports, notes={'seeds': KM_SEEDS}), series)


def _km_inexact(horizon: int) -> ReproductionOutcome:
    schedule = RelaxationSchedule.constant(0.5)
    reports, series = [], {}
    for seed in range(INEXACT_SEEDS):
        pair, z0, zstar = _affine_instance(seed)
        errors = ErrorSchedule.power_law(1.0, 1.5, seed=seed)
        trace = run_km(_affine_operator(pair), schedule, z0, horizon, errors=errors, zstar=zstar, store_vectors=False)
        reports.append(merge_reports(f"seed_{seed}", [
            check_inexact_fpr(trace, schedule),
            check_little_o_tail(trace),
            check_envelope(trace, ErrorSchedule.power_law(1.0, 1.25).envelope(horizon)),
        ]))
        if seed == 0:
            series = {'fpr': trace.fpr, 'bound_fpr': inexact_fpr_bound(trace, schedule)}
    return ReproductionOutcome(merge_reports('km-inexact', reports, notes={'seeds': INEXACT_SEEDS}), series)


def _fbs_rates(horizon: int) -> ReproductionOutcome:
    problem = build_problem('lasso', {'dim': 10, 'rows': 20, 'mu': 0.1, 'seed': 0})
    f, g, z0 = problem.f, problem.g, problem.z0
    beta = g.beta
    certificate = fixed_point_reference(f, g, beta, z0)
    reports, series = [], {}
    for factor in (1.0, 1.5):
        config = FBSConfig(factor * beta, beta)
        trace = run_fbs(f, g, config, z0, horizon, zstar=certificate.xstar, store_vectors=False)
        report = check_fbs_rates(trace, certificate, config)
        reports.append(merge_reports(f"gamma_{factor:g}beta", [report], notes=report.notes))
        series[f"obj_err_{factor:g}beta"] = trace.objective - certificate.obj_star
        series[f"fpr_{factor:g}beta"] = trace.fpr
    return ReproductionOutcome(merge_reports('fbs-rates', reports, notes={'beta': beta}), series)


def _ppa_rates(horizon: int) -> ReproductionOutcome:
    f, z0 = L1Norm(1.0), np.array([50.5])
    certificate = certificate_at(f, Zero(), 1.0, np.zeros(1), z0, closed_form=True)
    trace = run_ppa(f, 1.0, z0, horizon, zstar=certificate.xstar)
    report = check_fbs_rates(trace, certificate, FBSConfig(1.0, np.inf))
    return ReproductionOutcome(
        merge_reports('ppa-rates', [report, check_fpr_monotone(trace)], notes=report.notes),
        {'fpr': trace.fpr, 'obj_err': trace.objective},
    )


def _drs_1d(horizon: int) -> ReproductionOutcome:
    f, g, z0 = one_d_drs_example()
    certificate = fixed_point_reference(f, g, 1.0, z0, closed_form=np.zeros(1))
    trace = run_drs(f, g, 1.0, z0, horizon, zstar=certificate.zstar)
    report = check_drs_1d(trace, certificate)
    return ReproductionOutcome(
        merge_reports('drs-1d', [report, check_fejer(trace)], notes=report.notes),
        {'fpr': trace.fpr, 'dist_sq': trace.dist_sq},
    )


def _ergodic_prs(horizon: int) -> ReproductionOutcome:
    reports = []
    for seed in range(RANDOM_PROBLEMS):
        problem = build_problem('quadratic_l1', {'dim': 10, 'seed': seed})
        # λ_k ∈ (0, 1]
        lambdas = 1.0 - np.random.default_rng(10000 + seed).random(horizon + 1)
        schedule = RelaxationSchedule.explicit(lambdas)
        certificate = fixed_point_reference(problem.f, problem.g, 1.0, problem.z0)
        trace = run_relaxed_prs(problem.f, problem.g, 1.0, schedule, problem.z0, horizon, zstar=certificate.zstar)
        reports.append(merge_reports(f"seed_{seed}", [
            check_fundamental_inequalities(trace, certificate),
            check_objective_bands(trace, certificate),
            check_ergodic_fpr(trace, certificate),
            check_step_identity(trace),
        ]))
    return ReproductionOutcome(merge_reports('ergodic-prs', reports, notes={'problems': RANDOM_PROBLEMS}))


def _nonergodic_prs(horizon: int) -> ReproductionOutcome:
    f, g, z0, gamma, _ = dv_lower_bound_setup(DV_ALPHA, DV_BLOCKS)
    certificate = dv_certificate(f, g, gamma, z0)
    trace = run_drs(f, g, gamma, z0, horizon, zstar=certificate.zstar, store_vectors=False)
    schedule = RelaxationSchedule.constant(0.5)
    report = merge_reports('nonergodic-prs', [
        check_objective_bands(trace, certificate),
        check_fpr_bound(trace, schedule, certificate.dist0_sq),
        check_fejer(trace),
    ], notes={'alpha': DV_ALPHA, 'blocks': DV_BLOCKS, 'gamma': gamma})
    return ReproductionOutcome(report, {'obj_err': trace.objective - certificate.obj_star, 'fpr': trace.fpr})


def _lipschitz_cors(horizon: int) -> ReproductionOutcome:
    f, g, z0 = abs_problem(0.1)
    certificate = certificate_at(f, g, 1.0, np.zeros(1), z0, closed_form=True)
    trace = run_abs_example(0.1, horizon)
    reports = [merge_reports('abs_example', [check_lipschitz_bounds(trace, certificate, f, g, 1.0, side='f')])]

    problem = build_problem('quadratic_l1', {'dim': 10, 'seed': 0})
    lipschitz = function_lipschitz_modulus(problem.f, problem.z0.size)
    certificate = fixed_point_reference(problem.f, problem.g, 1.0, problem.z0)
    trace = run_drs(problem.f, problem.g, 1.0, problem.z0, horizon, zstar=certificate.zstar)
    reports += [
        merge_reports('quadratic_l1', [check_lipschitz_bounds(trace, certificate, problem.f, problem.g, lipschitz, side='f')]),
        check_lipschitz_on_ball(problem.f, certificate.xstar, 1.0, lipschitz),
    ]
    error = np.array([problem.f.value(x) + problem.g.value(x) for x in trace.x_g]) - certificate.obj_star
    return ReproductionOutcome(
        merge_reports('lipschitz-cors', reports, notes={'lipschitz': lipschitz}),
        {'obj_err_same_point': error},
    )


def _optimal_fpr(horizon: int) -> ReproductionOutcome:
    alpha = 0.75
    spec, z0 = thm_optimal_fpr_setup(alpha, DEFAULT_BLOCKS, horizon)
    trace = run_optimal_fpr(alpha, DEFAULT_BLOCKS, horizon)
    k = np.arange(len(trace))
    small = RotationSpaceSpec.from_cosines(optimal_fpr_cosines(50))
    report = merge_reports('optimal-fpr', [
        check_optimal_fpr(trace, alpha),
        check_rotation_trace(trace, spec, z0),
        check_rotation_operator(small),
    ], notes={
        'alpha': alpha,
        'blocks': DEFAULT_BLOCKS,
        'min_scaled_fpr': float(np.min(trace.fpr[1:] * (k[1:] + 1.0) ** (2.0 * alpha))),
    })
    return ReproductionOutcome(report, {'fpr': trace.fpr, 'bound_fpr': optimal_fpr_lower_bound(alpha, k)})


def _arbitrarily_slow(horizon: int) -> ReproductionOutcome:
    h, inverse = slow_target(0.05)
    spec, z0, slow = arbitrarily_slow_setup(h, horizon=horizon, inverse=inverse)
    trace = run_km(
        build_rotation_operator(spec), RelaxationSchedule.constant(1.0), z0, horizon,
        zstar=np.zeros_like(z0), store_vectors=False,
    )
    k = np.arange(len(trace), dtype=float)
    report = merge_reports('arbitrarily-slow', [
        check_slow_distance(trace, h),
        slow.check_witness(horizon),
    ], notes={'blocks': slow.blocks})
    return ReproductionOutcome(report, {
        'dist': np.sqrt(trace.dist_sq),
        'bound_dist': np.array([h(i) for i in k]) / np.e,
    })


def _square_feasibility(horizon: int) -> ReproductionOutcome:
    f, g, z0 = square_problem()
    certificate = certificate_at(f, g, 1.0, np.zeros(2), z0, closed_form=True)
    trace = run_square_example(horizon)
    even = np.arange(0, len(trace), 2)
    scaled = trace.ergodic_gap[even] * (even + 1.0) / certificate.dist0
    bound = 2.0 * certificate.dist0 / trace.cumulative[even]
    factor = float(np.max(bound / trace.ergodic_gap[even]))
    report = merge_reports('square-feasibility', [
        check_oracle_match(trace, feasibility_square_oracle, atol=ORACLE_TOL),
        upper_check('scaled_ergodic_gap', np.abs(scaled - 1.0), 0.0, atol=RATIO_TOL, rtol=0.0),
        check_ergodic_fpr(trace, certificate),
        upper_check('gap_factor_upper', [factor], 2.0, atol=RATIO_TOL, rtol=0.0),
        lower_check('gap_factor_lower', [factor], 1.0, atol=0.0, rtol=0.0),
    ], notes={'gap_factor': factor})
    return ReproductionOutcome(report, {
        'ergodic_gap': trace.ergodic_gap,
        'bound_ergodic_gap': 2.0 * certificate.dist0 / trace.cumulative,
    })


def _abs_ergodic(horizon: int) -> ReproductionOutcome:
    reports, series, ratios = [], {}, {}
    for epsilon, floor in UPPER_RATIO_FLOORS.items():
        f, g, z0 = abs_problem(epsilon)
        certificate = certificate_at(f, g, 1.0, np.zeros(1), z0, closed_form=True)
        trace = run_abs_example(epsilon, horizon)
        k = np.arange(len(trace))
        expected = (1.0 - epsilon) / (k + 1.0)
        _, upper = ergodic_objective_bounds(certificate, trace.cumulative)
        engine_ratio = float(trace.objective_ergodic[-1] / upper[-1])
        tightness = abs_tightness(epsilon, int(k[-1]))
        ratios[str(epsilon)] = {**tightness, 'engine_upper_ratio': engine_ratio}
        reports.append(merge_reports(f"eps_{epsilon:g}", [
            check_oracle_match(trace, lambda i, e=epsilon: abs_example_oracle(e, i), atol=ORACLE_TOL),
            upper_check('ergodic_f_error', np.abs(trace.obj_f_ergodic - expected), 0.0, atol=RATIO_TOL, rtol=0.0),
            check_objective_bands(trace, certificate),
            upper_check('engine_upper_ratio', [abs(engine_ratio - tightness['upper_ratio'])], 0.0, atol=RATIO_TOL, rtol=0.0),
            lower_check('upper_ratio', [tightness['upper_ratio']], floor, atol=0.0, rtol=0.0),
            upper_check('lipschitz_ratio', [tightness['lipschitz_ratio']], 2.5 + epsilon, atol=0.0, rtol=0.0),
            upper_check('feasibility_ratio', [tightness['feasibility_ratio']], 4.0, atol=0.0, rtol=0.0),
        ]))
        series[f"ergodic_f_error_eps{epsilon:g}"] = trace.obj_f_ergodic
        series[f"bound_upper_eps{epsilon:g}"] = upper
    return ReproductionOutcome(merge_reports('abs-ergodic', reports, notes={'ratios': ratios}), series)


def _dv_lower(horizon: int) -> ReproductionOutcome:
    trace = run_dv_example(DV_ALPHA, DV_BLOCKS, horizon)
    objective = trace.extras['dv_xg']
    fit = fit_decay_exponent(objective, (DV_FIT_START, horizon))

    norm = float(np.linalg.norm(dv_lower_bound_setup(DV_ALPHA, EQUIVALENCE_BLOCKS)[2]))
    equivalent = compare_distance_equivalence(DV_ALPHA, EQUIVALENCE_BLOCKS, EQUIVALENCE_ITERS, norm)
    # γ < ‖z0‖ では同値性の前提が崩れるので乖離量だけを記録する
    diverged = compare_distance_equivalence(DV_ALPHA, EQUIVALENCE_BLOCKS, EQUIVALENCE_ITERS, 0.5 * norm)
    report = merge_reports('dv-lower', [
        lower_check('dv_exponent', [fit.exponent], DV_EXPONENT_FLOOR, atol=0.0, rtol=0.0),
        upper_check('distance_equivalence', [equivalent['max_deviation']], 1e-10, atol=0.0, rtol=0.0),
    ], notes={
        'fit': {'exponent': fit.exponent, 'k_lo': fit.k_lo, 'k_hi': fit.k_hi, 'residual': fit.residual},
        'equivalence': equivalent,
        'below_threshold': diverged,
    })
    return ReproductionOutcome(report, {'dv_xg': objective})


def _ppa_lower(horizon: int) -> ReproductionOutcome:
    alpha, gamma = 1.0, 1.0
    trace = run_ppa_lower(alpha, gamma, DEFAULT_BLOCKS, horizon)
    k = np.arange(1, horizon + 1)
    fpr_bound, objective_bound = ppa_lower_bounds(alpha, gamma, k)
    return ReproductionOutcome(
        merge_reports('ppa-lower', [check_ppa_lower(trace, alpha, gamma, horizon)], notes={'blocks': DEFAULT_BLOCKS}),
        {
            'fpr': trace.fpr,
            'obj_err': trace.objective,
            'bound_fpr': np.concatenate([[np.nan], fpr_bound]),
            'bound_obj': np.concatenate([[np.nan, np.nan], objective_bound]),
        },
    )


def _constrained_lasso_run(horizon: int):
    problem = build_problem('constrained_lasso')
    schedule = RelaxationSchedule.constant(0.5)
    certificate = admm_certificate(problem.constrained, 1.0, problem.z0)
    trace = run_relaxed_admm(problem.constrained, 1.0, schedule, problem.z0, horizon)
    return problem, schedule, certificate, trace


def _admm_dual_feas(horizon: int) -> ReproductionOutcome:
    _, schedule, certificate, trace = _constrained_lasso_run(horizon)
    k = np.arange(len(trace))
    nonergodic = admm_feasibility_bounds(certificate, trace.gamma, schedule, k, 'nonergodic')
    derived = admm_feasibility_bounds(certificate, trace.gamma, schedule, k, 'ergodic', form='derived')
    stated = admm_feasibility_bounds(certificate, trace.gamma, schedule, k, 'ergodic', form='stated')
    report = merge_reports('admm-dual-feas', [
        upper_check('nonergodic_feasibility', trace.residual_sq, nonergodic),
        upper_check('ergodic_feasibility', trace.ergodic_residual_sq, derived),
        upper_check('dual_fpr', trace.fpr, fpr_bounds(schedule, certificate.dist0 ** 2, len(trace))),
    ], notes={'stated_ergodic_feasibility_violations': int(np.sum(trace.ergodic_residual_sq > stated + 1e-9))})
    return ReproductionOutcome(report, {
        'feas_gap': trace.residual_sq,
        'bound_feas': nonergodic,
        'ergodic_feas_gap': trace.ergodic_residual_sq,
        'bound_ergodic_feas': derived,
    })


def _admm_primal(horizon: int) -> ReproductionOutcome:
    problem, _, certificate, trace = _constrained_lasso_run(horizon)
    bands = check_admm_bands(trace, certificate)
    report = merge_reports('admm-primal', [
        bands,
        check_admm_fundamental(trace, certificate, problem.constrained),
        check_subgradient_inclusions(trace, problem.constrained),
    ], notes=bands.notes)
    return ReproductionOutcome(report, {
        'obj_err': trace.objective - certificate.obj_star,
        'obj_err_ergodic': trace.ergodic_objective - certificate.obj_star,
    })


def _admm_equivalence(horizon: int) -> ReproductionOutcome:
    problem = build_problem('lasso_1d')
    schedule = RelaxationSchedule.constant(0.5)
    trace = run_relaxed_admm(problem.constrained, 1.0, schedule, problem.z0, horizon)
    report = merge_reports('admm-equivalence', [
        check_dual_equivalence(problem.constrained, 1.0, schedule, problem.z0, horizon, atol=1e-12),
        check_step_identity_admm(trace),
    ])
    return ReproductionOutcome(report, {'z': trace.z[:, 0], 'feas_gap': trace.residual_sq})


def _distributed_admm(horizon: int) -> ReproductionOutcome:
    network = path_consensus(PATH_WEIGHTS, PATH_TARGETS)
    trace = run_distributed_admm(network, 1.0, horizon)
    minimizer = consensus_minimizer(PATH_WEIGHTS, PATH_TARGETS)
    deviation = float(np.max(np.abs(trace.x[-1] - minimizer)))
    report = merge_reports('distributed-admm', [
        audit_messages(trace, network),
        upper_check('consensus', [deviation], CONSENSUS_TOL, atol=0.0, rtol=0.0),
        check_distributed_bands(trace, network),
        check_distributed_equivalence(trace, network),
    ], notes={'minimizer': minimizer, 'final_points': trace.x[-1].ravel().tolist()})
    return ReproductionOutcome(report, {
        'obj_err': trace.objective - network.objective([np.array([minimizer])] * network.size),
        'disagreement': trace.disagreement,
    })


def _lemma_sequences(rng: np.random.Generator, part: int, length: int) -> SequenceCheck:
    lambdas = 1.0 - rng.random(length)
    if part == 1:
        a = np.sort(rng.exponential(size=length))[::-1]
        return SequenceCheck.of(a, lambdas, part=1)
    if part == 2:
        e = rng.exponential(size=length) / (np.arange(1, length + 1) ** 2)
        a = np.empty(length)
        a[0] = rng.exponential()
        for k in range(length - 1):
            a[k + 1] = max(0.0, a[k] + e[k] - rng.exponential())
        return SequenceCheck.of(a, lambdas, part=2, e=e)
    if part == 3:
        b = np.sort(rng.exponential(size=length + 1))[::-1]
        e = rng.exponential(size=length) / (np.arange(1, length + 1) ** 2)
        a = rng.random(length) * (b[:-1] - b[1:] + e) / lambdas
        return SequenceCheck.of(a, lambdas, part=3, e=e, b=b)
    return SequenceCheck.of(rng.exponential(size=length), lambdas, part=4)


def _summable_lemma(horizon: int) -> ReproductionOutcome:
    rng = np.random.default_rng(0)
    parts = []
    for part in (1, 2, 3, 4):
        reports = [verify_summable_lemma(_lemma_sequences(rng, part, horizon)) for _ in range(LEMMA_SEQUENCES)]
        parts.append(merge_reports(f"part_{part}", reports, notes={'sequences': LEMMA_SEQUENCES}))
    return ReproductionOutcome(merge_reports('summable-lemma', parts))


REGISTRY: Dict[str, ReproductionEntry] = {}


def register(entry: ReproductionEntry) -> ReproductionEntry:
    if entry.name in REGISTRY:
        raise ValueError(f"再現名が重複しています: {entry.name}")
    REGISTRY[entry.name] = entry
    return entry


for _entry in (
    ReproductionEntry('km-fpr', _km_fpr, "アフィン射影の合成への KM（λ≡1/2）の FPR 上界", 10000, 'moderate'),
    ReproductionEntry('km-inexact', _km_inexact, "誤差つき KM の FPR 上界と o(1/k) の末尾", 10000, 'moderate'),
    ReproductionEntry('fbs-rates', _fbs_rates, "lasso への FBS（γ=β, 1.5β）の目的関数誤差と FPR", 10000, 'moderate'),
    ReproductionEntry('ppa-rates', _ppa_rates, "|x| への PPA の収束率", 10000),
    ReproductionEntry('drs-1d', _drs_1d, "1次元 DRS の FPR 上界", 10000),
    ReproductionEntry('ergodic-prs', _ergodic_prs, "無作為な λ の緩和PRS の基本不等式とエルゴード帯", 200, 'moderate'),
    ReproductionEntry('nonergodic-prs', _nonergodic_prs, "d_V 問題の非エルゴード帯", 10000, 'moderate'),
    ReproductionEntry('lipschitz-cors', _lipschitz_cors, "Lipschitz 関数の同一点での目的関数誤差", 1000),
    ReproductionEntry('optimal-fpr', _optimal_fpr, "DRS の FPR 下界（回転部分空間）", 300, 'moderate'),
    ReproductionEntry('arbitrarily-slow', _arbitrarily_slow, "任意に遅い DRS の距離の下界", 200),
    ReproductionEntry('square-feasibility', _square_feasibility, "直交2直線の実行可能性問題のエルゴードギャップ", 1000),
    ReproductionEntry('abs-ergodic', _abs_ergodic, "|x| 例のエルゴード上界の tightness", 1000),
    ReproductionEntry('dv-lower', _dv_lower, "d_V 問題の目的関数誤差の減衰指数と同値性", 300, 'moderate'),
    ReproductionEntry('ppa-lower', _ppa_lower, "PPA の FPR・目的関数誤差の下界", 300, 'moderate'),
    ReproductionEntry('admm-dual-feas', _admm_dual_feas, "ADMM の実行可能性の上界", 10000, 'moderate'),
    ReproductionEntry('admm-primal', _admm_primal, "ADMM の主目的関数誤差の帯と基本不等式", 10000, 'moderate'),
    ReproductionEntry('admm-equivalence', _admm_equivalence, "ADMM と双対 PRS の z 列の一致", 1000),
    ReproductionEntry('distributed-admm', _distributed_admm, "経路グラフ上の分散ADMM", 5000, 'moderate'),
    ReproductionEntry('summable-lemma', _summable_lemma, "総和可能列の補題", 200),
):
    register(_entry)


def list_reproductions() -> List[ReproductionEntry]:
    return list(REGISTRY.values())


def get_entry(name: str) -> ReproductionEntry:
    entry = REGISTRY.get(name)
    if entry is None:
        raise UnknownReproductionError(name, REGISTRY)
    return entry


def reproduce(
    name: str,
    output_root=None,
    settings: Optional[Settings] = None,
    horizon: Optional[int] = None,
) -> ReproductionResult:
    """
    名前つきの再現を実行して受理判定を行う

    <output_root>/<name>/ に report.json と plot.dat を書き出す。
    数値計算の失敗は例外を送出せず、error に記録して success=False を返す。

    Args:
        name: 再現名
        output_root: 出力先のルート（省略時は settings.output_root）
        settings: アプリケーション設定
        horizon: 反復数（省略時は設定ファイルの上書きか登録済みの既定値）

    Returns:
        ReproductionResult

    Raises:
        UnknownReproductionError: 未登録の名前
    """
    entry = get_entry(name)
    settings = settings or load_settings()
    horizon = int(horizon) if horizon is not None else settings.horizon(name, entry.horizon)
    directory = Path(output_root or settings.output_root) / name
    directory.mkdir(parents=True, exist_ok=True)
    if entry.runtime == 'slow':
        print(f"⏳ {name} は時間がかかります")
    print(f"🔁 再現を実行中: {name}（{entry.description}, K={horizon}）")

    result = ReproductionResult(name=name, success=False, horizon=horizon)
    start = time.perf_counter()
    try:
        outcome = entry.builder(horizon)
        result.report = outcome.report
        result.details = outcome.details
        result.success = bool(entry.acceptance(outcome))
        if outcome.series:
            result.artifacts['plot'] = str(emit_plot_data(outcome.series, list(outcome.series), directory / "plot.dat"))
    except SplittingError as e:
        print(f"❌ 再現が失敗しました: {name}: {e}")
        result.error = str(e)
    result.elapsed = time.perf_counter() - start

    payload = {
        'name': name,
        'description': entry.description,
        'horizon': horizon,
        'passed': result.success,
        'error': result.error,
        'details': result.details,
        'report': None if result.report is None else result.report.to_dict(),
    }
    result.artifacts['report'] = str(write_json(payload, directory / "report.json"))

    status = "✅" if result.success else "❌"
    print(f"{status} {name}: {'合格' if result.success else '不合格'}（{result.elapsed:.1f}秒）")
    return result


def reproduce_many(
    names: Sequence[str],
    output_root=None,
    settings: Optional[Settings] = None,
    max_workers: Optional[int] = None,
) -> Dict[str, ReproductionResult]:
    """
    複数の再現を並列実行

    各再現は別々の出力ディレクトリに書き込む。結果は names の順に並べて返す。
    """
    for name in names:
        get_entry(name)
    settings = settings or load_settings()
    workers = max_workers or settings.max_workers
    print(f"📝 {len(names)} 件の再現を最大{workers}並列で実行します")

    results: Dict[str, ReproductionResult] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_name = {
            executor.submit(reproduce, name, output_root, settings): name
            for name in names
        }
        for future in as_completed(future_to_name):
            name = future_to_name[future]
            try:
                results[name] = future.result()
            except Exception as e:
                print(f"❌ {name} で例外発生: {e}")
                results[name] = ReproductionResult(name=name, success=False, horizon=0, error=str(e))

    passed = sum(1 for result in results.values() if result.success)
    print(f"\n📊 結果: {passed}/{len(names)} 件が合格")
    return {name: results[name] for name in names}


if __name__ == "__main__":
    print("=" * 70)
    print(f"🧪 再現レジストリの動作確認  {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("=" * 70)
    for item in list_reproductions():
        print(f"  {item.name:<20} [{item.runtime}] {item.description}")
    reproduce('square-feasibility', output_root="output/demo", horizon=100)
