"""
実験実行モジュール
設定ファイルの読み込み、アルゴリズムの実行、トレースCSV・レポートJSON・プロットデータの出力
"""

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml

from admm import (
    admm_certificate,
    admm_feasibility_bounds,
    admm_primal_bounds,
    audit_messages,
    check_admm_bands,
    check_admm_fundamental,
    check_distributed_bands,
    check_distributed_equivalence,
    check_step_identity_admm,
    run_distributed_admm,
    run_relaxed_admm,
)
from core import Zero, as_vector
from errors import ConfigParseError, InvalidArgumentError, InvalidConfigError, NonConvergenceError, SplittingError
from feasibility import check_distance_gaps, check_ergodic_membership, check_feasibility_rates, feasibility_gap_bounds, run_feasibility
from km import RelaxationSchedule, check_fejer, check_fpr_bound, check_fpr_monotone, check_fpr_summability, fpr_bounds
from problems import ProblemInstance, build_problem, supported_algorithms
from rates import (
    check_fundamental_inequalities,
    check_objective_bands,
    ergodic_feasibility_bound,
    fbs_fpr_bound_derived,
    fbs_bounds,
    nonergodic_objective_bounds,
)
from report import BoundReport, merge_reports, upper_check
from settings import Settings, load_settings
from splitting import (
    FBSConfig,
    check_drs_1d,
    check_ergodic_fpr,
    check_fbs_rates,
    check_step_identity,
    fixed_point_reference,
    run_fbs,
    run_ppa,
    run_relaxed_prs,
)

ALGORITHMS = ('prs', 'drs', 'fbs', 'ppa', 'admm', 'dadmm', 'feasibility')

CSV_COLUMNS = (
    'k', 'fpr', 'dist_sq', 'obj_err', 'obj_err_ergodic', 'feas_gap',
    'bound_fpr', 'bound_obj_lo', 'bound_obj_hi', 'bound_feas',
)

CHECKS = {
    'prs': ('fejer', 'fpr_monotone', 'fpr_bound', 'fpr_summability', 'objective_bands', 'ergodic_fpr', 'step_identity', 'fundamental'),
    'drs': ('fejer', 'fpr_monotone', 'fpr_bound', 'fpr_summability', 'objective_bands', 'ergodic_fpr', 'step_identity', 'fundamental', 'drs_1d'),
    'feasibility': ('fejer', 'fpr_monotone', 'distance_gaps', 'ergodic_membership', 'feasibility_rates'),
    'fbs': ('fbs_rates', 'fpr_monotone'),
    'ppa': ('fbs_rates', 'fpr_monotone'),
    'admm': ('admm_bands', 'admm_fundamental', 'admm_step_identity'),
    'dadmm': ('messages', 'consensus', 'distributed_bands', 'equivalence'),
}

# ベクトル列を保持する要素数の上限
VECTOR_BUDGET = 2000000
CONSENSUS_TOL = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    """
    実験設定

    schedule は {'kind': 'constant', 'value': λ} / {'kind': 'explicit', 'values': [...]} /
    {'kind': 'polynomial', 'exponent': p}。z0 は None（問題の既定値）、数値の列、
    または {'seed': s, 'scale': c}（64bit PCG による正規乱数）。
    """

    problem: str
    algorithm: str = 'drs'
    params: Dict = field(default_factory=dict)
    gamma: float = 1.0
    schedule: Dict = field(default_factory=lambda: {'kind': 'constant', 'value': 0.5})
    z0: Optional[object] = None
    iters: int = 10000
    checks: Tuple[str, ...] = ()
    output: Optional[str] = None
    beta: Optional[float] = None

    def relaxation(self) -> RelaxationSchedule:
        if self.algorithm == 'drs':
            return RelaxationSchedule.constant(0.5)
        kind = self.schedule.get('kind', 'constant')
        if kind == 'constant':
            return RelaxationSchedule.constant(float(self.schedule.get('value', 0.5)))
        if kind == 'explicit':
            return RelaxationSchedule.explicit(self.schedule.get('values', ()))
        if kind == 'polynomial':
            return RelaxationSchedule.polynomial(float(self.schedule.get('exponent', 0.0)))
        raise InvalidConfigError(f"未知の緩和スケジュール種別です: {kind}")

    @property
    def active_checks(self) -> Tuple[str, ...]:
        return self.checks or CHECKS[self.algorithm]

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['checks'] = list(self.checks)
        return data


def _parse_text(text: str, suffix: str) -> Dict:
    if suffix in ('.yaml', '.yml'):
        try:
            data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as e:
            mark = e.problem_mark
            raise ConfigParseError(
                f"YAML を解析できません: {e.problem}",
                mark.line + 1 if mark else None,
                mark.column + 1 if mark else None,
            ) from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"JSON を解析できません: {e.msg}", e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise InvalidConfigError("実験設定の最上位はオブジェクトである必要があります")
    return data


def parse_config(data: Mapping, settings: Optional[Settings] = None) -> ExperimentConfig:
    """
    辞書から設定を組み立てて検証

    problem は名前か {'name': ..., パラメータ...}。最上位の未知のキーは問題のパラメータとして扱う。
    """
    settings = settings or load_settings()
    data = dict(data)
    problem = data.pop('problem', None)
    params = dict(data.pop('params', {}) or {})
    if isinstance(problem, Mapping):
        problem = dict(problem)
        name = problem.pop('name', None)
        params.update(problem)
        problem = name
    if not isinstance(problem, str) or not problem:
        raise InvalidConfigError("problem が設定されていません")

    algorithm = data.pop('algorithm', 'drs')
    if algorithm not in ALGORITHMS:
        raise InvalidConfigError(f"未知のアルゴリズムです: {algorithm}（利用可能: {', '.join(ALGORITHMS)}）")
    supported = supported_algorithms(problem)
    if algorithm not in supported:
        raise InvalidConfigError(
            f"問題 {problem} はアルゴリズム {algorithm} に対応していません（対応: {', '.join(sorted(supported))}）"
        )

    iters = data.pop('iters', settings.iters)
    if not isinstance(iters, int) or isinstance(iters, bool) or iters < 1:
        raise InvalidConfigError(f"iters は1以上の整数である必要があります: {iters}")
    schedule = data.pop('schedule', None)
    if schedule is None:
        schedule = {'kind': 'constant', 'value': settings.relaxation}
    elif isinstance(schedule, (int, float)):
        schedule = {'kind': 'constant', 'value': float(schedule)}
    elif not isinstance(schedule, Mapping):
        raise InvalidConfigError(f"schedule の形式が不正です: {schedule}")

    checks = tuple(data.pop('checks', ()) or ())
    unknown = [name for name in checks if name not in CHECKS[algorithm]]
    if unknown:
        raise InvalidConfigError(f"{algorithm} で使えないチェックです: {', '.join(unknown)}（利用可能: {', '.join(CHECKS[algorithm])}）")

    beta = data.pop('beta', None)
    config = ExperimentConfig(
        problem=problem,
        algorithm=algorithm,
        gamma=float(data.pop('gamma', settings.gamma)),
        schedule=dict(schedule),
        z0=data.pop('z0', None),
        iters=iters,
        checks=checks,
        output=data.pop('output', None),
        beta=None if beta is None else float(beta),
        params={**params, **data},
    )
    # スケジュールの妥当性はここで確かめる
    config.relaxation()
    if not config.gamma > 0:
        raise InvalidConfigError(f"gamma は正である必要があります: {config.gamma}")
    return config


def load_config(path, settings: Optional[Settings] = None) -> ExperimentConfig:
    """
    実験設定ファイル（.json / .yaml / .yml）を読み込む

    Args:
        path: 設定ファイルのパス
        settings: 既定値（省略時は config/config.yaml）

    Returns:
        ExperimentConfig
    """
    path = Path(path)
    if not path.exists():
        raise InvalidConfigError(f"設定ファイルが見つかりません: {path}")
    text = path.read_text(encoding='utf-8')
    return parse_config(_parse_text(text, path.suffix.lower()), settings)


def dump_config(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)


@dataclass
class ExperimentResult:
    """実験結果（success は全チェック合格かつ例外なし）"""

    config: ExperimentConfig
    success: bool
    report: Optional[BoundReport] = None
    columns: Dict[str, np.ndarray] = field(default_factory=dict)
    certificate: Dict = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    error: Optional[str] = None


def _resolve_z0(config: ExperimentConfig, problem: ProblemInstance) -> np.ndarray:
    default = problem.z0
    value = config.z0
    if value is None:
        return np.array(default, dtype=float)
    if isinstance(value, Mapping):
        rng = np.random.default_rng(int(value.get('seed', 0)))
        return rng.standard_normal(default.size) * float(value.get('scale', 1.0))
    z0 = as_vector(value, "z0")
    if z0.size != default.size:
        raise InvalidConfigError(f"z0 の次元 {z0.size} が問題の次元 {default.size} と一致しません")
    return z0


def _splitting_certificate(problem: ProblemInstance, gamma: float, z0, algorithm: str):
    # PPA は f だけを最小化するので g = 0 の問題の証明書を作る
    g = Zero() if algorithm == 'ppa' else problem.g
    zstar = problem.zstar if algorithm != 'ppa' or isinstance(problem.g, Zero) else None
    if zstar is not None:
        try:
            return fixed_point_reference(problem.f, g, gamma, z0, closed_form=zstar)
        except NonConvergenceError:
            print(f"⚠️  既知の不動点が γ={gamma} では成立しないため参照実行に切り替えます")
    return fixed_point_reference(problem.f, g, gamma, z0)


def _empty(count: int) -> np.ndarray:
    return np.full(count, np.nan)


def _splitting_columns(trace, certificate, schedule: RelaxationSchedule, algorithm: str, beta: Optional[float]):
    count = len(trace)
    k = np.arange(count)
    columns = {name: _empty(count) for name in CSV_COLUMNS}
    columns['k'] = k
    columns['fpr'] = np.array(trace.fpr)
    if trace.dist_sq is not None:
        columns['dist_sq'] = np.array(trace.dist_sq)
    if trace.objective is not None:
        columns['obj_err'] = trace.objective - certificate.obj_star
    if algorithm in ('fbs', 'ppa'):
        bounds = [fbs_bounds(certificate, trace.gamma, beta, int(i)) for i in k[:-1]]
        columns['bound_obj_hi'][1:] = [upper for upper, _ in bounds]
        columns['bound_fpr'][1:] = [fbs_fpr_bound_derived(certificate, trace.gamma, beta, int(i)) for i in k[:-1]]
        return columns

    columns['obj_err_ergodic'] = trace.objective_ergodic - certificate.obj_star
    columns['feas_gap'] = np.array(trace.gap_sq)
    tau_lower = float(np.min(trace.lambdas * (1.0 - trace.lambdas)))
    if tau_lower > 0:
        columns['bound_fpr'] = fpr_bounds(schedule, certificate.dist0_sq, count)
        lo, hi = nonergodic_objective_bounds(certificate, tau_lower, k)
        columns['bound_obj_lo'], columns['bound_obj_hi'] = lo, hi
        columns['bound_feas'] = feasibility_gap_bounds(certificate, schedule, k, mode='nonergodic')
    else:
        columns['bound_feas'] = ergodic_feasibility_bound(certificate, trace.cumulative) ** 2
    return columns


def _run_splitting(config: ExperimentConfig, problem: ProblemInstance, z0) -> Tuple[BoundReport, Dict, Dict]:
    algorithm = config.algorithm
    # dv_lower と ppa_diag は構成に γ を含むのでそちらを使う
    gamma = problem.gamma if problem.gamma is not None else config.gamma
    schedule = config.relaxation()
    certificate = _splitting_certificate(problem, gamma, z0, algorithm)
    store = (config.iters + 1) * z0.size <= VECTOR_BUDGET

    beta = None
    if algorithm == 'fbs':
        beta = config.beta if config.beta is not None else problem.g.beta
        trace = run_fbs(problem.f, problem.g, FBSConfig(gamma, beta), z0, config.iters, zstar=certificate.xstar, store_vectors=store)
    elif algorithm == 'ppa':
        beta = np.inf
        trace = run_ppa(problem.f, gamma, z0, config.iters, zstar=certificate.xstar, store_vectors=store)
    elif algorithm == 'feasibility':
        if problem.pair is None:
            raise InvalidConfigError(f"問題 {problem.name} は集合の組ではありません")
        trace = run_feasibility(problem.pair, schedule, z0, config.iters, zstar=certificate.zstar, store_vectors=store)
    else:
        trace = run_relaxed_prs(problem.f, problem.g, gamma, schedule, z0, config.iters, zstar=certificate.zstar, store_vectors=store)

    if trace.aborted:
        print(f"❌ {trace.diagnostic}")
    reports = {name: _splitting_check(name, trace, certificate, schedule, beta) for name in config.active_checks}
    skipped = [name for name, part in reports.items() if part is None]
    notes = {'aborted': trace.aborted, 'vectors_stored': store, 'skipped': skipped}
    report = merge_reports(f"{problem.name}:{algorithm}", [r for r in reports.values() if r is not None], notes=notes)
    columns = _splitting_columns(trace, certificate, schedule, algorithm, beta)
    return report, columns, certificate.summary()


def _splitting_check(name: str, trace, certificate, schedule: RelaxationSchedule, beta) -> Optional[BoundReport]:
    needs_vectors = name in ('step_identity', 'fundamental')
    if needs_vectors and trace.z is None:
        print(f"⚠️  {name} はベクトル列を保持していないためスキップします")
        return None
    tau_positive = bool(np.all(trace.lambdas < 1.0))
    if name == 'fejer':
        return check_fejer(trace)
    if name == 'fpr_monotone':
        return check_fpr_monotone(trace)
    if name == 'fpr_bound':
        return check_fpr_bound(trace, schedule, certificate.dist0_sq) if tau_positive else None
    if name == 'fpr_summability':
        return check_fpr_summability(trace, schedule, certificate.dist0_sq)
    if name == 'objective_bands':
        return check_objective_bands(trace, certificate)
    if name == 'ergodic_fpr':
        return check_ergodic_fpr(trace, certificate)
    if name == 'step_identity':
        return check_step_identity(trace)
    if name == 'fundamental':
        return check_fundamental_inequalities(trace, certificate)
    if name == 'drs_1d':
        return check_drs_1d(trace, certificate) if trace.final_z.size == 1 else None
    if name == 'distance_gaps':
        return check_distance_gaps(trace)
    if name == 'ergodic_membership':
        return check_ergodic_membership(trace)
    if name == 'feasibility_rates':
        return check_feasibility_rates(trace, certificate, schedule)
    if name == 'fbs_rates':
        return check_fbs_rates(trace, certificate, FBSConfig(trace.gamma, beta))
    raise InvalidConfigError(f"未知のチェックです: {name}")


def _run_admm(config: ExperimentConfig, problem: ProblemInstance, z0):
    gamma = config.gamma
    schedule = config.relaxation()
    constrained = problem.constrained
    certificate = admm_certificate(constrained, gamma, z0)
    trace = run_relaxed_admm(constrained, gamma, schedule, z0, config.iters)
    if trace.aborted:
        print(f"❌ {trace.diagnostic}")

    reports = []
    for name in config.active_checks:
        if name == 'admm_bands':
            reports.append(check_admm_bands(trace, certificate))
        elif name == 'admm_fundamental':
            reports.append(check_admm_fundamental(trace, certificate, constrained))
        elif name == 'admm_step_identity':
            reports.append(check_step_identity_admm(trace))
    report = merge_reports(f"{problem.name}:admm", reports, notes={'solver_modes': dict(trace.solver_modes)})

    count = len(trace)
    k = np.arange(count)
    columns = {name: _empty(count) for name in CSV_COLUMNS}
    columns['k'] = k
    columns['fpr'] = np.array(trace.fpr)
    to_star = trace.z - certificate.zstar
    columns['dist_sq'] = np.einsum('ij,ij->i', to_star, to_star)
    columns['obj_err'] = trace.objective - certificate.obj_star
    columns['obj_err_ergodic'] = trace.ergodic_objective - certificate.obj_star
    columns['feas_gap'] = np.array(trace.residual_sq)
    if float(np.min(trace.lambdas * (1.0 - trace.lambdas))) > 0:
        columns['bound_fpr'] = fpr_bounds(schedule, certificate.dist0 ** 2, count)
        lo, hi = admm_primal_bounds(certificate, gamma, schedule, k, 'nonergodic', form='asserted')
        columns['bound_obj_lo'], columns['bound_obj_hi'] = lo, hi
        columns['bound_feas'] = admm_feasibility_bounds(certificate, gamma, schedule, k, 'nonergodic')
    return report, columns, certificate.summary()


def consensus_reference(network) -> Optional[Tuple[np.ndarray, float]]:
    """局所関数が全て二次なら Σf_i の最小点と最小値を閉形式で返す"""
    forms = [f.quadratic_form(network.dim) for f in network.functions]
    if any(form is None for form in forms):
        return None
    hessian = sum(Q for Q, _, _ in forms)
    linear = sum(q for _, q, _ in forms)
    point = np.linalg.solve(hessian, -linear)
    return point, network.objective([point] * network.size)


def _run_distributed(config: ExperimentConfig, problem: ProblemInstance):
    network = problem.network
    trace = run_distributed_admm(network, config.gamma, config.iters)
    reference = consensus_reference(network)
    reports, skipped = [], []
    for name in config.active_checks:
        if name == 'messages':
            reports.append(audit_messages(trace, network))
        elif name == 'consensus':
            if reference is None:
                skipped.append(name)
                continue
            deviation = np.max(np.abs(trace.x[-1] - reference[0][None, :]))
            reports.append(upper_check('consensus', [deviation], CONSENSUS_TOL, atol=0.0, rtol=0.0))
        elif name == 'distributed_bands':
            reports.append(check_distributed_bands(trace, network))
        elif name == 'equivalence':
            reports.append(check_distributed_equivalence(trace, network))
    report = merge_reports(f"{problem.name}:dadmm", reports, notes={'skipped': skipped})

    count = len(trace)
    columns = {name: _empty(count) for name in CSV_COLUMNS}
    columns['k'] = np.arange(count)
    if reference is not None:
        columns['obj_err'] = trace.objective - reference[1]
    columns['feas_gap'] = np.array(trace.disagreement)
    certificate = {} if reference is None else {'minimizer': reference[0].tolist(), 'obj_star': reference[1]}
    return report, columns, certificate


def _format(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ''
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trace_csv(columns: Mapping[str, np.ndarray], path) -> Path:
    """固定スキーマの CSV（欠損は空欄）"""
    path = Path(path)
    count = len(columns['k'])
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for i in range(count):
            writer.writerow([_format(columns[name][i]) if name != 'k' else str(int(columns['k'][i])) for name in CSV_COLUMNS])
    return path


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"JSON に変換できない値です: {type(value).__name__}")


def write_json(data: Mapping, path) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle, ensure_ascii=False, indent=2, default=_json_default)
    return path


def emit_plot_data(trace, columns: List[str], path) -> Path:
    """
    gnuplot 向けの2列テキスト（k と値）を系列ごとに書き出す

    系列は2行の空行で区切る（gnuplot の index）。欠損値と非有限値は出力しない。

    Args:
        trace: 列名 → 配列の辞書、または同名の属性を持つトレース
        columns: 出力する列名
        path: 出力先（既存ファイルは上書き）

    Returns:
        出力したパス
    """
    path = Path(path)
    series = {}
    for name in columns:
        values = trace.get(name) if isinstance(trace, Mapping) else getattr(trace, name, None)
        if values is None:
            raise InvalidArgumentError(f"トレースに列 {name} がありません")
        series[name] = np.asarray(values, dtype=float)
    if path.exists():
        print(f"⚠️  既存のプロットデータを上書きします: {path}")

    lines = ["# k value"]
    for index, (name, values) in enumerate(series.items()):
        if index:
            lines += ["", ""]
        lines.append(f"# {name}")
        lines += [f"{k} {value!r}" for k, value in enumerate(values.tolist()) if np.isfinite(value)]
    path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    return path


def output_directory(config: ExperimentConfig, settings: Settings, output_dir=None) -> Path:
    if output_dir is not None:
        return Path(output_dir)
    if config.output:
        return Path(config.output)
    return Path(settings.output_root) / f"{config.problem}_{config.algorithm}"


def run_experiment(config: ExperimentConfig, output_dir=None, settings: Optional[Settings] = None) -> ExperimentResult:
    """
    設定に従って実行し、trace.csv・report.json・plot.dat を書き出す

    ソルバーの失敗はレポートに記録して success=False を返す（例外は送出しない）。

    Args:
        config: 実験設定
        output_dir: 出力先（省略時は config.output か settings.output_root 配下）
        settings: アプリケーション設定

    Returns:
        ExperimentResult
    """
    settings = settings or load_settings()
    directory = output_directory(config, settings, output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    print(f"🔁 実験を実行中: {config.problem} / {config.algorithm}（{config.iters} 反復）")

    result = ExperimentResult(config=config, success=False)
    try:
        problem = build_problem(config.problem, config.params)
        if problem.kind == 'distributed':
            report, columns, certificate = _run_distributed(config, problem)
        else:
            z0 = _resolve_z0(config, problem)
            if problem.kind == 'admm':
                report, columns, certificate = _run_admm(config, problem, z0)
            else:
                report, columns, certificate = _run_splitting(config, problem, z0)
        result.report = report
        result.columns = columns
        result.certificate = certificate
        # 明示的に指定したチェックが実行できなかった場合は不合格
        missing = [name for name in config.checks if name in report.notes.get('skipped', ())]
        if missing:
            print(f"❌ 指定したチェックを実行できませんでした: {', '.join(missing)}")
        result.success = report.passed and not report.notes.get('aborted', False) and not missing
    except SplittingError as e:
        print(f"❌ 実験が失敗しました: {e}")
        result.error = str(e)

    payload = {
        'config': config.to_dict(),
        'passed': result.success,
        'error': result.error,
        'certificate': result.certificate,
        'seed': config.z0.get('seed') if isinstance(config.z0, Mapping) else config.params.get('seed'),
        'report': None if result.report is None else result.report.to_dict(),
    }
    result.artifacts['report'] = str(write_json(payload, directory / "report.json"))
    if result.columns:
        result.artifacts['trace'] = str(write_trace_csv(result.columns, directory / "trace.csv"))
        plotted = [name for name in ('fpr', 'dist_sq', 'obj_err', 'feas_gap') if np.any(np.isfinite(result.columns[name]))]
        result.artifacts['plot'] = str(emit_plot_data(result.columns, plotted, directory / "plot.dat"))

    status = "✅" if result.success else "❌"
    print(f"{status} {config.problem} / {config.algorithm}: {'合格' if result.success else '不合格'}（{directory}）")
    return result


if __name__ == "__main__":
    print("=" * 70)
    print(f"🧪 実験実行の動作確認  {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("=" * 70)
    demo = parse_config({'problem': 'abs_example', 'eps': 0.1, 'algorithm': 'prs', 'iters': 100})
    outcome = run_experiment(demo, output_dir="output/demo_abs")
    print(f"📊 成果物: {outcome.artifacts}")
