"""
実験実行のテスト
設定の検証、CSV・JSON・プロットデータの出力
"""

import json

import numpy as np
import pytest

from errors import ConfigParseError, InvalidArgumentError, InvalidConfigError
from experiments import (
    CHECKS,
    CSV_COLUMNS,
    dump_config,
    emit_plot_data,
    load_config,
    parse_config,
    run_experiment,
)
from settings import Settings


@pytest.fixture
def settings(tmp_path):
    return Settings(output_root=str(tmp_path / "output"))


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


def test_minimal_config_uses_defaults(settings):
    config = parse_config({'problem': 'one_d'}, settings)
    assert config.algorithm == 'drs'
    assert config.iters == 10000
    assert config.gamma == 1.0
    assert config.schedule == {'kind': 'constant', 'value': 0.5}
    assert config.active_checks == CHECKS['drs']


def test_problem_mapping_and_extra_keys(settings):
    config = parse_config({'problem': {'name': 'lasso', 'dim': 4}, 'algorithm': 'fbs', 'seed': 3}, settings)
    assert config.problem == 'lasso'
    assert config.params == {'dim': 4, 'seed': 3}


def test_drs_forces_half_relaxation(settings):
    config = parse_config({'problem': 'one_d', 'algorithm': 'drs', 'schedule': 0.9}, settings)
    assert config.relaxation().lam(0) == 0.5
    relaxed = parse_config({'problem': 'one_d', 'algorithm': 'prs', 'schedule': 0.9}, settings)
    assert relaxed.relaxation().lam(0) == pytest.approx(0.9)


@pytest.mark.parametrize("data", [
    {},
    {'problem': 'hexagon'},
    {'problem': 'square', 'algorithm': 'fbs'},
    {'problem': 'one_d', 'algorithm': 'newton'},
    {'problem': 'one_d', 'iters': 0},
    {'problem': 'one_d', 'iters': True},
    {'problem': 'one_d', 'algorithm': 'prs', 'checks': ['drs_1d']},
    {'problem': 'one_d', 'gamma': 0.0},
    {'problem': 'one_d', 'schedule': 'fast'},
    {'problem': 'one_d', 'algorithm': 'prs', 'schedule': {'kind': 'cosine'}},
])
def test_invalid_configs(settings, data):
    with pytest.raises(InvalidConfigError):
        parse_config(data, settings)


def test_json_parse_error_reports_line(tmp_path, settings):
    path = _write(tmp_path, "bad.json", '{\n "problem": "abs_example",\n "iters": \n}')
    with pytest.raises(ConfigParseError) as excinfo:
        load_config(path, settings)
    assert excinfo.value.line == 4


def test_yaml_parse_error(tmp_path, settings):
    path = _write(tmp_path, "bad.yaml", "problem: [abs_example\niters: 3\n")
    with pytest.raises(ConfigParseError) as excinfo:
        load_config(path, settings)
    assert excinfo.value.line is not None


def test_load_config_errors(tmp_path, settings):
    with pytest.raises(InvalidConfigError):
        load_config(tmp_path / "absent.json", settings)
    with pytest.raises(InvalidConfigError):
        load_config(_write(tmp_path, "list.json", "[1, 2]"), settings)


def test_yaml_config(tmp_path, settings):
    path = _write(tmp_path, "run.yml", "problem: square\nalgorithm: feasibility\niters: 20\n")
    config = load_config(path, settings)
    assert (config.problem, config.algorithm, config.iters) == ('square', 'feasibility', 20)


def test_dump_and_parse_round_trip(settings):
    config = parse_config({'problem': 'lasso', 'dim': 4, 'algorithm': 'fbs', 'iters': 50, 'beta': 0.5}, settings)
    assert parse_config(json.loads(dump_config(config)), settings) == config


def test_abs_example_prs_run(tmp_path, settings):
    config = parse_config({'problem': 'abs_example', 'algorithm': 'prs', 'schedule': 1.0, 'iters': 100}, settings)
    result = run_experiment(config, output_dir=tmp_path / "abs", settings=settings)
    assert result.success, result.report.summary()
    lines = (tmp_path / "abs" / "trace.csv").read_text(encoding='utf-8').splitlines()
    assert len(lines) == 102
    assert lines[0] == ",".join(CSV_COLUMNS)
    report = json.loads((tmp_path / "abs" / "report.json").read_text(encoding='utf-8'))
    assert report['passed']
    assert report['certificate']['closed_form']
    assert (tmp_path / "abs" / "plot.dat").exists()


def test_runs_are_deterministic(tmp_path, settings):
    config = parse_config({'problem': 'quadratic_l1', 'dim': 4, 'algorithm': 'prs', 'schedule': 0.7, 'iters': 60}, settings)
    run_experiment(config, output_dir=tmp_path / "a", settings=settings)
    run_experiment(config, output_dir=tmp_path / "b", settings=settings)
    for name in ("trace.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_failed_run_still_writes_report(tmp_path, settings):
    config = parse_config({'problem': 'abs_example', 'algorithm': 'prs', 'z0': [1.0, 2.0], 'iters': 10}, settings)
    result = run_experiment(config, output_dir=tmp_path / "bad", settings=settings)
    assert not result.success
    assert "z0" in result.error
    report = json.loads((tmp_path / "bad" / "report.json").read_text(encoding='utf-8'))
    assert report['passed'] is False
    assert report['error'] == result.error
    assert not (tmp_path / "bad" / "trace.csv").exists()


def test_admm_run(tmp_path, settings):
    config = parse_config({'problem': 'lasso_1d', 'algorithm': 'admm', 'iters': 200}, settings)
    result = run_experiment(config, output_dir=tmp_path / "admm", settings=settings)
    assert result.success, result.report.summary()
    assert result.report.notes['solver_modes'] == {'f': 'quadratic', 'g': 'orthogonal'}


def test_square_feasibility_run(tmp_path, settings):
    config = parse_config({'problem': 'square', 'algorithm': 'feasibility', 'iters': 20}, settings)
    result = run_experiment(config, output_dir=tmp_path / "square", settings=settings)
    assert result.success, result.report.summary()
    assert result.columns['fpr'][1] == 0.0


def test_default_output_directory(tmp_path, settings):
    config = parse_config({'problem': 'one_d', 'iters': 10}, settings)
    result = run_experiment(config, settings=settings)
    assert result.artifacts['report'].endswith("report.json")
    assert (tmp_path / "output" / "one_d_drs" / "report.json").exists()


def test_emit_plot_data(tmp_path, capsys):
    path = tmp_path / "plot.dat"
    emit_plot_data({'fpr': [4.0, float('nan'), 1.0], 'gap': [2.0]}, ['fpr', 'gap'], path)
    assert path.read_text(encoding='utf-8') == "# k value\n# fpr\n0 4.0\n2 1.0\n\n\n# gap\n0 2.0\n"

    emit_plot_data({'fpr': []}, ['fpr'], path)
    assert "既存のプロットデータを上書きします" in capsys.readouterr().out
    assert path.read_text(encoding='utf-8') == "# k value\n# fpr\n"

    with pytest.raises(InvalidArgumentError):
        emit_plot_data({'fpr': [1.0]}, ['obj_err'], path)


def _objective_gaps_nonnegative(result):
    gaps = result.columns['obj_err']
    gaps = gaps[np.isfinite(gaps)]
    assert gaps.size > 0
    assert np.all(gaps >= -1e-9)


@pytest.mark.parametrize("data", [
    {'problem': 'lasso', 'dim': 4, 'algorithm': 'fbs', 'gamma': 0.2, 'iters': 200},
    {'problem': 'lasso', 'dim': 4, 'algorithm': 'ppa', 'iters': 100},
    {'problem': 'ppa_diag', 'alpha': 1.0, 'N': 1000, 'horizon': 40, 'algorithm': 'ppa', 'iters': 40},
    {'problem': 'lasso_1d', 'algorithm': 'admm', 'iters': 200},
    {'problem': 'path_consensus', 'algorithm': 'dadmm', 'iters': 200},
])
def test_algorithm_branches_run(tmp_path, settings, data):
    config = parse_config(data, settings)
    result = run_experiment(config, output_dir=tmp_path / config.algorithm, settings=settings)
    assert result.success, result.report.summary()
    assert len(result.report.notes['parts']) == len(CHECKS[config.algorithm])
    if config.algorithm in ('fbs', 'ppa'):
        _objective_gaps_nonnegative(result)


def test_ppa_certificate_ignores_g(tmp_path, settings):
    config = parse_config({'problem': 'lasso', 'dim': 4, 'algorithm': 'ppa', 'iters': 100}, settings)
    result = run_experiment(config, output_dir=tmp_path / "ppa", settings=settings)
    # PPA は mu‖x‖₁ だけを最小化するので最適値は 0
    assert result.certificate['obj_star'] == pytest.approx(0.0, abs=1e-12)
    assert result.columns['obj_err'][-1] == pytest.approx(0.0, abs=1e-9)


def test_distributed_run_checks_edge_equivalence(tmp_path, settings):
    config = parse_config({'problem': 'path_consensus', 'algorithm': 'dadmm', 'iters': 100,
                           'checks': ['distributed_bands', 'equivalence']}, settings)
    result = run_experiment(config, output_dir=tmp_path / "dadmm", settings=settings)
    assert result.success, result.report.summary()
    parts = result.report.notes['parts']
    assert {'distributed_bands', 'distributed_equivalence'} <= set(parts)
    assert result.report.notes['skipped'] == []


def test_requested_check_that_cannot_run_fails(tmp_path, settings):
    config = parse_config({'problem': 'abs_example', 'algorithm': 'prs', 'schedule': 1.0,
                           'checks': ['fpr_bound'], 'iters': 50}, settings)
    result = run_experiment(config, output_dir=tmp_path / "abs", settings=settings)
    assert not result.success
    assert result.report.notes['skipped'] == ['fpr_bound']
    assert result.report.passed
    report = json.loads((tmp_path / "abs" / "report.json").read_text(encoding='utf-8'))
    assert report['passed'] is False


def test_default_checks_may_skip(tmp_path, settings):
    config = parse_config({'problem': 'abs_example', 'algorithm': 'prs', 'schedule': 1.0, 'iters': 50}, settings)
    result = run_experiment(config, output_dir=tmp_path / "abs", settings=settings)
    assert result.success
    assert 'fpr_bound' in result.report.notes['skipped']
