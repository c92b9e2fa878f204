"""
再現レジストリのテスト
"""

import json

import pytest

import reproductions
from errors import InvalidArgumentError, UnknownReproductionError
from reproductions import (
    REGISTRY,
    ReproductionEntry,
    ReproductionOutcome,
    get_entry,
    list_reproductions,
    register,
    reproduce,
    reproduce_many,
)
from report import upper_check
from settings import Settings

EXPECTED_NAMES = {
    'km-fpr', 'km-inexact', 'fbs-rates', 'ppa-rates', 'drs-1d', 'ergodic-prs',
    'nonergodic-prs', 'lipschitz-cors', 'optimal-fpr', 'arbitrarily-slow',
    'square-feasibility', 'abs-ergodic', 'dv-lower', 'ppa-lower', 'admm-dual-feas',
    'admm-primal', 'admm-equivalence', 'distributed-admm', 'summable-lemma',
}


@pytest.fixture
def settings(tmp_path):
    return Settings(output_root=str(tmp_path / "output"), max_workers=2)


def test_registry_contents():
    assert {entry.name for entry in list_reproductions()} == EXPECTED_NAMES
    assert all(entry.horizon >= 1 for entry in list_reproductions())


def test_unknown_reproduction():
    with pytest.raises(UnknownReproductionError) as excinfo:
        get_entry('hexagon')
    assert isinstance(excinfo.value, ValueError)
    assert 'km-fpr' in excinfo.value.available


def test_entry_validation():
    with pytest.raises(ValueError):
        ReproductionEntry('x', lambda k: None, "x", 10, runtime='instant')
    with pytest.raises(ValueError):
        ReproductionEntry('x', lambda k: None, "x", 0)
    with pytest.raises(ValueError):
        register(get_entry('drs-1d'))


@pytest.mark.parametrize("name, horizon", [
    ('square-feasibility', 50),
    ('abs-ergodic', 50),
    ('summable-lemma', 20),
    ('admm-equivalence', 50),
    ('drs-1d', 100),
    ('ppa-rates', 100),
    ('arbitrarily-slow', 20),
])
def test_small_horizons_pass(tmp_path, settings, name, horizon):
    result = reproduce(name, output_root=tmp_path, settings=settings, horizon=horizon)
    assert result.success, result.report.summary() if result.report else result.error
    assert result.horizon == horizon


def test_reproduce_writes_artifacts(tmp_path, settings):
    result = reproduce('drs-1d', output_root=tmp_path, settings=settings, horizon=30)
    payload = json.loads((tmp_path / "drs-1d" / "report.json").read_text(encoding='utf-8'))
    assert set(payload) == {'name', 'description', 'horizon', 'passed', 'error', 'details', 'report'}
    assert payload['name'] == 'drs-1d'
    assert payload['horizon'] == 30
    assert payload['passed'] is result.success
    assert result.artifacts['plot'].endswith("plot.dat")
    assert (tmp_path / "drs-1d" / "plot.dat").read_text(encoding='utf-8').startswith("# k value\n")


def test_failing_builder_is_recorded(tmp_path, settings, monkeypatch):
    def broken(horizon):
        raise InvalidArgumentError("壊れた構成")

    monkeypatch.setitem(REGISTRY, 'drs-1d', ReproductionEntry('drs-1d', broken, "壊れた構成", 10))
    result = reproduce('drs-1d', output_root=tmp_path, settings=settings)
    assert not result.success
    assert result.error == "壊れた構成"
    assert result.report is None
    payload = json.loads((tmp_path / "drs-1d" / "report.json").read_text(encoding='utf-8'))
    assert payload['error'] == "壊れた構成"
    assert payload['report'] is None


def test_acceptance_overrides_report(tmp_path, settings, monkeypatch):
    def builder(horizon):
        return ReproductionOutcome(upper_check('dummy', [2.0], 1.0))

    entry = ReproductionEntry('drs-1d', builder, "受理判定", 10, acceptance=lambda outcome: True)
    monkeypatch.setitem(REGISTRY, 'drs-1d', entry)
    result = reproduce('drs-1d', output_root=tmp_path, settings=settings)
    assert result.success
    assert not result.report.passed
    assert 'plot' not in result.artifacts


def test_settings_horizon_override(tmp_path, monkeypatch):
    seen = []

    def builder(horizon):
        seen.append(horizon)
        return ReproductionOutcome(upper_check('dummy', [0.0], 1.0))

    monkeypatch.setitem(REGISTRY, 'drs-1d', ReproductionEntry('drs-1d', builder, "地平", 10))
    settings = Settings(output_root=str(tmp_path), horizons={'drs-1d': 7})
    assert reproduce('drs-1d', settings=settings).horizon == 7
    assert reproduce('drs-1d', settings=settings, horizon=3).horizon == 3
    assert seen == [7, 3]
    assert (tmp_path / "drs-1d" / "report.json").exists()


def test_reproduce_many_preserves_order(tmp_path, settings):
    names = ['summable-lemma', 'square-feasibility']
    settings = Settings(output_root=settings.output_root, horizons={'summable-lemma': 10, 'square-feasibility': 20})
    results = reproduce_many(names, output_root=tmp_path, settings=settings)
    assert list(results) == names
    assert all(result.success for result in results.values())


def test_reproduce_many_rejects_unknown_before_running(tmp_path, settings, monkeypatch):
    calls = []
    monkeypatch.setattr(reproductions, 'reproduce', lambda *args, **kwargs: calls.append(args))
    with pytest.raises(UnknownReproductionError):
        reproduce_many(['drs-1d', 'hexagon'], output_root=tmp_path, settings=settings)
    assert calls == []
