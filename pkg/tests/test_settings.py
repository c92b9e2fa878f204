"""
設定読み込みのテスト
"""

import pytest

from errors import ConfigParseError, InvalidConfigError
from settings import Settings, load_settings


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("SPLITRATE_CONFIG", raising=False)
    monkeypatch.delenv("SPLITRATE_OUTPUT_ROOT", raising=False)


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_load_settings_from_file(tmp_path):
    path = _write(tmp_path, (
        "output:\n"
        "  root: /tmp/runs\n"
        "defaults:\n"
        "  gamma: 2.0\n"
        "  iters: 500\n"
        "reproduce:\n"
        "  max_workers: 2\n"
        "  optimal-fpr: 50\n"
        "notify:\n"
        "  discord: true\n"
    ))
    settings = load_settings(path)
    assert settings.output_root == "/tmp/runs"
    assert settings.gamma == 2.0
    assert settings.iters == 500
    assert settings.relaxation == 0.5
    assert settings.max_workers == 2
    assert settings.horizon('optimal-fpr', 300) == 50
    assert settings.horizon('ppa-lower', 300) == 300
    assert settings.notify_discord


def test_empty_file_gives_defaults(tmp_path):
    assert load_settings(_write(tmp_path, "")) == Settings()


def test_environment_overrides(tmp_path, monkeypatch):
    path = _write(tmp_path, "defaults:\n  gamma: 0.5\n")
    monkeypatch.setenv("SPLITRATE_CONFIG", path)
    monkeypatch.setenv("SPLITRATE_OUTPUT_ROOT", str(tmp_path / "out"))
    settings = load_settings()
    assert settings.gamma == 0.5
    assert settings.output_root == str(tmp_path / "out")


def test_missing_explicit_path(tmp_path):
    with pytest.raises(InvalidConfigError):
        load_settings(str(tmp_path / "absent.yaml"))


def test_bad_yaml_reports_position(tmp_path):
    path = _write(tmp_path, "defaults:\n  gamma: [1.0\n  iters: 3\n")
    with pytest.raises(ConfigParseError) as excinfo:
        load_settings(path)
    assert excinfo.value.line is not None
    assert excinfo.value.line >= 2


@pytest.mark.parametrize("text", [
    "- 1\n- 2\n",
    "reproduce:\n  max_workers: 0\n",
    "reproduce:\n  optimal-fpr: many\n",
    "defaults:\n  gamma: fast\n",
])
def test_invalid_settings(tmp_path, text):
    with pytest.raises(InvalidConfigError):
        load_settings(_write(tmp_path, text))
