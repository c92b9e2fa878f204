"""
アプリケーション設定モジュール
config/config.yaml と環境変数から既定値を読み込む
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import yaml
from dotenv import load_dotenv

from errors import ConfigParseError, InvalidConfigError

load_dotenv()

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "config.yaml"


@dataclass(frozen=True)
class Settings:
    """実行時の既定値"""

    output_root: str = "./output"
    timezone: str = "Asia/Tokyo"
    gamma: float = 1.0
    relaxation: float = 0.5
    iters: int = 10000
    atol: float = 1e-9
    rtol: float = 1e-12
    max_workers: int = 4
    horizons: Dict[str, int] = field(default_factory=dict)
    notify_discord: bool = False

    def horizon(self, name: str, default: int) -> int:
        return int(self.horizons.get(name, default))


def _read_yaml(path: Path) -> Dict:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            data = yaml.safe_load(handle)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ConfigParseError(f"設定ファイルを解析できません: {path}: {e.problem}", line, column) from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"設定ファイルの最上位はマッピングである必要があります: {path}")
    return data


def load_settings(path: Optional[str] = None) -> Settings:
    """
    設定を読み込む

    優先順位は 引数 path > 環境変数 SPLITRATE_CONFIG > config/config.yaml。
    SPLITRATE_OUTPUT_ROOT があれば output.root を上書きする。

    Args:
        path: 設定ファイルのパス

    Returns:
        Settings
    """
    candidate = path or os.getenv("SPLITRATE_CONFIG")
    config_path = Path(candidate) if candidate else DEFAULT_CONFIG_PATH
    if candidate and not config_path.exists():
        raise InvalidConfigError(f"設定ファイルが見つかりません: {config_path}")
    data = _read_yaml(config_path) if config_path.exists() else {}

    output = data.get('output') or {}
    defaults = data.get('defaults') or {}
    tolerance = data.get('tolerance') or {}
    reproduce = dict(data.get('reproduce') or {})
    notify = data.get('notify') or {}

    max_workers = reproduce.pop('max_workers', 4)
    if not isinstance(max_workers, int):
        raise InvalidConfigError(f"reproduce.max_workers は整数である必要があります: {max_workers}")
    if max_workers < 1:
        raise InvalidConfigError(f"reproduce.max_workers は1以上である必要があります: {max_workers}")
    horizons = {}
    for name, value in reproduce.items():
        if not isinstance(value, int) or value < 1:
            raise InvalidConfigError(f"reproduce.{name} は正の整数である必要があります: {value}")
        horizons[str(name)] = value

    try:
        return Settings(
            output_root=os.getenv("SPLITRATE_OUTPUT_ROOT") or str(output.get('root', "./output")),
            timezone=str(output.get('timezone', "Asia/Tokyo")),
            gamma=float(defaults.get('gamma', 1.0)),
            relaxation=float(defaults.get('relaxation', 0.5)),
            iters=int(defaults.get('iters', 10000)),
            atol=float(tolerance.get('atol', 1e-9)),
            rtol=float(tolerance.get('rtol', 1e-12)),
            max_workers=max_workers,
            horizons=horizons,
            notify_discord=bool(notify.get('discord', False)),
        )
    except (TypeError, ValueError) as e:
        raise InvalidConfigError(f"設定値の型が不正です: {e}") from e
