"""
メインスクリプト
実験の実行・再現・一覧・レポート集計のコマンドラインインターフェース
"""

import argparse
import json
import sys
import traceback
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from discord_notifier import DiscordNotifier
from errors import SplittingError
from experiments import load_config, run_experiment
from reproductions import REGISTRY, list_reproductions, reproduce_many
from settings import Settings, load_settings


def _banner(title: str) -> None:
    print(f"\n{'='*70}")
    print(title)
    print(f"開始時刻: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"{'='*70}\n")


def _notifier(settings: Settings, requested: bool) -> Optional[DiscordNotifier]:
    if not (requested or settings.notify_discord):
        return None
    try:
        return DiscordNotifier(timezone=settings.timezone)
    except ValueError as e:
        print(f"⚠️  Discord通知を無効にします: {e}")
        return None


def cmd_run(args, settings: Settings) -> int:
    _banner("実験の実行")
    config = load_config(args.config, settings)
    print(f"📝 設定: {config.problem} / {config.algorithm}（γ={config.gamma}, K={config.iters}）")
    result = run_experiment(config, output_dir=args.output, settings=settings)
    for name, path in result.artifacts.items():
        print(f"  {name}: {path}")
    return 0 if result.success else 1


def cmd_reproduce(args, settings: Settings) -> int:
    names: List[str] = list(REGISTRY) if args.all else args.names
    if not names:
        print("❌ 再現名を指定するか --all を付けてください")
        return 2
    _banner(f"再現の実行（{len(names)} 件）")
    notifier = _notifier(settings, args.notify)
    results = reproduce_many(names, output_root=args.output, settings=settings, max_workers=args.workers)

    if notifier is not None:
        for result in results.values():
            notifier.notify_reproduction_result(result)
    failed = [name for name, result in results.items() if not result.success]
    if failed:
        print(f"❌ 不合格: {', '.join(failed)}")
        return 1
    print("✅ すべての再現に合格しました!")
    return 0


def cmd_list(args, settings: Settings) -> int:
    print(f"📊 登録済みの再現（{len(REGISTRY)} 件）")
    for entry in list_reproductions():
        horizon = settings.horizon(entry.name, entry.horizon)
        print(f"  {entry.name:<20} [{entry.runtime:<8}] K={horizon:<6} {entry.description}")
    return 0


def summarize_reports(directory) -> List[dict]:
    """ディレクトリ以下の report.json を集計"""
    rows = []
    for path in sorted(Path(directory).rglob("report.json")):
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
        report = data.get('report') or {}
        rows.append({
            'path': str(path.parent),
            'name': data.get('name') or report.get('name') or path.parent.name,
            'passed': bool(data.get('passed')),
            'worst_margin': report.get('worst_margin'),
            'error': data.get('error'),
        })
    return rows


def cmd_report(args, settings: Settings) -> int:
    directory = Path(args.directory)
    if not directory.exists():
        print(f"❌ ディレクトリが見つかりません: {directory}")
        return 2
    rows = summarize_reports(directory)
    if not rows:
        print(f"⚠️  report.json が見つかりません: {directory}")
        return 1
    for row in rows:
        status = "✅" if row['passed'] else "❌"
        margin = "" if row['worst_margin'] is None else f" margin={row['worst_margin']:.3e}"
        error = f" ({row['error']})" if row['error'] else ""
        print(f"{status} {row['name']}{margin}{error}  [{row['path']}]")
    passed = sum(1 for row in rows if row['passed'])
    print(f"\n📊 結果: {passed}/{len(rows)} 件が合格")
    return 0 if passed == len(rows) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='分割法の収束率検証ハーネス')
    parser.add_argument('--settings', type=str, default=None, help='設定ファイル（省略時は config/config.yaml）')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='実験設定ファイルを実行')
    run.add_argument('config', type=str, help='実験設定（.json / .yaml）')
    run.add_argument('--output', type=str, default=None, help='出力ディレクトリ')
    run.set_defaults(handler=cmd_run)

    rep = sub.add_parser('reproduce', help='登録済みの再現を実行')
    rep.add_argument('names', nargs='*', help='再現名')
    rep.add_argument('--all', action='store_true', help='全ての再現を実行')
    rep.add_argument('--workers', type=int, default=None, help='並列数（省略時は設定値）')
    rep.add_argument('--output', type=str, default=None, help='出力ルート')
    rep.add_argument('--notify', action='store_true', help='結果をDiscordに通知')
    rep.set_defaults(handler=cmd_reproduce)

    lst = sub.add_parser('list', help='再現の一覧')
    lst.set_defaults(handler=cmd_list)

    summary = sub.add_parser('report', help='report.json を集計')
    summary.add_argument('directory', type=str, help='集計するディレクトリ')
    summary.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """メイン関数（終了コードを返す）"""
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.settings)
        return args.handler(args, settings)
    except SplittingError as e:
        print(f"\n❌ エラーが発生しました: {e}")
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
