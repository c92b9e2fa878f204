"""
Discord通知モジュール
Webhookで再現・実験の合否をDiscordに通知
"""

import os
from datetime import datetime
from typing import Dict, List, Optional

import pytz
from discord_webhook import DiscordEmbed, DiscordWebhook
from dotenv import load_dotenv

load_dotenv()

PASS_COLOR = '2ECC71'
FAIL_COLOR = 'FF0000'
INFO_COLOR = '03b2f8'

# Discord の埋め込みフィールドの上限
FIELD_LIMIT = 1024


class DiscordNotifier:
    """Discord通知クラス"""

    def __init__(self, webhook_url: Optional[str] = None, timezone: str = "Asia/Tokyo"):
        """
        Args:
            webhook_url: Discord Webhook URL（省略時は DISCORD_WEBHOOK_URL）
            timezone: フィールドに表示する時刻のタイムゾーン
        """
        self.webhook_url = webhook_url or os.getenv("DISCORD_WEBHOOK_URL")
        if not self.webhook_url:
            raise ValueError("DISCORD_WEBHOOK_URL が設定されていません")
        self.timezone = pytz.timezone(timezone)

    def _now(self) -> str:
        return datetime.now(self.timezone).strftime('%Y-%m-%d %H:%M:%S %Z')

    def send_notification(
        self,
        title: str,
        description: str,
        color: str = INFO_COLOR,
        fields: Optional[List[Dict]] = None,
    ) -> bool:
        """
        Discord通知を送信

        Args:
            title: 通知タイトル
            description: 通知内容
            color: 埋め込みの色 (16進数)
            fields: 追加フィールド（name, value, inline）

        Returns:
            送信成功かどうか
        """
        webhook = DiscordWebhook(url=self.webhook_url)
        embed = DiscordEmbed(title=title, description=description, color=color)
        for item in fields or []:
            embed.add_embed_field(
                name=item.get('name', ''),
                value=str(item.get('value', ''))[:FIELD_LIMIT],
                inline=item.get('inline', False),
            )
        embed.set_timestamp()
        webhook.add_embed(embed)

        response = webhook.execute()
        if response.status_code in (200, 204):
            print("📢 Discord通知を送信しました")
            return True
        print(f"⚠️  Discord通知の送信に失敗しました: {response.status_code}")
        return False

    def notify_reproduction_result(self, result) -> bool:
        """
        再現の合否を通知

        Args:
            result: reproductions.ReproductionResult

        Returns:
            送信成功かどうか
        """
        report = result.report
        fields = [
            {'name': '🧪 再現', 'value': result.name, 'inline': True},
            {'name': '🔁 反復数', 'value': str(result.horizon), 'inline': True},
            {'name': '⏱️ 実行時間', 'value': f"{result.elapsed:.1f}秒", 'inline': True},
            {'name': '🕒 完了時刻', 'value': self._now(), 'inline': False},
        ]
        if report is not None:
            summary = report.summary()
            fields.append({'name': '📊 最小マージン', 'value': f"{summary['worst_margin']:.3e}", 'inline': True})
            if summary['first_violation'] is not None:
                fields.append({'name': '❌ 最初の違反', 'value': f"k={summary['first_violation']}", 'inline': True})
        if result.error:
            fields.append({'name': '❌ エラー内容', 'value': result.error, 'inline': False})

        if result.success:
            title, description, color = "✅ 再現に合格", f"{result.name} の全てのチェックに合格しました", PASS_COLOR
        else:
            title, description, color = "❌ 再現が不合格", f"{result.name} で不合格のチェックがあります", FAIL_COLOR
        return self.send_notification(title=title, description=description, color=color, fields=fields)

    def notify_error(self, error_message: str, name: Optional[str] = None) -> bool:
        """
        エラーを通知

        Args:
            error_message: エラーメッセージ
            name: 再現名・実験名（オプション）

        Returns:
            送信成功かどうか
        """
        fields = [{'name': '❌ エラー内容', 'value': error_message, 'inline': False}]
        if name:
            fields.append({'name': '🧪 対象', 'value': name, 'inline': True})
        fields.append({'name': '🕒 発生時刻', 'value': self._now(), 'inline': True})
        return self.send_notification(
            title="❌ エラー発生",
            description="⚠️ 検証の実行中にエラーが発生しました",
            color=FAIL_COLOR,
            fields=fields,
        )


if __name__ == "__main__":
    import sys

    notifier = DiscordNotifier()
    if len(sys.argv) > 1 and sys.argv[1] == 'error':
        notifier.notify_error(error_message="テストエラーメッセージ", name="square-feasibility")
    else:
        notifier.send_notification(title="テスト通知", description="これはテスト通知です")
