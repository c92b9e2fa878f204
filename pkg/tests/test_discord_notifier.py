"""
Discord通知のテスト（Webhook はモックに差し替える）
"""

from types import SimpleNamespace
from unittest.mock import MagicMock, patch

import pytest

from discord_notifier import FAIL_COLOR, FIELD_LIMIT, PASS_COLOR, DiscordNotifier
from report import upper_check

WEBHOOK_URL = "https://discord.com/api/webhooks/test/token"


@pytest.fixture
def webhook():
    with patch('discord_notifier.DiscordWebhook') as webhook_cls, patch('discord_notifier.DiscordEmbed') as embed_cls:
        webhook_cls.return_value.execute.return_value = MagicMock(status_code=200)
        yield webhook_cls, embed_cls


def _fields(embed_cls):
    return {c.kwargs['name']: c.kwargs['value'] for c in embed_cls.return_value.add_embed_field.call_args_list}


def test_requires_webhook_url(monkeypatch):
    monkeypatch.delenv("DISCORD_WEBHOOK_URL", raising=False)
    with pytest.raises(ValueError):
        DiscordNotifier()


def test_url_from_environment(monkeypatch):
    monkeypatch.setenv("DISCORD_WEBHOOK_URL", WEBHOOK_URL)
    assert DiscordNotifier().webhook_url == WEBHOOK_URL


def test_send_notification(webhook):
    webhook_cls, embed_cls = webhook
    notifier = DiscordNotifier(WEBHOOK_URL)
    assert notifier.send_notification("タイトル", "本文", fields=[{'name': '長い', 'value': "x" * 3000}])
    webhook_cls.assert_called_once_with(url=WEBHOOK_URL)
    assert len(_fields(embed_cls)['長い']) == FIELD_LIMIT
    webhook_cls.return_value.add_embed.assert_called_once_with(embed_cls.return_value)


def test_send_notification_failure(webhook):
    webhook_cls, _ = webhook
    webhook_cls.return_value.execute.return_value = MagicMock(status_code=500)
    assert not DiscordNotifier(WEBHOOK_URL).send_notification("タイトル", "本文")


def test_notify_passed_reproduction(webhook):
    _, embed_cls = webhook
    result = SimpleNamespace(
        name='drs-1d', horizon=100, elapsed=0.5, success=True, error=None,
        report=upper_check('fpr', [0.5, 0.25], 1.0),
    )
    assert DiscordNotifier(WEBHOOK_URL).notify_reproduction_result(result)
    assert embed_cls.call_args.kwargs['color'] == PASS_COLOR
    fields = _fields(embed_cls)
    assert fields['🧪 再現'] == 'drs-1d'
    assert fields['🔁 反復数'] == '100'
    assert '❌ 最初の違反' not in fields


def test_notify_failed_reproduction(webhook):
    _, embed_cls = webhook
    result = SimpleNamespace(
        name='km-fpr', horizon=10, elapsed=1.0, success=False, error=None,
        report=upper_check('fpr', [0.5, 2.0], 1.0),
    )
    DiscordNotifier(WEBHOOK_URL).notify_reproduction_result(result)
    assert embed_cls.call_args.kwargs['color'] == FAIL_COLOR
    assert _fields(embed_cls)['❌ 最初の違反'] == 'k=1'


def test_notify_error(webhook):
    _, embed_cls = webhook
    assert DiscordNotifier(WEBHOOK_URL).notify_error("発散しました", name='optimal-fpr')
    fields = _fields(embed_cls)
    assert fields['❌ エラー内容'] == "発散しました"
    assert fields['🧪 対象'] == 'optimal-fpr'
