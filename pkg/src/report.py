"""
境界レポートモジュール
理論上の境界値と実測値の組を保持し、合否とマージンを判定
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

import numpy as np

# 許容誤差の既定値（絶対 1e-9 + 相対 1e-12）
DEFAULT_ATOL = 1e-9
DEFAULT_RTOL = 1e-12


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float).ravel()
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class BoundReport:
    """
    反復ごとの境界値・実測値・マージン

    margin は「境界を満たしている余裕」で、上界チェックでは bound − measured、
    下界チェックでは measured − bound。margin ≥ −tolerance なら合格。
    """

    name: str
    bound: np.ndarray
    measured: np.ndarray
    margin: np.ndarray
    tolerance: np.ndarray
    notes: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        # NaN のマージンは不合格
        return bool(np.all(self.margin >= -self.tolerance))

    @property
    def worst_margin(self) -> float:
        if self.margin.size == 0:
            return 0.0
        return float(np.min(self.margin))

    @property
    def first_violation(self) -> Optional[int]:
        failing = ~(self.margin >= -self.tolerance)
        if not np.any(failing):
            return None
        return int(np.argmax(failing))

    def __len__(self) -> int:
        return int(self.margin.size)

    def summary(self) -> Dict:
        """集計値のみの辞書"""
        return {
            'name': self.name,
            'passed': self.passed,
            'worst_margin': self.worst_margin,
            'first_violation': self.first_violation,
            'count': len(self),
            'notes': self.notes,
        }

    def to_dict(self) -> Dict:
        """JSON出力用の辞書（反復ごとの bound / measured / margin / pass を含む）"""
        data = self.summary()
        data['checks'] = [
            {
                'k': i,
                'bound': float(b),
                'measured': float(m),
                'margin': float(g),
                'pass': bool(g >= -t),
            }
            for i, (b, m, g, t) in enumerate(
                zip(self.bound, self.measured, self.margin, self.tolerance)
            )
        ]
        return data


def _tolerance(bound, measured, atol: float, rtol: float) -> np.ndarray:
    scale = np.maximum(np.abs(bound), np.abs(measured))
    scale = np.where(np.isfinite(scale), scale, 0.0)
    return atol + rtol * scale


def upper_check(
    name: str,
    measured: Iterable,
    bound: Iterable,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    notes: Optional[Dict] = None,
) -> BoundReport:
    """
    measured ≤ bound を反復ごとに判定

    Args:
        name: チェック名
        measured: 実測値の列
        bound: 境界値の列（スカラーならブロードキャスト）
        atol: 絶対許容誤差
        rtol: 相対許容誤差
        notes: レポートに添える補足情報

    Returns:
        BoundReport
    """
    measured = np.array(measured, dtype=float).ravel()
    bound = np.broadcast_to(np.array(bound, dtype=float), measured.shape)
    with np.errstate(invalid='ignore'):
        margin = bound - measured
    return BoundReport(
        name=name,
        bound=_readonly(bound),
        measured=_readonly(measured),
        margin=_readonly(margin),
        tolerance=_readonly(_tolerance(bound, measured, atol, rtol)),
        notes=dict(notes or {}),
    )


def lower_check(
    name: str,
    measured: Iterable,
    bound: Iterable,
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
    notes: Optional[Dict] = None,
) -> BoundReport:
    """measured ≥ bound を反復ごとに判定（引数は upper_check と同じ）"""
    measured = np.array(measured, dtype=float).ravel()
    bound = np.broadcast_to(np.array(bound, dtype=float), measured.shape)
    with np.errstate(invalid='ignore'):
        margin = measured - bound
    return BoundReport(
        name=name,
        bound=_readonly(bound),
        measured=_readonly(measured),
        margin=_readonly(margin),
        tolerance=_readonly(_tolerance(bound, measured, atol, rtol)),
        notes=dict(notes or {}),
    )


def merge_reports(name: str, reports: Iterable[BoundReport], notes: Optional[Dict] = None) -> BoundReport:
    """
    複数のレポートを連結して1つにまとめる

    個別レポートの合否は notes['parts'] に残す（同名の部分は name#2, name#3 と番号をつける）。
    """
    reports = list(reports)
    parts = {}
    for r in reports:
        key, number = r.name, 1
        while key in parts:
            number += 1
            key = f"{r.name}#{number}"
        parts[key] = r.summary()
    merged_notes = {'parts': parts}
    merged_notes.update(notes or {})
    if not reports:
        empty = _readonly([])
        return BoundReport(name, empty, empty, empty, empty, merged_notes)
    return BoundReport(
        name=name,
        bound=_readonly(np.concatenate([r.bound for r in reports])),
        measured=_readonly(np.concatenate([r.measured for r in reports])),
        margin=_readonly(np.concatenate([r.margin for r in reports])),
        tolerance=_readonly(np.concatenate([r.tolerance for r in reports])),
        notes=merged_notes,
    )
