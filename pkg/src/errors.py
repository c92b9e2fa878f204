"""
例外モジュール
ライブラリ全体で使う例外クラスを定義
"""


class SplittingError(Exception):
    """splitrate の例外の基底クラス"""


class InvalidArgumentError(SplittingError, ValueError):
    """不正な引数（非有限値、形状不一致、退化した基底など）"""


class InvalidConfigError(SplittingError, ValueError):
    """アルゴリズムや実験の設定が前提条件を満たしていない"""


class ConfigParseError(InvalidConfigError):
    """設定ファイルのパースエラー（行・列つき）"""

    def __init__(self, message: str, line: int = None, column: int = None):
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f" ({line}行目"
            location += f", {column}列目)" if column is not None else ")"
        super().__init__(f"{message}{location}")


class UnknownReproductionError(SplittingError, ValueError):
    """登録されていない再現名"""

    def __init__(self, name: str, available):
        self.name = name
        self.available = list(available)
        listing = ", ".join(self.available)
        super().__init__(f"未登録の再現名です: {name}（利用可能: {listing}）")


class UnsupportedError(SplittingError, NotImplementedError):
    """この関数種別ではサポートされていない操作"""


class UnsupportedScheduleError(UnsupportedError):
    """τ_k = 0 を含む緩和スケジュールでは評価できない"""


class SolverFailureError(SplittingError, RuntimeError):
    """部分問題ソルバーが許容誤差に達しなかった"""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message}（残差: {residual:.3e}）")


class NonConvergenceError(SplittingError, RuntimeError):
    """参照用の不動点計算が収束しなかった"""

    def __init__(self, budget: int, residual: float):
        self.budget = budget
        self.residual = residual
        super().__init__(
            f"参照不動点が収束しませんでした（反復上限: {budget}, 最終残差: {residual:.3e}）"
        )
