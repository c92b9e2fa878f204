"""
splitrate
分割法（KM・DRS・PRS・FBS・ADMM）の収束率を実行可能な形で検証するハーネス
"""

__version__ = "0.1.0"
