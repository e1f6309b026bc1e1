class ZeroRateError(Exception):
    """所有库内错误的基类，exit_code 供命令行映射退出码"""

    exit_code = 1


class InvalidParameterError(ZeroRateError, ValueError):
    """参数不满足前置条件（定义域错误）"""

    exit_code = 2


class NumericalError(ZeroRateError, ArithmeticError):
    """求根区间无变号或迭代不收敛"""

    exit_code = 3


class CodebookConstructionError(ZeroRateError):
    """重试次数用尽仍未得到满足距离窗口的码本"""

    exit_code = 4
