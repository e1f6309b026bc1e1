import logging

from common.config import LOG_LEVEL


def setup_logging(level: str | None = None):
    """设置日志配置

    - 添加线程名到日志格式
    - 设置日志级别（默认读取 LOG_LEVEL）
    """
    # 设置日志格式，添加线程名
    log_format = "%(asctime)s - %(threadName)s - %(name)s - %(levelname)s - %(message)s"

    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=log_format,
        handlers=[
            # 控制台输出
            logging.StreamHandler()
        ],
    )
