import os
from dotenv import load_dotenv

# 加载环境变量
load_dotenv()

RESULTS_SQLITE_DB = os.getenv("RESULTS_SQLITE_DB", os.path.join(os.getcwd(), "zero_rate_results.db"))

POSTGRES_DSN = os.getenv("POSTGRES_DSN", "")

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# 蒙特卡洛/精确求和的默认并行度
SIM_WORKERS = int(os.getenv("SIM_WORKERS", "1"))

SHOW_PROGRESS = os.getenv("SHOW_PROGRESS", "0") == "1"

DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20080706"))
