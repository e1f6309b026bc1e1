import math
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

import numpy as np

from common.errors import InvalidParameterError

# 整数化时的容差，避免 0.2*300 这类浮点数被向下取整成 59
LATTICE_EPS = 1e-9


def floor_count(value: float) -> int:
    """按统一约定把实数阈值/长度向下取整为符号个数"""
    return int(math.floor(value + LATTICE_EPS))


class SchemeName(Enum):
    """传输方案"""

    NO_FEEDBACK = "no-feedback"  # 无反馈基线
    NOISELESS_SWITCH = "noiseless-switch"  # 无噪反馈，一次切换
    NOISY_SWITCH = "noisy-switch"  # 有噪被动反馈，一次切换
    ACTIVE = "active"  # 主动反馈，三阶段


class Case(Enum):
    """接收端在第一阶段之后的判决分支"""

    CASE1 = "case1"  # 第一阶段结束立即判决
    CASE2 = "case2"  # 在最可能的两个消息之间等待第二阶段


class ErrorCategory(Enum):
    """错误类别"""

    NONE = "none"
    P1 = "P1"  # 第一阶段失败：Case 1 判错，或真实消息不在接收端的两个候选中
    P2 = "P2"  # 候选对一致且包含真实消息，二选一检验失败（主动方案中为反馈译码失败）
    P2N = "P2n"  # 接收端候选对包含真实消息，但发送端看到的候选对不同
    P3 = "P3"  # 主动方案第三阶段二选一检验失败


@dataclass(frozen=True)
class ChannelParams:
    """前向信道 BSC(p) 与反馈信道 BSC(p1) 的参数"""

    # 前向信道交叉概率，0 <= p < 1/2；指数公式要求 p > 0，模拟允许 p = 0
    p: float
    # 反馈信道交叉概率，0 <= p1 <= 1/2；0 表示无噪反馈
    p1: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p < 0.5):
            raise InvalidParameterError(f"p must lie in [0, 1/2), got {self.p}")
        if not (0.0 <= self.p1 <= 0.5):
            raise InvalidParameterError(f"p1 must lie in [0, 1/2], got {self.p1}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def q1(self) -> float:
        return 1.0 - self.p1

    @property
    def z(self) -> float:
        return math.inf if self.p == 0.0 else self.q / self.p

    @property
    def noiseless(self) -> bool:
        """反馈无噪时 z1 不存在"""
        return self.p1 == 0.0

    @property
    def z1(self) -> float | None:
        return None if self.noiseless else self.q1 / self.p1


@dataclass
class ExponentReport:
    """指数计算结果（单位：nats/符号）"""

    p: float
    p1: float
    E: float
    E2: float
    F: float
    F1: float
    # 使 min{G1, G2} 最大的阈值 t*
    t_star: float
    # 第一阶段所占比例 γ*，为 1 时表示不切换
    gamma_star: float
    p0: float
    g1_at_t_star: float
    g2_at_t_star: float
    # 主动反馈方案的指数及其参数，p1 在 {0, 1/2} 时不适用
    active: float | None = None
    gamma_active: float | None = None
    gamma1_active: float | None = None
    created_at: datetime = field(default_factory=datetime.now)

    def to_row(self) -> dict:
        return {
            "p": self.p,
            "p1": self.p1,
            "E": self.E,
            "E2": self.E2,
            "F": self.F,
            "F1": self.F1,
            "t_star": self.t_star,
            "gamma_star": self.gamma_star,
            "p0": self.p0,
            "G1_at_t_star": self.g1_at_t_star,
            "G2_at_t_star": self.g2_at_t_star,
            "active": self.active,
            "gamma_active": self.gamma_active,
            "gamma1_active": self.gamma1_active,
        }


@dataclass(frozen=True)
class ExactProbability:
    """组合精确计算得到的对数概率"""

    # 自然对数概率，不可行约束时为 -inf
    log_p: float
    # 码长 m
    m: int
    # 归一化指数 -(scale/m)·log_p
    normalized_exponent: float
    # 整数约束是否可行；不可行时概率为 0
    feasible: bool = True

    @classmethod
    def from_log(cls, log_p: float, m: int, scale: float) -> "ExactProbability":
        log_p = min(float(log_p), 0.0)
        return cls(log_p=log_p, m=m, normalized_exponent=-scale * log_p / m)

    @classmethod
    def infeasible(cls, m: int) -> "ExactProbability":
        return cls(log_p=-math.inf, m=m, normalized_exponent=math.inf, feasible=False)

    @property
    def probability(self) -> float:
        return math.exp(self.log_p)


@dataclass(frozen=True, eq=False)
class Codebook:
    """M 个长度为 L 的二进制码字"""

    # 形状 (M, L) 的 0/1 矩阵，只读
    words: np.ndarray
    # 码字两两距离相对 L/2 的最大偏差（符号数）
    distance_slack: int = field(init=False)

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint8)
        if words.ndim != 2 or words.shape[0] < 1:
            raise InvalidParameterError("codebook words must form a non-empty (M, L) matrix")
        if np.any(words > 1):
            raise InvalidParameterError("codebook words must be binary")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)
        distances = self.pairwise_distances()
        if self.M > 1:
            off_diagonal = distances[~np.eye(self.M, dtype=bool)]
            slack = int(math.ceil(np.max(np.abs(off_diagonal - self.L / 2))))
        else:
            slack = 0
        object.__setattr__(self, "distance_slack", slack)

    @property
    def M(self) -> int:
        return self.words.shape[0]

    @property
    def L(self) -> int:
        return self.words.shape[1]

    def pairwise_distances(self) -> np.ndarray:
        """两两汉明距离矩阵"""
        w = self.words.astype(np.int32)
        return w @ (1 - w).T + (1 - w) @ w.T

    def padded(self, length: int) -> "Codebook":
        """在末尾补齐全零列，所有码字在补齐位置上相同"""
        if length < self.L:
            raise InvalidParameterError(f"cannot pad a length-{self.L} codebook down to {length}")
        pad = np.zeros((self.M, length - self.L), dtype=np.uint8)
        return Codebook(np.hstack([self.words, pad]))

    def to_text(self) -> str:
        """每行一个码字，字符为 0/1"""
        return "\n".join("".join(str(b) for b in row) for row in self.words) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Codebook":
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows or any(set(row) - {"0", "1"} for row in rows):
            raise InvalidParameterError("codebook text must contain lines of 0/1 characters")
        if len({len(row) for row in rows}) != 1:
            raise InvalidParameterError("codebook lines must have equal length")
        return cls(np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8))


@dataclass(frozen=True)
class SchemeParams:
    """传输方案参数"""

    # 总码长
    n: int
    # 消息数
    M: int
    channel: ChannelParams
    # 第一阶段比例 γ
    gamma: float
    # 判决阈值比例 t
    t: float = 0.0
    # 主动方案中第二阶段（反馈编码）比例 γ1
    gamma1: float = 0.0
    slack_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidParameterError(f"n must be at least 2, got {self.n}")
        if self.M < 2:
            raise InvalidParameterError(f"M must be at least 2, got {self.M}")
        if not (0.0 < self.gamma < 1.0):
            raise InvalidParameterError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.t < 0.0:
            raise InvalidParameterError(f"t must be non-negative, got {self.t}")
        if self.gamma1 < 0.0 or self.gamma + self.gamma1 >= 1.0:
            raise InvalidParameterError(f"need gamma1 >= 0 and gamma + gamma1 < 1, got {self.gamma}, {self.gamma1}")
        if not (0.0 < self.slack_fraction < 0.5):
            raise InvalidParameterError(f"slack_fraction must lie in (0, 1/2), got {self.slack_fraction}")

    @property
    def phase1_length(self) -> int:
        return floor_count(self.gamma * self.n)

    @property
    def feedback_length(self) -> int:
        return floor_count(self.gamma1 * self.n)

    @property
    def final_length(self) -> int:
        """最后一个（二选一）阶段的长度"""
        return self.n - self.phase1_length - self.feedback_length

    def with_n(self, n: int) -> "SchemeParams":
        return SchemeParams(
            n=n,
            M=self.M,
            channel=self.channel,
            gamma=self.gamma,
            t=self.t,
            gamma1=self.gamma1,
            slack_fraction=self.slack_fraction,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "M": self.M,
            "p": self.channel.p,
            "p1": self.channel.p1,
            "gamma": self.gamma,
            "t": self.t,
            "gamma1": self.gamma1,
            "slack_fraction": self.slack_fraction,
            "seed": self.seed,
        }


@dataclass
class TrialTranscript:
    """一次传输的完整记录"""

    true_message: int
    phase1_sent: np.ndarray
    phase1_received: np.ndarray
    # 发送端经反馈看到的 y'，无反馈方案为 None
    phase1_feedback_seen: np.ndarray | None
    # 各码字到 y 的距离（第一阶段）
    receiver_distances: tuple[int, ...]
    # 各码字到 x' 的距离（第一阶段），无反馈方案为空
    transmitter_distances: tuple[int, ...]
    receiver_ranking: tuple[int, ...]
    transmitter_ranking: tuple[int, ...]
    case_taken: Case
    receiver_pair: tuple[int, int] | None
    transmitter_pair: tuple[int, int] | None
    decision: int
    error_category: ErrorCategory

    @property
    def pairs_match(self) -> bool:
        return self.receiver_pair == self.transmitter_pair

    def to_record(self) -> dict:
        """按固定字段顺序序列化为一条记录（JSON Lines 的一行）"""
        return {
            "true_message": self.true_message,
            "phase1_sent": "".join(map(str, self.phase1_sent.tolist())),
            "phase1_received": "".join(map(str, self.phase1_received.tolist())),
            "phase1_feedback_seen": (
                None
                if self.phase1_feedback_seen is None
                else "".join(map(str, self.phase1_feedback_seen.tolist()))
            ),
            "receiver_ranking": list(self.receiver_ranking),
            "transmitter_ranking": list(self.transmitter_ranking),
            "case_taken": self.case_taken.value,
            "receiver_pair": None if self.receiver_pair is None else list(self.receiver_pair),
            "transmitter_pair": None if self.transmitter_pair is None else list(self.transmitter_pair),
            "decision": self.decision,
            "error_category": self.error_category.value,
        }


# 汇总中统计的错误类别
SUMMARY_CATEGORIES = (ErrorCategory.P1, ErrorCategory.P2, ErrorCategory.P2N, ErrorCategory.P3)


@dataclass
class SimulationSummary:
    """蒙特卡洛估计结果"""

    scheme: SchemeName
    trials: int
    errors_by_category: dict[ErrorCategory, int]
    total_errors: int
    # 各类别及总错误率的 95% Wilson 区间
    wilson_intervals: dict[str, tuple[float, float]]
    # 发送端与接收端候选对不一致的次数
    pair_mismatches: int
    params: dict
    created_at: datetime = field(default_factory=datetime.now)

    @property
    def error_rate(self) -> float:
        return self.total_errors / self.trials

    def to_row(self) -> dict:
        row = {"scheme": self.scheme.value, **self.params, "trials": self.trials}
        for category in SUMMARY_CATEGORIES:
            row[f"errors_{category.value}"] = self.errors_by_category.get(category, 0)
        row["total_errors"] = self.total_errors
        row["pair_mismatches"] = self.pair_mismatches
        for name, (lo, hi) in self.wilson_intervals.items():
            row[f"wilson_{name}_lo"] = lo
            row[f"wilson_{name}_hi"] = hi
        return row


@dataclass(frozen=True)
class SlopePoint:
    """码长阶梯上的一个点：-ln(错误率)/n 及其区间"""

    n: int
    trials: int
    errors: int
    error_rate: float
    # 错误数为 0 时没有定义
    slope: float | None
    slope_interval: tuple[float, float]
    # 错误数不少于阈值时才可靠
    reliable: bool

    def to_row(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "slope": self.slope,
            "slope_lo": self.slope_interval[0],
            "slope_hi": self.slope_interval[1],
            "reliable": self.reliable,
        }


@dataclass
class RunConfig:
    """命令行一次运行的全部参数"""

    command: str
    p: float | None = None
    p1: float = 0.0
    # 未给出时由各命令取默认值（simulate 取最优 t*）
    t: float | None = None
    t1: float = 0.0
    gamma: float | None = None
    gamma1: float | None = None
    M: int = 3
    n: int = 1200
    m: int | None = None
    trials: int = 10000
    seed: int = 0
    m_ladder: list[int] = field(default_factory=list)
    n_ladder: list[int] = field(default_factory=list)
    p_grid: list[float] = field(default_factory=list)
    scheme: SchemeName = SchemeName.NOISY_SWITCH
    workers: int = 1
    output_format: str = "csv"
    output_path: str | None = None
    store: bool = False
    # 非空时 simulate 把每次试验的记录写成 JSON Lines
    transcript_path: str | None = None
