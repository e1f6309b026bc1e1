import logging
from itertools import combinations

import numpy as np
from numpy.random import Generator, Philox

from common.errors import CodebookConstructionError, InvalidParameterError
from common.model import Codebook, floor_count

logger = logging.getLogger(__name__)

# 随机构造码本的最大重试次数
MAX_RETRIES = 100
DEFAULT_SLACK_FRACTION = 0.05


def threshold_distance(t: float, block_length: int) -> int:
    """判决阈值 ⌊t·block_length/2⌋，方案与精确计算共用这一取整约定"""
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    return floor_count(t * block_length / 2.0)


def make_simplex3(m: int) -> Codebook:
    """三段式单纯形三码字：x1 全零，x2 在第一、二段为 1，x3 在第一、三段为 1

    Args:
        m: 码长，必须是 3 的倍数

    Returns:
        Codebook: 两两距离均为 2m/3
    """
    if m <= 0 or m % 3 != 0:
        raise InvalidParameterError(f"m must be a positive multiple of 3, got {m}")
    k = m // 3
    zeros, ones = np.zeros(k, dtype=np.uint8), np.ones(k, dtype=np.uint8)
    words = np.vstack(
        [
            np.concatenate([zeros, zeros, zeros]),
            np.concatenate([ones, ones, zeros]),
            np.concatenate([ones, zeros, ones]),
        ]
    )
    return Codebook(words)


def make_almost_simplex(M: int, L: int, slack_fraction: float = DEFAULT_SLACK_FRACTION, seed: int = 0) -> Codebook:
    """随机选取码字，直到所有两两距离都落在 L/2 ± slack_fraction·L 内

    Args:
        M: 码字个数
        L: 码长
        slack_fraction: 允许的距离偏差比例
        seed: 随机种子，相同参数得到相同码本

    Returns:
        Codebook: 满足距离窗口的码本
    """
    if M < 2:
        raise InvalidParameterError(f"M must be at least 2, got {M}")
    if L < 1:
        raise InvalidParameterError(f"L must be positive, got {L}")
    if not (0.0 < slack_fraction < 0.5):
        raise InvalidParameterError(f"slack_fraction must lie in (0, 1/2), got {slack_fraction}")

    rng = Generator(Philox(seed))
    lo, hi = L / 2 - slack_fraction * L, L / 2 + slack_fraction * L
    off_diagonal = ~np.eye(M, dtype=bool)
    for attempt in range(1, MAX_RETRIES + 1):
        codebook = Codebook(rng.integers(0, 2, size=(M, L), dtype=np.uint8))
        distances = codebook.pairwise_distances()[off_diagonal]
        if np.all((distances >= lo) & (distances <= hi)):
            logger.debug("almost-simplex codebook M=%d L=%d found after %d attempt(s)", M, L, attempt)
            return codebook
    raise CodebookConstructionError(
        f"no codebook with M={M}, L={L} inside L/2 ± {slack_fraction}·L after {MAX_RETRIES} attempts; "
        "relax slack_fraction or increase L"
    )


def make_complementary_pair(L: int) -> Codebook:
    """两个码字的最优码：全零与全一，距离为 L"""
    if L < 1:
        raise InvalidParameterError(f"L must be positive, got {L}")
    return Codebook(np.vstack([np.zeros(L, dtype=np.uint8), np.ones(L, dtype=np.uint8)]))


def message_pairs(M: int) -> list[tuple[int, int]]:
    """全部无序消息对，按字典序排列"""
    return list(combinations(range(M), 2))


def make_pair_codebook(
    M: int, L: int, slack_fraction: float = DEFAULT_SLACK_FRACTION, seed: int = 0
) -> Codebook:
    """反馈信道上传送消息对的码本，第 i 个码字对应 message_pairs(M)[i]

    只有一个消息对（M = 2）时不需要传送任何信息，返回单个全零码字。
    """
    pairs = message_pairs(M)
    if len(pairs) == 1:
        return Codebook(np.zeros((1, L), dtype=np.uint8))
    return make_almost_simplex(len(pairs), L, slack_fraction, seed)
