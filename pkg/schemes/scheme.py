import abc
import logging

import numpy as np

from common.errors import InvalidParameterError
from common.model import Codebook, SchemeName, SchemeParams, TrialTranscript
from transmission.channel import TrialStreams

logger = logging.getLogger(__name__)


class Scheme(abc.ABC):
    """传输方案基类

    子类实现一次完整传输 run_trial；码字排序、候选对到第二阶段码字的映射
    以及候选对内的最终判决由基类统一提供，收发两端使用相同的约定。
    """

    name: SchemeName

    def __init__(self, params: SchemeParams, codebook: Codebook):
        """初始化方案

        Args:
            params: 方案参数
            codebook: 第一阶段（无反馈基线为全程）使用的码本
        """
        if codebook.M != params.M:
            raise InvalidParameterError(f"codebook has {codebook.M} words, params expect M={params.M}")
        self.params = params
        self.codebook = codebook

    @classmethod
    @abc.abstractmethod
    def from_params(cls, params: SchemeParams) -> "Scheme":
        """按参数中的种子确定性地构造码本并创建方案"""
        pass

    @abc.abstractmethod
    def run_trial(self, true_message: int, streams: TrialStreams) -> TrialTranscript:
        """执行一次传输

        Args:
            true_message: 真实消息下标
            streams: 本次试验的噪声子流

        Returns:
            TrialTranscript: 传输记录
        """
        pass

    def _check_message(self, true_message: int):
        if not (0 <= true_message < self.params.M):
            raise InvalidParameterError(f"true message must lie in [0, {self.params.M}), got {true_message}")

    def _check_length(self, codebook: Codebook, expected: int, what: str):
        if codebook.L != expected:
            raise InvalidParameterError(f"{what} codebook has length {codebook.L}, expected {expected}")

    @staticmethod
    def distances(words: np.ndarray, received: np.ndarray) -> np.ndarray:
        """各码字到 received 的汉明距离"""
        return np.count_nonzero(words != received, axis=1)

    @staticmethod
    def ranking(distances: np.ndarray) -> tuple[int, ...]:
        """按距离从小到大排序，距离相同时下标小的在前"""
        return tuple(int(i) for i in np.argsort(distances, kind="stable"))

    @staticmethod
    def top_pair(ranking: tuple[int, ...]) -> tuple[int, int]:
        """最可能的两个消息，按下标排序"""
        first, second = ranking[0], ranking[1]
        return (first, second) if first < second else (second, first)

    @staticmethod
    def pair_word(pair: tuple[int, int], message: int, length: int) -> np.ndarray:
        """候选对中下标小的消息对应全零，下标大的对应全一"""
        fill = 0 if message == pair[0] else 1
        return np.full(length, fill, dtype=np.uint8)

    @staticmethod
    def intermediate_block(length: int) -> np.ndarray:
        """发送端候选对不含真实消息时发送：前一半为零，后一半为一"""
        block = np.ones(length, dtype=np.uint8)
        block[: length // 2] = 0
        return block

    def decide_within_pair(
        self, pair: tuple[int, int], phase1_distances: np.ndarray, final_received: np.ndarray
    ) -> int:
        """在候选对内按全程总汉明距离判决，平局判给下标小的消息"""
        totals = [
            int(phase1_distances[message])
            + int(np.count_nonzero(self.pair_word(pair, message, len(final_received)) != final_received))
            for message in pair
        ]
        return pair[0] if totals[0] <= totals[1] else pair[1]
