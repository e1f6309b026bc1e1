"""二元对称信道与被动反馈信道

噪声来自基于计数器的 Philox 子流，子流由 (seed, trial, leg) 决定，
位置 i 上是否翻转只取决于该子流的第 i 个均匀随机数，因此各次试验可以
以任意顺序、在任意线程中执行，结果不变。
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from common.errors import InvalidParameterError

# 子流编号
FORWARD_LEG = 0
FEEDBACK_LEG = 1


@dataclass(frozen=True)
class NoiseStream:
    """一条噪声子流"""

    seed: int
    trial: int
    leg: int

    def uniforms(self, start: int, stop: int) -> np.ndarray:
        """第 start..stop-1 个位置上的均匀随机数"""
        if start < 0 or stop < start:
            raise InvalidParameterError(f"invalid position range [{start}, {stop})")
        sequence = SeedSequence(entropy=self.seed, spawn_key=(self.trial, self.leg))
        return Generator(Philox(sequence)).random(stop)[start:]

    def flips(self, crossover: float, start: int, length: int) -> np.ndarray:
        """位置 start 起 length 个符号的翻转指示"""
        if not (0.0 <= crossover <= 0.5):
            raise InvalidParameterError(f"crossover must lie in [0, 1/2], got {crossover}")
        if crossover == 0.0:
            return np.zeros(length, dtype=np.uint8)
        return (self.uniforms(start, start + length) < crossover).astype(np.uint8)


@dataclass(frozen=True)
class TrialStreams:
    """一次试验使用的前向与反馈子流"""

    forward: NoiseStream
    feedback: NoiseStream

    @classmethod
    def for_trial(cls, seed: int, trial: int) -> "TrialStreams":
        return cls(NoiseStream(seed, trial, FORWARD_LEG), NoiseStream(seed, trial, FEEDBACK_LEG))


def transmit(bits: np.ndarray, crossover: float, stream: NoiseStream, start: int = 0) -> np.ndarray:
    """经 BSC(crossover) 发送，bits 占据子流的位置 start..start+len-1"""
    bits = np.asarray(bits, dtype=np.uint8)
    return bits ^ stream.flips(crossover, start, len(bits))


def passive_feedback_step(forward_output_bit: int, p1: float, stream: NoiseStream, position: int) -> int:
    """接收端把收到的一个符号原样回传，发送端无延迟地看到 x'"""
    return int(forward_output_bit) ^ int(stream.flips(p1, position, 1)[0])


def passive_feedback(received: np.ndarray, p1: float, stream: NoiseStream, start: int = 0) -> np.ndarray:
    """整块回传，与逐符号调用 passive_feedback_step 的结果相同"""
    return transmit(received, p1, stream, start)
