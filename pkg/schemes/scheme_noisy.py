import logging

import numpy as np

from common.errors import InvalidParameterError
from common.model import Case, Codebook, SchemeName, SchemeParams, TrialTranscript
from schemes.scheme_noiseless import NoiselessSwitch
from transmission.channel import TrialStreams, passive_feedback
from transmission.codes import threshold_distance

logger = logging.getLogger(__name__)


class NoisySwitch(NoiselessSwitch):
    """有噪被动反馈、一次切换

    发送端只能看到经 BSC(p1) 回传的 x'，并据此选择候选对。
    接收端若第三近的码字距离不超过第二近的加阈值 ⌊tγn/2⌋（Case 1），
    第一阶段结束后立即判为最近的码字；否则（Case 2）在最近的两个码字之间判决。
    p1 = 0 时发送端看到的就是 y。
    """

    name = SchemeName.NOISY_SWITCH

    def __init__(self, params: SchemeParams, codebook: Codebook):
        if params.channel.p1 >= 0.5:
            raise InvalidParameterError(f"noisy switching needs p1 < 1/2, got {params.channel.p1}")
        super().__init__(params, codebook)
        self.threshold = threshold_distance(params.t, params.phase1_length)

    def transmitter_view(self, received: np.ndarray, streams: TrialStreams) -> np.ndarray:
        return passive_feedback(received, self.params.channel.p1, streams.feedback)

    def case_taken(self, sorted_distances: np.ndarray) -> Case:
        if len(sorted_distances) >= 3 and sorted_distances[2] <= sorted_distances[1] + self.threshold:
            return Case.CASE1
        return Case.CASE2


def run_noisy_switch_trial(
    params: SchemeParams, codebook: Codebook, true_message: int, streams: TrialStreams
) -> TrialTranscript:
    return NoisySwitch(params, codebook).run_trial(true_message, streams)
