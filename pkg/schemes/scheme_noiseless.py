import logging

import numpy as np

from common.model import Case, Codebook, ErrorCategory, SchemeName, SchemeParams, TrialTranscript
from schemes.scheme import Scheme
from transmission.channel import TrialStreams, transmit
from transmission.codes import make_almost_simplex

logger = logging.getLogger(__name__)


class NoiselessSwitch(Scheme):
    """无噪反馈、一次切换

    第一阶段发送近似单纯形码字；发送端看到 y 后选出距离最近的两个消息，
    第二阶段在这两个消息之间发送互补码字（全零/全一）。
    接收端在自己的两个候选之间按全程总距离判决。
    """

    name = SchemeName.NOISELESS_SWITCH

    def __init__(self, params: SchemeParams, codebook: Codebook):
        super().__init__(params, codebook)
        self._check_length(codebook, params.phase1_length, "phase-I")

    @classmethod
    def from_params(cls, params: SchemeParams):
        codebook = make_almost_simplex(params.M, params.phase1_length, params.slack_fraction, params.seed)
        return cls(params, codebook)

    def transmitter_view(self, received: np.ndarray, streams: TrialStreams) -> np.ndarray:
        """发送端经反馈看到的第一阶段输出"""
        return received.copy()

    def case_taken(self, sorted_distances: np.ndarray) -> Case:
        """接收端在第一阶段之后的分支"""
        return Case.CASE2

    def run_trial(self, true_message: int, streams: TrialStreams) -> TrialTranscript:
        self._check_message(true_message)
        p = self.params.channel.p
        n1 = self.params.phase1_length
        n2 = self.params.n - n1
        words = self.codebook.words

        # 第一阶段
        sent = words[true_message]
        received = transmit(sent, p, streams.forward)
        receiver_distances = self.distances(words, received)
        receiver_ranking = self.ranking(receiver_distances)

        # 发送端根据反馈选择第二阶段码字
        seen = self.transmitter_view(received, streams)
        transmitter_distances = self.distances(words, seen)
        transmitter_ranking = self.ranking(transmitter_distances)
        transmitter_pair = self.top_pair(transmitter_ranking)
        if true_message in transmitter_pair:
            word = self.pair_word(transmitter_pair, true_message, n2)
        else:
            word = self.intermediate_block(n2)
        final_received = transmit(word, p, streams.forward, start=n1)

        # 接收端判决
        case = self.case_taken(receiver_distances[list(receiver_ranking)])
        if case == Case.CASE1:
            receiver_pair = None
            decision = receiver_ranking[0]
            category = ErrorCategory.P1
        else:
            receiver_pair = self.top_pair(receiver_ranking)
            decision = self.decide_within_pair(receiver_pair, receiver_distances, final_received)
            if true_message not in receiver_pair:
                category = ErrorCategory.P1
            elif transmitter_pair != receiver_pair:
                category = ErrorCategory.P2N
            else:
                category = ErrorCategory.P2

        return TrialTranscript(
            true_message=true_message,
            phase1_sent=sent,
            phase1_received=received,
            phase1_feedback_seen=seen,
            receiver_distances=tuple(int(d) for d in receiver_distances),
            transmitter_distances=tuple(int(d) for d in transmitter_distances),
            receiver_ranking=receiver_ranking,
            transmitter_ranking=transmitter_ranking,
            case_taken=case,
            receiver_pair=receiver_pair,
            transmitter_pair=transmitter_pair,
            decision=decision,
            error_category=ErrorCategory.NONE if decision == true_message else category,
        )


def run_noiseless_switch_trial(
    params: SchemeParams, codebook: Codebook, true_message: int, streams: TrialStreams
) -> TrialTranscript:
    return NoiselessSwitch(params, codebook).run_trial(true_message, streams)
