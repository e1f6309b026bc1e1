import logging

from common.errors import InvalidParameterError
from common.model import Case, Codebook, ErrorCategory, SchemeName, SchemeParams, TrialTranscript
from schemes.scheme import Scheme
from transmission.channel import TrialStreams, transmit
from transmission.codes import make_almost_simplex, make_pair_codebook, message_pairs

logger = logging.getLogger(__name__)


class ActiveFeedback(Scheme):
    """主动反馈、三阶段

    第一阶段发送消息码字；第二阶段接收端把自己最可能的两个消息组成的无序对
    编码后经反馈信道发给发送端；第三阶段发送端在译出的候选对之间发送互补码字，
    接收端在自己的候选对内按第一、三阶段的总距离判决。
    """

    name = SchemeName.ACTIVE

    def __init__(self, params: SchemeParams, codebook: Codebook, pair_codebook: Codebook):
        super().__init__(params, codebook)
        p1 = params.channel.p1
        if not (0.0 < p1 < 0.5):
            raise InvalidParameterError(f"active feedback needs p1 in (0, 1/2), got {p1}")
        if params.feedback_length < 1:
            raise InvalidParameterError("active feedback needs a non-empty phase II (gamma1 * n >= 1)")
        self._check_length(codebook, params.phase1_length, "phase-I")
        self._check_length(pair_codebook, params.feedback_length, "pair")
        self.pairs = message_pairs(params.M)
        if pair_codebook.M != len(self.pairs):
            raise InvalidParameterError(f"pair codebook needs {len(self.pairs)} words, got {pair_codebook.M}")
        self.pair_codebook = pair_codebook

    @classmethod
    def from_params(cls, params: SchemeParams) -> "ActiveFeedback":
        codebook = make_almost_simplex(params.M, params.phase1_length, params.slack_fraction, params.seed)
        pair_codebook = make_pair_codebook(params.M, params.feedback_length, params.slack_fraction, params.seed + 1)
        return cls(params, codebook, pair_codebook)

    def run_trial(self, true_message: int, streams: TrialStreams) -> TrialTranscript:
        self._check_message(true_message)
        p, p1 = self.params.channel.p, self.params.channel.p1
        n1, nf = self.params.phase1_length, self.params.feedback_length
        n3 = self.params.n - n1 - nf
        words = self.codebook.words

        # 第一阶段
        sent = words[true_message]
        received = transmit(sent, p, streams.forward)
        receiver_distances = self.distances(words, received)
        receiver_ranking = self.ranking(receiver_distances)
        receiver_pair = self.top_pair(receiver_ranking)

        # 第二阶段：接收端经反馈信道报告候选对，发送端最小距离译码
        pair_word = self.pair_codebook.words[self.pairs.index(receiver_pair)]
        feedback_received = transmit(pair_word, p1, streams.feedback)
        pair_distances = self.distances(self.pair_codebook.words, feedback_received)
        transmitter_pair = self.pairs[self.ranking(pair_distances)[0]]

        # 第三阶段
        if true_message in transmitter_pair:
            word = self.pair_word(transmitter_pair, true_message, n3)
        else:
            word = self.intermediate_block(n3)
        final_received = transmit(word, p, streams.forward, start=n1 + nf)
        decision = self.decide_within_pair(receiver_pair, receiver_distances, final_received)

        if true_message not in receiver_pair:
            category = ErrorCategory.P1
        elif transmitter_pair != receiver_pair:
            category = ErrorCategory.P2
        else:
            category = ErrorCategory.P3

        return TrialTranscript(
            true_message=true_message,
            phase1_sent=sent,
            phase1_received=received,
            phase1_feedback_seen=None,
            receiver_distances=tuple(int(d) for d in receiver_distances),
            transmitter_distances=(),
            receiver_ranking=receiver_ranking,
            transmitter_ranking=(),
            case_taken=Case.CASE2,
            receiver_pair=receiver_pair,
            transmitter_pair=transmitter_pair,
            decision=decision,
            error_category=ErrorCategory.NONE if decision == true_message else category,
        )


def run_active_trial(
    params: SchemeParams, codebooks: tuple[Codebook, Codebook], true_message: int, streams: TrialStreams
) -> TrialTranscript:
    codebook, pair_codebook = codebooks
    return ActiveFeedback(params, codebook, pair_codebook).run_trial(true_message, streams)
