import logging

from common.model import Case, Codebook, ErrorCategory, SchemeName, SchemeParams, TrialTranscript
from schemes.scheme import Scheme
from transmission.channel import TrialStreams, transmit
from transmission.codes import make_almost_simplex, make_complementary_pair

logger = logging.getLogger(__name__)


class NoFeedbackBaseline(Scheme):
    """无反馈基线：长度 n 的码本，最小距离（最大似然）译码"""

    name = SchemeName.NO_FEEDBACK

    def __init__(self, params: SchemeParams, codebook: Codebook):
        super().__init__(params, codebook)
        self._check_length(codebook, params.n, "baseline")

    @classmethod
    def from_params(cls, params: SchemeParams) -> "NoFeedbackBaseline":
        if params.M == 2:
            codebook = make_complementary_pair(params.n)
        else:
            codebook = make_almost_simplex(params.M, params.n, params.slack_fraction, params.seed)
        return cls(params, codebook)

    def run_trial(self, true_message: int, streams: TrialStreams) -> TrialTranscript:
        self._check_message(true_message)
        sent = self.codebook.words[true_message]
        received = transmit(sent, self.params.channel.p, streams.forward)
        distances = self.distances(self.codebook.words, received)
        ranking = self.ranking(distances)
        decision = ranking[0]
        return TrialTranscript(
            true_message=true_message,
            phase1_sent=sent,
            phase1_received=received,
            phase1_feedback_seen=None,
            receiver_distances=tuple(int(d) for d in distances),
            transmitter_distances=(),
            receiver_ranking=ranking,
            transmitter_ranking=(),
            case_taken=Case.CASE1,
            receiver_pair=None,
            transmitter_pair=None,
            decision=decision,
            error_category=ErrorCategory.NONE if decision == true_message else ErrorCategory.P1,
        )


def run_no_feedback_baseline(
    params: SchemeParams, codebook: Codebook, true_message: int, streams: TrialStreams
) -> TrialTranscript:
    return NoFeedbackBaseline(params, codebook).run_trial(true_message, streams)
