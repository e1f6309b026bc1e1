import json
import math
from collections import Counter

import numpy as np
import pytest

from common.errors import InvalidParameterError
from common.model import Case, ChannelParams, ErrorCategory, SchemeName, SchemeParams
from schemes import ActiveFeedback, NoFeedbackBaseline, NoiselessSwitch, NoisySwitch, Scheme, build_scheme
from schemes.scheme_active import run_active_trial
from schemes.scheme_baseline import run_no_feedback_baseline
from schemes.scheme_noiseless import run_noiseless_switch_trial
from schemes.scheme_noisy import run_noisy_switch_trial
from theory import oracle
from transmission.channel import TrialStreams
from transmission.codes import make_simplex3


def _params(scheme: SchemeName, p: float, p1: float = 0.0, **kwargs) -> SchemeParams:
    defaults = {"n": 120, "M": 3, "gamma": 0.5, "t": 0.1, "seed": 1}
    if scheme == SchemeName.ACTIVE:
        defaults.update(gamma=0.4, gamma1=0.2, slack_fraction=0.25)
    defaults.update(kwargs)
    return SchemeParams(channel=ChannelParams(p, p1), **defaults)


def _run(scheme: Scheme, trials: int, seed: int = 0, true_message: int | None = None):
    for trial in range(trials):
        message = trial % scheme.params.M if true_message is None else true_message
        yield scheme.run_trial(message, TrialStreams.for_trial(seed, trial))


def _within_sigma(errors: int, trials: int, probability: float, sigmas: float = 4.0) -> bool:
    return abs(errors - trials * probability) <= sigmas * math.sqrt(trials * probability * (1 - probability))


def _noiseless_pair_error(k: int, n2: int, p: float) -> float:
    """单纯形三码字发送 x1、无噪反馈时，候选对含 x1 但对内判错的精确概率"""
    pmf = np.exp(oracle.binomial_logpmf(k, p))
    final_pmf = np.exp(oracle.binomial_logpmf(n2, p))
    i, j, l = np.meshgrid(np.arange(k + 1), np.arange(k + 1), np.arange(k + 1), indexing="ij")
    weight = pmf[i] * pmf[j] * pmf[l]
    gap2, gap3 = 2 * (k - i - j), 2 * (k - i - l)
    in_pair = ~((gap2 < 0) & (gap3 < 0))
    # 第二阶段 e 个错误：2e > gap + n2 时判给另一个候选
    gap = np.minimum(gap2, gap3)
    e = np.arange(n2 + 1)
    wrong = (2 * e > (gap + n2)[..., None]) @ final_pmf
    return float((weight * wrong)[in_pair].sum())


class TestBuild:
    @pytest.mark.parametrize(
        "name, cls",
        [
            (SchemeName.NO_FEEDBACK, NoFeedbackBaseline),
            (SchemeName.NOISELESS_SWITCH, NoiselessSwitch),
            (SchemeName.NOISY_SWITCH, NoisySwitch),
            (SchemeName.ACTIVE, ActiveFeedback),
        ],
    )
    def test_build_scheme(self, name, cls):
        scheme = build_scheme(name, _params(name, 0.1, 0.05))
        assert isinstance(scheme, cls)
        assert scheme.name == name

    def test_codebook_is_deterministic(self):
        params = _params(SchemeName.NOISELESS_SWITCH, 0.1)
        a = build_scheme(SchemeName.NOISELESS_SWITCH, params)
        b = build_scheme(SchemeName.NOISELESS_SWITCH, params)
        assert np.array_equal(a.codebook.words, b.codebook.words)


class TestNoiselessForward:
    @pytest.mark.parametrize(
        "name, p1",
        [
            (SchemeName.NO_FEEDBACK, 0.0),
            (SchemeName.NOISELESS_SWITCH, 0.0),
            (SchemeName.NOISY_SWITCH, 0.0),
            (SchemeName.ACTIVE, 1e-9),
        ],
    )
    def test_no_errors(self, name, p1):
        scheme = build_scheme(name, _params(name, 0.0, p1))
        assert all(t.error_category == ErrorCategory.NONE for t in _run(scheme, 200))


class TestTranscripts:
    def test_consistent_with_codebook(self):
        params = _params(SchemeName.NOISY_SWITCH, 0.15, 0.05)
        scheme = build_scheme(SchemeName.NOISY_SWITCH, params)
        words = scheme.codebook.words
        for transcript in _run(scheme, 300, seed=4):
            assert np.array_equal(transcript.phase1_sent, words[transcript.true_message])
            assert len(transcript.phase1_feedback_seen) == params.phase1_length
            distances = np.count_nonzero(words != transcript.phase1_received, axis=1)
            assert transcript.receiver_distances == tuple(distances.tolist())
            ordered = [transcript.receiver_distances[i] for i in transcript.receiver_ranking]
            assert ordered == sorted(ordered)
            assert (transcript.receiver_pair is None) == (transcript.case_taken == Case.CASE1)
            correct = transcript.decision == transcript.true_message
            assert correct == (transcript.error_category == ErrorCategory.NONE)
            if transcript.error_category == ErrorCategory.P2N:
                assert not transcript.pairs_match

    def test_same_seed_same_transcript(self):
        scheme = build_scheme(SchemeName.NOISY_SWITCH, _params(SchemeName.NOISY_SWITCH, 0.2, 0.1))
        first = [t.to_record() for t in _run(scheme, 50, seed=9)]
        second = [t.to_record() for t in _run(scheme, 50, seed=9)]
        assert first == second

    @pytest.mark.parametrize("name", list(SchemeName))
    def test_record_is_json(self, name):
        scheme = build_scheme(name, _params(name, 0.2, 0.1))
        record = scheme.run_trial(1, TrialStreams.for_trial(0, 0)).to_record()
        assert json.loads(json.dumps(record)) == record
        assert record["error_category"] in {category.value for category in ErrorCategory}


class TestNoiselessSwitch:
    @pytest.mark.slow
    def test_categories_match_exact(self):
        p, trials = 0.25, 20_000
        params = SchemeParams(n=24, M=3, channel=ChannelParams(p), gamma=0.5)
        scheme = NoiselessSwitch(params, make_simplex3(params.phase1_length))
        k, n2 = params.phase1_length // 3, params.final_length
        counts = Counter(t.error_category for t in _run(scheme, trials, seed=13, true_message=0))
        # x1 排在最后：d2 < d1 且 d3 < d1
        phase1 = oracle.lemma_tail_probability(3 * k, -1 / k, -1 / k, p).probability
        assert counts[ErrorCategory.P1] > 0
        assert _within_sigma(counts[ErrorCategory.P1], trials, phase1)
        assert _within_sigma(counts[ErrorCategory.P2], trials, _noiseless_pair_error(k, n2, p))
        assert counts[ErrorCategory.P2N] == 0


class TestNoisySwitch:
    def test_tiny_feedback_noise_keeps_pairs_aligned(self):
        scheme = build_scheme(SchemeName.NOISY_SWITCH, _params(SchemeName.NOISY_SWITCH, 0.2, 1e-9, t=0.05))
        transcripts = list(_run(scheme, 2000, seed=2))
        assert not any(t.error_category == ErrorCategory.P2N for t in transcripts)
        assert all(t.pairs_match for t in transcripts if t.receiver_pair is not None)

    def test_threshold_uses_phase1_length(self):
        scheme = build_scheme(SchemeName.NOISY_SWITCH, _params(SchemeName.NOISY_SWITCH, 0.1, 0.05, t=0.2))
        assert scheme.threshold == 6

    @pytest.mark.slow
    def test_event_a1_matches_exact(self):
        m, t, p, p1, trials = 30, 0.2, 0.1, 0.05, 20_000
        params = SchemeParams(n=80, M=3, channel=ChannelParams(p, p1), gamma=0.5, t=t)
        scheme = NoisySwitch(params, make_simplex3(m).padded(params.phase1_length))
        threshold = 2 * int(round(t * m / 3))
        hits = 0
        for transcript in _run(scheme, trials, seed=3, true_message=0):
            rd, td = transcript.receiver_distances, transcript.transmitter_distances
            if rd[2] - rd[1] >= threshold and td[2] <= td[1]:
                hits += 1
        exact = oracle.eventA1_probability(m, t, p, p1).probability
        assert _within_sigma(hits, trials, exact)

    def test_rejects_useless_feedback(self):
        params = _params(SchemeName.NOISY_SWITCH, 0.1, 0.5)
        with pytest.raises(InvalidParameterError):
            build_scheme(SchemeName.NOISY_SWITCH, params)


class TestTwoMessages:
    def test_noiseless_switch_matches_two_codeword_error(self):
        p, trials = 0.3, 10_000
        params = SchemeParams(n=40, M=2, channel=ChannelParams(p), gamma=0.5, seed=5)
        scheme = build_scheme(SchemeName.NOISELESS_SWITCH, params)
        distance = int(scheme.codebook.pairwise_distances()[0, 1]) + params.final_length
        exact = 0.5 * (
            oracle.two_codeword_error_probability(distance, p, tie_to_truth=True).probability
            + oracle.two_codeword_error_probability(distance, p, tie_to_truth=False).probability
        )
        errors = sum(t.error_category != ErrorCategory.NONE for t in _run(scheme, trials, seed=6))
        assert _within_sigma(errors, trials, exact)

    def test_baseline_matches_two_codeword_error(self):
        p, trials = 0.3, 10_000
        params = SchemeParams(n=20, M=2, channel=ChannelParams(p), gamma=0.5)
        scheme = build_scheme(SchemeName.NO_FEEDBACK, params)
        exact = 0.5 * (
            oracle.two_codeword_error_probability(20, p, tie_to_truth=True).probability
            + oracle.two_codeword_error_probability(20, p, tie_to_truth=False).probability
        )
        errors = sum(t.error_category == ErrorCategory.P1 for t in _run(scheme, trials, seed=8))
        assert _within_sigma(errors, trials, exact)


class TestBaseline:
    def test_union_bracket(self):
        p, trials = 0.2, 5000
        params = SchemeParams(n=60, M=5, channel=ChannelParams(p), gamma=0.5, seed=2)
        scheme = build_scheme(SchemeName.NO_FEEDBACK, params)
        distances = scheme.codebook.pairwise_distances()[0, 1:]
        lower = max(oracle.two_codeword_error_probability(int(d), p, True).probability for d in distances)
        upper = sum(oracle.two_codeword_error_probability(int(d), p, False).probability for d in distances)
        errors = sum(t.error_category != ErrorCategory.NONE for t in _run(scheme, trials, seed=1, true_message=0))
        slack = 4 * math.sqrt(trials * upper)
        assert trials * lower - slack <= errors <= trials * upper + slack

    def test_single_phase(self):
        scheme = build_scheme(SchemeName.NO_FEEDBACK, _params(SchemeName.NO_FEEDBACK, 0.1))
        transcript = scheme.run_trial(0, TrialStreams.for_trial(0, 0))
        assert scheme.codebook.L == 120
        assert transcript.case_taken == Case.CASE1
        assert transcript.phase1_feedback_seen is None


class TestActiveFeedback:
    def test_reliable_feedback_has_no_pair_errors(self):
        scheme = build_scheme(SchemeName.ACTIVE, _params(SchemeName.ACTIVE, 0.2, 1e-9))
        transcripts = list(_run(scheme, 1000, seed=5))
        assert not any(t.error_category == ErrorCategory.P2 for t in transcripts)
        assert all(t.pairs_match for t in transcripts)

    def test_two_messages_need_no_pair_decoding(self):
        scheme = build_scheme(SchemeName.ACTIVE, _params(SchemeName.ACTIVE, 0.2, 0.4, M=2))
        assert scheme.pair_codebook.M == 1
        assert not any(t.error_category == ErrorCategory.P2 for t in _run(scheme, 500, seed=5))

    @pytest.mark.slow
    def test_error_rates_fall_when_n_doubles(self):
        counts = {}
        for n in (30, 60):
            params = SchemeParams(n=n, M=3, channel=ChannelParams(0.2, 0.2), gamma=0.4, gamma1=0.2)
            scheme = ActiveFeedback(params, make_simplex3(params.phase1_length), make_simplex3(params.feedback_length))
            counts[n] = Counter(t.error_category for t in _run(scheme, 20_000, seed=12))
        for category in (ErrorCategory.P1, ErrorCategory.P2, ErrorCategory.P3):
            assert counts[30][category] > 0
            assert counts[60][category] < counts[30][category]

    def test_requires_noisy_feedback(self):
        with pytest.raises(InvalidParameterError):
            build_scheme(SchemeName.ACTIVE, _params(SchemeName.ACTIVE, 0.1, 0.0))

    def test_requires_feedback_phase(self):
        with pytest.raises(InvalidParameterError):
            build_scheme(SchemeName.ACTIVE, _params(SchemeName.ACTIVE, 0.1, 0.05, gamma1=0.0))


class TestInvalidInputs:
    def test_codebook_size_mismatch(self):
        params = SchemeParams(n=60, M=4, channel=ChannelParams(0.1), gamma=0.5)
        with pytest.raises(InvalidParameterError):
            NoiselessSwitch(params, make_simplex3(30))

    def test_codebook_length_mismatch(self):
        params = SchemeParams(n=80, M=3, channel=ChannelParams(0.1), gamma=0.5)
        with pytest.raises(InvalidParameterError):
            NoiselessSwitch(params, make_simplex3(30))

    @pytest.mark.parametrize("message", [-1, 3])
    def test_message_out_of_range(self, message):
        scheme = build_scheme(SchemeName.NOISELESS_SWITCH, _params(SchemeName.NOISELESS_SWITCH, 0.1))
        with pytest.raises(InvalidParameterError):
            scheme.run_trial(message, TrialStreams.for_trial(0, 0))


class TestRunFunctions:
    def test_match_scheme_instances(self):
        streams = TrialStreams.for_trial(3, 7)
        for name, run in (
            (SchemeName.NO_FEEDBACK, run_no_feedback_baseline),
            (SchemeName.NOISELESS_SWITCH, run_noiseless_switch_trial),
            (SchemeName.NOISY_SWITCH, run_noisy_switch_trial),
        ):
            scheme = build_scheme(name, _params(name, 0.2, 0.1))
            expected = scheme.run_trial(2, streams).to_record()
            assert run(scheme.params, scheme.codebook, 2, streams).to_record() == expected

        active = build_scheme(SchemeName.ACTIVE, _params(SchemeName.ACTIVE, 0.2, 0.1))
        record = run_active_trial(active.params, (active.codebook, active.pair_codebook), 2, streams).to_record()
        assert record == active.run_trial(2, streams).to_record()
