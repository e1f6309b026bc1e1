"""按错误类别的蒙特卡洛估计与码长阶梯上的斜率

每次试验的噪声只由 (seed, trial) 决定，真实消息序列由 seed 一次性生成，
试验按连续区间分块交给线程池，计数为整数求和，因此结果与并行度无关。
桌面规模的模拟达不到渐近指数，定量的基准是精确计算，模拟只验证机制。
"""

import json
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy import stats
from tqdm import tqdm

from common import config
from common.errors import InvalidParameterError
from common.model import (
    SUMMARY_CATEGORIES,
    SchemeName,
    SchemeParams,
    SimulationSummary,
    SlopePoint,
    TrialTranscript,
)
from schemes import Scheme, build_scheme
from transmission.channel import TrialStreams

logger = logging.getLogger(__name__)

# 斜率可靠所需的最少错误数
MIN_RELIABLE_ERRORS = 20
WILSON_CONFIDENCE = 0.95
# 真实消息序列使用的子流编号，与 (trial, leg) 形式的噪声子流不冲突
_MESSAGE_SPAWN_KEY = (2**32 - 1,)


def wilson_interval(errors: int, trials: int, confidence: float = WILSON_CONFIDENCE) -> tuple[float, float]:
    """二项比例的 Wilson 置信区间"""
    if trials < 1 or not (0 <= errors <= trials):
        raise InvalidParameterError(f"need 0 <= errors <= trials and trials >= 1, got {errors}/{trials}")
    ci = stats.binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def true_messages(M: int, trials: int, seed: int) -> np.ndarray:
    """各次试验的真实消息，均匀分布"""
    rng = Generator(Philox(SeedSequence(entropy=seed, spawn_key=_MESSAGE_SPAWN_KEY)))
    return rng.integers(0, M, size=trials)


def iter_transcripts(
    scheme: Scheme, trials: int, seed: int, true_message: int | None = None, start: int = 0
) -> Iterator[TrialTranscript]:
    """依次执行第 start..trials-1 次试验

    Args:
        scheme: 传输方案
        trials: 试验总数
        seed: 噪声与消息的种子
        true_message: 固定真实消息；None 时均匀随机
        start: 起始试验编号
    """
    if true_message is None:
        messages = true_messages(scheme.params.M, trials, seed)
    else:
        messages = np.full(trials, true_message)
    for trial in range(start, trials):
        yield scheme.run_trial(int(messages[trial]), TrialStreams.for_trial(seed, trial))


def _run_chunk(
    scheme: Scheme, messages: np.ndarray, seed: int, trials: range, keep_transcripts: bool
) -> tuple[Counter, int, list[TrialTranscript]]:
    counts: Counter = Counter()
    mismatches = 0
    kept = []
    for trial in trials:
        transcript = scheme.run_trial(int(messages[trial]), TrialStreams.for_trial(seed, trial))
        counts[transcript.error_category] += 1
        if transcript.receiver_pair is not None and not transcript.pairs_match:
            mismatches += 1
        if keep_transcripts:
            kept.append(transcript)
    return counts, mismatches, kept


def estimate(
    scheme: Scheme | SchemeName,
    params: SchemeParams,
    trials: int,
    seed: int,
    workers: int | None = None,
    true_message: int | None = None,
    transcript_path: str | None = None,
    show_progress: bool | None = None,
) -> SimulationSummary:
    """估计方案各类错误的概率

    Args:
        scheme: 方案实例，或方案名称（此时按 params 构造码本）
        params: 方案参数
        trials: 试验次数
        seed: 噪声与消息的种子
        workers: 线程数，默认读取 SIM_WORKERS
        true_message: 固定真实消息；None 时均匀随机
        transcript_path: 非空时把每次试验的记录按行写成 JSON
        show_progress: 是否显示进度条，默认读取 SHOW_PROGRESS

    Returns:
        SimulationSummary: 各类别计数与 Wilson 区间
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    if isinstance(scheme, SchemeName):
        scheme = build_scheme(scheme, params)
    workers = max(1, workers or config.SIM_WORKERS)
    show_progress = config.SHOW_PROGRESS if show_progress is None else show_progress

    if true_message is None:
        messages = true_messages(params.M, trials, seed)
    else:
        messages = np.full(trials, true_message)
    bounds = np.linspace(0, trials, min(workers * 4, trials) + 1).astype(int)
    chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    keep = transcript_path is not None

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_run_chunk, scheme, messages, seed, chunk, keep) for chunk in chunks]
        results = [
            future.result()
            for future in tqdm(futures, desc=scheme.name.value, unit="chunk", disable=not show_progress)
        ]

    counts: Counter = Counter()
    mismatches = 0
    for chunk_counts, chunk_mismatches, kept in results:
        counts.update(chunk_counts)
        mismatches += chunk_mismatches
    if keep:
        write_transcripts(transcript_path, (t for _, _, kept in results for t in kept))

    errors_by_category = {category: counts.get(category, 0) for category in SUMMARY_CATEGORIES}
    total_errors = sum(errors_by_category.values())
    intervals = {category.value: wilson_interval(count, trials) for category, count in errors_by_category.items()}
    intervals["total"] = wilson_interval(total_errors, trials)
    logger.debug("%s n=%d: %d/%d errors %s", scheme.name.value, params.n, total_errors, trials, dict(counts))
    return SimulationSummary(
        scheme=scheme.name,
        trials=trials,
        errors_by_category=errors_by_category,
        total_errors=total_errors,
        wilson_intervals=intervals,
        pair_mismatches=mismatches,
        params=params.to_dict(),
    )


def write_transcripts(path: str, transcripts) -> int:
    """按试验顺序把传输记录写成 JSON Lines，返回写入的行数"""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for transcript in transcripts:
            f.write(json.dumps(transcript.to_record()) + "\n")
            count += 1
    return count


def slope_ladder(
    scheme: SchemeName,
    params_base: SchemeParams,
    n_ladder: list[int],
    trials: int,
    seed: int,
    workers: int | None = None,
) -> list[SlopePoint]:
    """在一组码长上估计 -ln(错误率)/n

    错误数少于 MIN_RELIABLE_ERRORS 的点标记为不可靠，但仍然保留；
    区间端点经同一变换得到。
    """
    points = []
    for n in n_ladder:
        summary = estimate(scheme, params_base.with_n(n), trials, seed, workers=workers)
        errors = summary.total_errors
        rate = summary.error_rate
        lo, hi = summary.wilson_intervals["total"]
        slope = -math.log(rate) / n if errors > 0 else None
        interval = (-math.log(hi) / n, -math.log(lo) / n if lo > 0.0 else math.inf)
        reliable = errors >= MIN_RELIABLE_ERRORS
        if reliable:
            logger.info("n=%d: %d/%d errors, slope %.6g", n, errors, trials, slope)
        else:
            logger.warning("n=%d: only %d errors in %d trials, slope is unreliable", n, errors, trials)
        points.append(
            SlopePoint(
                n=n,
                trials=trials,
                errors=errors,
                error_rate=rate,
                slope=slope,
                slope_interval=interval,
                reliable=reliable,
            )
        )
    return points
