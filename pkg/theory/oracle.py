"""有限码长下的精确概率

单纯形三码字（simplex triple）的码长为 m，分成三段，每段长 k = m/3：

    x1 = 000, x2 = 110, x3 = 101   （按段）

发送 x1 时，三段中的翻转个数 (i, j, l) 各自服从 Bin(k, p)，且

    d1 = i+j+l,  d2 - d1 = 2(k-i-j),  d3 - d1 = 2(k-i-l)

所有概率都在对数域中按固定顺序累加，结果与分块方式无关。
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from common import config
from common.errors import InvalidParameterError
from common.model import LATTICE_EPS, ExactProbability, floor_count
from theory.exponents import binary_entropy, stationary_point

logger = logging.getLogger(__name__)

# 三码字距离概率按 -(3/m)·ln P 归一化，事件 A1 按 -(1/m)·ln P 归一化
LEMMA_SCALE = 3.0
EVENT_A1_SCALE = 1.0
# 蒙特卡洛采样每批的试验数
MC_BATCH = 100_000


def _check_m(m: int) -> int:
    if m <= 0 or m % 3 != 0:
        raise InvalidParameterError(f"m must be a positive multiple of 3, got {m}")
    return m // 3


def _check_p(p: float):
    if not (0.0 < p < 0.5):
        raise InvalidParameterError(f"p must lie in (0, 1/2), got {p}")


def _lattice_count(value: float) -> int | None:
    """value 为整数（在容差内）时返回该整数，否则返回 None"""
    nearest = round(value)
    return int(nearest) if abs(value - nearest) <= LATTICE_EPS else None


def binomial_logpmf(n: int, p: float) -> np.ndarray:
    """Bin(n, p) 在 0..n 上的对数概率，p 取 0 或 1 时为退化分布"""
    x = np.arange(n + 1)
    if p == 0.0 or p == 1.0:
        out = np.full(n + 1, -np.inf)
        out[0 if p == 0.0 else n] = 0.0
        return out
    log_choose = special.gammaln(n + 1) - special.gammaln(x + 1) - special.gammaln(n - x + 1)
    return log_choose + x * math.log(p) + (n - x) * math.log1p(-p)


def _log_sf_ge(logpmf: np.ndarray) -> np.ndarray:
    """返回 S[x] = ln P(X >= x)，x = 0..n+1"""
    sf = np.logaddexp.accumulate(logpmf[::-1])[::-1]
    return np.append(sf, -np.inf)


def _log_sf_at(sf: np.ndarray, x: np.ndarray) -> np.ndarray:
    """按下标取 ln P(X >= x)，x 越界时分别取 0 和 -inf"""
    clipped = np.clip(x, 0, len(sf) - 1)
    return np.where(x <= 0, 0.0, sf[clipped])


def _log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """两个对数域概率向量的卷积"""
    size = len(a) + len(b) - 1
    table = np.full((len(a), size), -np.inf)
    for shift, value in enumerate(a):
        table[shift, shift : shift + len(b)] = value + b
    return special.logsumexp(table, axis=0)


def lemma_f(a: float, t: float, t1: float, p: float) -> float:
    """f(a,t,t1) = h(a) + h(a+t) + h(a+t1) + (a+t+t1) ln z"""
    _check_p(p)
    z = (1.0 - p) / p
    return binary_entropy(a) + binary_entropy(a + t) + binary_entropy(a + t1) + (a + t + t1) * math.log(z)


def lemma_f_max(t: float, t1: float, p: float) -> float:
    """max_a f(a,t,t1)，最大点由驻点方程给出"""
    if abs(t) > 1.0 or abs(t1) > 1.0:
        raise InvalidParameterError(f"|t| and |t1| must not exceed 1, got {t}, {t1}")
    return lemma_f(stationary_point(t, t1, p), t, t1, p)


def lemma_exponent_limit(t: float, t1: float, p: float) -> float:
    """-(3/m) ln P1(t,t1) 在 m → ∞ 时的极限 ln(1/(p²q)) - max_a f"""
    q = 1.0 - p
    return math.log(1.0 / (p * p * q)) - lemma_f_max(t, t1, p)


def lemma_point_log_probability(k: int, shift: int, shift1: int, p: float) -> float:
    """P(k-i-j = shift, k-i-l = shift1) 的对数，shift 为整数"""
    logpmf = binomial_logpmf(k, p)
    i = np.arange(k + 1)
    j = k - shift - i
    l = k - shift1 - i
    valid = (j >= 0) & (j <= k) & (l >= 0) & (l <= k)
    if not np.any(valid):
        return -math.inf
    # j、l 两项先相加，交换 t 与 t1 时结果逐位相同
    terms = logpmf[i[valid]] + (logpmf[j[valid]] + logpmf[l[valid]])
    return float(special.logsumexp(terms))


def lemma_point_probability(m: int, t: float, t1: float, p: float) -> ExactProbability:
    """P(d2 = d1 + 2tm/3, d3 = d1 + 2t1·m/3)，发送 x1

    tm/3 或 t1·m/3 不是整数时事件不可能发生，返回不可行结果。
    """
    k = _check_m(m)
    _check_p(p)
    if abs(t) > 1.0 or abs(t1) > 1.0:
        raise InvalidParameterError(f"|t| and |t1| must not exceed 1, got {t}, {t1}")
    shift, shift1 = _lattice_count(t * k), _lattice_count(t1 * k)
    if shift is None or shift1 is None:
        logger.debug("point (t=%g, t1=%g) is off the lattice for m=%d", t, t1, m)
        return ExactProbability.infeasible(m)
    return ExactProbability.from_log(lemma_point_log_probability(k, shift, shift1, p), m, LEMMA_SCALE)


def lemma_tail_probability(m: int, t: float, t1: float, p: float) -> ExactProbability:
    """P(d2 <= d1 + 2tm/3, d3 <= d1 + 2t1·m/3)，阈值向下取整"""
    k = _check_m(m)
    _check_p(p)
    if abs(t) > 1.0 or abs(t1) > 1.0:
        raise InvalidParameterError(f"|t| and |t1| must not exceed 1, got {t}, {t1}")
    logpmf = binomial_logpmf(k, p)
    sf = _log_sf_ge(logpmf)
    i = np.arange(k + 1)
    # k-i-j <= floor(tk)  <=>  j >= k - floor(tk) - i
    terms = logpmf + (_log_sf_at(sf, k - floor_count(t * k) - i) + _log_sf_at(sf, k - floor_count(t1 * k) - i))
    return ExactProbability.from_log(float(special.logsumexp(terms)), m, LEMMA_SCALE)


def p11_probability(m: int, t: float, p: float) -> ExactProbability:
    """P(d2 <= d1 <= d3 <= d1 + 2tm/3)：Case 1 中的主要错误事件"""
    k = _check_m(m)
    _check_p(p)
    if not (0.0 <= t <= 1.0):
        raise InvalidParameterError(f"t must lie in [0, 1], got {t}")
    logpmf = binomial_logpmf(k, p)
    sf = _log_sf_ge(logpmf)
    i = np.arange(k + 1)
    # d2 <= d1: j >= k-i；d1 <= d3 <= d1+2tk: k-floor(tk)-i <= l <= k-i
    log_j = _log_sf_at(sf, k - i)
    upper = _log_sf_at(sf, k - floor_count(t * k) - i)
    beyond = _log_sf_at(sf, k - i + 1)
    with np.errstate(divide="ignore"):
        log_l = upper + np.log1p(-np.exp(beyond - upper))
    terms = logpmf + log_j + log_l
    return ExactProbability.from_log(float(special.logsumexp(terms)), m, LEMMA_SCALE)


def _event_a1_block(
    rows: np.ndarray, k: int, threshold: int, logpmf: np.ndarray, log_u: np.ndarray, log_v_sf: np.ndarray
) -> list[float]:
    """事件 A1 在 j ∈ rows 上逐行的对数和，没有满足条件的 l 时为 -inf"""
    l = np.arange(k + 1)
    row_logs = []
    for j in rows:
        # ln P(U_j <= V_l)，对所有 l 一次求出
        log_cmp = special.logsumexp(log_u[j][None, :] + log_v_sf[:, : k + 1], axis=1)
        mask = 2 * (j - l) >= threshold
        if np.any(mask):
            row_logs.append(float(special.logsumexp(logpmf[j] + logpmf[l[mask]] + log_cmp[mask])))
        else:
            row_logs.append(-math.inf)
    return row_logs


def eventA1_probability(m: int, t: float, p: float, p1: float, workers: int | None = None) -> ExactProbability:
    """事件 A1：接收端 d3 >= d2 + ⌊2tm/3⌋，同时发送端 d'3 <= d'2

    j、l 为 y 在第二、三段中的 1 的个数（均服从 Bin(k,p)）。
    发送端看到的 x' 在第二、三段中 1 的个数为

        U = Bin(j, q1) + Bin(k-j, p1),  V = Bin(l, q1) + Bin(k-l, p1)

    事件为 2(j-l) >= ⌊2tm/3⌋ 且 U <= V。U 的分布由对数域卷积精确求出，
    外层对 j 的求和可以分块并行，各块按 j 的顺序合并。

    Args:
        m: 码长，3 的倍数
        t: 阈值比例
        p: 前向信道交叉概率
        p1: 反馈信道交叉概率，0 时 U = j、V = l
        workers: 并行线程数，默认读取 SIM_WORKERS

    Returns:
        ExactProbability: 归一化指数为 -(1/m)·ln P
    """
    k = _check_m(m)
    _check_p(p)
    if not (0.0 <= p1 <= 0.5):
        raise InvalidParameterError(f"p1 must lie in [0, 1/2], got {p1}")
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    threshold = floor_count(2.0 * t * m / 3.0)
    logpmf = binomial_logpmf(k, p)

    if p1 == 0.0:
        # 无噪反馈：x' = y，第二个条件变为 j <= l
        j, l = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        mask = (2 * (j - l) >= threshold) & (j <= l)
        if not np.any(mask):
            return ExactProbability.from_log(-math.inf, m, EVENT_A1_SCALE)
        log_p = special.logsumexp(logpmf[j[mask]] + logpmf[l[mask]])
        return ExactProbability.from_log(float(log_p), m, EVENT_A1_SCALE)

    q1 = 1.0 - p1
    log_u = np.array([_log_convolve(binomial_logpmf(c, q1), binomial_logpmf(k - c, p1)) for c in range(k + 1)])
    log_v_sf = np.array([_log_sf_ge(row) for row in log_u])

    workers = max(1, workers or config.SIM_WORKERS)
    chunks = [chunk for chunk in np.array_split(np.arange(k + 1), workers) if len(chunk)]
    if len(chunks) == 1:
        partials = [_event_a1_block(chunks[0], k, threshold, logpmf, log_u, log_v_sf)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as executor:
            partials = list(
                executor.map(lambda rows: _event_a1_block(rows, k, threshold, logpmf, log_u, log_v_sf), chunks)
            )
    # 各块逐行结果按 j 的顺序拼接后统一求和，结果与分块方式无关
    row_logs = np.concatenate(partials)
    log_p = special.logsumexp(row_logs) if np.any(np.isfinite(row_logs)) else -math.inf
    logger.debug("A1(m=%d, t=%g, p=%g, p1=%g): ln P = %.12g", m, t, p, p1, log_p)
    return ExactProbability.from_log(float(log_p), m, EVENT_A1_SCALE)


def two_codeword_error_probability(distance: int, p: float, tie_to_truth: bool) -> ExactProbability:
    """两个距离为 D 的码字在 BSC(p) 上做最大似然判决的错误概率

    P(Bin(D,p) > D/2)，D 为偶数且平局判给错误码字时再加上 P(Bin(D,p) = D/2)。
    归一化指数为 -(1/D)·ln P。
    """
    if distance < 0:
        raise InvalidParameterError(f"distance must be non-negative, got {distance}")
    if not (0.0 < p < 0.5):
        raise InvalidParameterError(f"p must lie in (0, 1/2), got {p}")
    if distance == 0:
        log_p = -math.inf if tie_to_truth else 0.0
        return ExactProbability(log_p=log_p, m=0, normalized_exponent=math.nan)
    logpmf = binomial_logpmf(distance, p)
    first_error = distance // 2 + 1
    if distance % 2 == 0 and not tie_to_truth:
        first_error = distance // 2
    return ExactProbability.from_log(float(special.logsumexp(logpmf[first_error:])), distance, 1.0)


def _simplex_triple_bits(m: int) -> tuple[np.ndarray, np.ndarray]:
    k = m // 3
    x2 = np.concatenate([np.ones(2 * k, dtype=bool), np.zeros(k, dtype=bool)])
    x3 = np.concatenate([np.ones(k, dtype=bool), np.zeros(k, dtype=bool), np.ones(k, dtype=bool)])
    return x2, x3


def _batches(trials: int):
    done = 0
    while done < trials:
        size = min(MC_BATCH, trials - done)
        yield size
        done += size


def _lemma_sampler(m: int, t: float, t1: float, p: float, trials: int, seed: int, point: bool) -> tuple[int, int]:
    k = _check_m(m)
    _check_p(p)
    x2, x3 = _simplex_triple_bits(m)
    rng = np.random.Generator(np.random.Philox(seed))
    hits = 0
    for size in _batches(trials):
        noise = rng.random((size, m)) < p
        d1 = noise.sum(axis=1)
        d2 = (noise ^ x2).sum(axis=1)
        d3 = (noise ^ x3).sum(axis=1)
        if point:
            hit = (d2 - d1 == 2 * round(t * k)) & (d3 - d1 == 2 * round(t1 * k))
        else:
            hit = (d2 - d1 <= 2 * floor_count(t * k)) & (d3 - d1 <= 2 * floor_count(t1 * k))
        hits += int(hit.sum())
    return hits, trials


def monte_carlo_lemma_point(m: int, t: float, t1: float, p: float, trials: int, seed: int) -> tuple[int, int]:
    """逐比特模拟单纯形三码字，统计 d2 = d1 + 2tm/3 且 d3 = d1 + 2t1·m/3 的次数"""
    return _lemma_sampler(m, t, t1, p, trials, seed, point=True)


def monte_carlo_lemma_tail(m: int, t: float, t1: float, p: float, trials: int, seed: int) -> tuple[int, int]:
    """逐比特模拟单纯形三码字，统计尾部事件的次数"""
    return _lemma_sampler(m, t, t1, p, trials, seed, point=False)


def monte_carlo_event_a1(m: int, t: float, p: float, p1: float, trials: int, seed: int) -> tuple[int, int]:
    """逐比特模拟前向噪声和反馈噪声，统计事件 A1 的次数"""
    _check_m(m)
    _check_p(p)
    x2, x3 = _simplex_triple_bits(m)
    threshold = floor_count(2.0 * t * m / 3.0)
    rng = np.random.Generator(np.random.Philox(seed))
    hits = 0
    for size in _batches(trials):
        y = rng.random((size, m)) < p
        seen = y ^ (rng.random((size, m)) < p1)
        receiver_gap = (y ^ x3).sum(axis=1) - (y ^ x2).sum(axis=1)
        transmitter_gap = (seen ^ x3).sum(axis=1) - (seen ^ x2).sum(axis=1)
        hits += int(((receiver_gap >= threshold) & (transmitter_gap <= 0)).sum())
    return hits, trials
