"""零速率误差指数

BSC(p) 前向信道加 BSC(p1) 被动反馈信道时，一次切换传输方法的误差指数
F1(p, p1) 及其依赖的全部函数（单位均为 nats/符号）。
"""

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from common.errors import InvalidParameterError, NumericalError
from common.model import ChannelParams, ExponentReport

logger = logging.getLogger(__name__)

# 求根时自变量的绝对容差
ROOT_XTOL = 1e-14
# 在 t 上做黄金分割搜索之前的粗网格点数
T_GRID_POINTS = 64
# 熵函数输入允许的浮点越界
ENTROPY_SLOP = 1e-12
# threshold_p0 求根区间的下端
P0_BRACKET_LOW = 1e-30


class ActiveExponent(NamedTuple):
    """主动反馈方案的指数及参数"""

    value: float
    gamma: float
    gamma1: float


def _check_p(p: float):
    if not (0.0 < p < 0.5):
        raise InvalidParameterError(f"p must lie in (0, 1/2), got {p}")


def _check_p1(p1: float):
    if not (0.0 <= p1 <= 0.5):
        raise InvalidParameterError(f"p1 must lie in [0, 1/2], got {p1}")


def _check_t(t: float, p: float):
    if t < 0.0 or t > 0.5 - p + ENTROPY_SLOP:
        raise InvalidParameterError(f"t must lie in [0, 1/2 - p] = [0, {0.5 - p}], got {t}")


def binary_entropy(x: float) -> float:
    """二元熵 h(x) = -x ln x - (1-x) ln(1-x)，约定 0·ln 0 = 0"""
    if x < -ENTROPY_SLOP or x > 1.0 + ENTROPY_SLOP or math.isnan(x):
        raise InvalidParameterError(f"entropy argument must lie in [0, 1], got {x}")
    x = min(max(x, 0.0), 1.0)
    return float(special.entr(x) + special.entr(1.0 - x))


def exponent_E(p: float) -> float:
    """无反馈信道零速率最佳指数 E(p) = (1/4) ln(1/(4pq))"""
    _check_p(p)
    if p < 0.25:
        # (1-2p)^2 在 p 极小时舍入为 1，改用 ln(4p) + ln(1-p)
        return -0.25 * (math.log(4.0 * p) + math.log1p(-p))
    # 4pq = 1 - (1-2p)^2，p 接近 1/2 时用 log1p 保持精度
    return -0.25 * math.log1p(-((1.0 - 2.0 * p) ** 2))


def exponent_E2(p: float) -> float:
    """两个码字时的最佳指数 E2(p) = 2E(p)"""
    return 2.0 * exponent_E(p)


def exponent_F(p: float) -> float:
    """无噪反馈下的最佳指数 F(p) = F3(p)"""
    _check_p(p)
    q = 1.0 - p
    return -math.log(p ** (1.0 / 3.0) * q ** (2.0 / 3.0) + q ** (1.0 / 3.0) * p ** (2.0 / 3.0))


def ratio_r(p: float) -> float:
    """r(p) = F(p)/E(p)"""
    return exponent_F(p) / exponent_E(p)


def a0_closed_form(p: float) -> float:
    """t = 0 时最优 a 的闭式解 q^{1/3}/(p^{1/3}+q^{1/3})"""
    _check_p(p)
    q = 1.0 - p
    return q ** (1.0 / 3.0) / (p ** (1.0 / 3.0) + q ** (1.0 / 3.0))


def stationary_point(t: float, t1: float, p: float) -> float:
    """f(a,t,t1) 关于 a 的唯一驻点

    驻点方程 f'_a = 0 等价于 q(1-a)(1-a-t)(1-a-t1) = p·a(a+t)(a+t1)，
    左边在区间左端为正、右端为零，右边反之，因此区间内有唯一变号。

    Args:
        t: 第二个码字的距离偏移比例
        t1: 第三个码字的距离偏移比例
        p: 前向信道交叉概率

    Returns:
        float: 最优 a
    """
    _check_p(p)
    q = 1.0 - p
    lo = max(0.0, -t, -t1)
    hi = min(1.0, 1.0 - t, 1.0 - t1)
    if hi <= lo:
        return lo

    def residual(a: float) -> float:
        return q * (1.0 - a) * (1.0 - a - t) * (1.0 - a - t1) - p * a * (a + t) * (a + t1)

    r_lo, r_hi = residual(lo), residual(hi)
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if r_lo * r_hi > 0.0:
        raise NumericalError(f"no sign change bracketing the stationary point for t={t}, t1={t1}, p={p}")
    try:
        return optimize.brentq(residual, lo, hi, xtol=ROOT_XTOL, maxiter=500)
    except RuntimeError as e:
        raise NumericalError(f"stationary point did not converge for t={t}, t1={t1}, p={p}: {e}") from e


def a0_root(t: float, p: float) -> float:
    """方程 q(1-a)^2(1-a-t) = p a^2(a+t) 在 (0, 1-t) 内的唯一根"""
    _check_p(p)
    _check_t(t, p)
    return stationary_point(0.0, t, p)


def exponent_G1(t: float, p: float) -> float:
    """G1(t,p)：Case 1 区域内判错的指数，t >= 1/2-p 时为常数 (4/3)E(p)"""
    _check_p(p)
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    if t >= 0.5 - p:
        return 4.0 * exponent_E(p) / 3.0
    q = 1.0 - p
    z = q / p
    a = a0_root(t, p)
    inner = 2.0 * binary_entropy(a) + binary_entropy(a + t) + (a + t) * math.log(z)
    return (math.log(1.0 / (q * p * p)) - inner) / 3.0


def c0_of(t: float, p: float) -> float:
    """G2 前向部分的最优参数 c0(t,p)"""
    _check_p(p)
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    z2 = ((1.0 - p) / p) ** 2
    return 2.0 * (1.0 - t) / (2.0 + t * (z2 - 1.0) + math.sqrt(4.0 * z2 + t * t * (z2 - 1.0) ** 2))


def b1_of(t: float, p1: float) -> float:
    """G2 反馈部分的最优参数 b1(t,p1)，p1 = 0 时无定义"""
    _check_p1(p1)
    if p1 == 0.0:
        raise InvalidParameterError("b1 is undefined for noiseless feedback (p1 = 0)")
    if t < 0.0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    # 分子分母同除 z1^2，w = 1/z1，p1 极小时不溢出
    w2 = (p1 / (1.0 - p1)) ** 2
    return 2.0 / ((2.0 + t) - t * w2 + math.sqrt(4.0 * w2 + (1.0 - w2) ** 2 * t * t))


def _feedback_coefficient(t: float, p1: float) -> float:
    """2 + t - 2(1+t)b1 的无抵消形式"""
    w2 = (p1 / (1.0 - p1)) ** 2
    return (4.0 * w2 + (1.0 - w2) * t * t) / (2.0 * w2 + math.sqrt(4.0 * w2 + (1.0 - w2) ** 2 * t * t))


def exponent_G2(t: float, p: float, p1: float) -> float:
    """G2(t,p,p1)：发送端选错候选对的指数

    t = 0 时为 0；p1 = 0 且 t > 0 时为 +inf。
    """
    _check_p(p)
    _check_p1(p1)
    _check_t(t, p)
    if t == 0.0:
        return 0.0
    if p1 == 0.0:
        return math.inf
    q, q1 = 1.0 - p, 1.0 - p1
    c0 = c0_of(t, p)
    forward = (2.0 * c0 + t) * math.log(q / p) - binary_entropy(c0 + t) - binary_entropy(c0)
    b1 = b1_of(t, p1)
    beta = ((1.0 + t) * b1 - t) / (1.0 - t)
    feedback = (
        _feedback_coefficient(t, p1) * math.log(q1 / p1)
        - (1.0 + t) * binary_entropy(b1)
        - (1.0 - t) * binary_entropy(beta)
    )
    return (forward + feedback - 2.0 * math.log(q * q1)) / 3.0


def _min_g(t: float, p: float, p1: float) -> float:
    return min(exponent_G1(t, p), exponent_G2(t, p, p1))


def _crossing_t(p: float, p1: float) -> float:
    """在 [0, 1/2-p] 上最大化 min{G1, G2}

    先在粗网格上找最大点，再在相邻两格内做有界黄金分割搜索；
    若该区间内 G1-G2 变号，再用 brentq 精确定位交点。
    """
    t_max = 0.5 - p
    grid = np.linspace(0.0, t_max, T_GRID_POINTS)
    values = np.array([_min_g(t, p, p1) for t in grid])
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, T_GRID_POINTS - 1)]

    result = optimize.minimize_scalar(
        lambda t: -_min_g(t, p, p1), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13}
    )
    candidates = [(values[i], grid[i]), (-result.fun, float(result.x))]

    def gap(t: float) -> float:
        return exponent_G1(t, p) - exponent_G2(t, p, p1)

    if gap(lo) > 0.0 > gap(hi):
        t_cross = optimize.brentq(gap, lo, hi, xtol=ROOT_XTOL)
        candidates.append((_min_g(t_cross, p, p1), t_cross))

    best_value, best_t = max(candidates, key=lambda item: item[0])
    logger.debug("min{G1,G2} maximised at t=%.12g (value %.12g) for p=%g, p1=%g", best_t, best_value, p, p1)
    return best_t


def threshold_p0(p: float) -> float:
    """p0(p)：方程 3G2(1/2-p, p, p0) = ln(1/(4pq)) 的唯一根"""
    _check_p(p)
    t = 0.5 - p
    target = 4.0 * exponent_E(p)

    def residual(p1: float) -> float:
        return 3.0 * exponent_G2(t, p, p1) - target

    r_lo, r_hi = residual(P0_BRACKET_LOW), residual(0.5)
    if not (r_lo > 0.0 > r_hi):
        raise NumericalError(f"p0 is not bracketed on [{P0_BRACKET_LOW}, 1/2] for p={p}: residuals {r_lo}, {r_hi}")
    try:
        p0 = optimize.brentq(residual, P0_BRACKET_LOW, 0.5, xtol=ROOT_XTOL * 1e-2, rtol=4 * np.finfo(float).eps)
    except RuntimeError as e:
        raise NumericalError(f"p0 root finding did not converge for p={p}: {e}") from e
    logger.debug("p0(%g) = %.12g", p, p0)
    return p0


def exponent_active(p: float, p1: float) -> ActiveExponent:
    """主动反馈三阶段方案的指数 E/(1/2 + 2E/(3F) + E/E(p1))"""
    _check_p(p)
    if not (0.0 < p1 < 0.5):
        raise InvalidParameterError(f"active feedback needs p1 in (0, 1/2), got {p1}")
    e, f, e1 = exponent_E(p), exponent_F(p), exponent_E(p1)
    value = e / (0.5 + 2.0 * e / (3.0 * f) + e / e1)
    gamma = 8.0 * e / (3.0 * f + 4.0 * e + 6.0 * f * e / e1)
    gamma1 = 3.0 * gamma * f / (4.0 * e1)
    return ActiveExponent(value=value, gamma=gamma, gamma1=gamma1)


def exponent_F1(p: float, p1: float) -> ExponentReport:
    """一次切换方法的误差指数 F1(p,p1) 及最优参数

    max_t 6·min{G1,G2}·E / (3·min{G1,G2} + 4E)，γ* = 8E/(3·min{G1,G2} + 4E)。
    p1 >= p0(p) 时切换没有收益，报告不切换的结果 γ* = 1、F1 = E。
    p1 = 0 时 G2 在 t > 0 上恒为 +inf，min{G1,G2} 的上确界为 G1(0) = F，
    此时取 t* = 0，结果与 6EF/(4E+3F) 一致。
    """
    channel = ChannelParams(p, p1)
    e, e2, f = exponent_E(p), exponent_E2(p), exponent_F(p)

    if channel.noiseless:
        t_star = 0.0
        g1, g2 = exponent_G1(0.0, p), math.inf
        best = g1
    else:
        t_star = _crossing_t(p, p1)
        g1, g2 = exponent_G1(t_star, p), exponent_G2(t_star, p, p1)
        best = min(g1, g2)

    f1 = 6.0 * best * e / (3.0 * best + 4.0 * e)
    gamma_star = 8.0 * e / (3.0 * best + 4.0 * e)
    p0 = threshold_p0(p)
    if p1 >= p0:
        # 切换无收益，退回不切换：γ* = 1，F1 = E
        logger.warning("p1=%g >= p0(p)=%g: one switching moment does not improve on E(p)", p1, p0)
        f1, gamma_star = e, 1.0

    active = exponent_active(p, p1) if 0.0 < p1 < 0.5 else None
    return ExponentReport(
        p=p,
        p1=p1,
        E=e,
        E2=e2,
        F=f,
        F1=f1,
        t_star=t_star,
        gamma_star=gamma_star,
        p0=p0,
        g1_at_t_star=g1,
        g2_at_t_star=g2,
        active=None if active is None else active.value,
        gamma_active=None if active is None else active.gamma,
        gamma1_active=None if active is None else active.gamma1,
    )


def gamma0(p: float) -> float:
    """无噪反馈时使 P1、P2 指数相等的第一阶段比例 γ0 = 8E/(4E+3F)"""
    e, f = exponent_E(p), exponent_F(p)
    return 8.0 * e / (4.0 * e + 3.0 * f)


def noiseless_split_exponents(p: float, gamma: float) -> tuple[float, float]:
    """无噪反馈一次切换方案的误差拆分 (P1 指数, P2 指数)"""
    if not (0.0 < gamma < 1.0):
        raise InvalidParameterError(f"gamma must lie in (0, 1), got {gamma}")
    return 0.75 * gamma * exponent_F(p), (2.0 - gamma) * exponent_E(p)


def noisy_split_exponents(p: float, p1: float, t: float, gamma: float) -> tuple[float, float, float]:
    """有噪反馈一次切换方案的误差拆分 (P1, P2, P2n 指数)"""
    if not (0.0 < gamma < 1.0):
        raise InvalidParameterError(f"gamma must lie in (0, 1), got {gamma}")
    return (
        0.75 * gamma * exponent_G1(t, p),
        (2.0 - gamma) * exponent_E(p),
        0.75 * gamma * exponent_G2(t, p, p1),
    )


def active_split_exponents(p: float, p1: float, gamma: float, gamma1: float) -> tuple[float, float, float]:
    """主动反馈方案的误差拆分 (P1, P2, P3 指数)"""
    if gamma <= 0.0 or gamma1 <= 0.0 or gamma + gamma1 >= 1.0:
        raise InvalidParameterError(f"need gamma, gamma1 > 0 and gamma + gamma1 < 1, got {gamma}, {gamma1}")
    if not (0.0 < p1 < 0.5):
        raise InvalidParameterError(f"active feedback needs p1 in (0, 1/2), got {p1}")
    e = exponent_E(p)
    return 0.75 * gamma * exponent_F(p), gamma1 * exponent_E(p1), (2.0 - gamma - 2.0 * gamma1) * e


def near_half_approximations(p: float, t: float, p1: float) -> tuple[float, float]:
    """p = (1-ε)/2 附近 G1、G2 的主项"""
    _check_p(p)
    eps = 1.0 - 2.0 * p
    return 4.0 * (eps * eps - eps * t + t * t) / 9.0, t * t / (12.0 * p1 * (1.0 - p1))


def near_half_crossing(p: float, p1: float) -> tuple[float, float]:
    """p 接近 1/2 时 G1 = G2 的交点 t 及此时的 min{G1,G2}"""
    _check_p(p)
    eps = 1.0 - 2.0 * p
    s = math.sqrt(p1 * (1.0 - p1))
    denom = math.sqrt(3.0 - 12.0 * p1 * (1.0 - p1)) + 2.0 * s
    return 4.0 * eps * s / denom, 4.0 * eps * eps / (3.0 * denom * denom)


def small_p1_expansion(p: float, p1: float) -> float:
    """p1 → 0 时 F1(p,p1) 的一阶展开"""
    if not (0.0 < p1 < 1.0):
        raise InvalidParameterError(f"p1 must lie in (0, 1), got {p1}")
    e, f = exponent_E(p), exponent_F(p)
    f1_noiseless = 6.0 * e * f / (4.0 * e + 3.0 * f)
    ln_z = math.log((1.0 - p) / p)
    return f1_noiseless * (1.0 - 8.0 * e * ln_z / (3.0 * (4.0 * e + 3.0 * f) * math.log(1.0 / p1)))


def near_half_small_p1_expansion(p: float, p1: float) -> float:
    """p 接近 1/2、p1 → 0 时的下界 (8E/7)[1 - 4√(3p1)/7 + 104p1/49]"""
    return 8.0 * exponent_E(p) / 7.0 * (1.0 - 4.0 * math.sqrt(3.0 * p1) / 7.0 + 104.0 * p1 / 49.0)


def p0_approximations(p: float) -> tuple[float, float]:
    """p → 0 时 p0(p) 的两个近似 16p/27 与 p/2"""
    _check_p(p)
    return 16.0 * p / 27.0, p / 2.0


def p0_limit_near_half() -> float:
    """p → 1/2 时 p0(p) 的极限 1/(4(2+√3))"""
    return 1.0 / (4.0 * (2.0 + math.sqrt(3.0)))


def active_near_half(p: float, p1: float) -> float:
    """p 接近 1/2 时主动方案指数 E/(7/8 + E/E(p1))"""
    e = exponent_E(p)
    return e / (7.0 / 8.0 + e / exponent_E(p1))
