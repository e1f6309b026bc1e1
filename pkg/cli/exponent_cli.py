import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from common import config as settings
from common.errors import InvalidParameterError, ZeroRateError
from common.log import setup_logging
from common.model import ChannelParams, RunConfig, SchemeName, SchemeParams
from common.repository import ResultRepository, create_repository
from simulation.montecarlo import estimate, slope_ladder
from theory import exponents, oracle

logger = logging.getLogger(__name__)

# 输出浮点数的有效数字位数
SIGNIFICANT_DIGITS = 12
# p0-sweep 未给出 --p-grid 时使用的网格
DEFAULT_P_GRID = [float(p) for p in np.geomspace(1e-4, 0.4999, 40)]
# 无反馈基线不分阶段，占位的 γ
BASELINE_GAMMA = 0.5


def _format_value(value):
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    return value


def _float_list(text: str) -> list[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def _int_list(text: str) -> list[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zero-rate",
        description="BSC 零速率误差指数：有噪被动反馈下的一次切换传输",
    )
    parser.add_argument("--format", dest="output_format", choices=["csv", "json"], default="csv")
    parser.add_argument("--output", dest="output_path", default=None, help="输出文件，默认标准输出")
    parser.add_argument("--store", action="store_true", help="把结果保存到结果仓库")
    subparsers = parser.add_subparsers(dest="command", required=True)

    exponent = subparsers.add_parser("exponent", help="E, E2, F, F1, t*, γ*, p0 与主动方案指数")
    exponent.add_argument("--p", type=float, required=True)
    exponent.add_argument("--p1", type=float, default=0.0)

    sweep = subparsers.add_parser("p0-sweep", help="p0(p) 曲线")
    sweep.add_argument("--p-grid", dest="p_grid", type=_float_list, default=None, help="逗号分隔的 p 值")

    lemma = subparsers.add_parser("lemma", help="单纯形三码字的精确点概率与尾概率")
    lemma.add_argument("--p", type=float, required=True)
    lemma.add_argument("--t", type=float, default=0.0)
    lemma.add_argument("--t1", type=float, default=0.0)
    lemma.add_argument("--m", type=int, default=None)
    lemma.add_argument("--m-ladder", dest="m_ladder", type=_int_list, default=[])

    event = subparsers.add_parser("oracle", help="事件 A1 的精确概率")
    event.add_argument("--p", type=float, required=True)
    event.add_argument("--p1", type=float, required=True)
    event.add_argument("--t", type=float, default=0.0)
    event.add_argument("--m", type=int, default=None)
    event.add_argument("--m-ladder", dest="m_ladder", type=_int_list, default=[])
    event.add_argument("--workers", type=int, default=settings.SIM_WORKERS)

    for name, help_text in (("simulate", "蒙特卡洛估计各类错误概率"), ("ladder", "码长阶梯上的 -ln(错误率)/n")):
        sim = subparsers.add_parser(name, help=help_text)
        sim.add_argument("--scheme", type=SchemeName, choices=list(SchemeName), default=SchemeName.NOISY_SWITCH)
        sim.add_argument("--p", type=float, required=True)
        sim.add_argument("--p1", type=float, default=0.0)
        sim.add_argument("--t", type=float, default=None)
        sim.add_argument("--gamma", type=float, default=None)
        sim.add_argument("--gamma1", type=float, default=None)
        sim.add_argument("--M", type=int, default=3)
        sim.add_argument("--trials", type=int, default=10000)
        sim.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
        sim.add_argument("--workers", type=int, default=settings.SIM_WORKERS)
        if name == "simulate":
            sim.add_argument("--n", type=int, default=1200)
            sim.add_argument("--transcripts", dest="transcript_path", default=None, help="JSON Lines 传输记录")
        else:
            sim.add_argument("--n-ladder", dest="n_ladder", type=_int_list, required=True)
    return parser


def parse_args(argv: list[str] | None = None) -> RunConfig:
    """解析命令行参数为 RunConfig"""
    args = vars(build_parser().parse_args(argv))
    if args.get("p_grid", []) is None:
        args["p_grid"] = list(DEFAULT_P_GRID)
    return RunConfig(**{name: value for name, value in args.items() if name in RunConfig.__dataclass_fields__})


class ExponentCli:
    def __init__(self, config: RunConfig, repository: ResultRepository | None = None):
        """初始化命令行

        Args:
            config: 本次运行的参数
            repository: 结果仓库，--store 时未提供则按环境变量创建
        """
        self.config = config
        self._repository = repository

    @property
    def repository(self) -> ResultRepository:
        if self._repository is None:
            self._repository = create_repository()
        return self._repository

    def _m_values(self) -> list[int]:
        values = self.config.m_ladder or ([self.config.m] if self.config.m else [])
        if not values:
            raise InvalidParameterError("give --m or --m-ladder")
        for m in values:
            if m <= 0 or m % 3 != 0:
                raise InvalidParameterError(f"m must be a positive multiple of 3, got {m}")
        return values

    def validate(self):
        """在开始计算前检查参数"""
        c = self.config
        if c.command == "p0-sweep":
            bad = [p for p in c.p_grid if not (0.0 < p < 0.5)]
            if bad:
                raise InvalidParameterError(f"p grid must lie in (0, 1/2), got {bad}")
            return
        ChannelParams(c.p, c.p1)
        if c.command in ("lemma", "oracle"):
            self._m_values()
        if c.command in ("simulate", "ladder"):
            if c.trials < 1:
                raise InvalidParameterError(f"trials must be at least 1, got {c.trials}")
            if c.M < 2:
                raise InvalidParameterError(f"M must be at least 2, got {c.M}")
            if c.command == "ladder" and (not c.n_ladder or min(c.n_ladder) < 2):
                raise InvalidParameterError(f"n ladder must contain block lengths >= 2, got {c.n_ladder}")
            if c.scheme == SchemeName.NOISY_SWITCH and c.gamma is None and c.p1 > 0.0:
                p0 = exponents.threshold_p0(c.p)
                if c.p1 >= p0:
                    raise InvalidParameterError(
                        f"p1={c.p1} >= p0(p)={p0:.6g}: switching gives no gain and has no optimal gamma; "
                        "pass --gamma or use --scheme no-feedback"
                    )

    def cmd_exponent(self) -> list[dict]:
        c = self.config
        report = exponents.exponent_F1(c.p, c.p1)
        if c.store and not self.repository.insert_exponent_report(report):
            logger.warning("保存指数结果失败")
        return [{**report.to_row(), "F_over_E": report.F / report.E}]

    def cmd_p0_sweep(self) -> list[dict]:
        rows = []
        for p in self.config.p_grid:
            approx_16_27, approx_p_2 = exponents.p0_approximations(p)
            rows.append({"p": p, "p0": exponents.threshold_p0(p), "p0_16p_27": approx_16_27, "p0_p_2": approx_p_2})
        return rows

    def cmd_lemma(self) -> list[dict]:
        c = self.config
        t = c.t or 0.0
        limit = oracle.lemma_exponent_limit(t, c.t1, c.p)
        rows = []
        for m in self._m_values():
            point = oracle.lemma_point_probability(m, t, c.t1, c.p)
            tail = oracle.lemma_tail_probability(m, t, c.t1, c.p)
            rows.append(
                {
                    "m": m,
                    "p": c.p,
                    "t": t,
                    "t1": c.t1,
                    "feasible": point.feasible,
                    "log_point": point.log_p,
                    "exponent_point": point.normalized_exponent,
                    "log_tail": tail.log_p,
                    "exponent_tail": tail.normalized_exponent,
                    "limit": limit,
                    "gap_tail": abs(tail.normalized_exponent - limit),
                }
            )
        return rows

    def cmd_oracle(self) -> list[dict]:
        c = self.config
        t = c.t or 0.0
        g2 = exponents.exponent_G2(t, c.p, c.p1)
        rows = []
        for m in self._m_values():
            result = oracle.eventA1_probability(m, t, c.p, c.p1, workers=c.workers)
            rows.append(
                {
                    "m": m,
                    "p": c.p,
                    "p1": c.p1,
                    "t": t,
                    "log_p": result.log_p,
                    "exponent": result.normalized_exponent,
                    "G2": g2,
                    "gap": abs(result.normalized_exponent - g2),
                }
            )
        return rows

    def scheme_params(self, n: int) -> SchemeParams:
        """按方案补全未给出的 γ、γ1、t：取指数公式给出的最优值"""
        c = self.config
        channel = ChannelParams(c.p, c.p1)
        gamma, gamma1, t = c.gamma, c.gamma1 or 0.0, c.t
        if c.scheme == SchemeName.NO_FEEDBACK:
            gamma = gamma or BASELINE_GAMMA
        elif c.scheme == SchemeName.NOISELESS_SWITCH:
            gamma = gamma or exponents.gamma0(c.p)
        elif c.scheme == SchemeName.NOISY_SWITCH:
            if gamma is None or t is None:
                report = exponents.exponent_F1(c.p, c.p1)
                gamma = gamma or report.gamma_star
                t = report.t_star if t is None else t
        else:
            if gamma is None or c.gamma1 is None:
                active = exponents.exponent_active(c.p, c.p1)
                gamma = gamma or active.gamma
                gamma1 = c.gamma1 if c.gamma1 is not None else active.gamma1
        return SchemeParams(n=n, M=c.M, channel=channel, gamma=gamma, t=t or 0.0, gamma1=gamma1, seed=c.seed)

    def cmd_simulate(self) -> list[dict]:
        c = self.config
        summary = estimate(
            c.scheme,
            self.scheme_params(c.n),
            c.trials,
            c.seed,
            workers=c.workers,
            transcript_path=c.transcript_path,
        )
        if c.store and not self.repository.insert_simulation_summary(summary):
            logger.warning("保存模拟结果失败")
        return [summary.to_row()]

    def cmd_ladder(self) -> list[dict]:
        c = self.config
        base = self.scheme_params(c.n_ladder[0])
        points = slope_ladder(c.scheme, base, c.n_ladder, c.trials, c.seed, workers=c.workers)
        return [{"scheme": c.scheme.value, **point.to_row()} for point in points]

    def render(self, rows: list[dict]) -> str:
        """按固定列顺序和有效数字输出 CSV 或 JSON"""
        rows = [{key: _format_value(value) for key, value in row.items()} for row in rows]
        if self.config.output_format == "json":
            return json.dumps(rows, indent=2) + "\n"
        buffer = io.StringIO()
        if rows:
            writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        return buffer.getvalue()

    def run(self) -> int:
        """执行命令，返回退出码"""
        handlers = {
            "exponent": self.cmd_exponent,
            "p0-sweep": self.cmd_p0_sweep,
            "lemma": self.cmd_lemma,
            "oracle": self.cmd_oracle,
            "simulate": self.cmd_simulate,
            "ladder": self.cmd_ladder,
        }
        try:
            self.validate()
            text = self.render(handlers[self.config.command]())
        except ZeroRateError as e:
            logger.error("%s 失败: %s", self.config.command, e)
            return e.exit_code
        except Exception as e:
            logger.error("%s 出错: %s", self.config.command, e, exc_info=True)
            return 1

        if self.config.output_path:
            with open(self.config.output_path, "w", encoding="utf-8") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return 0


def main(argv: list[str] | None = None) -> int:
    return ExponentCli(parse_args(argv)).run()


if __name__ == "__main__":
    setup_logging()
    sys.exit(main())
