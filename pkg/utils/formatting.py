"""
Human-readable text for CLI output and the dashboard.
"""

import math
from typing import List, Sequence

import pandas as pd

from core.bench import AggregateRow, aggregate_frame
from core.cardopt import RunReport
from core.exact import ExactResult


def fmt_num(value: float, digits: int = 6) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def fmt_gap(gap: float, flagged: bool = False) -> str:
    if flagged or gap is None or math.isnan(gap):
        return "undefined"
    return f"{100.0 * gap:.4f}%"


def format_run_report(report: RunReport) -> str:
    """Multi-line summary of a pipeline run."""
    lines: List[str] = [
        f"instance      {report.name or '(unnamed)'}  n={report.n}  aleph={report.aleph}",
        f"lower bound   {fmt_num(report.lb_sdp, 10)}"
        + ("" if report.lb_safe or math.isnan(report.lb_sdp) else "  (unsafe: solver not converged)"),
        f"upper bound   {fmt_num(report.ub, 10)}",
        f"gap           {fmt_gap(report.gap, report.gap_flagged)}",
        f"rank          {report.rank if report.rank >= 0 else 'n/a'}",
        f"sdp           {report.sdp_status or 'n/a'}  {report.sdp_time:.3f}s",
        f"rounding      {report.round_status}  {report.round_time:.3f}s",
    ]
    if report.stats is not None:
        s = report.stats
        lines.append(
            f"ipm           {s.iterations} iterations, rel_gap {s.rel_gap:.2e}, "
            f"pres {s.primal_res:.2e}, dres {s.dual_res:.2e}"
        )
    if report.portfolio is not None:
        p = report.portfolio
        weights = ", ".join(f"{i}:{p.x[i]:.6f}" for i in p.support)
        lines.append(f"portfolio     {{{weights}}}")
        lines.append(f"max residual  {p.max_residual:.2e}")
    for stage in report.stages:
        if not stage.success:
            lines.append(f"stage {stage.name} failed: {stage.error}")
    return "\n".join(lines)


def format_exact_result(result: ExactResult, name: str = "") -> str:
    lines = [
        f"instance      {name or '(unnamed)'}",
        f"status        {result.status.value}" + (f" ({result.note})" if result.note else ""),
        f"upper bound   {fmt_num(result.ub, 10)}",
        f"lower bound   {fmt_num(result.lb, 10)}",
        f"gap           {fmt_gap(result.gap)}",
        f"nodes         {result.nodes}",
        f"time          {result.wall_time:.3f}s",
    ]
    if result.best_x is not None:
        weights = ", ".join(f"{i}:{result.best_x.x[i]:.6f}" for i in result.best_x.support)
        lines.append(f"portfolio     {{{weights}}}")
    return "\n".join(lines)


def percent_table(rows: Sequence[AggregateRow]) -> pd.DataFrame:
    """Aggregate rows with gaps scaled to percent, for display only."""
    frame = aggregate_frame(rows)
    for column in frame.columns:
        if column.startswith("gap_") or column == "rank_one_frac":
            frame[column] = 100.0 * frame[column]
    return frame.rename(columns={
        "gap_exact_min": "exact min %", "gap_exact_avg": "exact avg %",
        "gap_exact_max": "exact max %", "gap_sdp_min": "sdp min %",
        "gap_sdp_avg": "sdp avg %", "gap_sdp_max": "sdp max %",
        "sdp_time_avg": "time s", "rank_one_frac": "rank-1 %",
    })


def format_aggregate(rows: Sequence[AggregateRow]) -> str:
    if not rows:
        return "(no rows)"
    return percent_table(rows).to_string(index=False, float_format=lambda v: f"{v:.2f}")
