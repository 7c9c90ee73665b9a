"""
End-to-end bound pipeline.

build relaxation -> interior-point solve -> rank check -> round to a feasible
portfolio -> report lower bound, upper bound and relative gap.
Each stage runs through a StageRunner that records success or failure
instead of raising, so a report is produced even when a solver breaks down.
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core import ipm
from core.errors import CardSdpError, NumericalFailure
from core.instance import Instance
from core.qp import QpProblem, QpResult, max_return, qp_residuals, solve_qp
from core.sdp import Budget, LiftedPoint, build_sdp, split_lifted

logger = logging.getLogger(__name__)

GAP_ZERO_TOL = 1e-12
CLOSED_GAP_TOL = 1e-4


@dataclass
class Portfolio:
    """A feasible point of the cardinality-constrained problem (the ub side)."""
    x: np.ndarray
    support: Tuple[int, ...]
    objective: float
    feas_residuals: Dict[str, float]

    @property
    def card(self) -> int:
        return len(self.support)

    @property
    def max_residual(self) -> float:
        return max(self.feas_residuals.values()) if self.feas_residuals else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x.tolist(),
            "support": list(self.support),
            "objective": self.objective,
            "feas_residuals": dict(self.feas_residuals),
        }


def make_portfolio(inst: Instance, x, support: Sequence[int],
                   budget: Budget = Budget.AT_MOST) -> Portfolio:
    """Wrap x as a Portfolio, zeroing everything off the support."""
    S = tuple(sorted(int(i) for i in support))
    clean = np.zeros(inst.n)
    clean[list(S)] = np.asarray(x, dtype=np.float64)[list(S)]
    residuals = qp_residuals(inst, clean, budget)
    residuals["cardinality"] = float(max(0, len(S) - inst.aleph))
    return Portfolio(x=clean, support=S, objective=inst.portfolio_risk(clean),
                     feas_residuals=residuals)


def relative_gap(ub: float, lb: float) -> Tuple[float, bool]:
    """
    (ub - lb) / ub with the near-zero ub convention.

    Returns:
        (gap, flagged); flagged gaps are NaN and mean "undefined"
    """
    if not (math.isfinite(ub) and math.isfinite(lb)):
        return math.nan, True
    if ub > GAP_ZERO_TOL:
        return (ub - lb) / ub, False
    if abs(ub - lb) <= GAP_ZERO_TOL:
        return 0.0, False
    return math.nan, True


@dataclass
class StageRecord:
    name: str
    success: bool
    wall_time: float
    status: str = ""
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class StageRunner:
    """
    Executes pipeline stages with error capture.
    """

    def __init__(self):
        self.history: List[StageRecord] = []

    def execute(self, name: str, fn: Callable, *args, **kwargs) -> Dict[str, Any]:
        """
        Run one stage.

        Args:
            name: Stage label used in the report
            fn: Callable to run
            *args, **kwargs: Forwarded to fn

        Returns:
            Dict with success flag, result (or None) and error text
        """
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except CardSdpError as exc:
            elapsed = time.perf_counter() - start
            status = getattr(exc, "status", None) or type(exc).__name__
            logger.warning("stage %s failed: %s", name, exc)
            self.history.append(StageRecord(name, False, elapsed, status, str(exc)))
            return {"success": False, "error": str(exc), "status": status,
                    "result": None, "wall_time": elapsed}
        elapsed = time.perf_counter() - start
        self.history.append(StageRecord(name, True, elapsed, "ok"))
        return {"success": True, "error": None, "status": "ok",
                "result": result, "wall_time": elapsed}

    def mark(self, name: str, status: str, error: Optional[str] = None):
        """Record a stage that was decided without running anything."""
        self.history.append(StageRecord(name, error is None, 0.0, status, error))


def lower_bound(inst: Instance, cfg: Optional[ipm.SolverConfig] = None,
                budget: Budget = Budget.AT_MOST) -> Tuple[float, LiftedPoint, ipm.SdpSolution]:
    """
    Solve the relaxation and cut the lifted point from its primal matrix.

    Returns:
        (lb, lifted, stats) with lb the dual objective; check
        stats.lower_bound_is_safe before relying on lb when stats is not Optimal
    """
    prob = build_sdp(inst, budget)
    stats = ipm.solve(prob, cfg)
    if stats.status is ipm.SolveStatus.NUMERICAL_FAILURE and not np.all(np.isfinite(stats.M)):
        raise NumericalFailure("relaxation solve produced a non-finite iterate",
                               status=stats.status.value)
    lifted = split_lifted(stats.M, inst.n, inst.Q)
    return stats.dual_obj, lifted, stats


def _top(scores: np.ndarray, k: int) -> Tuple[int, ...]:
    # descending score, ties broken by lowest index
    order = sorted(range(scores.shape[0]), key=lambda i: (-scores[i], i))
    return tuple(sorted(order[:k]))


def _repair(inst: Instance, support: Tuple[int, ...], budget: Budget) -> Tuple[int, ...]:
    """Swap low-return stocks for the best outside ones until the return target is reachable."""
    S = list(support)
    outside = sorted((i for i in range(inst.n) if i not in S), key=lambda i: (-inst.mu[i], i))
    while S and outside and max_return(inst, S, budget) < inst.rho:
        worst = min(S, key=lambda i: (inst.mu[i], -i))
        if inst.mu[outside[0]] <= inst.mu[worst]:
            break
        S.remove(worst)
        S.append(outside.pop(0))
    return tuple(sorted(S))


def candidate_supports(inst: Instance, lifted: LiftedPoint,
                       budget: Budget = Budget.AT_MOST) -> List[Tuple[int, ...]]:
    """
    Ordered candidate supports of size min(ℵ, n): top-ℵ by x, by x·μ,
    then the μ-descending repair of the first one.
    """
    k = min(inst.aleph, inst.n)
    x = np.asarray(lifted.x, dtype=np.float64)
    primary = _top(x, k)
    candidates = [primary, _top(x * inst.mu, k), _repair(inst, primary, budget),
                  _top(inst.mu * np.minimum(inst.u, 1.0), k)]
    unique: List[Tuple[int, ...]] = []
    for S in candidates:
        if S not in unique:
            unique.append(S)
    return unique


def round_solution(inst: Instance, lifted: LiftedPoint,
                   budget: Budget = Budget.AT_MOST) -> Optional[Portfolio]:
    """
    Turn a (near-)feasible lifted point into a feasible portfolio.

    Every candidate support is re-optimized by its reduced QP.

    Returns:
        The lowest-risk feasible candidate, earlier candidates winning ties;
        None when every candidate fails
    """
    best: Optional[QpResult] = None
    for S in candidate_supports(inst, lifted, budget):
        try:
            res = solve_qp(QpProblem.of(inst, S, budget))
        except NumericalFailure as exc:
            logger.warning("rounding candidate %s failed: %s", S, exc)
            continue
        if not res.feasible:
            logger.debug("rounding candidate %s infeasible: %s", S, res.note)
        elif best is None or res.objective < best.objective:
            best = res
    if best is None:
        return None
    return make_portfolio(inst, best.x, best.support, budget)


@dataclass
class RunReport:
    """Result row of one pipeline run."""
    name: str
    n: int
    aleph: int
    lb_sdp: float
    ub: float
    gap: float
    gap_flagged: bool
    rank: int
    sdp_time: float
    round_time: float
    sdp_status: str
    round_status: str
    lb_safe: bool
    portfolio: Optional[Portfolio] = None
    stages: List[StageRecord] = field(default_factory=list)
    lifted: Optional[LiftedPoint] = field(default=None, repr=False)
    stats: Optional[ipm.SdpSolution] = field(default=None, repr=False)

    @property
    def rank_one(self) -> bool:
        return self.rank == 1

    @property
    def closed(self) -> bool:
        return not self.gap_flagged and self.gap <= CLOSED_GAP_TOL

    @property
    def solver_failed(self) -> bool:
        return self.sdp_status == ipm.SolveStatus.NUMERICAL_FAILURE.value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "aleph": self.aleph,
            "lb_sdp": self.lb_sdp,
            "ub": self.ub,
            "gap": self.gap,
            "gap_flagged": self.gap_flagged,
            "rank": self.rank,
            "sdp_time": self.sdp_time,
            "round_time": self.round_time,
            "sdp_status": self.sdp_status,
            "round_status": self.round_status,
            "lb_safe": self.lb_safe,
            "portfolio": self.portfolio.to_dict() if self.portfolio else None,
            "stages": [stage.to_dict() for stage in self.stages],
        }


def _obviously_infeasible(inst: Instance, budget: Budget) -> Optional[str]:
    if max_return(inst, range(inst.n), budget) < inst.rho:
        return "required return exceeds the best reachable return"
    if inst.aleph == 0 and max_return(inst, (), budget) < inst.rho:
        return "empty portfolio cannot reach the required return"
    return None


def run(inst: Instance, cfg: Optional[ipm.SolverConfig] = None,
        budget: Budget = Budget.AT_MOST) -> RunReport:
    """
    Full pipeline on one instance. Never raises on solver failure: the
    stage statuses in the report say what happened.
    """
    runner = StageRunner()
    lb, lifted, stats = math.nan, None, None
    sdp_status = ""
    sdp_time = 0.0

    reason = _obviously_infeasible(inst, budget)
    if reason:
        sdp_status = ipm.SolveStatus.PRIMAL_INFEASIBLE.value
        runner.mark("sdp", sdp_status, reason)
    else:
        outcome = runner.execute("sdp", lower_bound, inst, cfg, budget)
        sdp_time = outcome["wall_time"]
        if outcome["success"]:
            lb, lifted, stats = outcome["result"]
            sdp_status = stats.status.value
        else:
            sdp_status = outcome["status"]

    portfolio = None
    round_time = 0.0
    round_status = "skipped"
    infeasible_flags = (ipm.SolveStatus.PRIMAL_INFEASIBLE.value,)
    if lifted is not None and sdp_status not in infeasible_flags:
        outcome = runner.execute("round", round_solution, inst, lifted, budget)
        round_time = outcome["wall_time"]
        portfolio = outcome["result"]
        if not outcome["success"]:
            round_status = outcome["status"]
        else:
            round_status = "ok" if portfolio is not None else "NoneFound"

    ub = portfolio.objective if portfolio is not None else math.inf
    gap, flagged = relative_gap(ub, lb)
    report = RunReport(
        name=inst.name,
        n=inst.n,
        aleph=inst.aleph,
        lb_sdp=lb,
        ub=ub,
        gap=gap,
        gap_flagged=flagged,
        rank=lifted.numerical_rank if lifted is not None else -1,
        sdp_time=sdp_time,
        round_time=round_time,
        sdp_status=sdp_status,
        round_status=round_status,
        lb_safe=bool(stats is not None and stats.lower_bound_is_safe),
        portfolio=portfolio,
        stages=list(runner.history),
        lifted=lifted,
        stats=stats,
    )
    logger.info("run %s: lb=%.6g ub=%.6g gap=%s rank=%d (%s)", inst.name, lb, ub,
                "flagged" if flagged else f"{gap:.3e}", report.rank, sdp_status)
    return report
