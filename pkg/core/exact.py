"""
Ground-truth solvers for the mixed-integer problem: exhaustive support
enumeration for small n and a best-bound branch-and-bound with time and node
limits. Both return an ExactResult with lb <= ub.
"""

import enum
import heapq
import itertools
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Sequence

from core import cardopt, ipm
from core.errors import CardSdpError, NumericalFailure, TooLarge
from core.instance import Instance
from core.qp import QpProblem, QpResult, solve_qp
from core.sdp import Budget

logger = logging.getLogger(__name__)

ENUM_LIMIT = 10**6
PRUNE_TOL = 1e-9
SUPPORT_TOL = 1e-9


class ExactStatus(str, enum.Enum):
    PROVEN = "Proven"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass
class ExactResult:
    """
    Outcome of an exact solve.

    Attributes:
        best_x: Best portfolio found, None when no feasible support exists
        ub: Objective of best_x (+inf when none)
        lb: Global lower bound from the remaining tree
        gap: relative_gap(ub, lb); NaN when undefined
        nodes: Processed nodes (supports for enumeration)
        status: Proven, TimeLimit or Infeasible
        wall_time: Seconds spent
    """
    best_x: Optional[cardopt.Portfolio]
    ub: float
    lb: float
    gap: float
    nodes: int
    status: ExactStatus
    wall_time: float
    note: str = ""

    @property
    def proven(self) -> bool:
        return self.status is ExactStatus.PROVEN

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ub": self.ub,
            "lb": self.lb,
            "gap": self.gap,
            "nodes": self.nodes,
            "status": self.status.value,
            "wall_time": self.wall_time,
            "note": self.note,
            "best_x": self.best_x.to_dict() if self.best_x else None,
        }


def _finish(inst: Instance, best: Optional[QpResult], lb: float, nodes: int,
            status: ExactStatus, start: float, budget: Budget, note: str = "") -> ExactResult:
    if best is None:
        if status is ExactStatus.PROVEN:
            status = ExactStatus.INFEASIBLE
        ub = math.inf
        portfolio = None
    else:
        ub = best.objective
        portfolio = cardopt.make_portfolio(inst, best.x, best.support, budget)
    if status is ExactStatus.PROVEN:
        lb = ub
    lb = min(lb, ub)
    gap, _ = cardopt.relative_gap(ub, lb)
    return ExactResult(best_x=portfolio, ub=ub, lb=lb, gap=gap, nodes=nodes, status=status,
                       wall_time=time.perf_counter() - start, note=note)


def enumerate_supports(inst: Instance, budget: Budget = Budget.AT_MOST,
                       limit: int = ENUM_LIMIT) -> ExactResult:
    """
    Solve every reduced QP of size min(ℵ, n) and keep the best.

    Raises:
        TooLarge: C(n, ℵ) exceeds `limit`
    """
    start = time.perf_counter()
    k = min(inst.aleph, inst.n)
    count = math.comb(inst.n, k)
    if count > limit:
        raise TooLarge(count, limit)

    best: Optional[QpResult] = None
    for S in itertools.combinations(range(inst.n), k):
        res = solve_qp(QpProblem.of(inst, S, budget))
        if res.feasible and (best is None or res.objective < best.objective):
            best = res
    logger.info("enumerated %d supports of size %d for %s", count, k, inst.name)
    return _finish(inst, best, -math.inf, count, ExactStatus.PROVEN, start, budget)


def continuous_bound(inst: Instance, budget: Budget = Budget.AT_MOST) -> QpResult:
    """Convex relaxation with the cardinality constraint dropped."""
    return solve_qp(QpProblem.of(inst, range(inst.n), budget))


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    zero: FrozenSet[int] = field(compare=False, default=frozenset())
    chosen: FrozenSet[int] = field(compare=False, default=frozenset())


class _Search:
    """
    Shared state of one branch-and-bound run: a best-bound node pool and the
    incumbent, both guarded by one lock.
    """

    def __init__(self, inst: Instance, budget: Budget, deadline: Optional[float],
                 node_limit: Optional[int]):
        self.inst = inst
        self.budget = budget
        self.deadline = deadline
        self.node_limit = node_limit
        self.best: Optional[QpResult] = None
        self.nodes = 0
        self.stopped: Optional[str] = None
        self._heap: List[_Node] = []
        self._seq = itertools.count()
        self._busy = 0
        self._lost: List[float] = []
        self._cond = threading.Condition()

    @property
    def ub(self) -> float:
        return self.best.objective if self.best is not None else math.inf

    def _prune_level(self) -> float:
        ub = self.ub
        return ub - PRUNE_TOL * abs(ub) if math.isfinite(ub) else math.inf

    def prunable(self, bound: float) -> bool:
        with self._cond:
            return bound >= self._prune_level()

    def offer(self, res: Optional[QpResult]):
        if res is None or not res.feasible:
            return
        with self._cond:
            if res.objective < self.ub:
                self.best = res
                logger.debug("new incumbent %.10g on %s", res.objective, res.support)

    def push(self, bound: float, zero: FrozenSet[int], chosen: FrozenSet[int]):
        with self._cond:
            heapq.heappush(self._heap, _Node(bound, next(self._seq), zero, chosen))
            self._cond.notify()

    def lose(self, bound: float):
        with self._cond:
            self._lost.append(bound)

    def pop(self) -> Optional[_Node]:
        with self._cond:
            while True:
                level = self._prune_level()
                while self._heap and self._heap[0].bound >= level:
                    heapq.heappop(self._heap)
                if self._heap and self.stopped is None:
                    if self.deadline is not None and time.perf_counter() >= self.deadline:
                        self.stopped = "time limit"
                    elif self.node_limit is not None and self.nodes >= self.node_limit:
                        self.stopped = "node limit"
                if self.stopped is not None:
                    self._cond.notify_all()
                    return None
                if self._heap:
                    node = heapq.heappop(self._heap)
                    self.nodes += 1
                    self._busy += 1
                    return node
                if self._busy == 0:
                    self._cond.notify_all()
                    return None
                self._cond.wait(timeout=0.05)

    def done(self):
        with self._cond:
            self._busy -= 1
            self._cond.notify_all()

    def open_bound(self) -> float:
        level = self._prune_level()
        bounds = [node.bound for node in self._heap if node.bound < level] + self._lost
        return min(bounds + [self.ub])

    @property
    def exhausted(self) -> bool:
        return self.stopped is None and not self._lost


def _qp(search: _Search, support: Sequence[int]) -> Optional[QpResult]:
    try:
        return solve_qp(QpProblem.of(search.inst, support, search.budget))
    except NumericalFailure as exc:
        logger.warning("node QP on %s failed: %s", tuple(support), exc)
        return None


def _process(search: _Search, node: _Node):
    inst = search.inst
    aleph = inst.aleph
    free = [i for i in range(inst.n) if i not in node.zero]

    # closable by a single reduced QP
    if len(node.chosen) >= aleph or len(free) <= aleph:
        S = sorted(node.chosen) if len(node.chosen) >= aleph else free
        res = _qp(search, S)
        if res is None:
            search.lose(node.bound)
        search.offer(res)
        return

    relax = _qp(search, free)
    if relax is None:
        search.lose(node.bound)
        return
    if not relax.feasible:
        return
    bound = max(node.bound, relax.objective)
    if search.prunable(bound):
        return

    x = relax.x
    significant = [i for i in free if x[i] > SUPPORT_TOL]
    support = sorted(set(significant) | node.chosen)
    if len(support) <= aleph:
        # the relaxation already respects the cardinality cap
        res = _qp(search, support)
        search.offer(res)
        if res is not None and res.feasible and res.objective <= bound + PRUNE_TOL * (1.0 + abs(bound)):
            return

    if not node.zero and not node.chosen:
        ranked = sorted(free, key=lambda i: (-x[i], i))
        search.offer(_qp(search, ranked[:aleph]))

    candidates = [i for i in free if i not in node.chosen]
    pivot = max(candidates, key=lambda i: (x[i], -i))
    logger.debug("branch on %d at bound %.8g (|zero|=%d, |chosen|=%d)",
                 pivot, bound, len(node.zero), len(node.chosen))
    search.push(bound, node.zero | {pivot}, node.chosen)
    search.push(bound, node.zero, node.chosen | {pivot})


def _worker(search: _Search):
    while True:
        node = search.pop()
        if node is None:
            return
        try:
            _process(search, node)
        except CardSdpError as exc:
            logger.warning("node failed: %s", exc)
            search.lose(node.bound)
        finally:
            search.done()


def _seed_incumbent(search: _Search, cfg: Optional[ipm.SolverConfig]):
    """Run the relaxation-and-rounding heuristic to start with a finite ub."""
    try:
        _, lifted, _ = cardopt.lower_bound(search.inst, cfg, search.budget)
        portfolio = cardopt.round_solution(search.inst, lifted, search.budget)
    except CardSdpError as exc:
        logger.warning("incumbent seeding skipped: %s", exc)
        return
    if portfolio is not None:
        search.offer(_qp(search, portfolio.support))


def branch_and_bound(inst: Instance, time_limit: Optional[float] = None,
                     budget: Budget = Budget.AT_MOST, jobs: int = 1,
                     node_limit: Optional[int] = None, seed_with_sdp: bool = True,
                     cfg: Optional[ipm.SolverConfig] = None) -> ExactResult:
    """
    Best-bound branch-and-bound on the support decisions.

    Args:
        inst: Instance to solve
        time_limit: Seconds before stopping with TimeLimit (None = no limit)
        budget: Budget mode
        jobs: Worker threads sharing the node pool
        node_limit: Stop after this many processed nodes (None = no limit)
        seed_with_sdp: Seed the incumbent from the rounded relaxation
        cfg: Interior-point settings for the seeding relaxation

    Returns:
        ExactResult; never raises on a time or node limit
    """
    start = time.perf_counter()
    deadline = start + time_limit if time_limit is not None else None
    search = _Search(inst, Budget(budget), deadline, node_limit)

    if seed_with_sdp and inst.aleph > 0:
        _seed_incumbent(search, cfg)
    search.push(-math.inf, frozenset(), frozenset())

    jobs = max(1, int(jobs))
    if jobs == 1:
        _worker(search)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for future in [pool.submit(_worker, search) for _ in range(jobs)]:
                future.result()

    if search.exhausted:
        status, note = ExactStatus.PROVEN, ""
    else:
        status = ExactStatus.TIME_LIMIT
        note = search.stopped or "node relaxation failed"
    lb = search.open_bound()
    if status is ExactStatus.TIME_LIMIT and search.best is None and not math.isfinite(lb):
        lb = -math.inf
    result = _finish(inst, search.best, lb, search.nodes, status, start, search.budget, note)
    logger.info("branch-and-bound %s: %s ub=%.10g lb=%.10g nodes=%d", inst.name,
                result.status.value, result.ub, result.lb, result.nodes)
    return result
