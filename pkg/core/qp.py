"""
Convex mean-variance QP restricted to a fixed support.

    min xᵀQx  s.t.  μᵀx >= ρ,  eᵀx <= 1 (or = 1),  0 <= x_i <= u_i (i in S),  x_i = 0 (i not in S)

The QP is handed to the conic interior-point core through the epigraph
t >= ||Lᵀx||² written as [[t, wᵀ], [w, I]] ⪰ 0 with w = Lᵀx and Q_SS = L Lᵀ.
The support variables x live in the nonnegative slack block.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from core import ipm, linalg
from core.errors import DimensionMismatch, NotPositiveDefinite, NumericalFailure
from core.instance import Instance
from core.sdp import Budget, ConicConstraint, ConicProblem

logger = logging.getLogger(__name__)

QP_CONFIG = ipm.SolverConfig(gap_tol=1e-9, feas_tol=1e-9, max_iter=100)
ACCEPT_TOL = 1e-7
BOUNDARY_TOL = 1e-10


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Reduced QP of an instance: only the stocks in `support` may be nonzero."""
    inst: Instance
    support: Tuple[int, ...]
    budget: Budget = Budget.AT_MOST

    @classmethod
    def of(cls, inst: Instance, support: Iterable[int],
           budget: Budget = Budget.AT_MOST) -> "QpProblem":
        S = tuple(sorted({int(i) for i in support}))
        if S and (S[0] < 0 or S[-1] >= inst.n):
            raise DimensionMismatch(f"support {S} outside [0, {inst.n})")
        return cls(inst=inst, support=S, budget=Budget(budget))

    @property
    def forced_zero(self) -> Tuple[int, ...]:
        chosen = set(self.support)
        return tuple(i for i in range(self.inst.n) if i not in chosen)


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    status: QpStatus
    kkt_residual: float
    support: Tuple[int, ...] = ()
    iterations: int = 0
    note: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def _greedy_fill(inst: Instance, support: Tuple[int, ...], budget: Budget) -> Tuple[np.ndarray, float]:
    """
    Maximize μᵀx over the box/budget on the support by filling stocks in
    μ-descending order (ties by lowest index).

    Returns:
        (maximizer, maximal return); return is -inf when the budget cannot be met
    """
    x = np.zeros(inst.n)
    order = sorted(support, key=lambda i: (-inst.mu[i], i))
    exact = budget is Budget.EXACT
    if exact and float(np.sum(inst.u[list(support)])) < 1.0 - BOUNDARY_TOL:
        return x, -np.inf
    remaining = 1.0
    for i in order:
        if remaining <= 0.0 or (inst.mu[i] <= 0.0 and not exact):
            break
        take = min(float(inst.u[i]), remaining)
        x[i] = take
        remaining -= take
    return x, float(inst.mu @ x)


def max_return(inst: Instance, support: Iterable[int], budget: Budget = Budget.AT_MOST) -> float:
    """Largest expected return reachable on the support."""
    S = tuple(sorted(set(int(i) for i in support)))
    return _greedy_fill(inst, S, Budget(budget))[1]


def _epigraph_factor(Q_SS: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(Q_SS)
    except NotPositiveDefinite:
        # PSD but singular on this support
        w, V = linalg.sym_eig(Q_SS)
        return V * np.sqrt(np.clip(w, 0.0, None))[None, :]


def epigraph_problem(p: QpProblem) -> ConicProblem:
    """Conic form of the reduced QP; slack layout is [x_S, return, budget?, upper_S]."""
    inst = p.inst
    S = list(p.support)
    k = len(S)
    L = _epigraph_factor(inst.Q[np.ix_(S, S)])

    C = np.zeros((k + 1, k + 1))
    C[0, 0] = 1.0
    cons: List[ConicConstraint] = []
    for i in range(k):
        for j in range(i, k):
            cons.append(ConicConstraint.from_terms(
                f"W[{i},{j}]", [(1 + i, 1 + j, 1.0)], rhs=1.0 if i == j else 0.0))
    for i in range(k):
        cons.append(ConicConstraint.from_terms(
            f"w[{i}]", [(1 + i, 0, 1.0)], slack=[(j, -L[j, i]) for j in range(k)], rhs=0.0))

    slack = k
    ret = [(j, float(inst.mu[S[j]])) for j in range(k)] + [(slack, -1.0)]
    slack += 1
    cons.append(ConicConstraint.from_terms("return", [], slack=ret, rhs=inst.rho))
    bud = [(j, 1.0) for j in range(k)]
    if p.budget is Budget.AT_MOST:
        bud.append((slack, 1.0))
        slack += 1
    cons.append(ConicConstraint.from_terms("budget", [], slack=bud, rhs=1.0))
    for j in range(k):
        cons.append(ConicConstraint.from_terms(
            f"upper[{S[j]}]", [], slack=[(j, 1.0), (slack, 1.0)], rhs=float(inst.u[S[j]])))
        slack += 1

    return ConicProblem(psd_dim=k + 1, slack_dim=slack, C=C, constraints=tuple(cons),
                        label=f"qp{tuple(S)}")


def _infeasible(p: QpProblem, note: str) -> QpResult:
    return QpResult(x=np.zeros(p.inst.n), objective=np.inf, status=QpStatus.INFEASIBLE,
                    kkt_residual=0.0, support=p.support, note=note)


def _result(p: QpProblem, x: np.ndarray, kkt: float, iterations: int = 0, note: str = "") -> QpResult:
    x[list(p.forced_zero)] = 0.0
    return QpResult(x=x, objective=p.inst.portfolio_risk(x), status=QpStatus.OPTIMAL,
                    kkt_residual=kkt, support=p.support, iterations=iterations, note=note)


def solve_qp(p: QpProblem, cfg: Optional[ipm.SolverConfig] = None) -> QpResult:
    """
    Globally solve the reduced QP.

    Args:
        p: Reduced problem
        cfg: Interior-point settings (QP_CONFIG by default)

    Returns:
        QpResult; Infeasible results name the failed aggregate check in `note`

    Raises:
        NumericalFailure: the interior-point solve broke down
    """
    inst = p.inst
    S = p.support
    greedy_x, best_return = _greedy_fill(inst, S, p.budget)
    if best_return == -np.inf:
        return _infeasible(p, "sum of upper bounds on the support is below the budget")
    if best_return < inst.rho - BOUNDARY_TOL * (1.0 + abs(inst.rho)):
        return _infeasible(p, f"max return {best_return:.6g} on the support is below rho={inst.rho:.6g}")

    if not S:
        return _result(p, np.zeros(inst.n), 0.0, note="empty support")
    if best_return <= inst.rho + BOUNDARY_TOL * (1.0 + abs(inst.rho)):
        # The return constraint is tight at its maximum: the greedy fill is the only point.
        return _result(p, greedy_x, 0.0, note="return constraint tight at its maximum")
    if p.budget is Budget.EXACT and float(np.sum(inst.u[list(S)])) <= 1.0 + BOUNDARY_TOL:
        x = np.zeros(inst.n)
        x[list(S)] = inst.u[list(S)]
        return _result(p, x, 0.0, note="budget met only by the upper bounds")

    sol = ipm.solve(epigraph_problem(p), cfg or QP_CONFIG)
    kkt = max(sol.rel_gap, sol.primal_res, sol.dual_res)
    if not sol.optimal:
        if kkt > ACCEPT_TOL:
            raise NumericalFailure(
                f"QP on support {S} ended with {sol.status.value} (kkt residual {kkt:.2e})",
                status=sol.status.value,
            )
        logger.debug("accepting %s QP iterate on %s with kkt residual %.2e",
                     sol.status.value, S, kkt)

    k = len(S)
    x = np.zeros(inst.n)
    x[list(S)] = np.clip(sol.slacks[:k], 0.0, inst.u[list(S)])
    return _result(p, x, kkt, iterations=sol.iterations)


def qp_residuals(inst: Instance, x, budget: Budget = Budget.AT_MOST) -> dict:
    """Per-constraint violations of a candidate portfolio (all >= 0)."""
    x = np.asarray(x, dtype=np.float64)
    total = float(np.sum(x))
    budget_violation = abs(total - 1.0) if Budget(budget) is Budget.EXACT else max(0.0, total - 1.0)
    return {
        "return": max(0.0, inst.rho - float(inst.mu @ x)),
        "budget": budget_violation,
        "upper": float(np.max(np.maximum(x - inst.u, 0.0))),
        "lower": float(np.max(np.maximum(-x, 0.0))),
    }
