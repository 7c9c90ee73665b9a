"""
Semidefinite relaxation of the cardinality-constrained portfolio problem.

The relaxation lifts (x, y) into the (2n+1)-dimensional block matrix

        [ 1   xᵀ   yᵀ ]
    M = [ x   X    Zᵀ ]      rows/cols: 0 | 1..n (x) | n+1..2n (y)
        [ y   Z    Y  ]

with Z = M[y-rows, x-cols], and writes it in standard conic form: one PSD block
plus a nonnegative slack vector, equality constraints only.
"""

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from core import linalg
from core.errors import CornerNotUnit, DimensionMismatch, ValidationError
from core.instance import Instance

RANK_TOL = 1e-6
CORNER_TOL = 1e-6


class Budget(str, enum.Enum):
    """Budget row of the model: eᵀx <= 1 (default) or eᵀx = 1."""
    AT_MOST = "le"
    EXACT = "eq"


@dataclass(frozen=True)
class ConicConstraint:
    """
    One equality row:  ⟨A, M⟩ + Σ_k g_k s_k = rhs.

    A is stored as a full symmetric COO triple (both triangles present),
    g as (slack index, coefficient) pairs.
    """
    label: str
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    slack: Tuple[Tuple[int, float], ...]
    rhs: float

    @classmethod
    def from_terms(cls, label: str, terms: Iterable[Tuple[int, int, float]],
                   slack: Sequence[Tuple[int, float]] = (), rhs: float = 0.0) -> "ConicConstraint":
        """
        Args:
            terms: (r, c, v) meaning v * M[r, c]; off-diagonal weight is split
                evenly over both triangles so the matrix stays symmetric
        """
        acc: Dict[Tuple[int, int], float] = {}
        for r, c, v in terms:
            key = (min(r, c), max(r, c))
            acc[key] = acc.get(key, 0.0) + float(v)
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for (r, c), v in sorted(acc.items()):
            if v == 0.0:
                continue
            if r == c:
                rows.append(r); cols.append(c); vals.append(v)
            else:
                rows.extend((r, c)); cols.extend((c, r)); vals.extend((0.5 * v, 0.5 * v))
        return cls(
            label=label,
            rows=np.asarray(rows, dtype=np.int64),
            cols=np.asarray(cols, dtype=np.int64),
            vals=np.asarray(vals, dtype=np.float64),
            slack=tuple((int(k), float(g)) for k, g in slack if g != 0.0),
            rhs=float(rhs),
        )

    def matrix(self, dim: int) -> sparse.coo_matrix:
        return sparse.coo_matrix((self.vals, (self.rows, self.cols)), shape=(dim, dim))

    def is_symmetric(self, dim: int) -> bool:
        A = self.matrix(dim).tocsr()
        return abs(A - A.T).sum() == 0


@dataclass(frozen=True)
class ConicProblem:
    """
    min ⟨C, M⟩  s.t.  ⟨A_i, M⟩ + g_iᵀ s = b_i,  M ⪰ 0 (psd_dim),  s >= 0 (slack_dim).
    """
    psd_dim: int
    slack_dim: int
    C: np.ndarray
    constraints: Tuple[ConicConstraint, ...]
    label: str = ""
    n: Optional[int] = None

    @property
    def m(self) -> int:
        return len(self.constraints)

    @cached_property
    def A(self) -> sparse.csr_matrix:
        """Constraint operator as an m × psd_dim² matrix acting on M.ravel()."""
        N = self.psd_dim
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            rows.append(np.full(con.vals.shape, i, dtype=np.int64))
            cols.append(con.rows * N + con.cols)
            vals.append(con.vals)
        if not rows:
            return sparse.csr_matrix((0, N * N))
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, N * N),
        )

    @cached_property
    def G(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for k, g in con.slack:
                rows.append(i); cols.append(k); vals.append(g)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.m, self.slack_dim))

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([con.rhs for con in self.constraints], dtype=np.float64)

    def objective(self, M) -> float:
        return float(np.sum(self.C * np.asarray(M)))

    def residual(self, M, s) -> np.ndarray:
        """b - A(M) - G s."""
        M = np.asarray(M, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        return self.b - self.A @ M.ravel() - self.G @ s

    def validate(self) -> None:
        N = self.psd_dim
        if self.C.shape != (N, N):
            raise DimensionMismatch(f"C has shape {self.C.shape}, expected {(N, N)}")
        if not np.array_equal(self.C, self.C.T):
            raise ValidationError("symmetry", "objective matrix C is not symmetric")
        for con in self.constraints:
            if con.rows.size and (con.rows.max() >= N or con.cols.max() >= N):
                raise DimensionMismatch(f"constraint {con.label} indexes outside the PSD block")
            if any(k >= self.slack_dim or k < 0 for k, _ in con.slack):
                raise DimensionMismatch(f"constraint {con.label} indexes outside the slack block")
            if not con.is_symmetric(N):
                raise ValidationError("symmetry", f"constraint {con.label} is not symmetric")


def x_index(i: int) -> int:
    return 1 + i


def y_index(n: int, i: int) -> int:
    return 1 + n + i


def build_sdp(inst: Instance, budget: Budget = Budget.AT_MOST) -> ConicProblem:
    """
    Build the lifted relaxation as a ConicProblem.

    Constraint order (m = 4n+4):
        0               M[0,0] = 1
        1 .. n          diag(Z) = 0
        n+1 .. 2n       diag(Y) = y
        2n+1            μᵀx - s = ρ
        2n+2            eᵀx + s = 1   (no slack when budget is EXACT)
        2n+3            eᵀy - s = n - ℵ
        2n+4 .. 3n+3    x_i + s = u_i
        3n+4 .. 4n+3    x_i - s = 0

    Args:
        inst: Validated instance
        budget: Budget mode

    Returns:
        ConicProblem with psd_dim 2n+1
    """
    n = inst.n
    N = 2 * n + 1
    C = np.zeros((N, N))
    C[1:n + 1, 1:n + 1] = inst.Q

    cons: List[ConicConstraint] = []
    slack = 0

    def next_slack() -> int:
        nonlocal slack
        slack += 1
        return slack - 1

    cons.append(ConicConstraint.from_terms("corner", [(0, 0, 1.0)], rhs=1.0))
    for i in range(n):
        cons.append(ConicConstraint.from_terms(
            f"diagZ[{i}]", [(y_index(n, i), x_index(i), 1.0)], rhs=0.0))
    for i in range(n):
        yi = y_index(n, i)
        cons.append(ConicConstraint.from_terms(
            f"diagY[{i}]", [(yi, yi, 1.0), (yi, 0, -1.0)], rhs=0.0))
    cons.append(ConicConstraint.from_terms(
        "return", [(x_index(i), 0, inst.mu[i]) for i in range(n)],
        slack=[(next_slack(), -1.0)], rhs=inst.rho))
    budget_slack = [] if Budget(budget) is Budget.EXACT else [(next_slack(), 1.0)]
    cons.append(ConicConstraint.from_terms(
        "budget", [(x_index(i), 0, 1.0) for i in range(n)], slack=budget_slack, rhs=1.0))
    cons.append(ConicConstraint.from_terms(
        "cardinality", [(y_index(n, i), 0, 1.0) for i in range(n)],
        slack=[(next_slack(), -1.0)], rhs=float(n - inst.aleph)))
    for i in range(n):
        cons.append(ConicConstraint.from_terms(
            f"upper[{i}]", [(x_index(i), 0, 1.0)], slack=[(next_slack(), 1.0)], rhs=inst.u[i]))
    for i in range(n):
        cons.append(ConicConstraint.from_terms(
            f"lower[{i}]", [(x_index(i), 0, 1.0)], slack=[(next_slack(), -1.0)], rhs=0.0))

    return ConicProblem(psd_dim=N, slack_dim=slack, C=C, constraints=tuple(cons),
                        label=inst.name, n=n)


@dataclass
class LiftedPoint:
    """(x, y, X, Y, Z) cut from a lifted block matrix, with its spectrum."""
    x: np.ndarray
    y: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    objective: float
    eigenvalues: np.ndarray
    numerical_rank: int
    M: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    def schur_gaps(self) -> Dict[str, float]:
        """λ_min of X - xxᵀ and Y - yyᵀ."""
        return {
            "X": linalg.min_eigenvalue(self.X - np.outer(self.x, self.x)),
            "Y": linalg.min_eigenvalue(self.Y - np.outer(self.y, self.y)),
        }

    def residuals(self) -> Dict[str, float]:
        lam_max = float(self.eigenvalues[-1]) if self.eigenvalues.size else 0.0
        lam_min = float(self.eigenvalues[0]) if self.eigenvalues.size else 0.0
        return {
            "psd": max(0.0, -lam_min) / (1.0 + max(lam_max, 0.0)),
            "diagZ": float(np.max(np.abs(np.diag(self.Z)))) if self.n else 0.0,
            "diagY": float(np.max(np.abs(np.diag(self.Y) - self.y))) if self.n else 0.0,
        }


def numerical_rank(eigenvalues: np.ndarray, rel_tol: float = RANK_TOL) -> int:
    if eigenvalues.size == 0:
        return 0
    lam_max = float(eigenvalues[-1])
    if lam_max <= 0.0:
        return 0
    return int(np.count_nonzero(eigenvalues > rel_tol * lam_max))


def split_lifted(M, n: int, Q: Optional[np.ndarray] = None,
                 rank_tol: float = RANK_TOL) -> LiftedPoint:
    """
    Cut a (2n+1) block matrix into its (x, y, X, Y, Z) parts.

    Args:
        M: Symmetric matrix of dimension 2n+1
        n: Number of stocks
        Q: Covariance used for the objective ⟨Q, X⟩ (0 if omitted)
        rank_tol: Relative eigenvalue threshold for the numerical rank

    Raises:
        DimensionMismatch: M is not (2n+1)×(2n+1)
        CornerNotUnit: |M[0,0] - 1| > 1e-6
    """
    M = linalg.symmetrize(M)
    if M.shape != (2 * n + 1, 2 * n + 1):
        raise DimensionMismatch(f"expected dimension {2 * n + 1}, got {M.shape[0]}")
    if abs(M[0, 0] - 1.0) > CORNER_TOL:
        raise CornerNotUnit(float(M[0, 0]))
    xs = slice(1, n + 1)
    ys = slice(n + 1, 2 * n + 1)
    X = M[xs, xs].copy()
    eigenvalues, _ = linalg.sym_eig(M)
    objective = float(np.sum(Q * X)) if Q is not None else 0.0
    return LiftedPoint(
        x=M[xs, 0].copy(),
        y=M[ys, 0].copy(),
        X=X,
        Y=M[ys, ys].copy(),
        Z=M[ys, xs].copy(),
        objective=objective,
        eigenvalues=eigenvalues,
        numerical_rank=numerical_rank(eigenvalues, rank_tol),
        M=M,
    )


def schur_embed(x, y, X, Y) -> np.ndarray:
    """
    Block matrix with the coupling block fixed to the outer product of x and y.

    With that coupling, M - vvᵀ for v = (1, x, y) is block diagonal with blocks
    X - xxᵀ and Y - yyᵀ, so M ⪰ 0 exactly when both blocks are.

    Raises:
        DimensionMismatch: inconsistent sizes
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = x.shape[0]
    if y.shape != (n,) or X.shape != (n, n) or Y.shape != (n, n):
        raise DimensionMismatch(
            f"x {x.shape}, y {y.shape}, X {X.shape}, Y {Y.shape} are inconsistent"
        )
    N = 2 * n + 1
    M = np.zeros((N, N))
    xs = slice(1, n + 1)
    ys = slice(n + 1, N)
    M[0, 0] = 1.0
    M[xs, 0] = M[0, xs] = x
    M[ys, 0] = M[0, ys] = y
    M[xs, xs] = X
    M[ys, ys] = Y
    M[xs, ys] = np.outer(x, y)
    M[ys, xs] = np.outer(y, x)
    return linalg.symmetrize(M)


def lift_portfolio(x, y=None) -> np.ndarray:
    """
    Rank-one lift (1, x, y)(1, x, y)ᵀ of a mixed-integer point.
    When y is omitted it is the complement indicator of x's support.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if y is None:
        y = (x == 0.0).astype(np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    return schur_embed(x, y, np.outer(x, x), np.outer(y, y))
