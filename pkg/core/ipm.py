"""
Dense primal-dual interior-point solver for ConicProblem.

Solves
    min ⟨C, M⟩   s.t.  A(M) + G s = b,  M ⪰ 0,  s >= 0
together with its dual
    max bᵀy      s.t.  Aᵀ(y) + S = C,  Gᵀy + z = 0,  S ⪰ 0,  z >= 0
from an infeasible start, using Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. The dual objective bᵀy is the lower bound
reported to callers.
"""

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg as sla
from scipy import sparse

from core import linalg
from core.errors import LinAlgFailure, NotPositiveDefinite, NumericalFailure, ValidationError
from core.sdp import ConicProblem

logger = logging.getLogger(__name__)

_HEADER = "iter        pcost         dcost       gap      pres      dres    step_p    step_d"
_REGULARIZATION = (0.0, 1e-12, 1e-9)
_STALL_WINDOW = 10
_SCHUR_CHUNK = 1024


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    PRIMAL_INFEASIBLE = "PrimalInfeasibleSuspected"
    DUAL_INFEASIBLE = "DualInfeasibleSuspected"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverConfig:
    """
    Stopping rules and step control.

    Attributes:
        gap_tol: relative duality gap |pobj - dobj| / (1 + |pobj|)
        feas_tol: relative primal and dual residual norms
        max_iter: iteration cap
        step_fraction: fraction-to-boundary factor in (0, 1)
        verbose: emit the iteration log at INFO instead of DEBUG
    """
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 100
    step_fraction: float = 0.98
    verbose: bool = False

    def __post_init__(self):
        if not (self.gap_tol > 0 and self.feas_tol > 0):
            raise ValidationError("solver_tolerance", "gap_tol and feas_tol must be positive")
        if int(self.max_iter) < 1:
            raise ValidationError("solver_max_iter", "max_iter must be at least 1")
        if not 0.0 < self.step_fraction < 1.0:
            raise ValidationError("solver_step_fraction", "step_fraction must lie in (0, 1)")


@dataclass
class SdpSolution:
    """Primal/dual iterate returned by solve() plus its quality measures."""
    M: np.ndarray
    slacks: np.ndarray
    dual_y: np.ndarray
    dual_S: np.ndarray
    dual_z: np.ndarray
    primal_obj: float
    dual_obj: float
    rel_gap: float
    primal_res: float
    dual_res: float
    iterations: int
    status: SolveStatus
    wall_time: float
    feas_tol: float = 1e-8
    history: List[Dict[str, float]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def lower_bound(self) -> float:
        return self.dual_obj

    @property
    def lower_bound_is_safe(self) -> bool:
        """dual_obj bounds the optimum from below once the dual iterate is feasible."""
        return self.optimal or (math.isfinite(self.dual_obj) and self.dual_res <= self.feas_tol)

    def summary(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "primal_obj": self.primal_obj,
            "dual_obj": self.dual_obj,
            "rel_gap": self.rel_gap,
            "primal_res": self.primal_res,
            "dual_res": self.dual_res,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
        }


@dataclass
class _Scaling:
    """NT scaling W = r rᵀ with rᵀ S r = r⁻¹ X r⁻ᵀ = diag(lam); rti = r⁻ᵀ."""
    r: np.ndarray
    rti: np.ndarray
    lam: np.ndarray
    W: np.ndarray
    ws: np.ndarray
    lam_s: np.ndarray


@dataclass
class _Iterate:
    X: np.ndarray
    s: np.ndarray
    y: np.ndarray
    S: np.ndarray
    z: np.ndarray

    def copy(self) -> "_Iterate":
        return _Iterate(self.X.copy(), self.s.copy(), self.y.copy(), self.S.copy(), self.z.copy())


def _cone_step(lam: np.ndarray, dtil: np.ndarray) -> float:
    """Largest α with diag(lam) + α·dtil ⪰ 0."""
    if lam.size == 0:
        return math.inf
    d = 1.0 / np.sqrt(lam)
    ev_min = linalg.min_eigenvalue(linalg.symmetrize(d[:, None] * dtil * d[None, :]))
    return math.inf if ev_min >= 0 else -1.0 / ev_min


def _orthant_step(v: np.ndarray, dv: np.ndarray) -> float:
    mask = dv < 0
    if not np.any(mask):
        return math.inf
    return float(np.min(-v[mask] / dv[mask]))


class InteriorPointSolver:
    """
    One solve of one ConicProblem. Owns all of its workspace, so separate
    instances can run concurrently.
    """

    def __init__(self, prob: ConicProblem, cfg: Optional[SolverConfig] = None):
        prob.validate()
        self.prob = prob
        self.cfg = cfg or SolverConfig()
        self.N = prob.psd_dim
        self.p = prob.slack_dim
        self.m = prob.m
        self.A = prob.A
        self.At = prob.A.T.tocsr()
        self.G = prob.G
        self.Gt = prob.G.T.tocsr()
        self.b = prob.b
        self.C = np.asarray(prob.C, dtype=np.float64)
        self._prepare_schur()

    def _prepare_schur(self):
        # Entry lists of all constraint matrices, used to form
        # H_ij = <A_i, W A_j W> = sum_e sum_f a_e a_f W[P_e,P_f] W[Q_e,Q_f].
        P, Qc, owner, vals = [], [], [], []
        for i, con in enumerate(self.prob.constraints):
            P.append(con.rows)
            Qc.append(con.cols)
            vals.append(con.vals)
            owner.append(np.full(con.vals.shape, i, dtype=np.int64))
        if P:
            self._P = np.concatenate(P)
            self._Q = np.concatenate(Qc)
            a = np.concatenate(vals)
            rows = np.concatenate(owner)
        else:
            self._P = self._Q = rows = np.zeros(0, dtype=np.int64)
            a = np.zeros(0)
        K = self._P.size
        self._Ra = sparse.csr_matrix((a, (rows, np.arange(K))), shape=(self.m, K))
        self._Ra_csc = self._Ra.tocsc()

    # operators ---------------------------------------------------------

    def _adjoint(self, y: np.ndarray) -> np.ndarray:
        return linalg.symmetrize((self.At @ y).reshape(self.N, self.N))

    def _residuals(self, it: _Iterate) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rp = self.b - self.A @ it.X.ravel() - self.G @ it.s
        Rd = self.C - self._adjoint(it.y) - it.S
        rz = -(self.Gt @ it.y) - it.z
        return rp, Rd, rz

    def _schur(self, W: np.ndarray) -> np.ndarray:
        H = np.zeros((self.m, self.m))
        K = self._P.size
        for start in range(0, K, _SCHUR_CHUNK):
            blk = slice(start, min(K, start + _SCHUR_CHUNK))
            phi = W[np.ix_(self._P, self._P[blk])] * W[np.ix_(self._Q, self._Q[blk])]
            T = self._Ra @ phi
            H += (self._Ra_csc[:, blk] @ T.T).T
        return linalg.symmetrize(H) if self.m else H

    # Newton system -----------------------------------------------------

    def _scaling(self, it: _Iterate) -> _Scaling:
        Lx = linalg.cholesky(it.X)
        Ls = linalg.cholesky(it.S)
        U, lam, Vt = np.linalg.svd(Ls.T @ Lx)
        if lam.size and lam.min() <= 0.0:
            raise NumericalFailure("NT scaling is singular")
        root = np.sqrt(lam)
        r = (Lx @ Vt.T) / root[None, :]
        rti = (Ls @ U) / root[None, :]
        return _Scaling(
            r=r, rti=rti, lam=lam, W=linalg.symmetrize(r @ r.T),
            ws=np.sqrt(it.s / it.z), lam_s=np.sqrt(it.s * it.z),
        )

    def _factor(self, sc: _Scaling) -> np.ndarray:
        H = self._schur(sc.W)
        if self.p:
            H = H + (self.G @ sparse.diags(sc.ws ** 2) @ self.Gt).toarray()
        scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if self.m else 1.0
        eye = np.eye(self.m)
        for reg in _REGULARIZATION:
            try:
                return linalg.cholesky(H + reg * scale * eye)
            except NotPositiveDefinite:
                logger.debug("Schur factorization failed at regularization %.0e", reg)
        raise NumericalFailure("Schur complement lost positive definiteness")

    def _direction(self, sc: _Scaling, L: np.ndarray, rp, Rd, rz, T, t):
        W = sc.W
        Rc = linalg.symmetrize(sc.r @ T @ sc.r.T)
        rhs = rp - self.A @ (Rc - W @ Rd @ W).ravel() - self.G @ (sc.ws * t - sc.ws ** 2 * rz)
        dy = sla.cho_solve((L, True), rhs, check_finite=False) if self.m else np.zeros(0)
        dS = Rd - self._adjoint(dy)
        dX = linalg.symmetrize(Rc - W @ dS @ W)
        dz = rz - self.Gt @ dy
        ds = sc.ws * t - sc.ws ** 2 * dz
        return dX, ds, dy, dS, dz

    def _max_steps(self, sc: _Scaling, it: _Iterate, dX, ds, dS, dz) -> Tuple[float, float]:
        dXt = sc.rti.T @ dX @ sc.rti
        dSt = sc.r.T @ dS @ sc.r
        ap = min(_cone_step(sc.lam, dXt), _orthant_step(it.s, ds))
        ad = min(_cone_step(sc.lam, dSt), _orthant_step(it.z, dz))
        return ap, ad

    def _step(self, it: _Iterate, rp, Rd, rz, mu: float) -> Tuple[_Iterate, float, float]:
        nu = self.N + self.p
        sc = self._scaling(it)
        L = self._factor(sc)
        lam, lam_s = sc.lam, sc.lam_s

        # predictor
        aff = self._direction(sc, L, rp, Rd, rz, -np.diag(lam), -lam_s)
        dX, ds, dy, dS, dz = aff
        ap, ad = self._max_steps(sc, it, dX, ds, dS, dz)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (np.sum((it.X + ap * dX) * (it.S + ad * dS))
                  + (it.s + ap * ds) @ (it.z + ad * dz)) / nu
        sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0)) if mu > 0 else 0.0

        # corrector
        dXt = sc.rti.T @ dX @ sc.rti
        dSt = sc.r.T @ dS @ sc.r
        D = (-np.diag(lam ** 2) + sigma * mu * np.eye(self.N)
             - 0.5 * (dXt @ dSt + dSt @ dXt))
        T = 2.0 * D / (lam[:, None] + lam[None, :])
        t = (-lam_s ** 2 + sigma * mu - ds * dz) / lam_s if self.p else lam_s
        dX, ds, dy, dS, dz = self._direction(sc, L, rp, Rd, rz, T, t)

        ap, ad = self._max_steps(sc, it, dX, ds, dS, dz)
        frac = self.cfg.step_fraction
        ap, ad = min(1.0, frac * ap), min(1.0, frac * ad)
        nxt = _Iterate(
            X=linalg.symmetrize(it.X + ap * dX),
            s=it.s + ap * ds,
            y=it.y + ad * dy,
            S=linalg.symmetrize(it.S + ad * dS),
            z=it.z + ad * dz,
        )
        return nxt, ap, ad

    # driver ------------------------------------------------------------

    def _infeasibility_flag(self, history: List[Dict[str, float]]) -> Optional[SolveStatus]:
        tol = self.cfg.feas_tol
        now = history[-1]
        if now["pres"] > tol and abs(now["dobj"]) > 1e10:
            return SolveStatus.PRIMAL_INFEASIBLE
        if now["dres"] > tol and abs(now["pobj"]) > 1e10:
            return SolveStatus.DUAL_INFEASIBLE
        if len(history) <= _STALL_WINDOW:
            return None
        past = history[-1 - _STALL_WINDOW]
        if (now["pres"] > tol and now["pres"] > 0.5 * past["pres"]
                and now["dobj"] - past["dobj"] > 10.0 * (1.0 + abs(past["dobj"]))):
            return SolveStatus.PRIMAL_INFEASIBLE
        if (now["dres"] > tol and now["dres"] > 0.5 * past["dres"]
                and past["pobj"] - now["pobj"] > 10.0 * (1.0 + abs(past["pobj"]))):
            return SolveStatus.DUAL_INFEASIBLE
        return None

    def solve(self) -> SdpSolution:
        cfg = self.cfg
        log = logger.info if cfg.verbose else logger.debug
        start = time.perf_counter()

        N, p = self.N, self.p
        b_inf = float(np.max(np.abs(self.b))) if self.m else 0.0
        tau = 1.0 + max(b_inf, float(np.linalg.norm(self.C)))
        it = _Iterate(
            X=tau * np.eye(N), s=tau * np.ones(p), y=np.zeros(self.m),
            S=tau * np.eye(N), z=tau * np.ones(p),
        )
        nu = N + p
        bnorm = 1.0 + float(np.linalg.norm(self.b))
        cnorm = 1.0 + float(np.linalg.norm(self.C))

        history: List[Dict[str, float]] = []
        best: Optional[Tuple[float, _Iterate, Dict[str, float]]] = None
        status = SolveStatus.MAX_ITER
        ap = ad = 0.0
        log("%s [m=%d, psd_dim=%d, slack_dim=%d]", _HEADER, self.m, N, p)

        for k in range(cfg.max_iter + 1):
            rp, Rd, rz = self._residuals(it)
            pobj = float(np.sum(self.C * it.X))
            dobj = float(self.b @ it.y)
            record = {
                "iter": k,
                "pobj": pobj,
                "dobj": dobj,
                "gap": abs(pobj - dobj) / (1.0 + abs(pobj)),
                "pres": float(np.linalg.norm(rp)) / bnorm,
                "dres": math.hypot(float(np.linalg.norm(Rd)), float(np.linalg.norm(rz))) / cnorm,
                "step_p": ap,
                "step_d": ad,
            }
            if not all(math.isfinite(v) for v in record.values()):
                logger.warning("non-finite iterate at iteration %d", k)
                status = SolveStatus.NUMERICAL_FAILURE
                break
            history.append(record)
            log("%4d %13.6e %13.6e %9.2e %9.2e %9.2e %9.3f %9.3f", k, pobj, dobj,
                record["gap"], record["pres"], record["dres"], ap, ad)

            merit = max(record["gap"], record["pres"], record["dres"])
            if best is None or merit < best[0]:
                best = (merit, it.copy(), record)

            if (record["gap"] <= cfg.gap_tol and record["pres"] <= cfg.feas_tol
                    and record["dres"] <= cfg.feas_tol):
                status = SolveStatus.OPTIMAL
                break
            flag = self._infeasibility_flag(history)
            if flag is not None:
                status = flag
                break
            if k == cfg.max_iter:
                break

            mu = (float(np.sum(it.X * it.S)) + float(it.s @ it.z)) / nu
            try:
                it, ap, ad = self._step(it, rp, Rd, rz, mu)
            except (LinAlgFailure, NumericalFailure) as exc:
                logger.warning("interior-point step failed at iteration %d: %s", k, exc)
                status = SolveStatus.NUMERICAL_FAILURE
                break

        final_it, final_rec = it, history[-1] if history else None
        if status in (SolveStatus.MAX_ITER, SolveStatus.NUMERICAL_FAILURE) and best is not None:
            _, final_it, final_rec = best
        if final_rec is None:
            final_rec = {"pobj": math.nan, "dobj": math.nan, "gap": math.inf,
                         "pres": math.inf, "dres": math.inf, "iter": 0}

        wall = time.perf_counter() - start
        log("status %s after %d iterations (%.3fs)", status.value, len(history) - 1, wall)
        return SdpSolution(
            M=final_it.X,
            slacks=final_it.s,
            dual_y=final_it.y,
            dual_S=final_it.S,
            dual_z=final_it.z,
            primal_obj=final_rec["pobj"],
            dual_obj=final_rec["dobj"],
            rel_gap=final_rec["gap"],
            primal_res=final_rec["pres"],
            dual_res=final_rec["dres"],
            iterations=max(len(history) - 1, 0),
            status=status,
            wall_time=wall,
            feas_tol=cfg.feas_tol,
            history=history,
        )


def solve(prob: ConicProblem, cfg: Optional[SolverConfig] = None) -> SdpSolution:
    """Run the interior-point method on prob; see InteriorPointSolver."""
    return InteriorPointSolver(prob, cfg).solve()
