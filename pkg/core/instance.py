"""
Problem data for cardinality-constrained mean-variance portfolio selection.
Holds the single validated Instance every formulation reads from, its canonical
JSON form, and a seeded factor-model generator for synthetic test families.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from core import linalg
from core.errors import ParseError, ValidationError

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-8
REQUIRED_KEYS = ("n", "aleph", "rho", "mu", "u", "Q")


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError("numeric", f"{name} is not a numeric array") from exc
    if arr.ndim != ndim:
        raise ValidationError("dimension", f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("finite", f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """
    Immutable portfolio instance (n stocks).

    Attributes:
        Q: n×n covariance matrix (symmetric, PSD)
        mu: expected returns
        rho: minimum expected return
        u: per-stock upper bounds as budget fractions
        aleph: cardinality cap, 0 <= aleph <= n
        name: opaque label (file stem when loaded)
    """
    Q: np.ndarray
    mu: np.ndarray
    rho: float
    u: np.ndarray
    aleph: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        Q = _frozen(self.Q, 2, "Q")
        mu = _frozen(self.mu, 1, "mu")
        u = _frozen(self.u, 1, "u")
        n = mu.shape[0]
        if n < 1:
            raise ValidationError("dimension", "n must be a positive integer")
        if Q.shape != (n, n) or u.shape != (n,):
            raise ValidationError(
                "dimension", f"Q {Q.shape}, mu {mu.shape}, u {u.shape} disagree on n={n}"
            )
        scale = float(np.max(np.abs(Q)))
        if float(np.max(np.abs(Q - Q.T))) > SYMMETRY_TOL * (1.0 + scale):
            raise ValidationError("symmetry", "Q differs from its transpose")
        eig = linalg.sym_eigvals(Q)
        if eig[0] < -PSD_TOL * (1.0 + max(eig[-1], 0.0)):
            raise ValidationError(
                "psd", f"Q has eigenvalue {eig[0]:.3e} below tolerance"
            )
        if np.any(u < 0):
            raise ValidationError("upper_bounds", "u must be nonnegative")
        try:
            rho = float(self.rho)
        except (TypeError, ValueError) as exc:
            raise ValidationError("numeric", "rho is not a number") from exc
        if not math.isfinite(rho):
            raise ValidationError("finite", "rho must be finite")
        if (
            isinstance(self.aleph, bool)
            or not isinstance(self.aleph, (int, np.integer, float))
            or (isinstance(self.aleph, float) and not self.aleph.is_integer())
        ):
            raise ValidationError("aleph_range", f"aleph must be an integer, got {self.aleph!r}")
        aleph = int(self.aleph)
        if not 0 <= aleph <= n:
            raise ValidationError("aleph_range", f"aleph={aleph} outside [0, {n}]")

        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "aleph", aleph)

    @property
    def n(self) -> int:
        return int(self.mu.shape[0])

    @property
    def lifted_dim(self) -> int:
        """Dimension of the lifted block matrix, 2n+1."""
        return 2 * self.n + 1

    def with_aleph(self, aleph: int) -> "Instance":
        return replace(self, aleph=aleph)

    def portfolio_risk(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(x @ self.Q @ x)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "aleph": self.aleph,
            "rho": self.rho,
            "mu": self.mu.tolist(),
            "u": self.u.tolist(),
            "Q": self.Q.tolist(),
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.aleph == other.aleph
            and self.rho == other.rho
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.Q, other.Q)
        )

    __hash__ = None


@dataclass(frozen=True)
class GenSpec:
    """
    Parameters of the synthetic factor-model generator.

    Q = s² F Fᵀ + D with F ~ N(0, 1/k) of shape n×k, s = factor_scale and D
    diagonal in [0.2, 1.0], so the idiosyncratic risk dominates. mu lies in
    [0.8, 1.2] and u in [0.5, 1.0]. rho is rho_fraction times the target
    quantile of the single-stock attainable returns mu_i * min(u_i, 1): holding
    the best single stock is always feasible and, at the default fraction, the
    budget row and the upper bounds stay slack at the optimum.
    """
    n: int
    seed: int = 0
    factor_count: int = 3
    target_rho_quantile: float = 0.5
    aleph: Optional[int] = None
    factor_scale: float = 0.05
    rho_fraction: float = 0.25

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValidationError("gen_n", f"n must be a positive integer, got {self.n!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("gen_seed", "seed must be a 64-bit unsigned integer")
        if int(self.factor_count) < 1:
            raise ValidationError("gen_factors", "factor_count must be positive")
        if not 0.0 < float(self.target_rho_quantile) < 1.0:
            raise ValidationError("gen_rho_quantile", "target_rho_quantile must lie in (0, 1)")
        if self.aleph is not None and not 0 <= int(self.aleph) <= int(self.n):
            raise ValidationError("aleph_range", f"aleph={self.aleph} outside [0, {self.n}]")
        if not float(self.factor_scale) >= 0.0:
            raise ValidationError("gen_factor_scale", "factor_scale must be nonnegative")
        if not 0.0 < float(self.rho_fraction) <= 1.0:
            raise ValidationError("gen_rho_fraction", "rho_fraction must lie in (0, 1]")


def generate_instance(spec: GenSpec, name: str = "") -> Instance:
    """
    Build a reproducible synthetic instance.

    Args:
        spec: Generator parameters (validated on construction)
        name: Optional label for the instance

    Returns:
        Instance that is bit-identical for identical GenSpec values
    """
    n = int(spec.n)
    k = int(spec.factor_count)
    rng = np.random.default_rng(int(spec.seed))

    F = float(spec.factor_scale) * rng.standard_normal((n, k)) / math.sqrt(k)
    d = rng.uniform(0.2, 1.0, size=n)
    Q = linalg.symmetrize(F @ F.T + np.diag(d))
    mu = rng.uniform(0.8, 1.2, size=n)
    u = rng.uniform(0.5, 1.0, size=n)

    single_stock = mu * np.minimum(u, 1.0)
    rho = float(spec.rho_fraction) * float(np.quantile(single_stock, float(spec.target_rho_quantile)))
    aleph = spec.aleph if spec.aleph is not None else min(n, max(1, n // 3))

    return Instance(Q=Q, mu=mu, rho=rho, u=u, aleph=int(aleph),
                    name=name or f"gen-n{n}-s{spec.seed}")


def _reject_constant(token: str):
    raise ParseError(f"non-finite number {token} is not allowed")


def instance_from_dict(data: Dict[str, Any], name: str = "") -> Instance:
    """Validate a decoded canonical-JSON mapping into an Instance."""
    if not isinstance(data, dict):
        raise ParseError("top-level JSON value must be an object")
    missing = [key for key in REQUIRED_KEYS if key not in data]
    if missing:
        raise ParseError(f"missing key(s): {', '.join(missing)}")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ParseError(f"'n' must be an integer, got {n!r}")
    if n < 1:
        raise ValidationError("dimension", f"n must be positive, got {n}")
    inst = Instance(Q=data["Q"], mu=data["mu"], rho=data["rho"], u=data["u"],
                    aleph=data["aleph"], name=name)
    if inst.n != n:
        raise ValidationError("dimension", f"declared n={n} but vectors have length {inst.n}")
    return inst


def load_instance(path: Union[str, Path]) -> Instance:
    """
    Read and validate a canonical JSON instance file.

    Raises:
        ParseError: missing file, malformed JSON, missing key, NaN/Inf literal
        ValidationError: the violated invariant is named
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"file not found: {path}")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not UTF-8: {exc}") from exc
    return loads_instance(text, name=path.stem, source=str(path))


def loads_instance(text: str, name: str = "", source: str = "input") -> Instance:
    """Parse canonical JSON text (e.g. an uploaded file) into an Instance."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {source}: {exc}") from exc
    return instance_from_dict(data, name=name)


def dumps_instance(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), allow_nan=False) + "\n"


def save_instance(inst: Instance, path: Union[str, Path]) -> Path:
    """Write the canonical JSON form (full row-major Q, UTF-8, LF)."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_instance(inst))
    return path
