"""
Benchmark harness: runs the relaxation pipeline and the time-limited exact
solver on every instance of a directory and every requested ℵ, then writes a
per-instance CSV and an aggregate CSV grouped by (ℵ, n).

CSV conventions: comma-separated, header row, UTF-8, LF, floats printed with
6 significant digits, gaps as fractions, NaN as an empty field.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import pandas as pd

from core import cardopt, exact, ipm
from core.errors import CardSdpError
from core.instance import Instance, load_instance
from core.sdp import Budget

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6g"
REPRODUCIBLE_NODE_LIMIT = 2000


@dataclass
class BenchRow:
    """
    One (instance, ℵ) result.

    ub is the best known upper bound (rounding or exact incumbent); both
    gaps are measured against it.
    """
    instance_name: str
    n: int
    aleph: int
    ub: float
    gap_exact: float
    lb_sdp: float
    gap_sdp: float
    sdp_time: float
    rank: int
    lb_exact: float = math.nan
    exact_status: str = ""
    exact_time: float = 0.0
    sdp_status: str = ""
    note: str = ""


@dataclass
class AggregateRow:
    aleph: int
    n: int
    count: int
    gap_exact_min: float
    gap_exact_avg: float
    gap_exact_max: float
    gap_sdp_min: float
    gap_sdp_avg: float
    gap_sdp_max: float
    sdp_time_avg: float
    rank_one_frac: float


BENCH_COLUMNS = [f.name for f in fields(BenchRow)]
AGGREGATE_COLUMNS = [f.name for f in fields(AggregateRow)]


@dataclass(frozen=True)
class BenchConfig:
    alephs: Tuple[int, ...] = ()
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    jobs: int = 1
    budget: Budget = Budget.AT_MOST
    solver: Optional[ipm.SolverConfig] = None
    reproducible: bool = False


def discover(directory: Union[str, Path]) -> List[Path]:
    """Instance files of a directory in lexicographic name order."""
    return sorted(Path(directory).glob("*.json"), key=lambda p: p.name)


def _failed_row(name: str, n: int, aleph: int, note: str) -> BenchRow:
    return BenchRow(instance_name=name, n=n, aleph=aleph, ub=math.nan, gap_exact=math.nan,
                    lb_sdp=math.nan, gap_sdp=math.nan, sdp_time=0.0, rank=-1, note=note)


def bench_instance(inst: Instance, cfg: BenchConfig) -> BenchRow:
    """Run both pipelines on one instance; failures end up in `note`."""
    notes = []
    report = cardopt.run(inst, cfg.solver, cfg.budget)
    if report.sdp_status != ipm.SolveStatus.OPTIMAL.value:
        notes.append(f"sdp {report.sdp_status}")
    if report.round_status not in ("ok", "skipped"):
        notes.append(f"round {report.round_status}")

    try:
        ex = exact.branch_and_bound(
            inst,
            time_limit=None if cfg.reproducible else cfg.time_limit,
            budget=cfg.budget,
            node_limit=cfg.node_limit,
            seed_with_sdp=False,
        )
        lb_exact, ub_exact = ex.lb, ex.ub
        exact_status, exact_time = ex.status.value, ex.wall_time
    except CardSdpError as exc:
        logger.warning("exact solve of %s failed: %s", inst.name, exc)
        notes.append(f"exact {type(exc).__name__}")
        lb_exact, ub_exact, exact_status, exact_time = math.nan, math.inf, "Failed", 0.0

    ub = min(report.ub, ub_exact)
    gap_exact, _ = cardopt.relative_gap(ub, lb_exact)
    gap_sdp, _ = cardopt.relative_gap(ub, report.lb_sdp)
    if cfg.reproducible:
        sdp_time = exact_time = 0.0
    else:
        sdp_time = report.sdp_time
    return BenchRow(
        instance_name=inst.name,
        n=inst.n,
        aleph=inst.aleph,
        ub=ub,
        gap_exact=gap_exact,
        lb_sdp=report.lb_sdp,
        gap_sdp=gap_sdp,
        sdp_time=sdp_time,
        rank=report.rank,
        lb_exact=lb_exact,
        exact_status=exact_status,
        exact_time=exact_time,
        sdp_status=report.sdp_status,
        note="; ".join(notes),
    )


def _task(path: Path, aleph: Optional[int], cfg: BenchConfig) -> BenchRow:
    try:
        inst = load_instance(path)
        if aleph is not None:
            inst = inst.with_aleph(aleph)
        return bench_instance(inst, cfg)
    except CardSdpError as exc:
        logger.warning("bench %s (aleph=%s) failed: %s", path.name, aleph, exc)
        return _failed_row(path.stem, 0, -1 if aleph is None else aleph,
                           f"{type(exc).__name__}: {exc}")


def run_bench(paths: Sequence[Path], cfg: BenchConfig) -> List[BenchRow]:
    """
    Bench every (instance, ℵ) pair.

    Returns:
        Rows sorted by instance name, then ℵ
    """
    alephs: Sequence[Optional[int]] = cfg.alephs or (None,)
    tasks = [(p, a) for p in sorted(paths, key=lambda p: p.name) for a in alephs]
    if cfg.reproducible and cfg.node_limit is None:
        cfg = replace(cfg, node_limit=REPRODUCIBLE_NODE_LIMIT)

    jobs = max(1, int(cfg.jobs))
    if jobs == 1:
        rows = [_task(p, a, cfg) for p, a in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda t: _task(t[0], t[1], cfg), tasks))
    rows.sort(key=lambda r: (r.instance_name, r.aleph))
    logger.info("benchmarked %d rows", len(rows))
    return rows


def rows_frame(rows: Sequence[BenchRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=BENCH_COLUMNS)


def aggregate(rows: Sequence[BenchRow]) -> List[AggregateRow]:
    """Group rows by (ℵ, n); NaN gaps are skipped in the statistics."""
    frame = rows_frame([r for r in rows if r.n > 0])
    if frame.empty:
        return []
    out: List[AggregateRow] = []
    for (aleph, n), group in frame.groupby(["aleph", "n"], sort=True):
        gx = group["gap_exact"].astype(float)
        gs = group["gap_sdp"].astype(float)
        out.append(AggregateRow(
            aleph=int(aleph),
            n=int(n),
            count=int(len(group)),
            gap_exact_min=float(gx.min()),
            gap_exact_avg=float(gx.mean()),
            gap_exact_max=float(gx.max()),
            gap_sdp_min=float(gs.min()),
            gap_sdp_avg=float(gs.mean()),
            gap_sdp_max=float(gs.max()),
            sdp_time_avg=float(group["sdp_time"].mean()),
            rank_one_frac=float((group["rank"] == 1).mean()),
        ))
    return out


def aggregate_frame(rows: Sequence[AggregateRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=AGGREGATE_COLUMNS)


def aggregate_path(out: Union[str, Path]) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_aggregate{out.suffix or '.csv'}")


def _write(frame: pd.DataFrame, path: Path) -> Path:
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n",
                 encoding="utf-8")
    return path


def write_bench(rows: Sequence[BenchRow], out: Union[str, Path]) -> Tuple[Path, Path]:
    """Write the per-instance CSV to `out` and the aggregate next to it."""
    out = Path(out)
    first = _write(rows_frame(rows), out)
    second = _write(aggregate_frame(aggregate(rows)), aggregate_path(out))
    logger.info("wrote %s and %s", first, second)
    return first, second


def read_bench(path: Union[str, Path]) -> pd.DataFrame:
    """Read a CSV written by write_bench (either file); empty text fields stay ''."""
    frame = pd.read_csv(path)
    for column in ("note", "exact_status", "sdp_status"):
        if column in frame.columns:
            frame[column] = frame[column].fillna("").astype(str)
    return frame
