"""
Sparse SDPA (".dat-s") export of a ConicProblem.

A ConicProblem  min ⟨C, M⟩ s.t. ⟨A_i, M⟩ + g_iᵀ s = b_i, M ⪰ 0, s >= 0  is
written as the SDPA dual form  max ⟨F0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0 with

    Y   = blockdiag(M, diag(s))
    F0  = blockdiag(-C, 0)
    F_i = blockdiag(A_i, diag(g_i)),   c_i = b_i

so the objective reported by an SDPA solver is the negative of ours.

Layout: a title comment, mDIM, nBLOCK, the block structure ("N -p", the
negative size marking the diagonal slack block), the c vector, then one line
"matno blk i j value" per upper-triangle nonzero, 1-based, sorted by
(matno, blk, i, j). matno 0 is F0.
"""

import logging
from pathlib import Path
from typing import Iterator, List, Tuple, Union

import numpy as np

from core.sdp import ConicProblem

logger = logging.getLogger(__name__)

Entry = Tuple[int, int, int, int, float]


def _num(value: float) -> str:
    return repr(float(value))


def _entries(prob: ConicProblem) -> Iterator[Entry]:
    rows, cols = np.nonzero(np.triu(prob.C))
    F0: List[Entry] = [(0, 1, int(r) + 1, int(c) + 1, -float(prob.C[r, c]))
                       for r, c in zip(rows, cols)]
    yield from sorted(F0)

    for matno, con in enumerate(prob.constraints, start=1):
        block: List[Entry] = []
        for r, c, v in zip(con.rows, con.cols, con.vals):
            if r <= c and v != 0.0:
                block.append((matno, 1, int(r) + 1, int(c) + 1, float(v)))
        for k, g in con.slack:
            block.append((matno, 2, k + 1, k + 1, float(g)))
        yield from sorted(block)


def dumps_sdpa(prob: ConicProblem) -> str:
    """Render the problem as sparse SDPA text (LF line endings)."""
    blocks = [str(prob.psd_dim)]
    if prob.slack_dim:
        blocks.append(str(-prob.slack_dim))
    lines = [
        f'"{prob.label or "conic problem"}: objective is the negative of min <C, M>"',
        f"{prob.m} = mDIM",
        f"{len(blocks)} = nBLOCK",
        " ".join(blocks) + " = bLOCKsTRUCT",
        " ".join(_num(v) for v in prob.b),
    ]
    lines.extend(f"{m} {blk} {i} {j} {_num(v)}" for m, blk, i, j, v in _entries(prob))
    return "\n".join(lines) + "\n"


def write_sdpa(prob: ConicProblem, path: Union[str, Path]) -> Path:
    """Write `prob` to `path` in sparse SDPA format and return the path."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps_sdpa(prob))
    logger.info("wrote SDPA file %s (mDIM=%d, blocks %d/%d)", path, prob.m,
                prob.psd_dim, prob.slack_dim)
    return path
