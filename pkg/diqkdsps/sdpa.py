"""SDPA sparse (``.dat-s``) export and import of moment relaxations.

SDPA reads::

    minimize  sum_k c_k x_k   s.t.  sum_k F_k x_k - F_0 >= 0

so a program G(y) = C0 + sum_k y_k A_k is written with F_0 = -C0 and
F_k = A_k (1-based k). Matrix entries are listed once, upper triangle,
with 1-based block, row and column numbers. SDPA has no objective constant;
it travels in the ``objective_offset`` header comment together with the
provenance fields.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from diqkdsps.constants import ARTIFACT_VERSION, CSV_FLOAT_FORMAT
from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError
from diqkdsps.relaxation import MomentProblem
from diqkdsps.sdp import SemidefiniteProgram

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class SdpaInstance:
    """A program read back from disk with its header metadata."""
    program: SemidefiniteProgram
    metadata: Dict[str, str] = field(default_factory=dict)


def _fmt(value: float) -> str:
    return format(float(value), CSV_FLOAT_FORMAT)


def write_sdpa(program: SemidefiniteProgram, path: PathLike, metadata: Dict[str, str] = None) -> Path:
    """Write one program as a single-block ``.dat-s`` file."""
    path = Path(path)
    header = dict(metadata or {})
    header["objective_offset"] = _fmt(program.offset)
    lines = [f"* {key} = {value}" for key, value in header.items()]
    n = program.size
    lines.append(f"{program.num_vars} = mDIM")
    lines.append("1 = nBLOCK")
    lines.append(f"{n} = bLOCKsTRUCT")
    lines.append(" ".join(_fmt(v) for v in program.c) if program.num_vars else "")
    rows, cols = np.triu_indices(n)
    for r, c in zip(rows, cols):
        k = program.ids[r, c]
        if k < 0:
            if program.const[r, c] != 0.0:
                lines.append(f"0 1 {r + 1} {c + 1} {_fmt(-program.const[r, c])}")
    entries = []
    for r, c in zip(rows, cols):
        k = program.ids[r, c]
        if k >= 0:
            entries.append((k, f"{k + 1} 1 {r + 1} {c + 1} 1"))
    lines.extend(text for _, text in sorted(entries, key=lambda e: e[0]))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DiqkdError(f"cannot write {path}: {exc}", ErrorCode.IO_ERROR) from exc
    logger.info("wrote SDPA instance %s (%d variables, %dx%d block)", path, program.num_vars, n, n)
    return path


def read_sdpa(path: PathLike) -> SdpaInstance:
    """Read a single-block ``.dat-s`` file written by :func:`write_sdpa`.

    Only 0/1 variable matrices with disjoint supports can be mapped back to a
    moment-form program; anything else is rejected.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DiqkdError(f"cannot read {path}: {exc}", ErrorCode.IO_ERROR) from exc
    metadata: Dict[str, str] = {}
    body: List[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith(("*", '"')):
            key, sep, value = line[1:].partition("=")
            if sep:
                metadata[key.strip()] = value.strip()
            continue
        if line:
            body.append(line)
    try:
        num_vars = int(body[0].split()[0])
        n_blocks = int(body[1].split()[0])
        n = int(body[2].split()[0].lstrip("{(").rstrip(",)}"))
        if n_blocks != 1:
            raise DiqkdError(f"{path}: only single-block instances are supported", ErrorCode.IO_ERROR)
        start = 3
        c = np.zeros(num_vars)
        if num_vars:
            c = np.array([float(v) for v in body[3].replace(",", " ").split()])
            start = 4
        ids = np.full((n, n), -1, dtype=np.intp)
        const = np.zeros((n, n))
        for line in body[start:]:
            mat, _, r, col, value = line.split()
            mat, r, col, value = int(mat), int(r) - 1, int(col) - 1, float(value)
            if mat == 0:
                const[r, col] = const[col, r] = -value
            elif value != 1.0 or ids[r, col] >= 0:
                raise DiqkdError(f"{path}: F_{mat} is not a 0/1 indicator", ErrorCode.IO_ERROR)
            else:
                ids[r, col] = ids[col, r] = mat - 1
        offset = float(metadata.get("objective_offset", "0"))
    except (IndexError, ValueError) as exc:
        raise DiqkdError(f"{path}: malformed SDPA file ({exc})", ErrorCode.IO_ERROR) from exc
    program = SemidefiniteProgram(ids=ids, const=const, c=c, offset=offset)
    return SdpaInstance(program=program, metadata=metadata)


def export_standard(problem: MomentProblem, path: PathLike, metadata: Dict[str, str] = None) -> List[Path]:
    """Write one ``.dat-s`` file per quadrature node.

    ``path`` is used as a stem: node i goes to ``<stem>_node<i>.dat-s``.
    """
    path = Path(path)
    stem = path.with_suffix("") if path.suffix == ".dat-s" else path
    written = []
    for i, (program, t, w) in enumerate(zip(problem.programs, problem.rule.nodes, problem.rule.weights), start=1):
        header = {
            "scenario": "2322",
            "m": str(problem.rule.m),
            "node": str(i),
            "t": _fmt(t),
            "weight": _fmt(w),
            "level": str(problem.level),
            "extras": str(problem.extras).lower(),
            "y_set": ",".join(str(y) for y in problem.y_set),
            "q": _fmt(problem.q),
            "version": ARTIFACT_VERSION,
        }
        header.update(metadata or {})
        written.append(write_sdpa(program, stem.parent / f"{stem.name}_node{i}.dat-s", header))
    return written
