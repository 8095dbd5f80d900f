"""CSV result tables with provenance headers, and matplotlib plot scripts.

Every CSV starts with ``#`` comment lines carrying the schema name, the
config hash, the rng seed and the artifact version, followed by a header row.
Floats are written with 17 significant digits so reruns are byte-identical.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from diqkdsps.constants import ARTIFACT_VERSION, CSV_FLOAT_FORMAT
from diqkdsps.entropy import RatePoint
from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError
from diqkdsps.finite_key import DistanceCurve
from diqkdsps.optimizer import OptimizationResult
from diqkdsps.photonic import TABLE_LABELS, Behavior, EventTable, OverlapModel, PhysicalParams

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

P_COLUMNS = tuple(f"p_a{a}_b{b}_x{x}_y{y}" for x in range(2) for y in range(3) for a in range(2) for b in range(2))
SETTINGS_COLUMNS = ("small_t", "thetaA0_rad", "thetaA1_rad", "thetaB0_rad", "thetaB1_rad", "thetaB2_rad", "big_t")
HARDWARE_COLUMNS = ("index", "eta_l", "g2", "v_alpha", "v_beta")

CSV_SCHEMAS: Dict[str, Tuple[str, ...]] = {
    "behavior": HARDWARE_COLUMNS + ("p_herald",) + P_COLUMNS + TABLE_LABELS,
    "rate": HARDWARE_COLUMNS + ("method", "chsh", "q", "h_ae", "h_ab", "rate") + SETTINGS_COLUMNS,
    "optimize": HARDWARE_COLUMNS + ("rng_seed", "method", "chsh", "q", "h_ae", "h_ab", "rate")
    + SETTINGS_COLUMNS + ("rate_stage1", "rate_stage2", "seeds_kept", "seeds_total", "evaluations", "diagnostics"),
    "finite_key": ("series", "n", "duration_s", "distance_km", "big_t", "p_herald", "key_length", "rate_bps"),
}
"""Column order of every table the CLI writes."""

TEXT_COLUMNS = {"method", "diagnostics", "series"}


@dataclass(frozen=True)
class Provenance:
    config_sha256: str
    rng_seed: int
    version: str = ARTIFACT_VERSION

    def lines(self, schema: str) -> List[str]:
        return [f"# schema={schema}", f"# config_sha256={self.config_sha256}",
                f"# rng_seed={self.rng_seed}", f"# version={self.version}"]


@dataclass(frozen=True)
class CsvTable:
    """A CSV read back from disk."""
    schema: str
    header: Tuple[str, ...]
    rows: List[Dict[str, str]] = field(repr=False)
    provenance: Dict[str, str] = field(default_factory=dict)


def format_cell(value: Any) -> str:
    """Render one CSV cell.

    None becomes an empty cell, booleans are lower case and floats keep
    enough digits to round-trip.

    Examples:
        >>> format_cell(True)
        'true'
        >>> format_cell(0.25)
        '0.25'
        >>> format_cell(None)
        ''
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), CSV_FLOAT_FORMAT)
    return str(value)


def write_csv(path: PathLike, schema: str, rows: Iterable[Mapping[str, Any]], provenance: Provenance) -> Path:
    """Write ``rows`` (dicts keyed by column) under the named schema.

    Provenance lines come first as ``# key = value`` comments, followed by
    the schema header. Columns a row carries beyond the schema are ignored.

    Args:
        path: Destination; parent directories are created.
        schema: Key of ``CSV_SCHEMAS``.
        rows: Rows to write, consumed once.
        provenance: Run metadata for the comment header.

    Returns:
        The written path.

    Raises:
        DiqkdError: IO_ERROR for an unknown schema, a row missing a column or
            a failed write.
    """
    if schema not in CSV_SCHEMAS:
        raise DiqkdError(f"unknown CSV schema '{schema}'", ErrorCode.IO_ERROR)
    header = CSV_SCHEMAS[schema]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            for line in provenance.lines(schema):
                handle.write(line + "\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            count = 0
            for row in rows:
                missing = set(header) - set(row)
                if missing:
                    raise DiqkdError(f"row {count} lacks columns {sorted(missing)}", ErrorCode.IO_ERROR)
                writer.writerow([format_cell(row[column]) for column in header])
                count += 1
    except OSError as exc:
        raise DiqkdError(f"cannot write {path}: {exc}", ErrorCode.IO_ERROR) from exc
    logger.info("wrote %s (%d rows)", path, count)
    return path


def read_csv(path: PathLike) -> CsvTable:
    """Parse a CSV written by :func:`write_csv`, provenance comments included.

    Raises:
        DiqkdError: IO_ERROR when the file cannot be read, has no header or
            has a row of the wrong width.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DiqkdError(f"cannot read {path}: {exc}", ErrorCode.IO_ERROR) from exc
    provenance: Dict[str, str] = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            provenance[key.strip()] = value.strip()
        elif line:
            body.append(line)
    if not body:
        raise DiqkdError(f"{path}: no header row", ErrorCode.IO_ERROR)
    reader = csv.reader(body)
    header = tuple(next(reader))
    rows = []
    for number, values in enumerate(reader, start=1):
        if len(values) != len(header):
            raise DiqkdError(f"{path}: row {number} has {len(values)} cells, expected {len(header)}",
                             ErrorCode.IO_ERROR)
        rows.append(dict(zip(header, values)))
    return CsvTable(schema=provenance.get("schema", ""), header=header, rows=rows, provenance=provenance)


def validate_csv(path: PathLike) -> CsvTable:
    """Check a CSV against its declared schema and provenance fields.

    Raises:
        DiqkdError: IO_ERROR on an unknown schema, a header mismatch, missing
            provenance or a numeric cell that does not parse.
    """
    table = read_csv(path)
    if table.schema not in CSV_SCHEMAS:
        raise DiqkdError(f"{path}: unknown schema '{table.schema}'", ErrorCode.IO_ERROR)
    if table.header != CSV_SCHEMAS[table.schema]:
        raise DiqkdError(f"{path}: header does not match schema '{table.schema}'", ErrorCode.IO_ERROR)
    for key in ("config_sha256", "rng_seed", "version"):
        if not table.provenance.get(key):
            raise DiqkdError(f"{path}: missing provenance field '{key}'", ErrorCode.IO_ERROR)
    for number, row in enumerate(table.rows, start=1):
        for column, cell in row.items():
            if column in TEXT_COLUMNS or cell == "":
                continue
            try:
                float(cell)
            except ValueError as exc:
                raise DiqkdError(f"{path}: row {number} column {column} is not numeric: {cell!r}",
                                 ErrorCode.IO_ERROR) from exc
    return table


def _hardware(index: int, params: PhysicalParams, overlaps: OverlapModel) -> Dict[str, Any]:
    return {"index": index, "eta_l": params.eta_l, "g2": params.g2,
            "v_alpha": overlaps.v_alpha, "v_beta": overlaps.v_beta}


def _settings(values: Optional[Sequence[float]]) -> Dict[str, Any]:
    if values is None:
        return {column: None for column in SETTINGS_COLUMNS}
    t, a0, a1, b0, b1, b2, _q, big_t = values
    big_t = None if big_t is None or np.isnan(big_t) else big_t
    return dict(zip(SETTINGS_COLUMNS, (t, a0, a1, b0, b1, b2, big_t)))


def behavior_row(index: int, params: PhysicalParams, overlaps: OverlapModel, b: Behavior,
                 events: EventTable) -> Dict[str, Any]:
    """Row of the ``simulate`` schema."""
    row = _hardware(index, params, overlaps)
    row["p_herald"] = b.p_herald
    for column in P_COLUMNS:
        a, bb, x, y = (int(part[1:]) for part in column.split("_")[1:])
        row[column] = b.p[a, bb, x, y]
    row.update({label: events.entries.get(label, 0.0) for label in TABLE_LABELS})
    return row


def rate_row(index: int, params: PhysicalParams, overlaps: OverlapModel, point: RatePoint) -> Dict[str, Any]:
    """Row of the ``rate`` schema."""
    row = _hardware(index, params, overlaps)
    row.update(method=point.method.value, chsh=point.chsh, q=point.q, h_ae=point.h_ae, h_ab=point.h_ab,
               rate=point.rate)
    row.update(_settings(point.settings))
    return row


def optimize_row(index: int, params: PhysicalParams, overlaps: OverlapModel,
                 result: Optional[OptimizationResult], error: Optional[str] = None) -> Dict[str, Any]:
    """Row of the ``optimize`` schema; a failed point keeps its hardware columns and the error."""
    row = _hardware(index, params, overlaps)
    if result is None:
        row.update({column: None for column in CSV_SCHEMAS["optimize"] if column not in row})
        row["diagnostics"] = error or ""
        return row
    point, best = result.rate, result.best_trace
    row.update(rng_seed=result.rng_seed, method=point.method.value, chsh=point.chsh, q=point.q,
               h_ae=point.h_ae, h_ab=point.h_ab, rate=point.rate)
    row.update(_settings(point.settings))
    row.update(rate_stage1=best.stage1 if best else None, rate_stage2=best.stage2 if best else None,
               seeds_kept=sum(1 for t in result.trace if t.stage2 is not None), seeds_total=len(result.trace),
               evaluations=result.evaluations, diagnostics=result.diagnostics)
    return row


def finite_key_rows(label: str, curve: DistanceCurve) -> List[Dict[str, Any]]:
    """One ``finite_key`` row per distance of ``curve``."""
    return [{"series": label, "n": row.n, "duration_s": curve.duration_s, "distance_km": row.distance_km,
             "big_t": row.big_t, "p_herald": row.p_herald, "key_length": row.key_length,
             "rate_bps": row.rate_bps} for row in curve.rows]


_FINITE_KEY_SCRIPT = '''"""Key rate per second versus distance, one curve per series and round count."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

CSV = Path(__file__).with_name("{csv_name}")

curves = defaultdict(list)
with CSV.open(encoding="utf-8") as handle:
    for row in csv.DictReader(line for line in handle if not line.startswith("#")):
        key = (row["series"], float(row["n"]), float(row["duration_s"]))
        curves[key].append((float(row["distance_km"]), float(row["rate_bps"])))

fig, ax = plt.subplots(figsize=(6.0, 4.0))
for (series, n, tau), points in sorted(curves.items()):
    points = [(d, r) for d, r in sorted(points) if r > 0.0]
    if points:
        distance, rate = zip(*points)
        ax.plot(distance, rate, label=f"{{series}}: n = {{n:.0e}}, tau = {{tau:.3g}} s")
ax.set_yscale("log")
ax.set_xlabel("Distance L (km)")
ax.set_ylabel("Key rate (bits/s)")
ax.axhline({target}, color="grey", linestyle=":", linewidth=0.8)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(CSV.with_suffix(".pdf"))
'''

_RATE_SCRIPT = '''"""Key rate per heralded round versus local efficiency."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

CSV = Path(__file__).with_name("{csv_name}")

with CSV.open(encoding="utf-8") as handle:
    rows = list(csv.DictReader(line for line in handle if not line.startswith("#")))
points = sorted((float(r["eta_l"]), float(r["rate"])) for r in rows if r["rate"] and float(r["rate"]) > 0.0)

fig, ax = plt.subplots(figsize=(6.0, 4.0))
if points:
    eta_l, rate = zip(*points)
    ax.plot(eta_l, rate, marker="o")
ax.set_yscale("log")
ax.set_xlabel("Local efficiency eta_l")
ax.set_ylabel("Key rate (bits per heralded round)")
fig.tight_layout()
fig.savefig(CSV.with_suffix(".pdf"))
'''


def write_plot_script(csv_path: PathLike, schema: str, target_bps: float = 0.1) -> Path:
    """Write a matplotlib script next to ``csv_path`` that renders it on a log rate axis."""
    csv_path = Path(csv_path)
    if schema == "finite_key":
        text = _FINITE_KEY_SCRIPT.format(csv_name=csv_path.name, target=format_cell(float(target_bps)))
    elif schema in ("rate", "optimize"):
        text = _RATE_SCRIPT.format(csv_name=csv_path.name)
    else:
        raise DiqkdError(f"no plot script for schema '{schema}'", ErrorCode.IO_ERROR)
    script = csv_path.with_name(f"plot_{csv_path.stem}.py")
    try:
        script.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DiqkdError(f"cannot write {script}: {exc}", ErrorCode.IO_ERROR) from exc
    logger.info("wrote plot script %s", script)
    return script
