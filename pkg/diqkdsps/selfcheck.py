"""Internal consistency checks run by ``diqkdsps self-check``."""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from diqkdsps.exceptions import DiqkdError
from diqkdsps.oracle import oracle_behavior
from diqkdsps.output import validate_csv
from diqkdsps.photonic import (
    MeasurementSettings,
    PhysicalParams,
    behavior,
    chs_moments,
    chs_pair_moment,
    default_overlaps,
    overlaps_from_visibility,
)
from diqkdsps.quadrature import gauss_radau

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_params(rng: np.random.Generator, g2: float = 0.0) -> PhysicalParams:
    return PhysicalParams(eta1=rng.uniform(0.5, 1.0), eta2=rng.uniform(0.5, 1.0), eta_t=rng.uniform(0.1, 1.0),
                          big_t=rng.uniform(0.01, 0.5), small_t=rng.uniform(0.1, 0.9),
                          gamma_d=rng.uniform(0.0, 0.2), sigma=rng.uniform(0.0, 0.2), g2=g2)


def check_oracle(draws: int = 3, seed: int = 0, tol: float = 1e-9) -> CheckResult:
    """Engine behavior against the brute-force transfer-matrix reference."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(draws):
        params = _random_params(rng, g2=0.02 if i == draws - 1 else 0.0)
        overlaps = default_overlaps(params)
        settings = MeasurementSettings(tuple(rng.uniform(0, np.pi, 2)), tuple(rng.uniform(0, np.pi, 3)))
        engine = behavior(params, overlaps, settings)
        oracle = oracle_behavior(params, overlaps, settings)
        worst = max(worst, float(np.max(np.abs(engine.p - oracle.p))),
                    abs(engine.p_herald - oracle.p_herald) / oracle.p_herald)
    return CheckResult("oracle", worst <= tol, f"max deviation {worst:.3e} over {draws} draws")


def check_moments(draws: int = 5, seed: int = 1, tol: float = 1e-10) -> CheckResult:
    """Closed-form CHS moments against the amplitude computation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        overlaps = overlaps_from_visibility(rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0))
        small_t = rng.uniform(0.0, 1.0)
        for key, value in chs_moments(small_t, overlaps).items():
            i, j, k, l = (int(d) for d in re.findall(r"\d", key))
            worst = max(worst, abs(value - chs_pair_moment(i, j, k, l, small_t, overlaps)))
    return CheckResult("moments", worst <= tol, f"max deviation {worst:.3e} over {draws} draws")


def check_quadrature(max_m: int = 8, tol: float = 1e-10) -> CheckResult:
    """Gauss-Radau rules integrate t^k exactly for k <= 2m - 2."""
    worst = 0.0
    for m in range(2, max_m + 1):
        rule = gauss_radau(m)
        for k in range(2 * m - 1):
            worst = max(worst, abs(rule.integrate(lambda t: t ** k) - 1.0 / (k + 1)))
    return CheckResult("quadrature", worst <= tol, f"max error {worst:.3e} for m <= {max_m}")


def check_csv_files(directory: Optional[Union[str, Path]]) -> List[CheckResult]:
    """Validate every CSV in ``directory``; a missing directory yields no results."""
    if directory is None or not Path(directory).is_dir():
        return []
    results = []
    for path in sorted(Path(directory).glob("*.csv")):
        try:
            table = validate_csv(path)
            results.append(CheckResult(f"csv:{path.name}", True, f"schema {table.schema}, {len(table.rows)} rows"))
        except DiqkdError as exc:
            results.append(CheckResult(f"csv:{path.name}", False, exc.message))
    return results


def run_self_check(directory: Optional[Union[str, Path]] = None) -> List[CheckResult]:
    """Run the model, moment and quadrature checks plus CSV validation, logging each result.

    Args:
        directory: Output directory whose CSV files are validated, if any.

    Returns:
        One :class:`CheckResult` per check, in the order they ran.
    """
    results = [check_oracle(), check_moments(), check_quadrature()] + check_csv_files(directory)
    for result in results:
        log = logger.info if result.passed else logger.error
        log("%s %s: %s", "PASS" if result.passed else "FAIL", result.name, result.detail)
    return results
