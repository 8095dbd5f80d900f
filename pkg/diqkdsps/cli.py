"""Command-line entry point: ``diqkdsps <command> --config experiment.toml``.

Exit codes: 0 on success, 2 on a config error, 3 on any other failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from diqkdsps.analysis import max_chsh_over_settings
from diqkdsps.config import ExperimentConfig, load_config
from diqkdsps.constants import ARTIFACT_VERSION
from diqkdsps.entropy import RatePoint
from diqkdsps.enums import ErrorCode, RateMethod
from diqkdsps.exceptions import ConfigError, DiqkdError
from diqkdsps.finite_key import distance_at_rate, distance_curve
from diqkdsps.optimizer import SettingsVector, evaluate_rate, optimize_rate
from diqkdsps.output import (
    Provenance,
    behavior_row,
    finite_key_rows,
    optimize_row,
    rate_row,
    write_csv,
    write_plot_script,
)
from diqkdsps.photonic import OverlapModel, PhysicalParams, behavior, enumerate_events
from diqkdsps.relaxation import build_problem
from diqkdsps.sdpa import export_standard
from diqkdsps.selfcheck import run_self_check
from diqkdsps.sweep import sweep

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3


def _output_path(config: ExperimentConfig, name: str, suffix: str = ".csv") -> Path:
    directory = Path(config.get("output.directory"))
    return directory / f"{config.get('output.prefix')}_{name}{suffix}"


def _provenance(config: ExperimentConfig) -> Provenance:
    return Provenance(config_sha256=config.sha256, rng_seed=config.rng_seed)


def _rate_kwargs(config: ExperimentConfig) -> Dict:
    return dict(method=config.method, m=config.get("scenario.m"), level=config.get("scenario.level"),
                extras=config.get("scenario.extras"), y_set=tuple(config.get("scenario.y_set")), key=config.key)


def _chsh_settings(config: ExperimentConfig, params: PhysicalParams, overlaps: OverlapModel) -> SettingsVector:
    optimum = max_chsh_over_settings(params, overlaps, rng=np.random.default_rng(config.rng_seed))
    s = optimum.settings
    return SettingsVector(small_t=optimum.small_t, theta_a=s.theta_a, theta_b=s.theta_b,
                          q=config.get("settings.q"))


def _optimized_settings(config: ExperimentConfig, params: PhysicalParams, overlaps: OverlapModel,
                        override: Optional[Dict] = None) -> SettingsVector:
    settings = config.settings(override)
    if settings is not None:
        return settings
    logger.info("no settings configured; optimizing them first")
    result = optimize_rate(params, overlaps, config.optimizer_config())
    if result.settings is None:
        raise DiqkdError(f"no settings with a positive key rate found ({result.diagnostics})",
                         ErrorCode.SAMPLING_EXHAUSTED)
    return result.settings


def cmd_simulate(config: ExperimentConfig) -> Path:
    """Behavior, heralding probability and event breakdown per grid point."""
    rows = []
    for index, (params, overlaps) in enumerate(config.grid()):
        settings = config.settings() or _chsh_settings(config, params, overlaps)
        hardware = settings.apply(params)
        b = behavior(hardware, overlaps, settings.measurement())
        events = enumerate_events(hardware, overlaps, settings.measurement(), config.key)
        rows.append(behavior_row(index, params, overlaps, b, events))
    return write_csv(_output_path(config, "behavior"), "behavior", rows, _provenance(config))


def cmd_rate(config: ExperimentConfig) -> Path:
    """Rate per grid point at the configured settings, or at optimized ones when none are given."""
    settings = config.settings()
    rows = []
    if settings is None:
        for row in sweep(config.grid(), config.optimizer_config()):
            point = row.result.rate if row.result is not None else RatePoint(0.0, 0.0, config.method)
            rows.append(rate_row(row.index, row.params, row.overlaps, point))
    else:
        kwargs = _rate_kwargs(config)
        optimize_q = bool(config.get("scenario.optimize_q"))
        for index, (params, overlaps) in enumerate(config.grid()):
            point = evaluate_rate(params, overlaps, settings, optimize_q=optimize_q, **kwargs)
            logger.info("grid point %d: rate %.6f (%s)", index, point.rate, point.method.value)
            rows.append(rate_row(index, params, overlaps, point))
    path = write_csv(_output_path(config, "rate"), "rate", rows, _provenance(config))
    if config.get("output.plot_scripts"):
        write_plot_script(path, "rate")
    return path


def cmd_optimize(config: ExperimentConfig) -> Path:
    """Two-stage settings optimization over the parameter grid."""
    rows = [optimize_row(row.index, row.params, row.overlaps, row.result, row.error)
            for row in sweep(config.grid(), config.optimizer_config())]
    path = write_csv(_output_path(config, "optimize"), "optimize", rows, _provenance(config))
    if config.get("output.plot_scripts"):
        write_plot_script(path, "optimize")
    return path


def cmd_finite_key(config: ExperimentConfig) -> Path:
    """Rate in bits/s versus distance for every series and round count."""
    optimize_big_t = config.get("finite_key.optimize_big_t")
    target = config.get("finite_key.target_bps")
    kwargs = _rate_kwargs(config)
    rows = []
    for series in config.series():
        params = config.physical_params(series["source"])
        overlaps = config.overlaps(params, series["source"])
        settings = _optimized_settings(config, params, overlaps, series["settings"])
        # T moves with the per-row optimization, so the per-round bound has to follow it
        point = None if optimize_big_t else evaluate_rate(params, overlaps, settings, **kwargs)
        for n in series["n_rounds"]:
            curve = distance_curve(params, overlaps, settings, config.finite_key_config(n),
                                   config.get("finite_key.distance_km"), optimize_big_t=optimize_big_t,
                                   point=point, **kwargs)
            logger.info("%s n=%.3g: %.3g bit/s reached up to %.1f km", series["label"], n, target,
                        distance_at_rate(curve, target))
            rows.extend(finite_key_rows(series["label"], curve))
    path = write_csv(_output_path(config, "finite_key"), "finite_key", rows, _provenance(config))
    if config.get("output.plot_scripts"):
        write_plot_script(path, "finite_key", target)
    return path


def cmd_export_sdpa(config: ExperimentConfig, point: int = 0) -> List[Path]:
    """Write the moment relaxation of one grid point, one ``.dat-s`` file per node."""
    grid = config.grid()
    if not 0 <= point < len(grid):
        raise ConfigError(f"Grid point {point} out of range (grid has {len(grid)} points)", "grid.eta_l")
    params, overlaps = grid[point]
    settings = _optimized_settings(config, params, overlaps)
    b = behavior(settings.apply(params), overlaps, settings.measurement())
    problem = build_problem(b, key_input=config.key[0], m=config.get("scenario.m"), q=settings.q,
                            level=config.get("scenario.level"), extras=config.get("scenario.extras"),
                            y_set=config.get("scenario.y_set"))
    metadata = {"config_sha256": config.sha256, "rng_seed": str(config.rng_seed), "grid_point": str(point)}
    return export_standard(problem, _output_path(config, f"point{point}", ""), metadata)


def cmd_self_check(directory: Optional[Path]) -> int:
    """Exit code of the self-check over ``directory``."""
    results = run_self_check(directory)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error("self-check failed: %s", ", ".join(failed))
        return EXIT_FAILURE
    logger.info("self-check passed (%d checks)", len(results))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per pipeline stage."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML experiment config.")
    common.add_argument("--out", type=Path, default=None, help="Output directory (overrides output.directory).")
    common.add_argument("--seed", type=int, default=None, help="Root rng seed (overrides optimizer.rng_seed).")
    common.add_argument("--pool", type=int, default=None, help="Worker processes (overrides optimizer.pool).")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")

    parser = argparse.ArgumentParser(prog="diqkdsps", description="DIQKD key rates for heralded single-photon sources.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {ARTIFACT_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="Heralded behavior and event breakdown.")
    sub.add_parser("rate", parents=[common], help="Asymptotic key rate per grid point.")
    sub.add_parser("optimize", parents=[common], help="Two-stage settings optimization per grid point.")
    sub.add_parser("finite-key", parents=[common], help="Key rate per second versus distance.")
    export = sub.add_parser("export-sdpa", parents=[common], help="Export the moment relaxation in SDPA format.")
    export.add_argument("--point", type=int, default=0, help="Grid point index.")
    sub.add_parser("self-check", parents=[common], help="Run internal consistency checks and CSV validation.")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "self-check" and args.config is None:
        return cmd_self_check(args.out)
    if args.config is None:
        raise ConfigError("--config is required for this command")
    overrides = {"optimizer.rng_seed": args.seed, "optimizer.pool": args.pool,
                 "output.directory": None if args.out is None else str(args.out)}
    config = load_config(args.config, overrides)
    if args.command == "simulate":
        cmd_simulate(config)
    elif args.command == "rate":
        cmd_rate(config)
    elif args.command == "optimize":
        cmd_optimize(config)
    elif args.command == "finite-key":
        cmd_finite_key(config)
    elif args.command == "export-sdpa":
        cmd_export_sdpa(config, args.point)
    else:
        return cmd_self_check(Path(config.get("output.directory")))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point.

    Returns:
        0 on success, 2 for configuration errors and 3 for any other
        package error.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        logger.error("config error: %s", exc.message)
        return EXIT_CONFIG
    except DiqkdError as exc:
        code = exc.code.value if exc.code else "ERROR"
        logger.error("%s: %s", code, exc.message)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
