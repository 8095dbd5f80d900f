"""TOML experiment configs: schema validation, overrides, provenance hash.

A config has the sections ``source``, ``settings``, ``scenario``,
``optimizer``, ``finite_key`` (with optional ``[[finite_key.series]]``),
``grid`` and ``output``. Every key is optional and falls back to the
documented default; unknown keys are rejected with their dot path.
"""

import copy
import hashlib
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

from diqkdsps.constants import (
    DEFAULT_EPS_COMPLETE,
    DEFAULT_EPS_SOUND,
    DEFAULT_L0_KM,
    DEFAULT_NU_HZ,
    DEFAULT_PENALTY_C1,
    DEFAULT_PENALTY_C2,
    DEFAULT_PENALTY_C3,
    DEFAULT_ROUNDS_SEMANTICS,
)
from diqkdsps.enums import RateMethod
from diqkdsps.exceptions import ConfigError
from diqkdsps.finite_key import ROUNDS_SEMANTICS, FiniteKeyConfig
from diqkdsps.optimizer import OptimizerConfig, SettingsVector
from diqkdsps.paths import get_at, set_at
from diqkdsps.photonic import (
    OverlapModel,
    PhysicalParams,
    default_overlaps,
    local_efficiency_params,
    overlaps_from_visibility,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^\s*\[\[?\s*([^\[\]]+?)\s*\]\]?\s*(#.*)?$")
_ASSIGNMENT = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")


def locate_line(text: str, position: Optional[str]) -> Optional[int]:
    """Return the 1-based line of the key at ``position`` in TOML ``text``.

    Only ``[table]`` / ``[[array]]`` headers followed by ``key = value`` lines
    are understood. A key that is absent (e.g. the missing half of a pair)
    resolves to its table header; anything else not found gives None.

    Examples:
        >>> locate_line("[source]\\neta1 = 2.0\\n", "source.eta1")
        2
    """
    if not position:
        return None
    segments = position.split(".")
    key = segments[-1] if len(segments) > 1 and not segments[-1].isdigit() else None
    body = segments[:-1] if key is not None else segments
    table = ".".join(s for s in body if not s.isdigit())
    index = next((int(s) for s in body if s.isdigit()), 0)
    seen = 0
    header_line = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _HEADER.match(line)
        if header:
            if header_line is not None:
                break
            if header.group(1) == table:
                if seen == index:
                    header_line = number
                    if key is None:
                        return number
                seen += 1
            continue
        assignment = _ASSIGNMENT.match(line)
        if header_line is not None and assignment and assignment.group(1) == key:
            return number
    return header_line


@dataclass(frozen=True)
class Field:
    kind: str
    default: Any = None
    check: Optional[Callable[[Any], bool]] = None
    hint: str = ""


def _unit(v: float) -> bool:
    return 0.0 <= v <= 1.0


def _open_unit(v: float) -> bool:
    return 0.0 < v < 1.0


def _positive(v: float) -> bool:
    return v > 0


def _nonnegative(v: float) -> bool:
    return v >= 0


def _length(n: int) -> Callable[[list], bool]:
    return lambda v: len(v) == n


SOURCE_FIELDS: Dict[str, Field] = {
    "eta1": Field("float", 1.0, _unit, "in [0, 1]"),
    "eta2": Field("float", 1.0, _unit, "in [0, 1]"),
    "eta_t": Field("float", 1.0, _unit, "in [0, 1]"),
    "big_t": Field("float", 1e-3, _unit, "in [0, 1]"),
    "small_t": Field("float", 0.5, _unit, "in [0, 1]"),
    "gamma_per_ns": Field("float", 1.0, _positive, "> 0"),
    "gamma_d_per_ns": Field("float", 0.0, _nonnegative, ">= 0"),
    "sigma_per_ns": Field("float", 0.0, _nonnegative, ">= 0"),
    "g2": Field("float", 0.0, lambda v: 0.0 <= v <= 0.5, "in [0, 0.5]"),
    "v_alpha": Field("float?", None, _unit, "in [0, 1]"),
    "v_beta": Field("float?", None, _unit, "in [0, 1]"),
}

SETTINGS_FIELDS: Dict[str, Field] = {
    "small_t": Field("float?", None, _unit, "in [0, 1]"),
    "thetaA_rad": Field("floats?", None, _length(2), "a list of 2 angles"),
    "thetaB_rad": Field("floats?", None, _length(3), "a list of 3 angles"),
    "q": Field("float", 0.0, lambda v: 0.0 <= v <= 0.5, "in [0, 0.5]"),
    "big_t": Field("float?", None, _open_unit, "in (0, 1)"),
}

SCHEMA: Dict[str, Dict[str, Field]] = {
    "source": SOURCE_FIELDS,
    "settings": SETTINGS_FIELDS,
    "scenario": {
        "method": Field("str", RateMethod.SDP.value, lambda v: v in {m.value for m in RateMethod},
                        "one of " + ", ".join(m.value for m in RateMethod)),
        "m": Field("int", 8, lambda v: 2 <= v <= 32, "in [2, 32]"),
        "level": Field("int", 2, lambda v: v in (1, 2), "1 or 2"),
        "extras": Field("bool", True),
        "y_set": Field("ints", [0, 1, 2], lambda v: bool(v) and set(v) <= {0, 1, 2}, "a subset of [0, 1, 2]"),
        "optimize_q": Field("bool", False),
        "optimize_big_t": Field("bool", False),
        "key_x": Field("int", 0, lambda v: v in (0, 1), "0 or 1"),
        "key_y": Field("int", 2, lambda v: v in (0, 1, 2), "0, 1 or 2"),
    },
    "optimizer": {
        "seeds": Field("int", 200, _positive, ">= 1"),
        "max_seed_attempts": Field("int", 1000, _positive, ">= 1"),
        "stage1_m": Field("int", 2, lambda v: 2 <= v <= 32, "in [2, 32]"),
        "stage2_m": Field("int", 8, lambda v: 2 <= v <= 32, "in [2, 32]"),
        "stage1_iter": Field("int", 400, _positive, ">= 1"),
        "stage2_iter": Field("int", 200, _positive, ">= 1"),
        "tol": Field("float", 1e-6, _positive, "> 0"),
        "rng_seed": Field("int", 0, _nonnegative, ">= 0"),
        "pool": Field("int", 1, _positive, ">= 1"),
    },
    "finite_key": {
        "n_rounds": Field("floats", [1e8, 1e9, 1e10], lambda v: bool(v) and min(v) >= 1, "a list of counts >= 1"),
        "nu_Hz": Field("float", DEFAULT_NU_HZ, _positive, "> 0"),
        "eps_sound": Field("float", DEFAULT_EPS_SOUND, _open_unit, "in (0, 1)"),
        "eps_complete": Field("float", DEFAULT_EPS_COMPLETE, _open_unit, "in (0, 1)"),
        "L0_km": Field("float", DEFAULT_L0_KM, _positive, "> 0"),
        "c1": Field("float", DEFAULT_PENALTY_C1, _nonnegative, ">= 0"),
        "c2": Field("float", DEFAULT_PENALTY_C2, _nonnegative, ">= 0"),
        "c3": Field("float", DEFAULT_PENALTY_C3, _nonnegative, ">= 0"),
        "rounds_semantics": Field("str", DEFAULT_ROUNDS_SEMANTICS, lambda v: v in ROUNDS_SEMANTICS, " or ".join(ROUNDS_SEMANTICS)),
        "distance_km": Field("floats", [float(d) for d in range(0, 320, 20)],
                             lambda v: bool(v) and min(v) >= 0, "a non-empty list of distances >= 0"),
        "optimize_big_t": Field("bool", False),
        "target_bps": Field("float", 0.1, _positive, "> 0"),
        "series": Field("series", []),
    },
    "grid": {
        "eta_l": Field("floats", [], lambda v: all(0.0 < e <= 1.0 for e in v), "efficiencies in (0, 1]"),
    },
    "output": {
        "directory": Field("str", "results"),
        "prefix": Field("str", "diqkdsps"),
        "plot_scripts": Field("bool", True),
    },
}

SERIES_KEYS = {"label", "n_rounds", "source", "settings"}


def _coerce(value: Any, spec: Field, position: str) -> Any:
    kind = spec.kind.rstrip("?")
    if value is None and spec.kind.endswith("?"):
        return None
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Expected a number, got {type(value).__name__}", position)
        value = float(value)
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Expected an integer, got {type(value).__name__}", position)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"Expected true or false, got {type(value).__name__}", position)
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"Expected a string, got {type(value).__name__}", position)
    elif kind in ("floats", "ints"):
        if not isinstance(value, list):
            raise ConfigError(f"Expected a list, got {type(value).__name__}", position)
        item = Field(kind[:-1])
        value = [_coerce(v, item, f"{position}.{i}") for i, v in enumerate(value)]
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"Value {value!r} must be {spec.hint}", position)
    return value


def _validate_table(raw: Any, fields: Mapping[str, Field], position: str, fill: bool) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError("Expected a table", position)
    for key in raw:
        if key not in fields:
            raise ConfigError(f"Unknown key '{key}'", f"{position}.{key}")
    table = {}
    for key, spec in fields.items():
        where = f"{position}.{key}"
        if key in raw:
            if spec.kind == "series":
                table[key] = _validate_series(raw[key], where)
            else:
                table[key] = _coerce(raw[key], spec, where)
        elif fill:
            table[key] = list(spec.default) if isinstance(spec.default, list) else spec.default
    return table


def _validate_series(raw: Any, position: str) -> List[Dict[str, Any]]:
    if not isinstance(raw, list):
        raise ConfigError("Expected an array of tables", position)
    series = []
    for i, entry in enumerate(raw):
        where = f"{position}.{i}"
        if not isinstance(entry, dict):
            raise ConfigError("Expected a table", where)
        for key in entry:
            if key not in SERIES_KEYS:
                raise ConfigError(f"Unknown key '{key}'", f"{where}.{key}")
        label = entry.get("label")
        if not isinstance(label, str) or not label:
            raise ConfigError("Series label must be a non-empty string", f"{where}.label")
        validated = {"label": label}
        if "n_rounds" in entry:
            validated["n_rounds"] = _coerce(entry["n_rounds"], SCHEMA["finite_key"]["n_rounds"], f"{where}.n_rounds")
        validated["source"] = _validate_table(entry.get("source", {}), SOURCE_FIELDS, f"{where}.source", False)
        validated["settings"] = _validate_table(entry.get("settings", {}), SETTINGS_FIELDS, f"{where}.settings", False)
        series.append(validated)
    return series


def validate(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """Check a parsed config tree against the schema and fill in defaults.

    Raises:
        ConfigError: For the first unknown key, wrong type or out-of-range value,
            with its dot path as position.
    """
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"Unknown section '{section}'", section)
    data = {name: _validate_table(raw.get(name, {}), fields, name, True) for name, fields in SCHEMA.items()}
    source = data["source"]
    if (source["v_alpha"] is None) != (source["v_beta"] is None):
        raise ConfigError("v_alpha and v_beta must be given together", "source.v_beta")
    settings = data["settings"]
    if (settings["thetaA_rad"] is None) != (settings["thetaB_rad"] is None):
        raise ConfigError("thetaA_rad and thetaB_rad must be given together", "settings.thetaB_rad")
    return data


def config_hash(data: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON dump of a validated config."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A validated config tree with its provenance hash."""
    data: Dict[str, Any] = field(repr=False)
    sha256: str
    path: Optional[Path] = None

    def get(self, path: Union[str, List[Any]]) -> Any:
        return get_at(self.data, path)

    @property
    def rng_seed(self) -> int:
        return self.get("optimizer.rng_seed")

    @property
    def method(self) -> RateMethod:
        return RateMethod(self.get("scenario.method"))

    @property
    def key(self) -> Tuple[int, int]:
        return self.get("scenario.key_x"), self.get("scenario.key_y")

    def physical_params(self, source: Optional[Mapping[str, Any]] = None) -> PhysicalParams:
        """Hardware parameters from ``source`` (default: the ``source`` section)."""
        s = dict(self.data["source"])
        s.update({k: v for k, v in (source or {}).items() if v is not None})
        return PhysicalParams(eta1=s["eta1"], eta2=s["eta2"], eta_t=s["eta_t"], big_t=s["big_t"],
                              small_t=s["small_t"], gamma=s["gamma_per_ns"], gamma_d=s["gamma_d_per_ns"],
                              sigma=s["sigma_per_ns"], g2=s["g2"])

    def overlaps(self, params: PhysicalParams, source: Optional[Mapping[str, Any]] = None) -> OverlapModel:
        """Direct visibilities when configured, otherwise derived from the rates."""
        s = dict(self.data["source"])
        s.update({k: v for k, v in (source or {}).items() if v is not None})
        if s["v_alpha"] is not None and s["v_beta"] is not None:
            return overlaps_from_visibility(s["v_alpha"], s["v_beta"], extra_photon=params.g2 > 0.0)
        return default_overlaps(params)

    def settings(self, override: Optional[Mapping[str, Any]] = None) -> Optional[SettingsVector]:
        """Configured settings vector, or None when no angles are given."""
        s = dict(self.data["settings"])
        s.update({k: v for k, v in (override or {}).items() if v is not None})
        if s["thetaA_rad"] is None or s["thetaB_rad"] is None:
            return None
        small_t = s["small_t"] if s["small_t"] is not None else self.get("source.small_t")
        return SettingsVector(small_t=small_t, theta_a=tuple(s["thetaA_rad"]), theta_b=tuple(s["thetaB_rad"]),
                              q=s["q"], big_t=s["big_t"])

    def grid(self) -> List[Tuple[PhysicalParams, OverlapModel]]:
        """Hardware points of the ``grid.eta_l`` sweep (the source itself when empty)."""
        base = self.physical_params()
        points = [base] if not self.get("grid.eta_l") else [
            local_efficiency_params(base, eta_l) for eta_l in self.get("grid.eta_l")]
        return [(params, self.overlaps(params)) for params in points]

    def optimizer_config(self) -> OptimizerConfig:
        o = self.data["optimizer"]
        return OptimizerConfig(
            method=self.method,
            seeds=o["seeds"],
            max_seed_attempts=o["max_seed_attempts"],
            stage1_m=o["stage1_m"],
            stage2_m=o["stage2_m"],
            stage1_iter=o["stage1_iter"],
            stage2_iter=o["stage2_iter"],
            tol=o["tol"],
            optimize_q=self.get("scenario.optimize_q"),
            optimize_big_t=self.get("scenario.optimize_big_t"),
            level=self.get("scenario.level"),
            extras=self.get("scenario.extras"),
            y_set=tuple(self.get("scenario.y_set")),
            key=self.key,
            rng_seed=o["rng_seed"],
            pool=o["pool"],
        )

    def finite_key_config(self, n: float) -> FiniteKeyConfig:
        f = self.data["finite_key"]
        return FiniteKeyConfig(n=n, nu_hz=f["nu_Hz"], eps_sound=f["eps_sound"], eps_complete=f["eps_complete"],
                               l0_km=f["L0_km"], c1=f["c1"], c2=f["c2"], c3=f["c3"],
                               rounds_semantics=f["rounds_semantics"])

    def series(self) -> List[Dict[str, Any]]:
        """Finite-key series; a single unlabeled one built from the top-level sections when none are listed."""
        listed = self.get("finite_key.series")
        if listed:
            return [dict(s, n_rounds=s.get("n_rounds", self.get("finite_key.n_rounds"))) for s in listed]
        return [{"label": "default", "n_rounds": self.get("finite_key.n_rounds"), "source": {}, "settings": {}}]


def build_config(raw: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None,
                 path: Optional[Path] = None) -> ExperimentConfig:
    """Apply dot-path ``overrides`` to a parsed tree, validate it and hash it.

    ``None`` override values are skipped, so unset command-line flags leave
    the file's values alone.

    Args:
        raw: Parsed TOML tree; it is not modified.
        overrides: Dot-path assignments such as ``{"optimizer.pool": 4}``.
        path: Source file recorded on the result.

    Raises:
        ConfigError: For unknown keys, wrong types and out-of-range values,
            carrying the dot path of the offending entry.
    """
    tree = copy.deepcopy(dict(raw))
    for key, value in (overrides or {}).items():
        if value is not None:
            set_at(tree, key, value, create=True)
    data = validate(tree)
    return ExperimentConfig(data=data, sha256=config_hash(data), path=path)


def load_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Read, override and validate a TOML experiment config.

    Args:
        path: TOML file.
        overrides: Dot-path values applied on top of the file, e.g. from the
            command line.

    Returns:
        The validated config, remembering ``path``.

    Raises:
        ConfigError: When the file cannot be read, is not valid TOML or fails
            validation. Syntax errors and file keys that fail validation carry
            the TOML line in ``line``; errors caused by an override do not.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        found = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"Invalid TOML in {path}: {exc}", line=int(found.group(1)) if found else None) from exc
    try:
        config = build_config(raw, overrides, path)
    except ConfigError as exc:
        line = None if overrides and exc.position in overrides else locate_line(text, exc.position)
        if line is None:
            raise
        raise exc.at_line(line) from exc
    logger.info("loaded config %s (sha256 %s)", path, config.sha256[:12])
    return config
