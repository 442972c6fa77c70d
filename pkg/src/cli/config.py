"""
Run configuration for PoissonOrbits
Loads and validates JSON run files into a RunConfig

Schema problems are collected with their JSON paths and raised together
as one ConfigSchemaError. Environment defaults come from a .env file via
python-dotenv; explicit command-line flags override both.
"""

import json
import logging
import os
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from ..core.averaging import QuadratureConfig
from ..core.errors import ConfigSchemaError, ConfigurationError
from ..core.integrator import IntegratorConfig
from ..core.rootfind import NewtonSettings, SearchBox
from ..core.scenarios import SCENARIO_SCHEMAS, scenario_names
from ..core.verify import ShootingSettings
from ..version import __app_name__, __version__

logger = logging.getLogger(__name__)

ENV_WORKERS = "POISSON_ORBITS_WORKERS"
ENV_LOG_LEVEL = "POISSON_ORBITS_LOG_LEVEL"
ENV_ARCHIVE = "POISSON_ORBITS_ARCHIVE"

OUTPUT_FORMATS = ("json", "csv", "jsonl")
DEFAULT_EPSILONS = (1e-2, 1e-3, 1e-4)
_SWEEPABLE = re.compile(r"^([a-c]\d{3}|epsilon)$")

_TOP_LEVEL_KEYS = {
    "scenario", "epsilon", "order", "quadrature", "search_box", "newton", "integrator",
    "shooting", "verify", "cross_check", "samples", "chart_samples", "validation_samples",
    "small_amplitude", "sweep", "output",
}


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter: a coefficient name (e.g. c002) or epsilon."""
    parameter: str
    values: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"parameter": self.parameter, "values": list(self.values)}


@dataclass(frozen=True)
class EnvironmentDefaults:
    workers: int = 1
    log_level: str = "INFO"
    archive: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """
    Fully resolved run configuration.

    Attributes:
        scenario: registered scenario name
        parameters: scenario parameters in config form (None -> defaults)
        epsilons: eps values, strictly decreasing
        order: averaging order, 1 or 2
        quadrature, newton, integrator, shooting: numerical settings
        search_box: (r, z) search region, None for the scenario default
        verify: run Poincare shooting on located zeros
        cross_check: compare closed forms with the pipeline
        samples: (r, z) points at which the averaged map is reported
        chart_samples, validation_samples: sample counts for the self checks
        small_amplitude: options for the near-origin scan
        sweep: optional swept parameter
        output_path, output_format: where and how to write the document
        workers: worker threads for multistart and sweeps
    """
    scenario: str
    parameters: Optional[Dict[str, Any]] = None
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    order: int = 1
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    search_box: Optional[SearchBox] = None
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    shooting: ShootingSettings = field(default_factory=ShootingSettings)
    verify: bool = True
    cross_check: bool = True
    samples: Optional[Tuple[Tuple[float, ...], ...]] = None
    chart_samples: int = 100
    validation_samples: int = 50
    small_amplitude: Dict[str, Any] = field(default_factory=dict)
    sweep: Optional[SweepSpec] = None
    output_path: Optional[str] = None
    output_format: str = "json"
    workers: int = 1

    @property
    def resolved_parameters(self) -> Dict[str, Any]:
        if self.parameters is not None:
            return self.parameters
        return SCENARIO_SCHEMAS[self.scenario]["defaults"]

    def to_dict(self) -> Dict[str, Any]:
        """Provenance record: every setting that influences the results."""
        return {
            "tool": {"name": __app_name__, "version": __version__},
            "scenario": {"name": self.scenario, "parameters": self.resolved_parameters},
            "epsilon": list(self.epsilons),
            "order": self.order,
            "quadrature": asdict(self.quadrature),
            "search_box": self.search_box.to_dict() if self.search_box else None,
            "newton": self.newton.to_dict(),
            "integrator": self.integrator.to_dict(),
            "shooting": self.shooting.to_dict(),
            "verify": self.verify,
            "cross_check": self.cross_check,
            "samples": [list(p) for p in self.samples] if self.samples else None,
            "chart_samples": self.chart_samples,
            "validation_samples": self.validation_samples,
            "small_amplitude": dict(self.small_amplitude),
            "sweep": self.sweep.to_dict() if self.sweep else None,
            "output_format": self.output_format,
        }


def environment_defaults(env_file: Optional[str] = None) -> EnvironmentDefaults:
    """Read POISSON_ORBITS_* variables (after loading .env if present)."""
    load_dotenv(env_file)
    workers = os.getenv(ENV_WORKERS, "1")
    try:
        workers_value = max(1, int(workers))
    except ValueError:
        logger.warning(f"Ignoring non-integer {ENV_WORKERS}={workers!r}")
        workers_value = 1
    return EnvironmentDefaults(
        workers=workers_value,
        log_level=os.getenv(ENV_LOG_LEVEL, "INFO").upper(),
        archive=os.getenv(ENV_ARCHIVE) or None,
    )


# Parsing helpers

def _number(value: Any, path: str, problems: List[Tuple[str, str]], positive: bool = False) -> Optional[float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        problems.append((path, "must be a finite number"))
        return None
    if positive and value <= 0:
        problems.append((path, "must be positive"))
        return None
    return float(value)


def _interval(value: Any, path: str, problems: List[Tuple[str, str]]) -> Optional[Tuple[float, float]]:
    if not isinstance(value, list) or len(value) != 2:
        problems.append((path, "must be a [lower, upper] pair"))
        return None
    lo = _number(value[0], f"{path}[0]", problems)
    hi = _number(value[1], f"{path}[1]", problems)
    if lo is None or hi is None:
        return None
    if not lo < hi:
        problems.append((path, "lower bound must be below upper bound"))
        return None
    return lo, hi


def _section(raw: Mapping[str, Any], key: str, cls, problems: List[Tuple[str, str]], rename: Optional[Dict[str, str]] = None):
    """Build a settings dataclass from an optional JSON object."""
    block = raw.get(key)
    if block is None:
        return cls()
    if not isinstance(block, Mapping):
        problems.append((key, "must be an object"))
        return cls()
    rename = rename or {}
    kwargs = {rename.get(k, k): v for k, v in block.items()}
    known = set(cls.__dataclass_fields__)
    for name in sorted(set(kwargs) - known):
        problems.append((f"{key}.{name}", "unknown setting"))
    kwargs = {k: v for k, v in kwargs.items() if k in known}
    for name, value in kwargs.items():
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            problems.append((f"{key}.{name}", "must be a scalar"))
            return cls()
    try:
        return cls(**kwargs)
    except (ConfigurationError, TypeError, ValueError) as e:
        problems.append((key, str(e)))
        return cls()


def _epsilons(value: Any, problems: List[Tuple[str, str]]) -> Tuple[float, ...]:
    values = value if isinstance(value, list) else [value]
    parsed = []
    for i, v in enumerate(values):
        number = _number(v, f"epsilon[{i}]" if isinstance(value, list) else "epsilon", problems, positive=True)
        if number is not None:
            parsed.append(number)
    if not parsed and not problems:
        problems.append(("epsilon", "needs at least one value"))
    ordered = tuple(sorted(set(parsed), reverse=True))
    if len(ordered) != len(parsed):
        problems.append(("epsilon", "values must be distinct"))
    return ordered


def _search_box(value: Any, problems: List[Tuple[str, str]]) -> Optional[SearchBox]:
    if value is None:
        return None
    if not isinstance(value, Mapping):
        problems.append(("search_box", "must be an object"))
        return None
    r_range = _interval(value.get("r_range"), "search_box.r_range", problems)
    z_raw = value.get("z_ranges")
    if not isinstance(z_raw, list) or not z_raw:
        problems.append(("search_box.z_ranges", "must be a non-empty list of [lower, upper] pairs"))
        return None
    z_ranges = [_interval(z, f"search_box.z_ranges[{i}]", problems) for i, z in enumerate(z_raw)]
    if r_range is None or any(z is None for z in z_ranges):
        return None
    try:
        return SearchBox(r_range, tuple(z_ranges), value.get("grid", 5))
    except (ConfigurationError, TypeError, ValueError) as e:
        problems.append(("search_box", str(e)))
        return None


def _samples(value: Any, problems: List[Tuple[str, str]]) -> Optional[Tuple[Tuple[float, ...], ...]]:
    if value is None:
        return None
    if not isinstance(value, list) or not value:
        problems.append(("samples", "must be a non-empty list of points"))
        return None
    points = []
    for i, point in enumerate(value):
        if not isinstance(point, list) or len(point) < 2:
            problems.append((f"samples[{i}]", "must be an [r, z, ...] point"))
            continue
        coords = [_number(v, f"samples[{i}][{j}]", problems) for j, v in enumerate(point)]
        if all(c is not None for c in coords):
            if coords[0] <= 0:
                problems.append((f"samples[{i}][0]", "r must be positive"))
            points.append(tuple(coords))
    return tuple(points)


def _sweep(value: Any, problems: List[Tuple[str, str]]) -> Optional[SweepSpec]:
    if value is None:
        return None
    if not isinstance(value, Mapping):
        problems.append(("sweep", "must be an object"))
        return None
    parameter = value.get("parameter")
    if not isinstance(parameter, str) or not _SWEEPABLE.match(parameter):
        problems.append(("sweep.parameter", "must be a coefficient name such as c002, or epsilon"))
        return None
    if "values" in value:
        raw = value["values"]
        if not isinstance(raw, list):
            problems.append(("sweep.values", "must be a list"))
            return None
        values = [_number(v, f"sweep.values[{i}]", problems) for i, v in enumerate(raw)]
    elif {"start", "stop", "count"} <= set(value):
        start = _number(value["start"], "sweep.start", problems)
        stop = _number(value["stop"], "sweep.stop", problems)
        count = value["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            problems.append(("sweep.count", "must be a non-negative integer"))
            return None
        if start is None or stop is None:
            return None
        values = np.linspace(start, stop, count).tolist()
    else:
        problems.append(("sweep", "needs 'values' or 'start', 'stop' and 'count'"))
        return None
    if not values:
        problems.append(("sweep.values", "grid is empty"))
        return None
    if any(v is None for v in values):
        return None
    if parameter == "epsilon" and any(v <= 0 for v in values):
        problems.append(("sweep.values", "epsilon values must be positive"))
    return SweepSpec(parameter, tuple(float(v) for v in values))


def parse_config(raw: Any, env: Optional[EnvironmentDefaults] = None) -> RunConfig:
    """
    Validate a decoded JSON document into a RunConfig.

    Raises:
        ConfigSchemaError: listing every (path, message) problem found
    """
    env = env or EnvironmentDefaults()
    if not isinstance(raw, Mapping):
        raise ConfigSchemaError([("$", "configuration must be a JSON object")])
    problems: List[Tuple[str, str]] = []
    for key in sorted(set(raw) - _TOP_LEVEL_KEYS):
        problems.append((key, "unknown key"))

    scenario_block = raw.get("scenario")
    name, parameters = None, None
    if not isinstance(scenario_block, Mapping) or "name" not in scenario_block:
        problems.append(("scenario.name", "required"))
    else:
        name = scenario_block["name"]
        if name not in SCENARIO_SCHEMAS:
            problems.append(("scenario.name", f"unknown scenario '{name}'; see list-scenarios ({', '.join(scenario_names())})"))
        parameters = scenario_block.get("parameters")
        if parameters is not None and not isinstance(parameters, Mapping):
            problems.append(("scenario.parameters", "must be an object"))

    order = raw.get("order", 1)
    if order not in (1, 2) or isinstance(order, bool):
        problems.append(("order", "must be 1 or 2"))

    output = raw.get("output") or {}
    output_format = output.get("format", "json") if isinstance(output, Mapping) else "json"
    if output_format not in OUTPUT_FORMATS:
        problems.append(("output.format", f"must be one of {', '.join(OUTPUT_FORMATS)}"))

    counts = {}
    for key, default in (("chart_samples", 100), ("validation_samples", 50)):
        value = raw.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            problems.append((key, "must be a positive integer"))
            value = default
        counts[key] = value

    small_amplitude = raw.get("small_amplitude") or {}
    if not isinstance(small_amplitude, Mapping) or set(small_amplitude) - {"r_max", "z_box", "grid"}:
        problems.append(("small_amplitude", "allowed keys are r_max, z_box and grid"))
        small_amplitude = {}

    config_kwargs = dict(
        epsilons=_epsilons(raw.get("epsilon", list(DEFAULT_EPSILONS)), problems),
        quadrature=_section(raw, "quadrature", QuadratureConfig, problems),
        newton=_section(raw, "newton", NewtonSettings, problems, {"newton_tol": "tol"}),
        integrator=_section(raw, "integrator", IntegratorConfig, problems),
        shooting=_section(raw, "shooting", ShootingSettings, problems, {"shoot_tol": "tol"}),
        search_box=_search_box(raw.get("search_box"), problems),
        samples=_samples(raw.get("samples"), problems),
        sweep=_sweep(raw.get("sweep"), problems),
    )
    for key in ("verify", "cross_check"):
        if not isinstance(raw.get(key, True), bool):
            problems.append((key, "must be true or false"))

    if problems:
        raise ConfigSchemaError(problems)

    newton = replace(config_kwargs.pop("newton"), workers=env.workers)
    return RunConfig(
        scenario=name,
        parameters=dict(parameters) if parameters is not None else None,
        order=order,
        newton=newton,
        verify=raw.get("verify", True),
        cross_check=raw.get("cross_check", True),
        small_amplitude=dict(small_amplitude),
        output_path=output.get("path") if isinstance(output, Mapping) else None,
        output_format=output_format,
        workers=env.workers,
        **counts,
        **config_kwargs,
    )


def load_config(path: str, env: Optional[EnvironmentDefaults] = None) -> RunConfig:
    """Read and validate a JSON run file."""
    try:
        with open(Path(path), "r") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigSchemaError([("$", f"configuration file not found: {path}")]) from None
    except json.JSONDecodeError as e:
        raise ConfigSchemaError([("$", f"invalid JSON: {e}")]) from None
    config = parse_config(raw, env)
    logger.info(f"Loaded configuration for scenario '{config.scenario}' from {path}")
    return config


def apply_overrides(config: RunConfig, order: Optional[int] = None, epsilons: Optional[List[float]] = None,
                    verify: Optional[bool] = None, output_path: Optional[str] = None,
                    output_format: Optional[str] = None, workers: Optional[int] = None) -> RunConfig:
    """Command-line flags win over the file."""
    changes: Dict[str, Any] = {}
    if order is not None:
        changes["order"] = order
    if epsilons:
        problems: List[Tuple[str, str]] = []
        changes["epsilons"] = _epsilons(list(epsilons), problems)
        if problems:
            raise ConfigSchemaError([("--epsilon", message) for _, message in problems])
    if verify is not None:
        changes["verify"] = verify
    if output_path is not None:
        changes["output_path"] = output_path
    if output_format is not None:
        changes["output_format"] = output_format
    if workers is not None:
        if workers < 1:
            raise ConfigSchemaError([("--workers", "must be at least 1")])
        changes["workers"] = workers
        changes["newton"] = replace(config.newton, workers=workers)
    return replace(config, **changes) if changes else config
