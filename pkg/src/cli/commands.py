"""
Command implementations for PoissonOrbits
analyze, sweep and list-scenarios behind the click entry point

Each command returns a JSON-ready document and an exit code; writing the
document and archiving the run are separate steps so the commands can be
driven from tests without a terminal. Documents carry no timestamps and
are serialized with sorted keys, so identical inputs give identical bytes.
"""

import copy
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonlines
import numpy as np
import pandas as pd
from tqdm import tqdm

from ..core.averaging import AveragedMap, probe_grid
from ..core.errors import ConfigSchemaError, ConfigurationError, NumericalError, PoissonOrbitsError
from ..core.poisson import sample_points, validate_poisson
from ..core.reduction import chart_self_check, defining_identity_residual
from ..core.rootfind import SearchBox, Stability, ZeroInfo, find_zeros, local_small_amplitude_scan
from ..core.run_archive import RunArchive, RunRecord
from ..core.scenarios import Scenario, build_scenario, cross_check, list_scenarios
from ..core.verify import continuation_in_epsilon, poincare_shoot, reintegrate_original
from .config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

IDENTITY_SAMPLES = 10
REPORT_GRID = 3
DOCUMENT_KEYS = ("config", "chart_checks", "averaging", "zeros", "orbits", "sweep")


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def empty_document(config: Optional[RunConfig]) -> Dict[str, Any]:
    document: Dict[str, Any] = {key: None for key in DOCUMENT_KEYS}
    document["config"] = config.to_dict() if config else None
    return document


def error_document(error: PoissonOrbitsError, config: Optional[RunConfig] = None) -> Dict[str, Any]:
    """Document for a failed run; schema errors list every offending path."""
    document = empty_document(config)
    if isinstance(error, ConfigSchemaError):
        document["error"] = error.to_dict()
    else:
        kind = "configuration" if isinstance(error, ConfigurationError) else "numerical"
        document["error"] = {
            "kind": kind,
            "type": type(error).__name__,
            "message": str(error),
            "location": getattr(error, "location", None),
        }
    return to_jsonable(document)


def exit_code_for(error: PoissonOrbitsError) -> int:
    return EXIT_CONFIG if isinstance(error, ConfigurationError) else EXIT_NUMERICAL


# analyze

def _chart_checks(scenario: Scenario, config: RunConfig) -> Dict[str, Any]:
    validation = validate_poisson(scenario.spec, config.validation_samples)
    checks: Dict[str, Any] = {"poisson": validation.to_dict()}
    if not validation.valid:
        return checks
    checks["chart"] = chart_self_check(scenario.chart, config.chart_samples)

    eps = config.epsilons[0]
    residuals = []
    for x in sample_points(scenario.spec, IDENTITY_SAMPLES):
        if bool(scenario.chart.contains(list(x))):
            residuals.append(defining_identity_residual(scenario.chart, scenario.perturbed, x, eps))
    checks["defining_identity"] = {
        "epsilon": eps,
        "samples": len(residuals),
        "max_residual": max(residuals) if residuals else None,
    }
    return checks


def _report_points(config: RunConfig, box: SearchBox) -> List[Tuple[float, ...]]:
    if config.samples:
        return [tuple(p) for p in config.samples]
    return probe_grid(box.ranges, REPORT_GRID)


def _averaging_section(scenario: Scenario, averaged: AveragedMap, config: RunConfig, box: SearchBox) -> Dict[str, Any]:
    section: Dict[str, Any] = {
        "function": averaged.label,
        "order": averaged.order,
        "samples": [],
        "gate": None,
        "reference": scenario.reference_dict(),
        "notes": list(scenario.notes),
        "cross_check": None,
    }
    if averaged.order == 2:
        section["gate"] = averaged.gate.to_dict()
    for point in _report_points(config, box):
        entry: Dict[str, Any] = {"point": list(point), "gbar0": averaged.gbar0(point[0], point[1:])}
        if averaged.order == 2:
            entry["rho_bar"] = averaged.evaluate(point[0], point[1:])
        section["samples"].append(entry)
    if config.cross_check and scenario.oracle_enabled:
        section["cross_check"] = cross_check(scenario, config=config.quadrature, workers=config.workers).to_dict()
    return section


def _small_amplitude(scenario: Scenario, averaged: AveragedMap, config: RunConfig) -> Optional[Dict[str, Any]]:
    if scenario.leading_powers is None or averaged.order != 1:
        return None
    options = dict(config.small_amplitude)
    report = local_small_amplitude_scan(
        averaged,
        r_max=options.get("r_max", 0.3),
        z_box=options.get("z_box"),
        leading_powers=scenario.leading_powers,
        grid=options.get("grid", (6, 5)),
        settings=config.newton,
    )
    return report.to_dict()


def _floquet_consistent(zero: ZeroInfo, moduli: Optional[Sequence[float]]) -> Optional[bool]:
    """Stable zeros should give multipliers inside the unit circle, unstable ones at least one outside."""
    if moduli is None or zero.stability == Stability.INDETERMINATE:
        return None
    inside = all(m < 1.0 for m in moduli)
    return inside if zero.stability == Stability.STABLE else not inside


def _verify_zero(scenario: Scenario, zero: ZeroInfo, config: RunConfig) -> Dict[str, Any]:
    sf = scenario.standard_form()
    eps = config.epsilons[0]
    entry: Dict[str, Any] = {"zero": list(zero.point), "stability": zero.stability.value}

    certificate = poincare_shoot(sf, eps, zero.point, config.integrator, config.shooting, predicted=zero.point)
    cert_dict = certificate.to_dict()
    entry["certificate"] = cert_dict
    entry["floquet_consistent"] = _floquet_consistent(zero, cert_dict["floquet_moduli"]) if certificate.converged else None

    entry["reintegration_gap"] = None
    if certificate.converged and certificate.orbit is not None and certificate.period_t:
        x0 = certificate.orbit.x[0]
        try:
            x_end = reintegrate_original(scenario.perturbed, x0, certificate.period_t, eps, config.integrator)
            entry["reintegration_gap"] = float(np.abs(x_end - x0).max())
        except NumericalError as e:
            logger.warning(f"Re-integration of the orbit at {list(zero.point)} failed: {str(e)}")

    entry["continuation"] = (continuation_in_epsilon(sf, zero.point, config.epsilons, config.integrator,
                                                     config.shooting).to_dict()
                             if len(config.epsilons) > 1 else None)
    return entry


def cmd_analyze(config: RunConfig, progress: bool = False) -> Tuple[Dict[str, Any], int]:
    """
    Full pipeline for one scenario: checks, averaging, zeros, orbits.

    Returns:
        (document, exit code)
    """
    document = empty_document(config)
    try:
        scenario = build_scenario(config.scenario, config.parameters, epsilon=config.epsilons[0])
        document["chart_checks"] = _chart_checks(scenario, config)
        if not document["chart_checks"]["poisson"]["valid"]:
            logger.error(f"Structure of '{scenario.name}' failed Poisson validation")
            document["error"] = {"kind": "configuration", "type": "PoissonValidation",
                                 "message": "structure matrix failed Poisson validation", "location": None}
            return to_jsonable(document), EXIT_CONFIG

        box = config.search_box or scenario.search_box
        averaged = scenario.averaged_map(config.quadrature, config.order)
        document["averaging"] = _averaging_section(scenario, averaged, config, box)

        report = find_zeros(averaged, box, config.newton, progress=progress)
        zeros = report.to_dict()
        zeros["small_amplitude"] = _small_amplitude(scenario, averaged, config)
        document["zeros"] = zeros

        if config.verify:
            candidates = [z for z in report.simple_zeros if z.in_domain]
            document["orbits"] = [_verify_zero(scenario, z, config) for z in candidates]
        else:
            document["orbits"] = []
    except PoissonOrbitsError as e:
        logger.error(f"Failed to analyze '{config.scenario}': {str(e)}")
        failed = error_document(e, config)
        for key in DOCUMENT_KEYS:
            if key != "config" and document.get(key) is not None:
                failed[key] = to_jsonable(document[key])
        return failed, exit_code_for(e)

    logger.info(f"Analysis of '{config.scenario}' finished: {len(report.zeros)} zero(s), "
                f"{len(document['orbits'])} orbit check(s)")
    return to_jsonable(document), EXIT_OK


# sweep

def swept_parameters(config: RunConfig, value: float) -> Tuple[Dict[str, Any], Tuple[float, ...]]:
    """Scenario parameters and eps list for one grid value."""
    parameters = copy.deepcopy(config.resolved_parameters)
    epsilons = config.epsilons
    if config.sweep.parameter == "epsilon":
        epsilons = (value,)
    else:
        coefficients = dict(parameters.get("coefficients") or {})
        coefficients[config.sweep.parameter] = value
        parameters["coefficients"] = coefficients
    return parameters, epsilons


def _sweep_row(config: RunConfig, value: float) -> Dict[str, Any]:
    row: Dict[str, Any] = {"swept_value": value, "zero_count": None, "zeros": [], "error": None}
    try:
        parameters, epsilons = swept_parameters(config, value)
        scenario = build_scenario(config.scenario, parameters, epsilon=epsilons[0])
        averaged = scenario.averaged_map(config.quadrature, config.order)
        # Workers are spent across rows, not within a row.
        report = find_zeros(averaged, config.search_box or scenario.search_box,
                            replace(config.newton, workers=1))
        row["zero_count"] = len(report.simple_zeros)
        sf = scenario.standard_form() if config.verify else None
        for zero in report.simple_zeros:
            entry: Dict[str, Any] = {"point": list(zero.point), "stability": zero.stability.value,
                                     "shoot_status": None, "shoot_distance": None}
            if sf is not None and zero.in_domain:
                cert = poincare_shoot(sf, epsilons[0], zero.point, config.integrator, config.shooting,
                                      predicted=zero.point, with_orbit=False)
                entry["shoot_status"] = cert.status
                entry["shoot_distance"] = cert.distance
            row["zeros"].append(entry)
    except PoissonOrbitsError as e:
        logger.error(f"Sweep row {config.sweep.parameter}={value:g} failed: {str(e)}")
        row["error"] = f"{type(e).__name__}: {e}"
    return to_jsonable(row)


def cmd_sweep(config: RunConfig, progress: bool = True) -> Tuple[Dict[str, Any], int]:
    """
    Repeat the zero search over a one-parameter grid.

    Rows keep the grid order; a failing row records its error and the
    sweep carries on.
    """
    if config.sweep is None:
        error = ConfigSchemaError([("sweep", "required for the sweep command")])
        return error_document(error, config), EXIT_CONFIG
    if not config.sweep.values:
        error = ConfigSchemaError([("sweep.values", "grid is empty")])
        return error_document(error, config), EXIT_CONFIG
    try:
        build_scenario(config.scenario, swept_parameters(config, config.sweep.values[0])[0])
    except ConfigurationError as e:
        return error_document(e, config), EXIT_CONFIG

    values = list(config.sweep.values)
    logger.info(f"Sweeping {config.sweep.parameter} over {len(values)} value(s) with {config.workers} worker(s)")
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        rows = list(tqdm(pool.map(lambda v: _sweep_row(config, v), values), total=len(values),
                         desc=f"sweep {config.sweep.parameter}", disable=not progress))

    document = empty_document(config)
    document["sweep"] = {"parameter": config.sweep.parameter, "rows": rows}
    failed = sum(1 for row in rows if row["error"])
    if failed:
        logger.warning(f"{failed} of {len(rows)} sweep row(s) failed")
    return to_jsonable(document), EXIT_OK


def sweep_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Flatten sweep rows into one CSV line per grid value."""
    width = max((len(row["zeros"]) for row in rows), default=0)
    records = []
    for row in rows:
        record: Dict[str, Any] = {"swept_value": row["swept_value"], "zero_count": row["zero_count"]}
        for i in range(width):
            zero = row["zeros"][i] if i < len(row["zeros"]) else None
            point = zero["point"] if zero else [None, None]
            record[f"zero{i}_r"] = point[0]
            for j, z in enumerate(point[1:]):
                record[f"zero{i}_z{j}" if len(point) > 2 else f"zero{i}_z"] = z
            record[f"zero{i}_stability"] = zero["stability"] if zero else None
            record[f"zero{i}_shoot_distance"] = zero["shoot_distance"] if zero else None
        record["error"] = row["error"]
        records.append(record)
    return pd.DataFrame.from_records(records)


def zeros_frame(document: Dict[str, Any]) -> pd.DataFrame:
    zeros = (document.get("zeros") or {}).get("zeros") or []
    return pd.DataFrame.from_records([
        {"r": z["point"][0], **{f"z{j}": v for j, v in enumerate(z["point"][1:])},
         "residual": z["residual"], "simple": z["simple"], "stability": z["stability"]}
        for z in zeros
    ])


# list-scenarios

def cmd_list_scenarios(as_json: bool = False) -> str:
    scenarios = list_scenarios()
    if as_json:
        return json.dumps(scenarios, indent=2, sort_keys=True)
    lines = []
    for entry in scenarios:
        lines.append(f"{entry['name']}: {entry['description']}")
        for key, text in entry["parameters"].items():
            lines.append(f"    {key}: {text}")
    return "\n".join(lines)


# Output

def render_document(document: Dict[str, Any]) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_output(document: Dict[str, Any], output_format: str, path: Optional[str]) -> Optional[str]:
    """
    Serialize a result document.

    Args:
        document: analyze or sweep document
        output_format: json, csv or jsonl
        path: file to write, or None to return the text for stdout

    Returns:
        the rendered text when path is None
    """
    sweep = document.get("sweep")
    if output_format == "json" or document.get("error"):
        text = render_document(document)
    elif output_format == "csv":
        frame = sweep_frame(sweep["rows"]) if sweep else zeros_frame(document)
        text = frame.to_csv(index=False)
    else:
        records = sweep["rows"] if sweep else [document]
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            with jsonlines.open(path, mode="w", sort_keys=True) as writer:
                writer.write_all(records)
            logger.info(f"Wrote {len(records)} record(s) to {path}")
            return None
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)

    if path is None:
        return text
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(text)
    logger.info(f"Wrote {output_format} output to {path}")
    return None


def archive_run(archive_dir: Optional[str], command: str, config: Optional[RunConfig],
                document: Dict[str, Any], exit_code: int) -> Optional[int]:
    """Store the run when an archive directory is configured."""
    if not archive_dir:
        return None
    archive = RunArchive(archive_dir)
    record = RunRecord(command=command, scenario=config.scenario if config else "",
                       exit_code=exit_code, config=config.to_dict() if config else {})
    run_id = archive.record_run(record, document)
    sweep = document.get("sweep")
    if run_id is not None and sweep:
        archive.record_sweep_rows(run_id, sweep["rows"])
    return run_id
