#!/usr/bin/env python3
"""
Configuration for the confinement toolkit.

Config holds the numerical constants every module reads its defaults from.
RunConfig is the validated form of a batch-run JSON file; validation errors
carry JSON pointer paths so a bad file can be fixed without reading code.
"""

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from errors import ConfigError

logger = logging.getLogger(__name__)


class Config:
    """Numerical constants (tolerances, bands, default grid sizes)."""

    # iterated logarithms
    MAX_LEVEL = 4
    DOMAIN_EDGE_RTOL = 1e-12
    MATERIALIZE_LIMIT = 700.0

    # quadrature
    MIN_GRID_NODES = 64
    TAIL_STABILITY_RTOL = 1e-8

    # G construction
    D0_MARGIN = 2.0 / 3.0 + 1e-6
    D0_CHECK_POINTS = 512
    D0_SEARCH_SPAN = 50.0
    SIGMA1_POINTS = 1000
    SIGMA1_TOLERANCE = 1e-12

    # dyadic series test
    SERIES_TERMS = 2048
    MIN_SERIES_TERMS = 8
    MIN_FIT_TERMS = 32
    LADDER_DEPTH = 4
    LADDER_TOLERANCE = 0.05
    LADDER_MARGIN = 0.1
    SERIES_RESIDUAL_LIMIT = 1e-3
    RHO0_FACTORS = (0.5, 0.25)
    BRUSENTSEV_POINTS = 256
    BRUSENTSEV_SPAN = 1e6
    BRUSENTSEV_TOLERANCE = 0.05

    # endpoint classification
    ANCHOR_T = 0.25
    DEEP_S = 1e6
    CLASSIFY_NODES = 2049
    RTOL = 1e-10
    ATOL = 1e-12
    STIFF_SPAN = 60.0
    SIGMA_TIE = 1e-3
    SIGMA_BAND = 0.02
    LOG_TIE = 0.01
    LOG_BAND = 0.05
    TAIL_WINDOW = 0.25
    MIN_TAIL_SAMPLES = 32
    TAIL_FIT_RESIDUAL = 1e-4
    WRONSKIAN_DRIFT = 1e-6
    SWEEP_TOLERANCE = 0.01

    # eigenpairs and the Agmon machinery
    EIGEN_RTOL = 1e-11
    EIGEN_ATOL = 1e-13
    EIGEN_HALF_NODES = 1024
    EIGEN_TOL = 1e-10
    BRACKET_DOUBLINGS = 60
    DECAY_WINDOW = (1e-4, 0.05)
    DECAY_TRUNCATION_FACTOR = 20.0
    FORM_FLOOR = 1e-30
    AGMON_EPSREL = 1e-10
    AGMON_QUAD_LIMIT = 400
    AGMON_CLEARANCE = 4.0
    AGMON_MAX_LEVEL = 12
    AGMON_MIN_LEVELS = 3

    # Hardy quotients
    HARDY_S_MAX = 60.0
    HARDY_NODES = 4001
    HARDY_MAX_DEPTH = 4

    # geometry
    FOOT_POINT_SCAN = 64
    GRAD_STEP = 1e-6
    GRAD_TOLERANCE = 1e-6
    REACH_EXCLUSION = 0.02


GRID_KEYS = ("s_min", "s_max", "nodes")
FORMATS = ("csv", "json")
SUBCOMMANDS = ("classify", "sweep", "sigma", "counterexample", "hardy", "agmon", "geometry")


@dataclass
class GridSpec:
    s_min: Optional[float] = None
    s_max: Optional[float] = None
    nodes: Optional[int] = None


@dataclass
class OutputSpec:
    path: Optional[str] = None
    format: str = "csv"


@dataclass
class RunConfig:
    """Validated batch-run configuration."""
    subcommand: str
    potential: Optional[Dict[str, Any]] = None
    grid: GridSpec = field(default_factory=GridSpec)
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: OutputSpec = field(default_factory=OutputSpec)
    seed: int = 0
    threads: int = 1
    energies: List[float] = field(default_factory=lambda: [0.0])
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _require_object(value: Any, pointer: str) -> Dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(pointer, f"expected an object, got {type(value).__name__}")
    return value


def _positive_int(value: Any, pointer: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ConfigError(pointer, f"expected a positive integer, got {value!r}")
    return value


def validate_run_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a decoded JSON document and build a RunConfig."""
    data = _require_object(data, "")
    known = {"subcommand", "potential", "grid", "tolerances", "output",
             "seed", "threads", "energies", "params"}
    for key in data:
        if key not in known:
            raise ConfigError(f"/{key}", "unknown key")

    subcommand = data.get("subcommand")
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("/subcommand", f"must be one of {', '.join(SUBCOMMANDS)}, got {subcommand!r}")

    potential = data.get("potential")
    if potential is not None:
        potential = _require_object(potential, "/potential")
        if "variant" not in potential:
            raise ConfigError("/potential/variant", "missing")

    grid_data = _require_object(data.get("grid", {}), "/grid")
    grid = GridSpec()
    for key in grid_data:
        if key not in GRID_KEYS:
            raise ConfigError(f"/grid/{key}", "unknown key")
    for key in ("s_min", "s_max"):
        if key in grid_data:
            value = grid_data[key]
            if not _is_number(value) or value <= 0:
                raise ConfigError(f"/grid/{key}", f"expected a positive number, got {value!r}")
            setattr(grid, key, float(value))
    if "nodes" in grid_data:
        grid.nodes = _positive_int(grid_data["nodes"], "/grid/nodes")
        if grid.nodes < Config.MIN_GRID_NODES:
            raise ConfigError("/grid/nodes", f"at least {Config.MIN_GRID_NODES} nodes required")
    if grid.s_min is not None and grid.s_max is not None and grid.s_min >= grid.s_max:
        raise ConfigError("/grid/s_max", f"s_min < s_max required, got {grid.s_min!r} >= {grid.s_max!r}")

    tolerances = _require_object(data.get("tolerances", {}), "/tolerances")
    for key, value in tolerances.items():
        if not _is_number(value) or value <= 0:
            raise ConfigError(f"/tolerances/{key}", f"tolerances must be positive, got {value!r}")

    output_data = _require_object(data.get("output", {}), "/output")
    output = OutputSpec()
    if "path" in output_data:
        if not isinstance(output_data["path"], str) or not output_data["path"]:
            raise ConfigError("/output/path", "expected a non-empty string")
        output.path = output_data["path"]
    if "format" in output_data:
        if output_data["format"] not in FORMATS:
            raise ConfigError("/output/format", f"must be csv or json, got {output_data['format']!r}")
        output.format = output_data["format"]

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("/seed", f"expected a non-negative integer, got {seed!r}")

    threads = _positive_int(data.get("threads", 1), "/threads")

    energies = data.get("energies", [0.0])
    if not isinstance(energies, list) or not energies:
        raise ConfigError("/energies", "expected a non-empty list of numbers")
    for index, value in enumerate(energies):
        if not _is_number(value):
            raise ConfigError(f"/energies/{index}", f"expected a number, got {value!r}")

    params = _require_object(data.get("params", {}), "/params")

    return RunConfig(
        subcommand=subcommand,
        potential=potential,
        grid=grid,
        tolerances={key: float(value) for key, value in tolerances.items()},
        output=output,
        seed=seed,
        threads=threads,
        energies=[float(value) for value in energies],
        params=params,
    )


def load_run_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON config file; decoding problems become ConfigError."""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON in {path}: {e}")
    logger.debug(f"Loaded config from {path}")
    return _require_object(data, "")
