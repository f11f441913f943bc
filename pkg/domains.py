#!/usr/bin/env python3
"""
Distance to the boundary for simple C^2 domains, and radial reduction.

Shapes: the unit interval, disks and annuli centred at the origin, and
axis-aligned ellipses with semi-axes a >= b. The gradient of d has unit
length below the reach; the medial flag marks points at or beyond it.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from errors import ConfigError, GeometryError
from potentials import BoundedPerturbation, BoundedTerm, PotentialFamily
from sturm import EsaVerdict, esa_verdict

logger = logging.getLogger(__name__)

MEDIAL_RTOL = 1e-12


@dataclass(frozen=True)
class Interval:
    shape = "Interval"
    dimension = 1

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "params": {}}


@dataclass(frozen=True)
class Disk:
    R: float = 1.0
    shape = "Disk"
    dimension = 2

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"disk radius must be positive, got {self.R!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "params": {"R": self.R}}


@dataclass(frozen=True)
class Annulus:
    r: float = 1.0
    R: float = 2.0
    shape = "Annulus"
    dimension = 2

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError(f"annulus needs 0 < r < R, got r={self.r!r}, R={self.R!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "params": {"r": self.r, "R": self.R}}


@dataclass(frozen=True)
class Ellipse:
    a: float = 2.0
    b: float = 1.0
    shape = "Ellipse"
    dimension = 2

    def __post_init__(self):
        if not 0 < self.b <= self.a:
            raise ValueError(f"ellipse needs 0 < b <= a, got a={self.a!r}, b={self.b!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "params": {"a": self.a, "b": self.b}}


Domain = Union[Interval, Disk, Annulus, Ellipse]


@dataclass
class DistanceResult:
    d: float
    grad: Tuple[float, ...]
    medial: bool


@dataclass
class GradNormReport:
    shape: str
    params: Dict[str, float]
    reach: float
    checked: int
    excluded: int
    max_deviation: float
    violators: List[Tuple[float, ...]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violators

    def to_dict(self) -> Dict[str, Any]:
        return {"shape": self.shape, "params": self.params, "reach": self.reach,
                "checked": self.checked, "excluded": self.excluded,
                "max_deviation": self.max_deviation, "passed": self.passed}


def domain_from_dict(data: Any, pointer: str = "/params/domain") -> Domain:
    if not isinstance(data, dict):
        raise ConfigError(pointer, "expected an object {shape, params}")
    shape = data.get("shape")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{pointer}/params", "expected an object")
    builders = {"Interval": Interval, "Disk": Disk, "Annulus": Annulus, "Ellipse": Ellipse}
    if shape not in builders:
        raise ConfigError(f"{pointer}/shape", f"unknown shape {shape!r}")
    try:
        return builders[shape](**{key: float(value) for key, value in params.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{pointer}/params", str(e))


def reach(dom: Domain) -> float:
    """Distance below which d is twice differentiable with |grad d| = 1."""
    if isinstance(dom, Interval):
        return 0.5
    if isinstance(dom, Disk):
        return dom.R
    if isinstance(dom, Annulus):
        return 0.5 * (dom.R - dom.r)
    if isinstance(dom, Ellipse):
        return dom.b * dom.b / dom.a
    raise TypeError(f"unsupported domain {dom!r}")


def _ellipse_foot(a: float, b: float, x: float, y: float) -> Tuple[float, float]:
    """Nearest boundary point to (x, y) in the closed first quadrant."""
    def stationarity(theta: float) -> float:
        return (a * a - b * b) * math.sin(theta) * math.cos(theta) - a * x * math.sin(theta) + b * y * math.cos(theta)

    candidates = [0.0, 0.5 * math.pi]
    nodes = np.linspace(0.0, 0.5 * math.pi, Config.FOOT_POINT_SCAN + 1)
    values = [stationarity(theta) for theta in nodes]
    for lo, hi, f_lo, f_hi in zip(nodes, nodes[1:], values, values[1:]):
        if f_lo == 0:
            candidates.append(float(lo))
        if f_lo * f_hi >= 0:
            continue
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            f_mid = stationarity(mid)
            if f_mid == 0 or hi - lo < 1e-15:
                break
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        candidates.append(0.5 * (lo + hi))
    feet = [(a * math.cos(theta), b * math.sin(theta)) for theta in candidates]
    return min(feet, key=lambda foot: math.hypot(foot[0] - x, foot[1] - y))


def dist_and_grad(dom: Domain, x) -> DistanceResult:
    """Distance to the boundary, its gradient, and whether x is at or past the reach."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if len(point) != dom.dimension:
        raise GeometryError(f"{dom.shape} points have {dom.dimension} coordinates, got {point.tolist()}")
    limit = reach(dom) * (1.0 - MEDIAL_RTOL)

    if isinstance(dom, Interval):
        p = float(point[0])
        if not 0 < p < 1:
            raise GeometryError(f"{p!r} is not inside the interval (0, 1)")
        d = min(p, 1.0 - p)
        grad = 1.0 if p < 0.5 else -1.0 if p > 0.5 else 0.0
        return DistanceResult(d, (grad,), d >= limit)

    px, py = float(point[0]), float(point[1])
    radius = math.hypot(px, py)
    if isinstance(dom, (Disk, Annulus)):
        inner = dom.r if isinstance(dom, Annulus) else 0.0
        if not (inner < radius < dom.R or (inner == 0 and radius < dom.R)):
            raise GeometryError(f"({px!r}, {py!r}) is not inside {dom.to_dict()}")
        unit = (px / radius, py / radius) if radius > 0 else (0.0, 0.0)
        d_outer = dom.R - radius
        if isinstance(dom, Annulus) and radius - inner < d_outer:
            return DistanceResult(radius - inner, unit, radius - inner >= limit)
        return DistanceResult(d_outer, (-unit[0], -unit[1]), d_outer >= limit)

    if isinstance(dom, Ellipse):
        if not (px / dom.a) ** 2 + (py / dom.b) ** 2 < 1:
            raise GeometryError(f"({px!r}, {py!r}) is not inside {dom.to_dict()}")
        fx, fy = _ellipse_foot(dom.a, dom.b, abs(px), abs(py))
        dx, dy = abs(px) - fx, abs(py) - fy
        d = math.hypot(dx, dy)
        sx = -1.0 if px < 0 else 1.0
        sy = -1.0 if py < 0 else 1.0
        grad = (sx * dx / d, sy * dy / d)
        return DistanceResult(d, grad, d >= limit)

    raise TypeError(f"unsupported domain {dom!r}")


def _bounding_box(dom: Domain) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(dom, Interval):
        return np.array([0.0]), np.array([1.0])
    extent = dom.a if isinstance(dom, Ellipse) else dom.R
    height = dom.b if isinstance(dom, Ellipse) else dom.R
    return np.array([-extent, -height]), np.array([extent, height])


def _inside(dom: Domain, point: np.ndarray) -> bool:
    if isinstance(dom, Interval):
        return 0 < point[0] < 1
    if isinstance(dom, Ellipse):
        return (point[0] / dom.a) ** 2 + (point[1] / dom.b) ** 2 < 1
    radius = math.hypot(point[0], point[1])
    inner = dom.r if isinstance(dom, Annulus) else 0.0
    return inner < radius < dom.R


def grad_norm_check(dom: Domain, sample_count: int = 1000, seed: int = 0) -> GradNormReport:
    """Finite-difference |grad d| at random interior samples with d below the reach."""
    if sample_count < 100:
        raise ValueError(f"sample_count must be at least 100, got {sample_count}")
    rng = np.random.default_rng(seed)
    lo, hi = _bounding_box(dom)
    h = Config.GRAD_STEP
    cutoff = reach(dom) * (1.0 - Config.REACH_EXCLUSION)
    checked = excluded = 0
    max_deviation = 0.0
    violators = []
    while checked < sample_count:
        point = rng.uniform(lo, hi)
        if not _inside(dom, point):
            continue
        d = dist_and_grad(dom, point).d
        if d >= cutoff or d <= 4 * h:
            excluded += 1
            continue
        gradient = np.empty(dom.dimension)
        for axis in range(dom.dimension):
            step = np.zeros(dom.dimension)
            step[axis] = h
            gradient[axis] = (dist_and_grad(dom, point + step).d - dist_and_grad(dom, point - step).d) / (2 * h)
        norm = float(np.linalg.norm(gradient))
        deviation = abs(norm - 1.0)
        max_deviation = max(max_deviation, deviation)
        if deviation > Config.GRAD_TOLERANCE:
            violators.append(tuple(float(c) for c in point))
        checked += 1

    report = GradNormReport(dom.shape, dom.to_dict()["params"], reach(dom), checked, excluded,
                            max_deviation, violators)
    if violators:
        logger.warning(f"{dom.shape}: {len(violators)} of {checked} samples violate |grad d| = 1")
    else:
        logger.info(f"{dom.shape}: {checked} samples pass, max deviation {max_deviation:.3g}")
    return report


def radial_reduce(dom: Disk, V_radial: PotentialFamily, n: int) -> BoundedPerturbation:
    """Radial part of -Laplace + V in dimension n as a family in t = R - r.

    u = r^{-(n-1)/2} w adds (n-1)(n-3)/(4 r^2), bounded near r = R.
    """
    if not isinstance(dom, Disk):
        raise TypeError(f"radial reduction needs a Disk, got {dom!r}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return BoundedPerturbation(V_radial, bounded=BoundedTerm("centrifugal", dimension=n, radius=dom.R))


def radial_esa(dom: Disk, V_radial: PotentialFamily, n: int, energies: Sequence[float] = (0.0,),
               workers: int = 1) -> EsaVerdict:
    """ESA verdict of the reduced problem.

    For n = 1 the line segment (-R, R) has two boundary points; for n >= 2
    the centre is interior and needs no condition.
    """
    reduced = radial_reduce(dom, V_radial, n)
    if n == 1:
        return esa_verdict(reduced, reduced, energies, workers)
    return esa_verdict(reduced, None, energies, workers)
