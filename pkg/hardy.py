#!/usr/bin/env python3
"""
Hardy quotients on the unit interval.

For a test function phi vanishing at both ends the quotient

    (int |phi'|^2 + A int |phi|^2) / (1/4 int |phi|^2 / d^2),  d = min(x, 1 - x)

is at least 1 on convex domains. The improved form multiplies the weight by
1 + sum_i prod_{k<=i} X_k(d/D)^2. Shipped test functions are symmetric about
x = 1/2, so integrals are taken over one half in s = ln(1/d) and doubled.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import Config
from errors import ConfigError
from iterlog import xk_log
from quadrature import QuadratureGrid

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
DIAMETER = 1.0

KINDS = ("sine_pad", "power_boundary", "bump_product")


@dataclass(frozen=True)
class TestFunction:
    """A symmetric test function on (0, 1) given on the half 0 < t <= 1/2."""
    __test__ = False

    kind: str = "sine_pad"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test function {self.kind!r}; expected one of {KINDS}")
        if self.kind == "power_boundary" and not self.param > 0:
            raise ValueError(f"power_boundary needs epsilon > 0, got {self.param!r}")
        if self.kind == "bump_product" and not self.param > 0.5:
            raise ValueError(f"bump_product needs exponent m > 1/2, got {self.param!r}")

    @classmethod
    def sine_pad(cls) -> "TestFunction":
        return cls("sine_pad", 0.0)

    @classmethod
    def power_boundary(cls, epsilon: float) -> "TestFunction":
        return cls("power_boundary", float(epsilon))

    @classmethod
    def bump_product(cls, m: float = 1.0) -> "TestFunction":
        return cls("bump_product", float(m))

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "sine_pad":
            return np.sin(math.pi * t)
        if self.kind == "power_boundary":
            return t ** (0.5 + self.param)
        return (4.0 * t * (1.0 - t)) ** self.param

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "sine_pad":
            return math.pi * np.cos(math.pi * t)
        if self.kind == "power_boundary":
            return (0.5 + self.param) * t ** (self.param - 0.5)
        m = self.param
        return m * (4.0 * t * (1.0 - t)) ** (m - 1.0) * 4.0 * (1.0 - 2.0 * t)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "param": self.param}


def test_function_from_dict(data: Any, pointer: str = "/params/phi") -> TestFunction:
    if isinstance(data, str):
        data = {"kind": data}
    if not isinstance(data, dict):
        raise ConfigError(pointer, "expected an object or a kind name")
    try:
        default = {"sine_pad": 0.0, "power_boundary": 0.05, "bump_product": 1.0}.get(data.get("kind"), 0.0)
        return TestFunction(data.get("kind", "sine_pad"), float(data.get("param", default)))
    except (TypeError, ValueError) as e:
        raise ConfigError(pointer, str(e))


test_function_from_dict.__test__ = False


@dataclass
class HardyRow:
    family: str
    param: float
    A: float
    D: Optional[float]
    depth: int
    quotient: float

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "param": self.param, "A": self.A,
                "D": self.D, "depth": self.depth, "quotient": self.quotient}


def default_grid() -> QuadratureGrid:
    return QuadratureGrid.uniform(LN2, Config.HARDY_S_MAX, Config.HARDY_NODES)


def _half_integral(grid: QuadratureGrid, values: np.ndarray, label: str) -> float:
    """int_0^{1/2} values dt on the grid, with an exponential tail past its last node."""
    body = grid.integrate(values)
    s = grid.s_values
    tail_values = values[-2:] * np.exp(-s[-2:])
    if np.all(tail_values > 0):
        rate = -(math.log(tail_values[1]) - math.log(tail_values[0])) / (s[-1] - s[-2])
        if rate <= 0:
            logger.warning(f"{label}: integrand does not decay at s = {s[-1]:.6g}; boundary layer unresolved")
            return math.inf
        body += tail_values[1] / rate
    return body


def _quotient(phi: TestFunction, A: float, grid: Optional[QuadratureGrid],
              weight: Optional[np.ndarray] = None) -> float:
    grid = grid if grid is not None else default_grid()
    if abs(grid.s_values[0] - LN2) > 1e-12:
        raise ValueError(f"Hardy grid must start at the midpoint s = ln 2, got {grid.s_values[0]!r}")
    t = grid.t_values
    value = phi.value(t)
    numerator = 2.0 * _half_integral(grid, phi.derivative(t) ** 2, "|phi'|^2")
    if A:
        numerator += A * 2.0 * _half_integral(grid, value ** 2, "|phi|^2")
    density = 0.25 * value ** 2 / (t * t)
    if weight is not None:
        density = density * weight
    denominator = 2.0 * _half_integral(grid, density, "|phi|^2 / d^2")
    return numerator / denominator


def hardy_quotient(phi: TestFunction, A: float = 0.0, grid: Optional[QuadratureGrid] = None) -> float:
    """(int |phi'|^2 + A int |phi|^2) / (1/4 int |phi|^2 / d^2)."""
    quotient = _quotient(phi, A, grid)
    logger.debug(f"Hardy quotient for {phi.to_dict()} with A = {A}: {quotient:.12g}")
    return quotient


def improvement_weight(s: np.ndarray, D: float, depth: int) -> np.ndarray:
    """1 + sum_{i<=depth} prod_{k<=i} X_k(d/D)^2 at d = exp(-s)."""
    if not 0 <= depth <= Config.HARDY_MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {Config.HARDY_MAX_DEPTH}], got {depth}")
    m = np.asarray(s, dtype=float) + math.log(D)
    weight = np.ones_like(m)
    product = np.ones_like(m)
    for k in range(1, depth + 1):
        product = product * np.asarray(xk_log(k, m)) ** 2
        weight = weight + product
    return weight


def _improved(phi: TestFunction, D: float, depth: int, grid: Optional[QuadratureGrid], A: float) -> float:
    if depth == 0:
        return _quotient(phi, A, grid)
    grid = grid if grid is not None else default_grid()
    return _quotient(phi, A, grid, improvement_weight(grid.s_values, D, depth))


def improved_quotient(phi: TestFunction, D: float = 2.0 * DIAMETER, depth: int = 1,
                      grid: Optional[QuadratureGrid] = None, A: float = 0.0) -> float:
    """Quotient with the log-improved weight 1/4 (1 + sum prod X_k^2(d/D))."""
    if D < DIAMETER:
        raise ValueError(f"D must be at least the diameter {DIAMETER}, got {D!r}")
    quotient = _improved(phi, D, depth, grid, A)
    logger.debug(f"Improved quotient for {phi.to_dict()}, D = {D}, depth = {depth}: {quotient:.12g}")
    return quotient


def sharpness_probe(epsilons: Sequence[float], A: float = 0.0, workers: int = 1) -> List[float]:
    """Hardy quotients of PowerBoundary(epsilon) for a decreasing epsilon sequence."""
    epsilons = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError(f"epsilon sequence must decrease, got {epsilons}")
    results: Dict[int, float] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_index = {executor.submit(hardy_quotient, TestFunction.power_boundary(e), A): i
                           for i, e in enumerate(epsilons)}
        for future in as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    quotients = [results[i] for i in range(len(epsilons))]
    if any(b > a for a, b in zip(quotients, quotients[1:])):
        logger.warning(f"sharpness probe is not monotone: {quotients}")
    return quotients


def d_sweep(phi: TestFunction, D_values: Sequence[float], depth: int = 1,
            A: float = 0.0) -> List[HardyRow]:
    """Improved quotient as a function of D; values below 1 break the inequality."""
    rows = []
    for D in D_values:
        if D < 0.5:
            raise ValueError(f"D must be at least 1/2 so that d/D <= 1, got {D!r}")
        quotient = _improved(phi, float(D), depth, None, A)
        rows.append(HardyRow(phi.kind, phi.param, A, float(D), depth, quotient))
        if quotient < 1.0:
            logger.warning(f"Improved inequality fails at D = {D}: quotient {quotient:.6g}")
    return rows
