#!/usr/bin/env python3
"""
Quadrature grids in the log coordinate s = ln(1/t) and sampled solutions.

A QuadratureGrid stores composite Simpson weights for integrals in s and,
as logarithms, the weights of the same integrals written in t
(dt = -exp(-s) ds). Boundary-singular integrands are integrated through
logsumexp so nothing underflows at iterated-log depths.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from config import Config
from errors import InsufficientDataError

logger = logging.getLogger(__name__)


def simpson_weights(x: np.ndarray) -> np.ndarray:
    """Composite Simpson weights on an equally spaced, odd-length abscissa."""
    n = len(x)
    if n < 3 or n % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd number of nodes >= 3, got {n}")
    h = (x[-1] - x[0]) / (n - 1)
    weights = np.full(n, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    return weights * h / 3.0


def _odd(nodes: int) -> int:
    if nodes % 2 == 0:
        logger.debug(f"Raising node count {nodes} to {nodes + 1} for Simpson weights")
        return nodes + 1
    return nodes


@dataclass(eq=False)
class QuadratureGrid:
    """Nodes in s with weights for integrals in s and in t."""
    s_values: np.ndarray
    ds_weights: np.ndarray
    endpoint: str = "left"
    spacing: str = "uniform"
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.s_values = np.asarray(self.s_values, dtype=float)
        self.ds_weights = np.asarray(self.ds_weights, dtype=float)
        if len(self.s_values) < Config.MIN_GRID_NODES:
            raise ValueError(f"grid needs at least {Config.MIN_GRID_NODES} nodes, got {len(self.s_values)}")
        if self.s_values.shape != self.ds_weights.shape:
            raise ValueError("nodes and weights differ in length")
        if np.any(np.diff(self.s_values) <= 0):
            raise ValueError("grid nodes must be strictly increasing in s")
        if np.any(self.ds_weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if self.endpoint not in ("left", "right"):
            raise ValueError(f"endpoint must be 'left' or 'right', got {self.endpoint!r}")
        self.log_weights = np.log(self.ds_weights) - self.s_values

    @classmethod
    def uniform(cls, s_min: float, s_max: float, nodes: int, endpoint: str = "left") -> "QuadratureGrid":
        """Equally spaced in s."""
        if not s_min < s_max:
            raise ValueError(f"s_min < s_max required, got {s_min!r}, {s_max!r}")
        s = np.linspace(s_min, s_max, _odd(nodes))
        return cls(s, simpson_weights(s), endpoint, "uniform")

    @classmethod
    def stretched(cls, s_min: float, s_max: float, nodes: int, endpoint: str = "left") -> "QuadratureGrid":
        """Equally spaced in ln s, for tails reaching s ~ 1e6 and beyond."""
        if not 0 < s_min < s_max:
            raise ValueError(f"0 < s_min < s_max required, got {s_min!r}, {s_max!r}")
        u = np.linspace(math.log(s_min), math.log(s_max), _odd(nodes))
        s = np.exp(u)
        s[0], s[-1] = s_min, s_max
        return cls(s, simpson_weights(u) * s, endpoint, "stretched")

    def __len__(self) -> int:
        return len(self.s_values)

    @property
    def t_values(self) -> np.ndarray:
        """Distances exp(-s); underflows to 0 beyond s ~ 745."""
        return np.exp(-self.s_values)

    def refine(self) -> "QuadratureGrid":
        """Same range and spacing with the step halved."""
        builder = QuadratureGrid.uniform if self.spacing == "uniform" else QuadratureGrid.stretched
        return builder(self.s_values[0], self.s_values[-1], 2 * len(self) - 1, self.endpoint)

    def integrate(self, values: np.ndarray) -> float:
        """Integral over t of values sampled at the nodes."""
        return float(np.dot(np.exp(self.log_weights), values))

    def integrate_log(self, log_values: np.ndarray, signs: Optional[np.ndarray] = None) -> Tuple[float, float]:
        """(ln|I|, sign I) for I = integral over t of sign*exp(log_values)."""
        if signs is None:
            return float(logsumexp(log_values + self.log_weights)), 1.0
        log_abs, sign = logsumexp(log_values + self.log_weights, b=signs, return_sign=True)
        return float(log_abs), float(sign)

    def moment_error(self) -> float:
        """Relative error of the grid's integral of t dt against the closed form."""
        s_lo, s_hi = self.s_values[0], self.s_values[-1]
        exact_log = -2.0 * s_lo + math.log(-math.expm1(-2.0 * (s_hi - s_lo))) - math.log(2.0)
        approx_log, _ = self.integrate_log(-self.s_values)
        return abs(math.expm1(approx_log - exact_log))


def log_exp_mean(d: np.ndarray) -> np.ndarray:
    """ln((e^d - 1) / d), stable for every sign and size of d."""
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    pos = d > 0
    neg = d < 0
    out[pos] = d[pos] + np.log(-np.expm1(-d[pos]) / d[pos])
    out[neg] = np.log(np.expm1(d[neg]) / d[neg])
    return out


def tail_cumulative_log(s: np.ndarray, log_f: np.ndarray) -> Tuple[np.ndarray, float]:
    """ln of the integral from s_i to infinity of exp(log_f) ds, for every node.

    log_f is interpolated linearly between nodes (exact for exponentials) and
    extended past the last node with its final slope. Returns the cumulative
    logs and the share of the total carried by that extrapolated tail.
    """
    s = np.asarray(s, dtype=float)
    log_f = np.asarray(log_f, dtype=float)
    if len(s) < 2:
        raise InsufficientDataError("cumulative integration needs at least two nodes")
    ds = np.diff(s)
    d = np.diff(log_f)
    segments = np.log(ds) + log_f[:-1] + log_exp_mean(d)
    slope = d[-1] / ds[-1]
    if not slope < 0:
        logger.warning(f"Integrand does not decay at s = {s[-1]:.6g}; tail integral is unresolved")
        tail = math.inf
    else:
        tail = log_f[-1] - math.log(-slope)
    reversed_terms = np.concatenate([[tail], segments[::-1]])
    cumulative = np.logaddexp.accumulate(reversed_terms)[::-1]
    tail_share = math.exp(tail - cumulative[0]) if math.isfinite(tail) else 1.0
    return cumulative, tail_share


@dataclass(eq=False)
class SolutionSample:
    """A solution on a grid as (sign, ln|.|) pairs for u and du/dt."""
    grid: QuadratureGrid
    sign_u: np.ndarray
    log_u: np.ndarray
    sign_du: np.ndarray
    log_du: np.ndarray
    energy: float = 0.0
    wronskian_drift: float = 0.0
    label: str = ""

    @property
    def s(self) -> np.ndarray:
        return self.grid.s_values

    @property
    def t(self) -> np.ndarray:
        return self.grid.t_values

    def u(self) -> np.ndarray:
        with np.errstate(over='ignore'):
            return self.sign_u * np.exp(self.log_u)

    def uprime(self) -> np.ndarray:
        with np.errstate(over='ignore'):
            return self.sign_du * np.exp(self.log_du)

    @classmethod
    def from_values(cls, grid: QuadratureGrid, u: np.ndarray, uprime: np.ndarray,
                    energy: float = 0.0, label: str = "") -> "SolutionSample":
        u = np.asarray(u, dtype=float)
        uprime = np.asarray(uprime, dtype=float)
        with np.errstate(divide='ignore'):
            return cls(grid, np.sign(u), np.log(np.abs(u)), np.sign(uprime),
                       np.log(np.abs(uprime)), energy=energy, label=label)
