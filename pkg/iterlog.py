#!/usr/bin/env python3
"""
Iterated logarithms near a boundary, evaluated without underflow.

Positions close to the boundary are carried as s = ln(1/t) instead of the
distance t itself, so L_1(t) = s and L_k(t) = ln L_{k-1}(t) are computed
from s directly. Level k is admitted on t <= 1/e_k, i.e. s >= e_{k-1}
with e_0 = 1; levels above 4 cannot be represented in double precision.

All functions accept a LogCoordinate, a float s or a numpy array of s.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from config import Config
from errors import CapabilityError, HierarchyDomainError

logger = logging.getLogger(__name__)

# e_0 .. e_3; e_4 = exp(e_3) overflows
TOWER = (1.0, math.e, math.exp(math.e), math.exp(math.exp(math.e)))

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class LogCoordinate:
    """Distance to the boundary stored as s = ln(1/t)."""
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise ValueError(f"log coordinate must be a positive finite number, got {self.s!r}")

    @classmethod
    def from_t(cls, t: float) -> "LogCoordinate":
        if not 0 < t < 1:
            raise ValueError(f"distance must lie in (0, 1), got {t!r}")
        return cls(-math.log(t))

    @property
    def t(self) -> Optional[float]:
        """exp(-s), or None when it would only be representable symbolically."""
        if self.s > Config.MATERIALIZE_LIMIT:
            return None
        return math.exp(-self.s)


@dataclass(frozen=True)
class TowerValue:
    """e_p = exp^log_depth(mantissa); log_depth is 0 whenever e_p is a float."""
    p: int
    log_depth: int
    mantissa: float

    @property
    def is_log_form(self) -> bool:
        return self.log_depth > 0

    @property
    def value(self) -> Optional[float]:
        return self.mantissa if self.log_depth == 0 else None

    @property
    def log_value(self) -> Optional[float]:
        """ln(e_p), or None when that overflows as well."""
        if self.log_depth == 0:
            return math.log(self.mantissa)
        if self.log_depth == 1:
            return self.mantissa
        return None


def tower_exp(p: int) -> TowerValue:
    """Return e_p with e_1 = e and e_p = exp(e_{p-1})."""
    if p < 1:
        raise ValueError(f"tower index must be >= 1, got {p}")
    if p < len(TOWER):
        return TowerValue(p=p, log_depth=0, mantissa=TOWER[p])
    return TowerValue(p=p, log_depth=p - len(TOWER) + 1, mantissa=TOWER[-1])


def domain_edge(k: int) -> float:
    """Smallest admitted s for level k, i.e. ln(e_k) = e_{k-1}."""
    if k < 1:
        raise ValueError(f"hierarchy level must be >= 1, got {k}")
    if k > Config.MAX_LEVEL:
        raise CapabilityError(
            f"level {k} needs s >= e_{k - 1}, which overflows double precision "
            f"(supported levels: 1..{Config.MAX_LEVEL})"
        )
    return TOWER[k - 1]


def as_s(x) -> Tuple[ArrayLike, bool]:
    """Normalize an argument to (s, is_scalar)."""
    if isinstance(x, LogCoordinate):
        return x.s, True
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return float(arr), True
    return arr, False


def _out(value, scalar: bool):
    return float(value) if scalar else np.asarray(value, dtype=float)


def check_domain(k: int, s: ArrayLike) -> None:
    """Raise HierarchyDomainError unless every s admits level k."""
    if k == 0:
        return
    edge = domain_edge(k)
    if np.size(s) == 0:
        return
    low = float(np.min(s))
    if not low >= edge * (1.0 - Config.DOMAIN_EDGE_RTOL):
        raise HierarchyDomainError(k, low, edge)


def _log_levels(k: int, s: ArrayLike) -> List[ArrayLike]:
    """[ln L_1, ..., ln L_k] evaluated at s (caller checks the domain)."""
    logs = []
    level = s
    for _ in range(k):
        level = np.log(level)
        logs.append(level)
    return logs


def iterlog(k: int, x) -> ArrayLike:
    """L_k(t) computed from s: L_1 = s, L_k = ln L_{k-1}."""
    s, scalar = as_s(x)
    check_domain(k, s)
    level = s
    for _ in range(k - 1):
        level = np.log(level)
    return _out(level, scalar)


def prod_inv_ladder(k: int, x) -> List[ArrayLike]:
    """[prod_inv(1), ..., prod_inv(k)] sharing one pass of logarithms."""
    s, scalar = as_s(x)
    check_domain(k, s)
    ladder = []
    total = 0.0
    for log_level in _log_levels(k, s):
        total = total + log_level
        ladder.append(_out(np.exp(-total), scalar))
    return ladder


def prod_inv(k: int, x) -> ArrayLike:
    """(L_1 ... L_k)^-1 as exp(-sum ln L_j); the empty product k = 0 is 1."""
    s, scalar = as_s(x)
    if k < 0:
        raise ValueError(f"product length must be >= 0, got {k}")
    if k == 0:
        return _out(np.ones_like(s), scalar)
    return prod_inv_ladder(k, x)[-1]


def script_l(p: int, x) -> ArrayLike:
    """Sum over k = 2..p of prod_inv(k - 1); zero for p = 1."""
    s, scalar = as_s(x)
    if p < 1:
        raise ValueError(f"hierarchy order must be >= 1, got {p}")
    if p == 1:
        return _out(np.zeros_like(s), scalar)
    return _out(sum(prod_inv_ladder(p - 1, x)), scalar)


def scaled_derivative(k: int, x) -> ArrayLike:
    """t * dL_k/dt = -prod_inv(k - 1)."""
    s, scalar = as_s(x)
    check_domain(k, s)
    return _out(-np.asarray(prod_inv(k - 1, x)), scalar)


def xk_log(k: int, m: ArrayLike) -> ArrayLike:
    """X_k at t = exp(-m), m >= 0: X_k = 1 / (1 + log1p^(k-1)(m))."""
    if k < 1:
        raise ValueError(f"X_k needs k >= 1, got {k}")
    arr = np.asarray(m, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("X_k is defined for t in (0, 1] only")
    level = arr
    for _ in range(k - 1):
        level = np.log1p(level)
    result = 1.0 / (1.0 + level)
    return float(result) if result.ndim == 0 else result


def xk(k: int, t: ArrayLike) -> ArrayLike:
    """X_1(t) = 1/(1 - ln t) and X_k = X_1(X_{k-1}) on (0, 1]."""
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)) or np.any(arr > 1):
        raise ValueError("X_k is defined for t in (0, 1] only")
    return xk_log(k, -np.log(arr))


def lnk(k: int, x: ArrayLike) -> ArrayLike:
    """ln_0(x) = x and ln_k(x) = ln(ln_{k-1}(x)) for large x."""
    if k < 0:
        raise ValueError(f"iteration count must be >= 0, got {k}")
    arr = np.asarray(x, dtype=float)
    level = arr
    for j in range(k):
        if np.size(level) and not float(np.min(level)) > 0:
            edge = 0.0 if j == 0 else TOWER[j - 1] if j - 1 < len(TOWER) else math.inf
            raise HierarchyDomainError(j, float(np.min(arr)), edge)
        level = np.log(level)
    return float(level) if level.ndim == 0 else level
