#!/usr/bin/env python3
"""
Potential families and weight functions G near a boundary point.

A PotentialFamily is evaluated through its dimensionless coefficient
w(s) with V(t) = w(s) / t^2 and s = ln(1/t). GFunction values are functions
of s as well; G'(t) itself is only materialized on request because it
overflows at the deepest hierarchy levels.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Dict, List, Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp

from config import Config
from errors import ConfigError, ConstructionError
from iterlog import (as_s, check_domain, domain_edge, iterlog, prod_inv_ladder,
                     script_l)
from quadrature import QuadratureGrid, SolutionSample, tail_cumulative_log

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


def _out(value, scalar: bool):
    return float(value) if scalar else np.asarray(value, dtype=float)


# ---------------------------------------------------------------------------
# Hierarchy coefficients
# ---------------------------------------------------------------------------

def critical_coeff(p: int, x) -> Union[float, np.ndarray]:
    """3/4 - sum_{j=2}^{p} prod_inv(j-1): the coefficient of the lower bound on V."""
    s, scalar = as_s(x)
    return _out(0.75 - np.asarray(script_l(p, x)), scalar)


def optimality_coeff(p: int, c: float, x) -> Union[float, np.ndarray]:
    """critical_coeff(p) with the last hierarchy term scaled by c."""
    if p < 2:
        raise ValueError(f"optimality family needs p >= 2, got {p}")
    s, scalar = as_s(x)
    ladder = prod_inv_ladder(p - 1, x)
    value = 0.75 - sum(ladder[:-1]) - c * np.asarray(ladder[-1])
    return _out(value, scalar)


def _counterexample_terms(p: int, alpha: float, s):
    """(u_s, u_ss) for u = ln psi as a function of s."""
    ladder = [np.asarray(term) for term in prod_inv_ladder(p, s)]
    partial = np.cumsum(np.stack(ladder), axis=0)
    head = sum(ladder[:-1]) if p > 1 else 0.0
    u_s = 0.5 - 0.5 * head + alpha * ladder[-1]
    u_ss = -alpha * ladder[-1] * partial[-1]
    for j in range(p - 1):
        u_ss = u_ss + 0.5 * ladder[j] * partial[j]
    return u_s, u_ss


def counterexample_psi_log(p: int, alpha: float, x) -> Union[float, np.ndarray]:
    """ln psi = s/2 - (1/2) sum_{j<p} ln L_j + alpha ln L_p."""
    if p < 1:
        raise ValueError(f"counterexample order must be >= 1, got {p}")
    s, scalar = as_s(x)
    check_domain(p, s)
    logs = []
    level = s
    for _ in range(p):
        level = np.log(level)
        logs.append(level)
    value = 0.5 * np.asarray(s) - 0.5 * sum(logs[:-1]) + alpha * logs[-1]
    return _out(value, scalar)


def counterexample_potential(p: int, alpha: float, x) -> Union[float, np.ndarray]:
    """t^2 V for V = psi''/psi, from the exact derivatives of ln psi."""
    if p < 1:
        raise ValueError(f"counterexample order must be >= 1, got {p}")
    s, scalar = as_s(x)
    u_s, u_ss = _counterexample_terms(p, alpha, s)
    return _out(u_ss + u_s + u_s * u_s, scalar)


def counterexample_potential_expansion(p: int, alpha: float, x) -> Union[float, np.ndarray]:
    """t^2 psi''/psi assembled factor by factor.

    psi = t^-1/2 L_1^-1/2 ... L_{p-1}^-1/2 L_p^alpha is a product of powers
    f_i^a_i with ln f_i = l_i(s), l_0 = s and l_j = ln_j s. Each factor
    contributes a_i (l_i'' + l_i') + a_i^2 l_i'^2 and each pair
    2 a_i a_k l_i' l_k'. The t^-1/2 factor alone gives the leading 3/4.
    """
    if p < 1:
        raise ValueError(f"counterexample order must be >= 1, got {p}")
    s, scalar = as_s(x)
    ladder = [np.asarray(term) for term in prod_inv_ladder(p, s)]
    exponents = [0.5] + [-0.5] * (p - 1) + [alpha]
    slopes = [np.ones_like(ladder[0])] + ladder
    # l_j'' = -l_j' (l_1' + ... + l_j')
    curvatures = [np.zeros_like(ladder[0])]
    running = np.zeros_like(ladder[0])
    for slope in ladder:
        running = running + slope
        curvatures.append(-slope * running)

    value = np.zeros_like(ladder[0])
    for a, slope, curvature in zip(exponents, slopes, curvatures):
        value = value + a * (curvature + slope) + a * a * slope * slope
    for i in range(p + 1):
        for k in range(i + 1, p + 1):
            value = value + 2.0 * exponents[i] * exponents[k] * slopes[i] * slopes[k]
    return _out(value, scalar)


def counterexample_sample(p: int, alpha: float, grid: QuadratureGrid) -> SolutionSample:
    """psi_{p,alpha} and d psi/dt on the grid, in log form."""
    s = grid.s_values
    log_psi = counterexample_psi_log(p, alpha, s)
    u_s, _ = _counterexample_terms(p, alpha, s)
    with np.errstate(divide='ignore'):
        log_du = s + log_psi + np.log(np.abs(u_s))
    return SolutionSample(grid, np.ones_like(s), log_psi, -np.sign(u_s), log_du,
                          label=f"psi[{p},{alpha}]")


def second_solution(p: int, alpha: float, grid: QuadratureGrid) -> SolutionSample:
    """phi = psi * integral_0^t psi^-2, the solution vanishing at the endpoint."""
    psi = counterexample_sample(p, alpha, grid)
    s = grid.s_values
    # integral over (0, t) of psi^-2 dt, written in s
    log_integral, tail_share = tail_cumulative_log(s, -2.0 * psi.log_u - s)
    if tail_share > Config.TAIL_STABILITY_RTOL:
        logger.warning(
            f"Grid ends at s = {s[-1]:.6g}; extrapolated tail carries {tail_share:.3g} "
            f"of the integral for phi[{p},{alpha}]"
        )
    log_phi = psi.log_u + log_integral
    # phi' = psi' I + 1/psi
    stacked = np.stack([psi.log_du + log_integral, -psi.log_u])
    signs = np.stack([psi.sign_du, np.ones_like(s)])
    log_dphi, sign_dphi = logsumexp(stacked, axis=0, b=signs, return_sign=True)
    return SolutionSample(grid, np.ones_like(s), log_phi, sign_dphi, log_dphi,
                          label=f"phi[{p},{alpha}]")


# ---------------------------------------------------------------------------
# Integrable profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrableProfile:
    """f >= 0 with t f(t) -> 0 and a finite integral at 0.

    kind is 'zero', 'constant' (f = param) or 'power' (f = t^-param,
    0 <= param < 1).
    """
    kind: str = "zero"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "power"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "constant" and self.param < 0:
            raise ValueError(f"constant profile must be non-negative, got {self.param!r}")
        if self.kind == "power" and not 0 <= self.param < 1:
            raise ValueError(f"power profile exponent must lie in [0, 1), got {self.param!r}")

    @classmethod
    def zero(cls) -> "IntegrableProfile":
        return cls("zero", 0.0)

    @classmethod
    def constant(cls, value: float) -> "IntegrableProfile":
        return cls("constant", float(value))

    @classmethod
    def power(cls, beta: float) -> "IntegrableProfile":
        return cls("power", float(beta))

    @property
    def name(self) -> str:
        return self.kind if self.kind == "zero" else f"{self.kind}:{self.param!r}"

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, self.param)
        return t ** -self.param

    def t_f(self, s):
        """t f(t) at t = exp(-s)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "constant":
            return self.param * np.exp(-s)
        return np.exp(-(1.0 - self.param) * s)

    def antiderivative(self, s):
        """F(t) = integral_0^t f at t = exp(-s)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(s)
        if self.kind == "constant":
            return self.param * np.exp(-s)
        return np.exp(-(1.0 - self.param) * s) / (1.0 - self.param)

    def cumulative(self, t):
        """integral_t^1 f(u) du."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide='ignore'):
            return self.antiderivative(0.0) - self.antiderivative(-np.log(t))

    def verify(self, samples: int = 200) -> bool:
        """Check the three profile conditions on a decreasing sample towards 0."""
        t = np.geomspace(1.0, 1e-12, samples)
        values = self.f(t)
        if np.any(values < 0):
            return False
        scaled = t * values
        if scaled[-1] > scaled[samples // 2]:
            return False
        return bool(np.all(np.isfinite(self.cumulative(t))))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "param": self.param}


def profile_from_dict(data: Union[None, str, Dict[str, Any]], pointer: str = "/f") -> IntegrableProfile:
    if data is None or data == "zero":
        return IntegrableProfile.zero()
    if isinstance(data, str):
        kind, _, param = data.partition(":")
        data = {"kind": kind, "param": float(param) if param else 0.0}
    if not isinstance(data, dict):
        raise ConfigError(pointer, "profile must be a name or an object")
    try:
        return IntegrableProfile(data.get("kind", "zero"), float(data.get("param", 0.0)))
    except (TypeError, ValueError) as e:
        raise ConfigError(pointer, str(e))


# ---------------------------------------------------------------------------
# Potential families
# ---------------------------------------------------------------------------

class PotentialFamily(ABC):
    """V(t) = w(s) / t^2 near the endpoint t = 0."""
    variant: ClassVar[str] = ""

    @abstractmethod
    def coefficient(self, x):
        """w(s)."""

    @property
    def s_floor(self) -> float:
        """Smallest s at which w can be evaluated."""
        return 0.0

    @property
    def ladder_depth(self) -> int:
        """Number of iterated-log levels needed to tell LP from LC."""
        return 1

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """JSON form."""

    def potential(self, t):
        """V at distance t."""
        t = np.asarray(t, dtype=float)
        return np.asarray(self.coefficient(-np.log(t))) / (t * t)

    def on_interval(self, x):
        """V on (0, 1), singular at x = 0 only."""
        return self.potential(x)


@dataclass(frozen=True)
class PowerCritical(PotentialFamily):
    c: float = 0.75
    variant: ClassVar[str] = "PowerCritical"

    def coefficient(self, x):
        s, scalar = as_s(x)
        return _out(np.full_like(np.asarray(s, dtype=float), self.c), scalar)

    def potential(self, t):
        t = np.asarray(t, dtype=float)
        if self.c == 0:
            return np.zeros_like(t)
        return self.c / (t * t)

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "c": self.c}


@dataclass(frozen=True)
class LogHierarchy(PotentialFamily):
    """leading - sum_{j=2}^{p-1} prod_inv(j-1) - last_constant * prod_inv(p-1)."""
    p: int = 2
    leading: float = 0.75
    last_constant: float = 1.0
    variant: ClassVar[str] = "LogHierarchy"

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"log hierarchy needs p >= 2, got {self.p}")
        domain_edge(self.p - 1)

    def coefficient(self, x):
        s, scalar = as_s(x)
        ladder = prod_inv_ladder(self.p - 1, x)
        value = self.leading - sum(ladder[:-1]) - self.last_constant * np.asarray(ladder[-1])
        return _out(value, scalar)

    @property
    def s_floor(self) -> float:
        return domain_edge(self.p - 1)

    @property
    def ladder_depth(self) -> int:
        return self.p - 1

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "p": self.p, "leading": self.leading,
                "c": self.last_constant}


@dataclass(frozen=True)
class Counterexample(PotentialFamily):
    """The potential psi''/psi of psi_{p,alpha}."""
    p: int = 1
    alpha: float = 0.0
    variant: ClassVar[str] = "Counterexample"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"counterexample order must be >= 1, got {self.p}")
        domain_edge(self.p)

    def coefficient(self, x):
        return counterexample_potential(self.p, self.alpha, x)

    @property
    def s_floor(self) -> float:
        return domain_edge(self.p)

    @property
    def ladder_depth(self) -> int:
        return self.p

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": self.variant, "p": self.p, "alpha": self.alpha}


@dataclass(frozen=True)
class BoundedTerm:
    """A bounded potential V_2, reported as t^2 V_2 in the log coordinate.

    kind 'constant' uses value; 'centrifugal' is (n-1)(n-3)/(4 r^2) with
    r = radius - t; 'reflected' is another family seen from the far end of
    the unit interval, V_2(t) = family.potential(1 - t).
    """
    kind: str = "constant"
    value: float = 0.0
    dimension: int = 1
    radius: float = 1.0
    family: Optional[PotentialFamily] = None

    def __post_init__(self):
        if self.kind not in ("constant", "centrifugal", "reflected"):
            raise ValueError(f"unknown bounded term {self.kind!r}")
        if self.kind == "centrifugal" and (self.dimension < 1 or self.radius <= 0):
            raise ValueError("centrifugal term needs dimension >= 1 and radius > 0")
        if self.kind == "reflected" and self.family is None:
            raise ValueError("reflected term needs a family")

    @property
    def s_floor(self) -> float:
        if self.kind == "centrifugal":
            return max(0.0, math.log(2.0 / self.radius))
        if self.kind == "reflected":
            return LN2
        return 0.0

    def scaled(self, s):
        """t^2 V_2(t) at t = exp(-s)."""
        s = np.asarray(s, dtype=float)
        t = np.exp(-s)
        if self.kind == "constant":
            return self.value * t * t
        if self.kind == "centrifugal":
            n = self.dimension
            strength = (n - 1) * (n - 3) / 4.0
            return strength * (t / (self.radius - t)) ** 2
        return t * t * np.asarray(self.family.potential(1.0 - t))

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"kind": self.kind, "value": self.value}
        if self.kind == "centrifugal":
            return {"kind": self.kind, "dimension": self.dimension, "radius": self.radius}
        return {"kind": self.kind, "family": self.family.to_dict()}


@dataclass(frozen=True)
class BoundedPerturbation(PotentialFamily):
    """V = V_base - coefficient * f(t)/t + V_2(t)."""
    base: PotentialFamily = field(default_factory=lambda: PowerCritical(0.0))
    profile: IntegrableProfile = field(default_factory=IntegrableProfile.zero)
    strength: float = 0.0
    bounded: Optional[BoundedTerm] = None
    variant: ClassVar[str] = "BoundedPerturbation"

    def coefficient(self, x):
        s, scalar = as_s(x)
        value = np.asarray(self.base.coefficient(x)) - self.strength * self.profile.t_f(s)
        if self.bounded is not None:
            value = value + self.bounded.scaled(s)
        return _out(value, scalar)

    @property
    def s_floor(self) -> float:
        floor = self.base.s_floor
        if self.bounded is not None:
            floor = max(floor, self.bounded.s_floor)
        return floor

    @property
    def ladder_depth(self) -> int:
        return self.base.ladder_depth

    def to_dict(self) -> Dict[str, Any]:
        data = {"variant": self.variant, "base": self.base.to_dict(),
                "f": self.profile.to_dict(), "coefficient": self.strength}
        if self.bounded is not None:
            data["bounded"] = self.bounded.to_dict()
        return data


def bounded_constant(value: float) -> BoundedPerturbation:
    """The regular family V = value."""
    return BoundedPerturbation(PowerCritical(0.0), bounded=BoundedTerm("constant", float(value)))


@dataclass(frozen=True)
class TwoSided:
    """Potential on (0, 1): V(x) = left(x) + right(1 - x)."""
    left: PotentialFamily
    right: PotentialFamily

    def on_interval(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.left.potential(x)) + np.asarray(self.right.potential(1.0 - x))

    def near_endpoint(self, endpoint: str) -> PotentialFamily:
        """The one-sided family in the distance to the given end."""
        if endpoint == "left":
            near, far = self.left, self.right
        elif endpoint == "right":
            near, far = self.right, self.left
        else:
            raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
        return BoundedPerturbation(near, bounded=BoundedTerm("reflected", family=far))

    def to_dict(self) -> Dict[str, Any]:
        return {"variant": "TwoSided", "left": self.left.to_dict(), "right": self.right.to_dict()}


def family_from_dict(data: Dict[str, Any], pointer: str = "/potential"):
    """Build a family (or a TwoSided potential) from its JSON form."""
    if not isinstance(data, dict):
        raise ConfigError(pointer, "potential must be an object")
    variant = data.get("variant")

    def number(key: str, default: Optional[float] = None) -> float:
        value = data.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{pointer}/{key}", f"expected a number, got {value!r}")
        return float(value)

    def integer(key: str, default: Optional[int] = None) -> int:
        value = data.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{pointer}/{key}", f"expected an integer, got {value!r}")
        return value

    try:
        if variant == "PowerCritical":
            return PowerCritical(number("c"))
        if variant == "LogHierarchy":
            return LogHierarchy(integer("p", 2), number("leading", 0.75), number("c", 1.0))
        if variant == "Counterexample":
            return Counterexample(integer("p", 1), number("alpha"))
        if variant == "BoundedPerturbation":
            base = family_from_dict(data.get("base", {"variant": "PowerCritical", "c": 0.0}),
                                    f"{pointer}/base")
            bounded = None
            if "bounded" in data:
                spec = data["bounded"]
                if not isinstance(spec, dict):
                    raise ConfigError(f"{pointer}/bounded", "expected an object")
                if spec.get("kind") == "reflected":
                    bounded = BoundedTerm("reflected",
                                          family=family_from_dict(spec.get("family"), f"{pointer}/bounded/family"))
                else:
                    bounded = BoundedTerm(spec.get("kind", "constant"), float(spec.get("value", 0.0)),
                                          int(spec.get("dimension", 1)), float(spec.get("radius", 1.0)))
            return BoundedPerturbation(base, profile_from_dict(data.get("f"), f"{pointer}/f"),
                                       number("coefficient", 0.0), bounded)
        if variant == "TwoSided":
            return TwoSided(family_from_dict(data.get("left"), f"{pointer}/left"),
                            family_from_dict(data.get("right"), f"{pointer}/right"))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(pointer, str(e))
    raise ConfigError(f"{pointer}/variant", f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Weight functions G
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GFunction:
    """A weight G(t) with cut-off d0 = exp(-s0), evaluated in s.

    value_fn gives G and scaled_fn gives t G'(t); both take arrays of s.
    """
    name: str
    s0: float
    value_fn: Callable = field(repr=False, compare=False)
    scaled_fn: Callable = field(repr=False, compare=False)
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def d0(self) -> float:
        return math.exp(-self.s0)

    def g(self, x):
        s, scalar = as_s(x)
        return _out(self.value_fn(np.atleast_1d(np.asarray(s, dtype=float))).reshape(np.shape(s)), scalar)

    def t_gprime(self, x):
        """t G'(t), which (Sigma.1) confines to [0, 1] below d0."""
        s, scalar = as_s(x)
        return _out(self.scaled_fn(np.atleast_1d(np.asarray(s, dtype=float))).reshape(np.shape(s)), scalar)

    def gprime(self, x):
        """G'(t); overflows to inf where t itself underflows."""
        s, scalar = as_s(x)
        with np.errstate(over='ignore'):
            return _out(np.asarray(self.t_gprime(s)) * np.exp(s), scalar)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "d0": self.d0, "s0": self.s0, **self.params}


def g_log_power(a: float = 1.0, b: float = 0.0, d0: float = 0.25) -> GFunction:
    """G = a ln t + b ln L_1(t) below d0, constant above."""
    s0 = -math.log(d0)
    if b != 0 and s0 < domain_edge(1):
        raise ValueError(f"ln L_1 needs d0 <= 1/e, got {d0!r}")

    def value(s):
        clipped = np.maximum(s, s0)
        result = -a * clipped
        if b != 0:
            result = result + b * np.log(clipped)
        return result

    def scaled(s):
        return np.where(s > s0, a - b / np.maximum(s, s0), 0.0)

    terms = [f"{a:g} ln t"] + ([f"{b:+g} ln L1"] if b else [])
    return GFunction(" ".join(terms), s0, value, scaled,
                     {"kind": "log_power", "a": a, "b": b})


def g_log_linear(c: float, d0: float = 0.5) -> GFunction:
    """G = ln t - c t below d0 (needs c d0 <= 1), constant above."""
    if c < 0 or c * d0 > 1:
        raise ValueError(f"ln t - c t needs c >= 0 and c*d0 <= 1, got c={c!r}, d0={d0!r}")
    s0 = -math.log(d0)

    def value(s):
        clipped = np.maximum(s, s0)
        return -clipped - c * np.exp(-clipped)

    def scaled(s):
        return np.where(s > s0, 1.0 - c * np.exp(-np.maximum(s, s0)), 0.0)

    return GFunction(f"ln t - {c:g} t", s0, value, scaled, {"kind": "log_linear", "c": c})


def g_profile(profile: IntegrableProfile, d0: float = 0.25) -> GFunction:
    """G = ln t + integral_t^{d0} f below d0, constant above."""
    s0 = -math.log(d0)
    if np.any(profile.t_f(np.linspace(s0, s0 + 50.0, 64)) > 1.0):
        raise ValueError(f"t f(t) exceeds 1 below d0 = {d0!r}; (Sigma.1) fails")

    def value(s):
        clipped = np.maximum(s, s0)
        return -clipped + profile.antiderivative(s0) - profile.antiderivative(clipped)

    def scaled(s):
        return np.where(s > s0, 1.0 - profile.t_f(np.maximum(s, s0)), 0.0)

    return GFunction(f"ln t + int f [{profile.name}]", s0, value, scaled,
                     {"kind": "profile", "f": profile.to_dict()})


def _joint(s: np.ndarray, s0: float):
    """(ln 1/h, t h'/h) for the cut-off h: h = t below d0/2, 3 d0/4 above d0.

    On [d0/2, d0] h = d0 H(t/d0) with H = 1/2 + q(x)/2, x = 2t/d0 - 1 and
    q = x - x^3 + x^4/2, so h' = (1-x)^2 (1+2x) lies in [0, 1].
    """
    s_h = np.empty_like(s)
    ratio = np.empty_like(s)
    deep = s >= s0 + LN2
    flat = s <= s0
    mid = ~(deep | flat)
    s_h[deep] = s[deep]
    ratio[deep] = 1.0
    s_h[flat] = s0 - math.log(0.75)
    ratio[flat] = 0.0
    tau = np.exp(s0 - s[mid])
    x = 2.0 * tau - 1.0
    big_h = 0.5 + 0.5 * (x - x ** 3 + 0.5 * x ** 4)
    s_h[mid] = s0 - np.log(big_h)
    ratio[mid] = tau * (1.0 - x) ** 2 * (1.0 + 2.0 * x) / big_h
    return s_h, ratio


def _d0_bracket(p: int, profile: IntegrableProfile, s: np.ndarray) -> np.ndarray:
    """1 - L_p/2 - t f(t) - L_p^2/4, the quantity (d0<) bounds below."""
    lp = np.asarray(script_l(p, s))
    return 1.0 - 0.5 * lp - profile.t_f(s) - 0.25 * lp * lp


def _square_integral(p: int, s0: float, s_points: np.ndarray) -> np.ndarray:
    """integral from s0 to each point of script_l(p)^2 / 4."""
    out = np.zeros_like(s_points)
    if p < 2:
        return out
    order = np.argsort(s_points, kind="stable")
    total = 0.0
    previous = s0
    for index in order:
        upper = s_points[index]
        if upper > previous:
            piece, _ = quad(lambda sigma: 0.25 * script_l(p, sigma) ** 2, previous, upper, limit=200)
            total += piece
            previous = upper
        out[index] = total
    return out


def g_hierarchy_build(p: int, f: Optional[IntegrableProfile] = None, d_omega: float = 0.5,
                      search_span: float = Config.D0_SEARCH_SPAN) -> GFunction:
    """G_p = ln h + (1/2) sum_{j=2}^p L_j(h) + integral_{h}^{d0} f~, f~ = f + L_p^2/(4t)."""
    profile = f if f is not None else IntegrableProfile.zero()
    if d_omega <= 0:
        raise ValueError(f"d_omega must be positive, got {d_omega!r}")
    s_start = max(domain_edge(p), -math.log(d_omega))
    s0 = s_start
    while True:
        candidates = s0 + np.geomspace(1e-9, max(1e3, 10.0 * s0), Config.D0_CHECK_POINTS)
        bracket = _d0_bracket(p, profile, candidates)
        failing = bracket < Config.D0_MARGIN
        if not np.any(failing):
            break
        worst = int(np.argmin(bracket))
        s_next = float(np.max(candidates[failing])) + 1e-3 * max(1.0, s0)
        logger.debug(f"(d0<) fails at s = {candidates[worst]:.6g} (value {bracket[worst]:.6g}); moving s0 to {s_next:.6g}")
        if s_next - s_start > search_span:
            raise ConstructionError(
                f"no admissible d0 for p={p}, f={profile.name}: 1 - L_p/2 - t f~(t) = "
                f"{bracket[worst]:.6g} < 2/3 at s = {candidates[worst]:.6g}"
            )
        s0 = s_next

    def value(s):
        s_h, _ = _joint(s, s0)
        result = -s_h + profile.antiderivative(s0) - profile.antiderivative(s_h)
        for j in range(2, p + 1):
            result = result + 0.5 * np.asarray(iterlog(j, s_h))
        return result + _square_integral(p, s0, s_h)

    def scaled(s):
        s_h, ratio = _joint(s, s0)
        return ratio * _d0_bracket(p, profile, s_h)

    built = GFunction(f"G_{p}", s0, value, scaled,
                      {"kind": "hierarchy", "p": p, "f": profile.to_dict(), "d_omega": d_omega})

    from sigma import check_sigma1
    report = check_sigma1(built)
    if not report.passed:
        first = report.violations[0]
        raise ConstructionError(f"G_{p} fails (Sigma.1): {first.clause} at s = {first.s:.6g}")
    logger.info(f"Built G_{p} with d0 = exp(-{s0:.6g}) for f = {profile.name}")
    return built


def g_from_dict(data: Dict[str, Any], pointer: str = "/params/g") -> GFunction:
    """Build a G-function from its JSON form."""
    if not isinstance(data, dict):
        raise ConfigError(pointer, "expected an object")
    kind = data.get("kind")
    try:
        if kind == "log_power":
            return g_log_power(float(data.get("a", 1.0)), float(data.get("b", 0.0)), float(data.get("d0", 0.25)))
        if kind == "log_linear":
            return g_log_linear(float(data.get("c", 1.0)), float(data.get("d0", 0.5)))
        if kind == "profile":
            return g_profile(profile_from_dict(data.get("f"), f"{pointer}/f"), float(data.get("d0", 0.25)))
        if kind == "hierarchy":
            return g_hierarchy_build(int(data.get("p", 2)), profile_from_dict(data.get("f"), f"{pointer}/f"),
                                     float(data.get("d_omega", 0.5)))
    except (TypeError, ValueError) as e:
        raise ConfigError(pointer, str(e))
    raise ConfigError(f"{pointer}/kind", f"unknown G kind {kind!r}")
