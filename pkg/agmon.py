#!/usr/bin/env python3
"""
Agmon-type estimates checked on computed eigenfunctions.

ground_state shoots Dirichlet eigenpairs on a truncated interval
[rho, 1 - rho'] with Pruefer variables u = R sin(phi), u' = R cos(phi);
phi(b) is increasing in E and passes (index + 1) pi at the eigenvalue.
form_identity_check evaluates both sides of the cut-off identity
(h - E)[f psi, f psi] = <psi, |f'|^2 psi> by quadrature, and agmon_ratio
reports the annulus ratios of the weighted decay estimate along the dyadic
sequence rho_n = 2^-n rho0.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import quad, simpson, solve_ivp
from scipy.optimize import brentq

from config import Config
from errors import (BracketError, DegenerateRatioError, InsufficientDataError,
                    IntegrationError, SupportError)
from potentials import GFunction
from quadrature import SolutionSample
from sturm import LSODA_LOCK

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class EigenPair:
    """A normalized Dirichlet eigenfunction on [a, b] with its dense solver output."""
    energy: float
    x: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    node_count: int
    index: int
    a: float
    b: float
    solution: Any = field(default=None, repr=False)
    log_scale: float = 0.0

    def evaluate(self, x) -> np.ndarray:
        """u at arbitrary points of [a, b]."""
        phi, log_r = self.solution(x)
        return np.exp(log_r - self.log_scale) * np.sin(phi)

    def to_dict(self) -> Dict[str, Any]:
        return {"energy": self.energy, "index": self.index, "node_count": self.node_count,
                "rho": self.a, "rho_prime": 1.0 - self.b}


@dataclass
class AgmonRatioReport:
    g_name: str
    rho_sequence: List[float]
    lhs: List[float]
    rhs: List[float]
    ratios: List[float]
    sup_ratio: float

    def rows(self) -> List[Dict[str, float]]:
        return [{"n": n, "rho_n": rho, "lhs": lhs, "rhs": rhs, "ratio": ratio}
                for n, (rho, lhs, rhs, ratio)
                in enumerate(zip(self.rho_sequence, self.lhs, self.rhs, self.ratios))]


@dataclass(frozen=True)
class BumpProfile:
    """C^2 cut-off: 1 on |t - center| <= half_width/2, 0 beyond half_width.

    The ramps are the quintic smoothstep 6x^5 - 15x^4 + 10x^3.
    """
    center: float
    half_width: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")

    @classmethod
    def on(cls, lo: float, hi: float, amplitude: float = 1.0) -> "BumpProfile":
        """The bump supported on [lo, hi]."""
        if not lo < hi:
            raise ValueError(f"support must be an increasing interval, got [{lo!r}, {hi!r}]")
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo), amplitude)

    @property
    def support(self) -> Tuple[float, float]:
        return self.center - self.half_width, self.center + self.half_width

    def _ramp(self, t):
        t = np.asarray(t, dtype=float)
        r = np.abs(t - self.center)
        inner = 0.5 * self.half_width
        x = np.clip((self.half_width - r) / (self.half_width - inner), 0.0, 1.0)
        return t, x, inner

    def value(self, t):
        _, x, _ = self._ramp(t)
        return self.amplitude * x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)

    def derivative(self, t):
        t, x, inner = self._ramp(t)
        slope = 30.0 * x * x * (1.0 - x) ** 2 / (self.half_width - inner)
        return -self.amplitude * np.sign(t - self.center) * slope


# ---------------------------------------------------------------------------
# Eigenpairs
# ---------------------------------------------------------------------------

def _on_interval(V):
    def evaluate(x):
        return float(V.on_interval(x))
    return evaluate


def _eigen_grid(a: float, b: float, nodes: int = Config.EIGEN_HALF_NODES) -> np.ndarray:
    """Nodes clustered geometrically towards both truncation points."""
    half = 0.5 * (b - a)
    offsets = np.concatenate([[0.0], np.geomspace(half * 1e-7, half, nodes - 1)])
    return np.unique(np.concatenate([a + offsets, b - offsets[::-1]]))


def _shoot(potential, E: float, a: float, b: float, t_eval=None, dense: bool = False):
    def rhs(x, y):
        q = potential(x) - E
        c, s = math.cos(y[0]), math.sin(y[0])
        return [c * c - q * s * s, (1.0 + q) * s * c]

    with LSODA_LOCK:
        solution = solve_ivp(rhs, (a, b), [0.0, 0.0], method="LSODA", t_eval=t_eval,
                             dense_output=dense, rtol=Config.EIGEN_RTOL, atol=Config.EIGEN_ATOL)
    if not solution.success:
        location = float(solution.t[-1]) if len(solution.t) else a
        raise IntegrationError(f"shooting at E = {E!r} failed on x: {solution.message}", location)
    return solution


def ground_state(V, rho: float = 0.0, rho_prime: float = 0.0, index: int = 0) -> EigenPair:
    """The index-th Dirichlet eigenpair of -u'' + V u on [rho, 1 - rho'].

    V is a TwoSided potential or a one-sided family on (0, 1).
    """
    a, b = float(rho), 1.0 - float(rho_prime)
    if not 0 <= a < b <= 1:
        raise ValueError(f"need 0 <= rho < 1 - rho' <= 1, got rho={rho!r}, rho'={rho_prime!r}")
    if index < 0:
        raise ValueError(f"eigenvalue index must be >= 0, got {index}")
    x = _eigen_grid(a, b)
    with np.errstate(divide='ignore', invalid='ignore'):
        v_grid = np.asarray(V.on_interval(x), dtype=float)
    if not np.all(np.isfinite(v_grid)):
        raise ValueError(f"potential is not finite on [{a!r}, {b!r}]; truncate further from the singularity")

    potential = _on_interval(V)
    target = (index + 1) * math.pi

    def mismatch(E: float) -> float:
        return float(_shoot(potential, E, a, b).y[0, -1]) - target

    e_lo = float(np.min(v_grid))
    if mismatch(e_lo) >= 0:
        raise BracketError(f"phase already exceeds {index + 1} pi at the potential minimum", (e_lo, e_lo))
    gap = max(1.0, abs(e_lo))
    e_hi = e_lo + gap
    for _ in range(Config.BRACKET_DOUBLINGS):
        if mismatch(e_hi) > 0:
            break
        gap *= 2.0
        e_hi = e_lo + gap
    else:
        raise BracketError(f"no eigenvalue with index {index} found", (e_lo, e_hi))

    energy = brentq(mismatch, e_lo, e_hi, xtol=Config.EIGEN_TOL, rtol=Config.EIGEN_TOL)
    solution = _shoot(potential, energy, a, b, t_eval=x, dense=True)
    phi, log_r = solution.y
    peak = float(np.max(log_r))
    log_scale = peak + 0.5 * math.log(simpson(np.exp(2.0 * (log_r - peak)) * np.sin(phi) ** 2, x=x))

    inner = np.sign(np.sin(phi[1:-1]))
    inner = inner[inner != 0]
    node_count = int(np.count_nonzero(np.diff(inner)))
    if node_count != index:
        logger.warning(f"eigenfunction {index} has {node_count} interior nodes")

    scale = np.exp(log_r - log_scale)
    logger.info(f"Eigenvalue {index} on [{a:.3g}, {b:.6g}]: E = {energy:.12g}")
    return EigenPair(energy, x, scale * np.sin(phi), scale * np.cos(phi), node_count, index,
                     a, b, solution.sol, log_scale)


def decay_fit(pair: EigenPair, endpoint: str = "left") -> float:
    """Local exponent of |u| against the distance t to the endpoint."""
    if endpoint == "left":
        t = pair.x - 0.0
        truncation = pair.a
    elif endpoint == "right":
        t = 1.0 - pair.x
        truncation = 1.0 - pair.b
    else:
        raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
    lo = max(Config.DECAY_TRUNCATION_FACTOR * truncation, Config.DECAY_WINDOW[0])
    hi = Config.DECAY_WINDOW[1]
    window = (t >= lo) & (t <= hi) & (pair.u != 0)
    if np.count_nonzero(window) < Config.MIN_TAIL_SAMPLES:
        raise InsufficientDataError(
            f"need {Config.MIN_TAIL_SAMPLES} samples with t in [{lo:.3g}, {hi:.3g}], "
            f"got {np.count_nonzero(window)}"
        )
    slope, _ = np.polyfit(np.log(t[window]), np.log(np.abs(pair.u[window])), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Quadratic-form identity and annulus ratios
# ---------------------------------------------------------------------------

def form_identity_check(V, E: float, psi: SolutionSample, f: BumpProfile) -> float:
    """Relative mismatch of the cut-off identity for a solution psi at energy E.

    lhs = int |(f psi)'|^2 + int (V - E)|f psi|^2, rhs = int |f'|^2 psi^2,
    both integrated over t on psi's grid.
    """
    t = psi.t
    t_min, t_max = float(np.min(t)), float(np.max(t))
    lo, hi = f.support
    if f.amplitude != 0 and not (t_min < lo and hi < t_max):
        raise SupportError(f"bump support [{lo:.6g}, {hi:.6g}] is not inside the grid's "
                           f"range t in [{t_min:.6g}, {t_max:.6g}]")
    u, du = psi.u(), psi.uprime()
    fv, dfv = f.value(t), f.derivative(t)
    inside = fv != 0
    potential = np.zeros_like(t)
    potential[inside] = np.asarray(V.potential(t[inside]), dtype=float)
    grid = psi.grid
    lhs = grid.integrate((dfv * u + fv * du) ** 2) + grid.integrate((potential - E) * (fv * u) ** 2)
    rhs = grid.integrate(dfv ** 2 * u ** 2)
    error = abs(lhs - rhs) / max(abs(lhs), abs(rhs), Config.FORM_FLOOR)
    logger.debug(f"form identity: lhs = {lhs:.12g}, rhs = {rhs:.12g}, relative error {error:.3g}")
    return error


def _weighted_density(pair: EigenPair, G: GFunction, rho_n: float):
    g_ref = float(G.g(-math.log(rho_n)))

    def density(x: float, with_gradient: bool = False) -> float:
        d = min(x, 1.0 - x)
        s = -math.log(d)
        weight = math.exp(2.0 * (float(G.g(s)) - g_ref)) * float(pair.evaluate(x)) ** 2
        if with_gradient:
            return (1.0 / rho_n + abs(float(G.t_gprime(s))) / d) * weight
        return weight
    return density


def _pieces(lo: float, hi: float, subdivisions: int) -> np.ndarray:
    """Split [lo, hi] into pieces geometric in the distance to the nearer wall."""
    if subdivisions <= 1:
        return np.array([lo, hi])
    if hi <= 0.5:
        return np.geomspace(lo, hi, subdivisions + 1)
    if lo >= 0.5:
        return 1.0 - np.geomspace(1.0 - lo, 1.0 - hi, subdivisions + 1)
    return np.linspace(lo, hi, subdivisions + 1)


def _integrate_pieces(density, lo: float, hi: float, subdivisions: int, epsrel: float,
                      with_gradient: bool = False) -> float:
    edges = _pieces(lo, hi, subdivisions)
    total = 0.0
    for left, right in zip(edges[:-1], edges[1:]):
        value, _ = quad(density, left, right, args=(with_gradient,), epsabs=0.0, epsrel=epsrel,
                        limit=Config.AGMON_QUAD_LIMIT)
        total += value
    return total


def _annulus_terms(pair: EigenPair, G: GFunction, rho_n: float, subdivisions: int = 1,
                   epsrel: float = Config.AGMON_EPSREL) -> Tuple[float, float]:
    density = _weighted_density(pair, G, rho_n)
    inner = [2 * rho_n] + [p for p in (G.d0, 0.5, 1.0 - G.d0) if 2 * rho_n < p < 1 - 2 * rho_n]
    inner.append(1 - 2 * rho_n)
    lhs = sum(_integrate_pieces(density, lo, hi, subdivisions, epsrel) for lo, hi in zip(inner[:-1], inner[1:]))
    annulus = 0.0
    for lo, hi in ((rho_n, 2 * rho_n), (1 - 2 * rho_n, 1 - rho_n)):
        annulus += _integrate_pieces(density, lo, hi, subdivisions, epsrel, with_gradient=True)
    return lhs, annulus / rho_n


def deepest_level(pair: EigenPair, rho0: float) -> int:
    """Largest n with rho_n at least AGMON_CLEARANCE times the truncation, capped at AGMON_MAX_LEVEL."""
    truncation = max(pair.a, 1.0 - pair.b)
    if truncation <= 0:
        return Config.AGMON_MAX_LEVEL
    return min(Config.AGMON_MAX_LEVEL, math.floor(math.log2(rho0 / (Config.AGMON_CLEARANCE * truncation))))


def agmon_ratio(pair: EigenPair, G: GFunction, rho0: float, n_max: Optional[int] = None,
                workers: int = 1, subdivisions: int = 1,
                epsrel: float = Config.AGMON_EPSREL) -> AgmonRatioReport:
    """lhs_n / rhs_n along rho_n = 2^-n rho0, with g = G(d) - G(rho_n).

    Without n_max the sequence stops at deepest_level, the last annulus that
    stays clear of the truncation. Each integral is split into subdivisions
    pieces and integrated to relative accuracy epsrel; raising the one and
    lowering the other refines the ratio.
    """
    if not 0 < rho0 <= 0.5 * G.d0 * (1 + 1e-12):
        raise ValueError(f"rho0 must lie in (0, d0/2] = (0, {0.5 * G.d0:.6g}], got {rho0!r}")
    if subdivisions < 1 or not 0 < epsrel < 1:
        raise ValueError(f"need subdivisions >= 1 and 0 < epsrel < 1, got {subdivisions!r}, {epsrel!r}")
    if n_max is None:
        n_max = deepest_level(pair, rho0)
        if n_max + 1 < Config.AGMON_MIN_LEVELS:
            raise InsufficientDataError(
                f"eigenpair truncated at ({pair.a:.3g}, {1.0 - pair.b:.3g}) leaves {max(n_max + 1, 0)} "
                f"annuli below rho0 = {rho0:.3g}; at least {Config.AGMON_MIN_LEVELS} needed"
            )
    deepest = rho0 * 2.0 ** -n_max
    if not (pair.a < deepest and 1.0 - pair.b < deepest):
        raise InsufficientDataError(
            f"eigenpair truncated at ({pair.a:.3g}, {1.0 - pair.b:.3g}); "
            f"rho_{n_max} = {deepest:.3g} needs a deeper truncation"
        )
    rhos = [rho0 * 2.0 ** -n for n in range(n_max + 1)]
    terms: Dict[int, Tuple[float, float]] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_n = {executor.submit(_annulus_terms, pair, G, rho, subdivisions, epsrel): n
                       for n, rho in enumerate(rhos)}
        for future in as_completed(future_to_n):
            terms[future_to_n[future]] = future.result()

    lhs = [terms[n][0] for n in range(n_max + 1)]
    rhs = [terms[n][1] for n in range(n_max + 1)]
    for n, value in enumerate(rhs):
        if value <= 0:
            raise DegenerateRatioError(f"annulus integral vanishes at rho_{n} = {rhos[n]:.6g}")
    ratios = [l / r for l, r in zip(lhs, rhs)]
    sup_ratio = max(ratios)
    logger.info(f"Agmon ratio for {G.name}: sup over n <= {n_max} is {sup_ratio:.6g}")
    return AgmonRatioReport(G.name, rhos, lhs, rhs, ratios, sup_ratio)
