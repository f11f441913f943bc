#!/usr/bin/env python3
"""
Limit point / limit circle classification of singular endpoints.

Solutions of -u'' + V u = E u are integrated in s = ln(1/t), where
U(s) = u(t) obeys U_ss + U_s = (w(s) - E e^{-2s}) U with a bounded
coefficient for inverse-square potentials. The integrator works on Pruefer
variables (rho, theta) with U = e^rho cos(theta), U_s = e^rho sin(theta),
co-integrating a second solution through chi = ln tan((theta_2 - theta_1)/2)
so the Wronskian can be monitored. Linear growth rates are subtracted from
rho and chi so the integrated state stays O(1) out to s ~ 1e6.

The recessive solution comes from reduction of order,
phi = psi * integral_0^t psi^-2, never from integrating towards the endpoint.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import logsumexp

from config import Config
from errors import InsufficientDataError, IntegrationError, NonMonotoneError
from iterlog import TOWER, as_s, lnk
from potentials import PotentialFamily, TwoSided
from quadrature import QuadratureGrid, SolutionSample, tail_cumulative_log

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# scipy's LSODA wrapper keeps one global handle; concurrent solves raise.
LSODA_LOCK = threading.Lock()

__all__ = [
    "Endpoint", "Verdict", "EsaVerdict", "TailFit", "Integrability",
    "EndpointClassification", "SweepSample", "ThresholdEstimate",
    "QuadratureGrid", "SolutionSample", "default_anchor", "default_grid",
    "integrate", "reduce_order", "tail_exponent", "classify_endpoint",
    "esa_verdict", "combine_endpoints", "threshold_sweep", "wronskian",
]


class Endpoint(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Verdict(str, Enum):
    LIMIT_POINT = "LimitPoint"
    LIMIT_CIRCLE = "LimitCircle"
    BORDERLINE = "Borderline"


class EsaVerdict(str, Enum):
    ESSENTIALLY_SELF_ADJOINT = "EssentiallySelfAdjoint"
    NOT = "Not"
    BORDERLINE = "Borderline"


@dataclass
class TailFit:
    """ln|u| ~ -sigma s + sum_k gamma_k ln L_{k+1}(t) + const on the deepest window."""
    sigma: float
    log_corrections: List[float]
    r_squared: float
    residual: float
    poor_fit: bool
    window: Tuple[float, float]


@dataclass
class Integrability:
    """Square-integrability call for one solution."""
    square_integrable: Optional[bool]
    borderline: bool
    leans_l2: bool
    level: int
    margin: float
    confidence: float


@dataclass
class EndpointClassification:
    endpoint: str
    verdict: Verdict
    sigma_dominant: float
    sigma_recessive: float
    log_corrections: Dict[str, List[float]]
    confidence: float
    energies: List[float]
    leans_limit_circle: bool
    wronskian_drift: float = 0.0
    diagnostics: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "endpoint": self.endpoint,
            "verdict": self.verdict.value,
            "sigma": {
                "dominant": self.sigma_dominant,
                "recessive": self.sigma_recessive,
                "log_corrections": self.log_corrections,
            },
            "confidence": self.confidence,
            "energies": self.energies,
        }


@dataclass
class SweepSample:
    param: float
    verdict: Verdict
    sigma_dominant: float
    sigma_recessive: float
    confidence: float
    leans_limit_circle: bool


@dataclass
class ThresholdEstimate:
    c_hat: Optional[float]
    interval: Optional[Tuple[float, float]]
    band: Optional[Tuple[float, float]]
    samples: List[SweepSample]


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def default_anchor(family: PotentialFamily) -> float:
    """s of the interior anchor: t_a = 1/4 unless the family needs to start deeper."""
    return max(math.log(1.0 / Config.ANCHOR_T), family.s_floor + 1.0)


def default_grid(family: PotentialFamily, endpoint: str = "left", s_max: float = Config.DEEP_S,
                 nodes: int = Config.CLASSIFY_NODES) -> QuadratureGrid:
    """Grid geometric in s from the anchor deep into the tail."""
    s_a = default_anchor(family)
    return QuadratureGrid.stretched(s_a, max(s_max, 1e3 * s_a), nodes, endpoint)


def _growth_shift(w_deep: float) -> Tuple[float, float]:
    """(mu, kappa): decay rate of chi and growth rate of rho in the tail."""
    disc = 1.0 + 4.0 * w_deep
    if disc <= 0:
        return 0.0, -0.5
    mu = math.sqrt(disc)
    return mu, 0.5 * (mu - 1.0)


def _pruefer_rhs(family: PotentialFamily, energy: float, mu: float, kappa: float) -> Callable:
    def rhs(s, y):
        rho1, th1, _, chi_hat = y
        q = float(family.coefficient(s)) - energy * math.exp(-2.0 * s)
        chi = min(max(chi_hat - mu * s, -700.0), 700.0)
        delta = 2.0 * math.atan(math.exp(chi))
        th2 = th1 + delta
        c1, s1 = math.cos(th1), math.sin(th1)
        c2, s2 = math.cos(th2), math.sin(th2)
        a = 2.0 * th1 + delta
        return [
            s1 * c1 * (1.0 + q) - s1 * s1 - kappa,
            q * c1 * c1 - s1 * c1 - s1 * s1,
            s2 * c2 * (1.0 + q) - s2 * s2 - kappa,
            mu - ((q + 1.0) * math.sin(a) + math.cos(a)),
        ]
    return rhs


def _solve_leg(rhs: Callable, s_a: float, y0: List[float], nodes: np.ndarray) -> np.ndarray:
    """States at the given nodes, all on one side of the anchor."""
    if len(nodes) == 0:
        return np.empty((4, 0))
    end = float(nodes[-1])
    if end == s_a:
        return np.tile(np.asarray(y0)[:, None], (1, len(nodes)))
    if abs(end - s_a) > Config.STIFF_SPAN:
        with LSODA_LOCK:
            solution = solve_ivp(rhs, (s_a, end), y0, method="LSODA", t_eval=nodes,
                                 rtol=Config.RTOL, atol=Config.ATOL)
    else:
        solution = solve_ivp(rhs, (s_a, end), y0, method="DOP853", t_eval=nodes,
                             rtol=Config.RTOL, atol=Config.ATOL)
    if not solution.success:
        location = float(solution.t[-1]) if len(solution.t) else s_a
        raise IntegrationError(f"integration failed: {solution.message}", location)
    return solution.y


def integrate(V: PotentialFamily, E: float, grid: QuadratureGrid,
              ic: Tuple[float, float] = (1.0, 0.0), anchor=None) -> SolutionSample:
    """Solve u'' = (V - E) u on the grid from (u, du/dt) = ic at the anchor."""
    s = grid.s_values
    s_a = float(s[0]) if anchor is None else float(as_s(anchor)[0])
    if not s[0] <= s_a <= s[-1]:
        raise ValueError(f"anchor s = {s_a!r} lies outside the grid [{s[0]!r}, {s[-1]!r}]")
    V.coefficient(s[[0, -1]])
    u0, du0 = ic
    big_u, big_us = float(u0), -math.exp(-s_a) * float(du0)
    if big_u == 0 and big_us == 0:
        raise ValueError("initial conditions must not both vanish")

    mu, kappa = _growth_shift(float(V.coefficient(s[-1])))
    rho_a = math.log(math.hypot(big_u, big_us))
    theta_a = math.atan2(big_us, big_u)
    y0 = [rho_a - kappa * s_a, theta_a, rho_a - kappa * s_a, mu * s_a]
    rhs = _pruefer_rhs(V, E, mu, kappa)

    forward = s >= s_a
    states = np.empty((4, len(s)))
    states[:, forward] = _solve_leg(rhs, s_a, y0, s[forward])
    states[:, ~forward] = _solve_leg(rhs, s_a, y0, s[~forward][::-1])[:, ::-1]

    rho1 = states[0] + kappa * s
    theta1 = states[1]
    with np.errstate(divide='ignore'):
        log_u = rho1 + np.log(np.abs(np.cos(theta1)))
        log_du = s + rho1 + np.log(np.abs(np.sin(theta1)))

    chi_hat = states[3]
    chi = chi_hat - mu * s
    log_w = states[0] + states[2] + LN2 + chi_hat - np.logaddexp(0.0, 2.0 * chi)
    drift = float(np.max(np.abs(np.expm1(log_w - (2.0 * rho_a + s_a)))))
    if drift > Config.WRONSKIAN_DRIFT:
        logger.warning(f"Wronskian drift {drift:.3g} for {V.to_dict()} at E = {E!r}")

    return SolutionSample(grid, np.sign(np.cos(theta1)), log_u, -np.sign(np.sin(theta1)),
                          log_du, energy=E, wronskian_drift=drift)


def reduce_order(psi: SolutionSample) -> SolutionSample:
    """phi = psi * integral_0^t psi^-2: the solution recessive at the endpoint."""
    s = psi.s
    if np.any(psi.sign_u[len(s) // 2:] != psi.sign_u[-1]):
        logger.warning("Solution changes sign in the tail; reduction of order is unreliable")
    log_integral, tail_share = tail_cumulative_log(s, -2.0 * psi.log_u - s)
    if tail_share > Config.TAIL_STABILITY_RTOL:
        logger.warning(f"Extrapolated tail carries {tail_share:.3g} of the reduction-of-order integral")
    log_phi = psi.log_u + log_integral
    stacked = np.stack([psi.log_du + log_integral, -psi.log_u])
    signs = np.stack([psi.sign_du * psi.sign_u, np.ones_like(s)])
    log_dphi, sign_dphi = logsumexp(stacked, axis=0, b=signs, return_sign=True)
    return SolutionSample(psi.grid, psi.sign_u, log_phi, sign_dphi * psi.sign_u, log_dphi,
                          energy=psi.energy, wronskian_drift=psi.wronskian_drift)


def wronskian(u1: SolutionSample, u2: SolutionSample) -> Tuple[float, float]:
    """Mean of u1 u2' - u1' u2 over the grid and its maximal relative drift."""
    if len(u1.s) != len(u2.s) or not np.allclose(u1.s, u2.s, rtol=0, atol=0):
        raise ValueError("Wronskian needs both solutions on a common grid")
    if u1.energy != u2.energy:
        raise ValueError(f"Wronskian needs a common energy, got {u1.energy!r} and {u2.energy!r}")
    with np.errstate(over='ignore'):
        first = u1.sign_u * u2.sign_du * np.exp(u1.log_u + u2.log_du)
        second = u1.sign_du * u2.sign_u * np.exp(u1.log_du + u2.log_u)
    values = first - second
    mean = float(np.mean(values))
    if mean == 0:
        return 0.0, float(np.max(np.abs(values)))
    return mean, float(np.max(np.abs(values - mean)) / abs(mean))


# ---------------------------------------------------------------------------
# Tail fits and the L^2 decision
# ---------------------------------------------------------------------------

def tail_exponent(u: SolutionSample, log_depth: int = 2,
                  window: float = Config.TAIL_WINDOW) -> TailFit:
    """Fit ln|u| = -sigma s + sum gamma_k ln_k(s) + const on the deepest quarter."""
    n = len(u.s)
    start = int(math.floor(n * (1.0 - window)))
    s = u.s[start:]
    y = u.log_u[start:]
    finite = np.isfinite(y)
    s, y = s[finite], y[finite]
    if len(s) < Config.MIN_TAIL_SAMPLES:
        raise InsufficientDataError(
            f"need {Config.MIN_TAIL_SAMPLES} finite samples in the tail window, got {len(s)}"
        )
    columns = [-s]
    for k in range(1, log_depth + 1):
        # ln_k needs ln_{k-1}(s) > 0, i.e. s > e_{k-2}
        edge = 0.0 if k == 1 else TOWER[k - 2]
        if s[0] <= edge:
            logger.debug(f"Tail window starts at s = {s[0]:.6g}; fitting {k - 1} log levels")
            break
        columns.append(np.asarray(lnk(k, s)))
    columns.append(np.ones_like(s))
    design = np.column_stack(columns)
    scale = np.max(np.abs(design), axis=0)
    coef, _, _, _ = np.linalg.lstsq(design / scale, y, rcond=None)
    coef = coef / scale
    fitted = design @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    residual = math.sqrt(ss_res / len(s))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return TailFit(
        sigma=float(coef[0]),
        log_corrections=[float(value) for value in coef[1:-1]],
        r_squared=r_squared,
        residual=residual,
        poor_fit=residual > Config.TAIL_FIT_RESIDUAL,
        window=(float(s[0]), float(s[-1])),
    )


def square_integrability(fit: TailFit) -> Integrability:
    """Lexicographic L^2 call over (sigma, gamma_1, gamma_2, ...).

    |u|^2 is integrable iff the first non-tied level of sigma + 1/2,
    -(gamma_1 + 1/2), -(gamma_2 + 1/2), ... is positive.
    """
    levels = [fit.sigma + 0.5] + [-(gamma + 0.5) for gamma in fit.log_corrections]
    quality = max(0.0, min(1.0, fit.r_squared)) * (0.5 if fit.poor_fit else 1.0)
    for level, margin in enumerate(levels):
        tie = Config.SIGMA_TIE if level == 0 else Config.LOG_TIE
        band = Config.SIGMA_BAND if level == 0 else Config.LOG_BAND
        last = level == len(levels) - 1
        if abs(margin) <= tie and not last:
            continue
        if abs(margin) < band:
            return Integrability(None, True, margin > 0, level, margin, 0.5 * abs(margin) / band * quality)
        confidence = min(1.0, abs(margin) / (2.0 * band)) * quality
        return Integrability(margin > 0, False, margin > 0, level, margin, confidence)
    raise AssertionError("unreachable")


def _classify_at(V: PotentialFamily, E: float, grid: QuadratureGrid, depth: int,
                 endpoint: str) -> EndpointClassification:
    dominant = integrate(V, E, grid, ic=(1.0, 0.0))
    recessive = reduce_order(dominant)
    dom_fit = tail_exponent(dominant, depth)
    rec_fit = tail_exponent(recessive, depth)
    dom = square_integrability(dom_fit)
    rec = square_integrability(rec_fit)

    diagnostics = []
    for label, fit in (("dominant", dom_fit), ("recessive", rec_fit)):
        if fit.poor_fit:
            diagnostics.append(f"{label} tail fit residual {fit.residual:.3g}")
    if dominant.wronskian_drift > Config.WRONSKIAN_DRIFT:
        diagnostics.append(f"Wronskian drift {dominant.wronskian_drift:.3g}")

    if dom.borderline or rec.borderline:
        verdict = Verdict.BORDERLINE
    elif dom.square_integrable and rec.square_integrable:
        verdict = Verdict.LIMIT_CIRCLE
    else:
        verdict = Verdict.LIMIT_POINT

    return EndpointClassification(
        endpoint=endpoint,
        verdict=verdict,
        sigma_dominant=dom_fit.sigma,
        sigma_recessive=rec_fit.sigma,
        log_corrections={"dominant": dom_fit.log_corrections, "recessive": rec_fit.log_corrections},
        confidence=min(dom.confidence, rec.confidence),
        energies=[E],
        leans_limit_circle=dom.leans_l2 and rec.leans_l2,
        wronskian_drift=dominant.wronskian_drift,
        diagnostics=diagnostics,
    )


def classify_endpoint(V, endpoint: str = "left", energies: Sequence[float] = (0.0,),
                      grid: Optional[QuadratureGrid] = None, log_depth: Optional[int] = None,
                      workers: int = 1) -> EndpointClassification:
    """Limit point / limit circle verdict at one endpoint, required to agree across energies."""
    endpoint = Endpoint(endpoint).value
    if isinstance(V, TwoSided):
        V = V.near_endpoint(endpoint)
    if not energies:
        raise ValueError("need at least one energy")
    grid = grid if grid is not None else default_grid(V, endpoint)
    depth = log_depth if log_depth is not None else V.ladder_depth

    results: Dict[float, EndpointClassification] = {}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_energy = {executor.submit(_classify_at, V, E, grid, depth, endpoint): E
                            for E in energies}
        for future in as_completed(future_to_energy):
            results[future_to_energy[future]] = future.result()

    ordered = [results[E] for E in energies]
    combined = ordered[0]
    combined.energies = list(energies)
    combined.wronskian_drift = max(result.wronskian_drift for result in ordered)
    verdicts = {result.verdict for result in ordered}
    if len(verdicts) > 1:
        rendered = ", ".join(f"E={E!r}: {result.verdict.value}" for E, result in zip(energies, ordered))
        combined.diagnostics.append(f"verdict depends on energy ({rendered})")
        logger.warning(f"{V.to_dict()}: verdict depends on energy ({rendered})")
        combined.verdict = Verdict.BORDERLINE
    logger.debug(f"{V.to_dict()} at {endpoint}: {combined.verdict.value}, "
                 f"sigma = ({combined.sigma_dominant:.6g}, {combined.sigma_recessive:.6g})")
    return combined


def esa_verdict(V_left: PotentialFamily, V_right: Optional[PotentialFamily] = None,
                energies: Sequence[float] = (0.0,), workers: int = 1) -> EsaVerdict:
    """Essential self-adjointness on an interval from its two endpoint verdicts.

    V_right = None marks the far end as an interior point needing no condition.
    """
    classifications = [classify_endpoint(V_left, "left", energies, workers=workers)]
    if V_right is not None:
        classifications.append(classify_endpoint(V_right, "right", energies, workers=workers))
    return combine_endpoints(classifications)


def combine_endpoints(classifications: Sequence[EndpointClassification]) -> EsaVerdict:
    """Limit point at every singular endpoint is essential self-adjointness."""
    if not classifications:
        raise ValueError("need at least one endpoint classification")
    verdicts = [result.verdict for result in classifications]
    if Verdict.BORDERLINE in verdicts:
        return EsaVerdict.BORDERLINE
    if all(verdict == Verdict.LIMIT_POINT for verdict in verdicts):
        return EsaVerdict.ESSENTIALLY_SELF_ADJOINT
    return EsaVerdict.NOT


# ---------------------------------------------------------------------------
# Threshold sweeps
# ---------------------------------------------------------------------------

def _lean_label(sample: SweepSample) -> str:
    return "LC-side" if sample.leans_limit_circle else "LP-side"


def _check_monotone(samples: Dict[float, SweepSample]) -> None:
    ordered = [samples[param] for param in sorted(samples)]
    changes = [i for i in range(1, len(ordered))
               if ordered[i].leans_limit_circle != ordered[i - 1].leans_limit_circle]
    if len(changes) > 1:
        i = changes[1]
        triple = [(ordered[j].param, _lean_label(ordered[j])) for j in (i - 2, i - 1, i)]
        raise NonMonotoneError(triple)


def threshold_sweep(family: Callable[[float], PotentialFamily], c_range: Tuple[float, float],
                    tol: float = Config.SWEEP_TOLERANCE, energies: Sequence[float] = (0.0,),
                    scan_points: int = 0, workers: int = 1) -> ThresholdEstimate:
    """Bisect on the side of criticality each parameter leans to."""
    lo, hi = float(c_range[0]), float(c_range[1])
    if not lo < hi:
        raise ValueError(f"c_range must be increasing, got {c_range!r}")
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")

    samples: Dict[float, SweepSample] = {}

    def evaluate(param: float) -> SweepSample:
        result = classify_endpoint(family(param), energies=energies)
        return SweepSample(param, result.verdict, result.sigma_dominant, result.sigma_recessive,
                           result.confidence, result.leans_limit_circle)

    start_time = time.time()
    initial = sorted({lo, hi} | {float(v) for v in np.linspace(lo, hi, scan_points)} if scan_points else {lo, hi})
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_param = {executor.submit(evaluate, param): param for param in initial}
        for completed, future in enumerate(as_completed(future_to_param), 1):
            samples[future_to_param[future]] = future.result()
            logger.info(f"Processed {completed}/{len(initial)} scan points")
    _check_monotone(samples)

    def sample(param: float) -> SweepSample:
        if param not in samples:
            samples[param] = evaluate(param)
            _check_monotone(samples)
        return samples[param]

    if samples[lo].leans_limit_circle == samples[hi].leans_limit_circle:
        logger.info(f"No threshold in [{lo}, {hi}]: every sample is {_lean_label(samples[lo])}")
        return ThresholdEstimate(None, None, _band(samples, sample, tol), _ordered(samples))

    ordered = sorted(samples)
    for left, right in zip(ordered, ordered[1:]):
        if samples[left].leans_limit_circle != samples[right].leans_limit_circle:
            a, b = left, right
            break
    lean_a = samples[a].leans_limit_circle
    while b - a > tol:
        mid = 0.5 * (a + b)
        if sample(mid).leans_limit_circle == lean_a:
            a = mid
        else:
            b = mid
    c_hat = 0.5 * (a + b)
    band = _band(samples, sample, tol)
    logger.info(f"Threshold {c_hat:.6g} in [{a:.6g}, {b:.6g}] after {len(samples)} classifications "
                f"({time.time() - start_time:.1f}s)")
    return ThresholdEstimate(c_hat, (a, b), band, _ordered(samples))


def _ordered(samples: Dict[float, SweepSample]) -> List[SweepSample]:
    return [samples[param] for param in sorted(samples)]


def _band(samples: Dict[float, SweepSample], sample: Callable[[float], SweepSample],
          tol: float) -> Optional[Tuple[float, float]]:
    """Outer edges of the Borderline verdicts, refined to 2 tol where bracketed."""
    borderline = [param for param in sorted(samples) if samples[param].verdict == Verdict.BORDERLINE]
    if not borderline:
        return None
    low, high = borderline[0], borderline[-1]
    below = [param for param in samples if param < low]
    if below:
        a, b = max(below), low
        while b - a > 2 * tol:
            mid = 0.5 * (a + b)
            if sample(mid).verdict == Verdict.BORDERLINE:
                b = mid
            else:
                a = mid
        low = b
    above = [param for param in samples if param > high]
    if above:
        a, b = high, min(above)
        while b - a > 2 * tol:
            mid = 0.5 * (a + b)
            if sample(mid).verdict == Verdict.BORDERLINE:
                a = mid
            else:
                b = mid
        high = a
    return low, high
