#!/usr/bin/env python3
"""
Condition (Sigma) for a weight G.

(Sigma.1) is checked pointwise. (Sigma.2), divergence of
sum 4^-n exp(-2 G(2^-n rho0)), cannot be decided from finitely many terms;
divergence_verdict fits ln a_n against the iterated-log integral-test
ladder and reports a heuristic verdict with an Inconclusive band.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from config import Config
from errors import InsufficientDataError
from iterlog import lnk, tower_exp
from potentials import GFunction
from quadrature import QuadratureGrid

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
HEURISTIC_NOTE = "numerical model-fit heuristic against the iterated-log ladder, not a proof"


class SeriesOutcome(str, Enum):
    DIVERGENT = "Divergent"
    CONVERGENT = "Convergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Sigma1Violation:
    s: float
    clause: str
    margin: float


@dataclass
class Sigma1Report:
    passed: bool
    violations: List[Sigma1Violation] = field(default_factory=list)
    checked: int = 0


@dataclass
class SeriesTerms:
    """ln a_n for n = 1..N at s_n = n ln 2 + ln(1/rho0)."""
    n: np.ndarray
    s: np.ndarray
    log_terms: np.ndarray
    log_inv_rho0: float

    @property
    def rho0(self) -> float:
        return math.exp(-self.log_inv_rho0)

    def log_partial_sums(self) -> List[List[float]]:
        """[N, ln S_N] at N = 8, 16, ... and at the last term."""
        cumulative = np.logaddexp.accumulate(self.log_terms)
        marks = [2 ** k for k in range(3, 64) if 2 ** k < len(self.n)] + [len(self.n)]
        return [[int(N), float(cumulative[N - 1])] for N in marks]


@dataclass
class SeriesVerdict:
    verdict: SeriesOutcome
    beta: List[float]
    rho0: float
    n_terms: int
    residual: float
    effective_depth: int
    fit_start: int = 1
    partial_sums: List[List[float]] = field(default_factory=list)
    note: str = HEURISTIC_NOTE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "beta": self.beta,
            "rho0": self.rho0,
            "n_terms": self.n_terms,
            "residual": self.residual,
            "effective_depth": self.effective_depth,
            "fit_start": self.fit_start,
            "note": self.note,
        }


@dataclass
class BrusentsevReport:
    sup_estimate: Union[float, str]
    growth_exponent: float
    satisfied: bool
    log_sup: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sup_estimate": self.sup_estimate,
            "growth_exponent": self.growth_exponent,
            "satisfied": self.satisfied,
        }


@dataclass
class SigmaReport:
    name: str
    verdict: SeriesOutcome
    series: List[SeriesVerdict]
    brusentsev: BrusentsevReport
    sigma1: Sigma1Report

    def to_dict(self) -> Dict[str, Any]:
        return {
            "g": self.name,
            "verdict": self.verdict.value,
            "sigma1_passed": self.sigma1.passed,
            "series": [verdict.to_dict() for verdict in self.series],
            "brusentsev": self.brusentsev.to_dict(),
        }


def check_sigma1(G: GFunction, n_points: int = Config.SIGMA1_POINTS,
                 tolerance: float = Config.SIGMA1_TOLERANCE) -> Sigma1Report:
    """0 <= G'(t) <= 1/t on (0, d0) and G'(t) = 0 on [d0, 2 d0]."""
    if n_points < 16:
        raise ValueError(f"need at least 16 sample points, got {n_points}")
    below = G.s0 + np.geomspace(1e-6, max(50.0, G.s0), n_points)
    above = G.s0 - np.log(np.linspace(1.0, 2.0, n_points))
    violations = []

    scaled = np.asarray(G.t_gprime(below))
    for s, value in zip(below, scaled):
        if value < -tolerance:
            violations.append(Sigma1Violation(float(s), "G' < 0", float(value)))
        elif value > 1.0 + tolerance:
            violations.append(Sigma1Violation(float(s), "G' > 1/t", float(1.0 - value)))

    scaled = np.asarray(G.t_gprime(above))
    for s, value in zip(above, scaled):
        if abs(value) > tolerance:
            violations.append(Sigma1Violation(float(s), "G' != 0 for t >= d0", float(-abs(value))))

    if violations:
        logger.debug(f"{G.name}: {len(violations)} (Sigma.1) violations")
    return Sigma1Report(not violations, violations, 2 * n_points)


def dyadic_start_index(rho0: Optional[float] = None, log_inv_rho0: Optional[float] = None) -> float:
    """Index after which the ladder comparison of the series applies."""
    if log_inv_rho0 is None:
        if rho0 is None or rho0 <= 0:
            raise ValueError(f"rho0 must be positive, got {rho0!r}")
        log_inv_rho0 = -math.log(rho0)
    return log_inv_rho0 / (1.0 - LN2)


def sigma_series_terms(G: GFunction, rho0: Optional[float] = None, N: int = Config.SERIES_TERMS,
                       log_inv_rho0: Optional[float] = None) -> SeriesTerms:
    """ln a_n = -n ln 4 - 2 G(2^-n rho0), n = 1..N.

    rho0 may be passed as ln(1/rho0) when it underflows.
    """
    if log_inv_rho0 is None:
        if rho0 is None or rho0 <= 0:
            raise ValueError(f"rho0 must be positive, got {rho0!r}")
        log_inv_rho0 = -math.log(rho0)
    if log_inv_rho0 < G.s0 + LN2 - 1e-12:
        raise ValueError(f"rho0 must not exceed d0/2: ln(1/rho0) = {log_inv_rho0!r}, "
                         f"ln(2/d0) = {G.s0 + LN2!r}")
    if N < Config.MIN_SERIES_TERMS:
        raise ValueError(f"need N >= {Config.MIN_SERIES_TERMS} terms, got {N}")
    n = np.arange(1, N + 1)
    halvings = n * LN2
    s = halvings + log_inv_rho0
    # -n ln 4 = -2 n ln 2 keeps G = ln t exact
    log_terms = -2.0 * halvings - 2.0 * np.asarray(G.g(s))
    return SeriesTerms(n, s, log_terms, log_inv_rho0)


def _ladder_window(s: np.ndarray, ladder_depth: int):
    """Largest usable depth m and the mask s >= e_m where ln_m(s) >= 1."""
    for depth in range(ladder_depth, 0, -1):
        edge = tower_exp(depth).value
        if edge is None:
            continue
        mask = s >= edge
        if np.count_nonzero(mask) >= Config.MIN_FIT_TERMS:
            return depth, mask
    raise InsufficientDataError(
        f"fewer than {Config.MIN_FIT_TERMS} terms with s >= e; extend N or lower rho0"
    )


def divergence_verdict(terms: SeriesTerms, ladder_depth: int = Config.LADDER_DEPTH,
                       tol: float = Config.LADDER_TOLERANCE, margin: float = Config.LADDER_MARGIN,
                       residual_limit: float = Config.SERIES_RESIDUAL_LIMIT) -> SeriesVerdict:
    """Fit ln a_n = b0 - b1 ln s_n - b2 ln_2 s_n - ... and classify lexicographically.

    A level with |b_k - 1| <= tol defers to the next; |b_k - 1| < margin is
    Inconclusive; otherwise b_k > 1 is Convergent and b_k < 1 Divergent.
    A ladder tied at every level diverges like the comparator itself.
    """
    if len(terms.n) < Config.MIN_FIT_TERMS:
        raise InsufficientDataError(f"need at least {Config.MIN_FIT_TERMS} terms, got {len(terms.n)}")
    depth, mask = _ladder_window(terms.s, ladder_depth)
    start = dyadic_start_index(log_inv_rho0=terms.log_inv_rho0)
    settled = mask & (terms.n >= start)
    if np.count_nonzero(settled) >= Config.MIN_FIT_TERMS:
        mask = settled
    else:
        logger.debug(f"Start index {start:.4g} leaves too few terms; fitting the whole ladder window")
    s = terms.s[mask]
    y = terms.log_terms[mask]
    columns = [np.ones_like(s)]
    columns += [-np.asarray(lnk(k, s)) for k in range(1, depth + 1)]
    columns += [1.0 / s, 1.0 / (s * np.log(s))]
    design = np.column_stack(columns)
    scale = np.max(np.abs(design), axis=0)
    coef, _, _, _ = np.linalg.lstsq(design / scale, y, rcond=None)
    coef = coef / scale
    residual = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    beta = [float(value) for value in coef[:depth + 1]]

    verdict = SeriesOutcome.DIVERGENT
    for value in beta[1:]:
        gap = value - 1.0
        if abs(gap) <= tol:
            continue
        if abs(gap) < margin:
            verdict = SeriesOutcome.INCONCLUSIVE
        else:
            verdict = SeriesOutcome.CONVERGENT if gap > 0 else SeriesOutcome.DIVERGENT
        break
    if residual > residual_limit:
        logger.warning(f"Ladder fit residual {residual:.3g} exceeds {residual_limit:.3g}")
        verdict = SeriesOutcome.INCONCLUSIVE

    return SeriesVerdict(verdict, beta, terms.rho0, len(terms.n), residual, depth,
                         int(terms.n[mask][0]), terms.log_partial_sums())


def brusentsev_sup(G: GFunction, probe: Union[None, np.ndarray, QuadratureGrid] = None,
                   tol: float = Config.BRUSENTSEV_TOLERANCE) -> BrusentsevReport:
    """G'(t) exp(G(t)) on the probe and its growth against (ln 1/t)^gamma."""
    if probe is None:
        start = max(G.s0 + LN2, 1.0)
        s = np.geomspace(start, start * Config.BRUSENTSEV_SPAN, Config.BRUSENTSEV_POINTS)
    elif isinstance(probe, QuadratureGrid):
        s = probe.s_values
    else:
        s = np.asarray(probe, dtype=float)
    if np.any(s <= G.s0):
        raise ValueError(f"probe must lie in (0, d0), i.e. s > {G.s0!r}")
    if np.any(s <= 1.0):
        raise ValueError("probe needs s > 1 to fit against ln(1/t)")

    with np.errstate(divide='ignore'):
        log_q = np.log(np.asarray(G.t_gprime(s))) + s + np.asarray(G.g(s))
    finite = np.isfinite(log_q)
    deep = finite & (np.arange(len(s)) >= len(s) // 2)
    if np.count_nonzero(deep) < 2:
        raise InsufficientDataError("too few finite values for a growth fit")
    gamma = float(np.polyfit(np.log(s[deep]), log_q[deep], 1)[0])
    log_sup = float(np.max(log_q[finite])) if np.any(finite) else -math.inf
    satisfied = math.isfinite(log_sup) and gamma <= tol
    sup_estimate: Union[float, str] = math.exp(log_sup) if satisfied else "growing"
    return BrusentsevReport(sup_estimate, gamma, satisfied, log_sup)


def _combine(verdicts: Sequence[SeriesVerdict]) -> SeriesOutcome:
    outcomes = {verdict.verdict for verdict in verdicts}
    if len(outcomes) == 1:
        return outcomes.pop()
    logger.warning(f"Series verdicts disagree across rho0: {sorted(o.value for o in outcomes)}")
    return SeriesOutcome.INCONCLUSIVE


def sigma_report(G: GFunction, rho0_factors: Sequence[float] = Config.RHO0_FACTORS,
                 N: int = Config.SERIES_TERMS, ladder_depth: int = Config.LADDER_DEPTH,
                 workers: int = 1) -> SigmaReport:
    """Series verdicts at rho0 = factor * d0 for each factor, plus (Sigma.1) and Brusentsev."""
    if len(rho0_factors) < 2:
        raise ValueError("need at least two rho0 values to check agreement")
    for factor in rho0_factors:
        if not 0 < factor <= 0.5:
            raise ValueError(f"rho0 factor must lie in (0, 1/2], got {factor!r}")

    start_time = time.time()
    results: Dict[float, SeriesVerdict] = {}

    def run(factor: float) -> SeriesVerdict:
        terms = sigma_series_terms(G, N=N, log_inv_rho0=G.s0 - math.log(factor))
        return divergence_verdict(terms, ladder_depth)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        future_to_factor = {executor.submit(run, factor): factor for factor in rho0_factors}
        for future in as_completed(future_to_factor):
            factor = future_to_factor[future]
            results[factor] = future.result()
            logger.debug(f"{G.name}: rho0 = {factor:g} d0 -> {results[factor].verdict.value}")

    series = [results[factor] for factor in sorted(results, reverse=True)]
    report = SigmaReport(G.name, _combine(series), series, brusentsev_sup(G), check_sigma1(G))
    logger.info(f"{G.name}: {report.verdict.value} in {time.time() - start_time:.2f}s")
    return report
