#!/usr/bin/env python3
"""
Confinement Analyzer - batch front-end for the confining-potential toolkit.

Reads a JSON run configuration, dispatches to one of the subcommands

    classify        limit point / limit circle verdicts at singular endpoints
    sweep           threshold sweep over a one-parameter potential family
    sigma           condition (Sigma) report for a weight G
    counterexample  psi / phi / V tables for the explicit counterexamples
    hardy           Hardy and improved Hardy quotient tables
    agmon           cut-off identity and annulus-ratio reports
    geometry        distance-function checks on simple domains

and writes a deterministic CSV or JSON report. Exit status: 0 success,
1 a verified inequality or invariant was violated, 2 usage or domain error.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from agmon import BumpProfile, agmon_ratio, form_identity_check, ground_state
from config import (Config, RunConfig, SUBCOMMANDS, FORMATS, load_run_config,
                    validate_run_config)
from domains import Annulus, Disk, Ellipse, domain_from_dict, grad_norm_check
from errors import ConfigError, NonMonotoneError, ReportError, ToolkitError
from hardy import (DIAMETER, LN2, HardyRow, d_sweep, hardy_quotient, improved_quotient,
                   sharpness_probe, test_function_from_dict)
from iterlog import domain_edge
from potentials import (Counterexample, PowerCritical, TwoSided, counterexample_potential,
                        counterexample_potential_expansion, counterexample_psi_log,
                        counterexample_sample, family_from_dict, g_from_dict,
                        second_solution)
from quadrature import QuadratureGrid, SolutionSample
from sigma import sigma_report
from sturm import (classify_endpoint, combine_endpoints, default_anchor,
                   square_integrability, tail_exponent, threshold_sweep, wronskian)

logger = logging.getLogger(__name__)

LOG_FILE = 'confinement_analyzer.log'

FIELDNAMES = {
    "classify": ["endpoint", "verdict", "sigma_dominant", "sigma_recessive", "confidence"],
    "sweep": ["param", "verdict", "sigma_dominant", "sigma_recessive", "confidence"],
    "sigma": ["g", "rho0", "verdict", "n_terms", "residual", "effective_depth", "fit_start"],
    "counterexample": ["s", "log_psi", "log_phi", "w", "w_expansion", "residual"],
    "hardy": ["family", "param", "A", "D", "depth", "quotient"],
    "agmon": ["n", "rho_n", "lhs", "rhs", "ratio"],
    "geometry": ["shape", "params", "reach", "checked", "excluded", "max_deviation", "passed"],
}

DEFAULT_TOLERANCES = {
    "sweep": Config.SWEEP_TOLERANCE,
    "identity": 1e-5,
    "residual": 1e-5,
    "wronskian": Config.WRONSKIAN_DRIFT,
}


def setup_logging(verbose: bool = False):
    """Configure root logging once for a command-line run."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(LOG_FILE),
            logging.StreamHandler()
        ]
    )
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@dataclass
class AnalysisReport:
    """Rows for the CSV report, records for JSON, and the verified-invariant violations."""
    subcommand: str
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any] = field(default_factory=dict)
    violations: List[str] = field(default_factory=list)
    records: Optional[List[Dict[str, Any]]] = None

    @property
    def json_records(self) -> List[Dict[str, Any]]:
        return self.records if self.records is not None else self.rows


class ConfinementAnalyzer:
    """Runs one validated configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.tolerances = {**DEFAULT_TOLERANCES, **config.tolerances}
        self.workers = config.threads

    def run(self) -> AnalysisReport:
        handler: Callable[[], AnalysisReport] = getattr(self, f"run_{self.config.subcommand}")
        start_time = time.time()
        report = handler()
        logger.info(f"{self.config.subcommand} finished in {time.time() - start_time:.2f}s "
                    f"with {len(report.rows)} rows and {len(report.violations)} violations")
        return report

    # -- helpers -----------------------------------------------------------

    def _param(self, key: str, default: Any = None) -> Any:
        return self.config.params.get(key, default)

    def _potential(self, default: Dict[str, Any]):
        return family_from_dict(self.config.potential or default)

    def _classification_grid(self, family) -> Optional[QuadratureGrid]:
        spec = self.config.grid
        if spec.s_min is None and spec.s_max is None and spec.nodes is None:
            return None
        s_min = spec.s_min if spec.s_min is not None else default_anchor(family)
        return QuadratureGrid.stretched(s_min, spec.s_max or Config.DEEP_S,
                                        spec.nodes or Config.CLASSIFY_NODES)

    @staticmethod
    def _classification_row(result) -> Dict[str, Any]:
        return {
            "endpoint": result.endpoint,
            "verdict": result.verdict.value,
            "sigma_dominant": result.sigma_dominant,
            "sigma_recessive": result.sigma_recessive,
            "confidence": result.confidence,
        }

    # -- subcommands -------------------------------------------------------

    def run_classify(self) -> AnalysisReport:
        potential = self._potential({"variant": "PowerCritical", "c": 1.0})
        energies = self.config.energies
        if isinstance(potential, TwoSided):
            results = []
            for endpoint in ("left", "right"):
                near = potential.near_endpoint(endpoint)
                results.append(classify_endpoint(near, endpoint, energies, self._classification_grid(near),
                                                 self._param("log_depth"), self.workers))
            esa = combine_endpoints(results).value
        else:
            endpoint = self._param("endpoint", "left")
            results = [classify_endpoint(potential, endpoint, energies, self._classification_grid(potential),
                                         self._param("log_depth"), self.workers)]
            esa = None
        summary = {"potential": potential.to_dict(),
                   "diagnostics": [d for result in results for d in result.diagnostics]}
        if esa is not None:
            summary["esa"] = esa
        return AnalysisReport("classify", [self._classification_row(r) for r in results], summary,
                              records=[r.to_dict() for r in results])

    def run_sweep(self) -> AnalysisReport:
        template = self.config.potential or {"variant": "PowerCritical", "c": 0.75}
        key = self._param("param_key", "c")
        c_range = self._param("c_range", [0.5, 1.0])
        if not (isinstance(c_range, list) and len(c_range) == 2
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in c_range)):
            raise ConfigError("/params/c_range", f"expected [lo, hi], got {c_range!r}")

        def family(value: float):
            return family_from_dict({**template, key: value})

        estimate = threshold_sweep(family, (float(c_range[0]), float(c_range[1])), self.tolerances["sweep"],
                                   self.config.energies, int(self._param("scan_points", 0)), self.workers)
        rows = [{"param": sample.param, "verdict": sample.verdict.value,
                 "sigma_dominant": sample.sigma_dominant, "sigma_recessive": sample.sigma_recessive,
                 "confidence": sample.confidence} for sample in estimate.samples]
        if estimate.c_hat is not None:
            rows.append({"param": estimate.c_hat, "verdict": "Threshold", "sigma_dominant": None,
                         "sigma_recessive": None, "confidence": None})
        summary = {"c_hat": estimate.c_hat,
                   "interval": list(estimate.interval) if estimate.interval else None,
                   "band": list(estimate.band) if estimate.band else None}
        return AnalysisReport("sweep", rows, summary)

    def run_sigma(self) -> AnalysisReport:
        G = g_from_dict(self._param("g", {"kind": "log_power", "a": 1.0}))
        factors = self._param("rho0_factors", list(Config.RHO0_FACTORS))
        report = sigma_report(G, factors, int(self._param("N", Config.SERIES_TERMS)),
                              int(self._param("ladder_depth", Config.LADDER_DEPTH)), self.workers)
        rows = [{"g": report.name, "rho0": verdict.rho0, "verdict": verdict.verdict.value,
                 "n_terms": verdict.n_terms, "residual": verdict.residual,
                 "effective_depth": verdict.effective_depth, "fit_start": verdict.fit_start}
                for verdict in report.series]
        violations = []
        if not report.sigma1.passed:
            first = report.sigma1.violations[0]
            violations.append(f"(Sigma.1) {first.clause} fails at s = {first.s:.6g}")
        return AnalysisReport("sigma", rows, report.to_dict(), violations, records=[report.to_dict()])

    def run_counterexample(self) -> AnalysisReport:
        p = self._param("p", 1)
        alpha = self._param("alpha", -0.6)
        if isinstance(p, bool) or not isinstance(p, int) or p < 1:
            raise ConfigError("/params/p", f"expected an integer >= 1, got {p!r}")
        if isinstance(alpha, bool) or not isinstance(alpha, (int, float)):
            raise ConfigError("/params/alpha", f"expected a number, got {alpha!r}")
        alpha = float(alpha)
        spec = self.config.grid
        s_min = spec.s_min if spec.s_min is not None else max(5.0, 1.01 * domain_edge(p))
        grid = QuadratureGrid.uniform(s_min, spec.s_max or 40.0, spec.nodes or 1025)
        s = grid.s_values

        psi = counterexample_sample(p, alpha, grid)
        phi = second_solution(p, alpha, grid)
        w = np.asarray(counterexample_potential(p, alpha, s))
        w_expansion = np.asarray(counterexample_potential_expansion(p, alpha, s))

        h = 1e-3
        up, mid, down = (np.asarray(counterexample_psi_log(p, alpha, s + shift)) for shift in (h, 0.0, -h))
        u_s = (up - down) / (2 * h)
        u_ss = (up - 2 * mid + down) / (h * h)
        residual = np.abs(u_ss + u_s + u_s ** 2 - w) / np.maximum(np.abs(w), 1.0)

        value, drift = wronskian(psi, phi)
        deep = QuadratureGrid.stretched(Counterexample(p, alpha).s_floor + 1.0, Config.DEEP_S, Config.CLASSIFY_NODES)
        call = square_integrability(tail_exponent(counterexample_sample(p, alpha, deep), p))

        rows = [{"s": float(s[i]), "log_psi": float(psi.log_u[i]), "log_phi": float(phi.log_u[i]),
                 "w": float(w[i]), "w_expansion": float(w_expansion[i]), "residual": float(residual[i])}
                for i in range(len(s))]
        summary = {"p": p, "alpha": alpha, "wronskian": value, "wronskian_drift": drift,
                   "max_residual": float(np.max(residual)),
                   "psi_square_integrable": alpha < -0.5,
                   "psi_square_integrable_fit": call.square_integrable}
        violations = []
        if summary["max_residual"] > self.tolerances["residual"]:
            violations.append(f"ODE residual {summary['max_residual']:.3g} exceeds {self.tolerances['residual']:g}")
        if abs(value - 1.0) > self.tolerances["wronskian"] or drift > self.tolerances["wronskian"]:
            violations.append(f"Wronskian {value!r} with drift {drift:.3g}")
        if call.square_integrable is not None and call.square_integrable != (alpha < -0.5):
            violations.append("tail fit contradicts the L^2 dichotomy at alpha = -1/2")
        return AnalysisReport("counterexample", rows, summary, violations)

    def run_hardy(self) -> AnalysisReport:
        functions = [test_function_from_dict(item, f"/params/functions/{i}") for i, item in
                     enumerate(self._param("functions", ["sine_pad",
                                                         {"kind": "power_boundary", "param": 0.05},
                                                         {"kind": "bump_product", "param": 1.0}]))]
        A = float(self._param("A", 0.0))
        D = float(self._param("D", 2.0 * DIAMETER))
        depths = [int(depth) for depth in self._param("depths", [1, 2, 3])]
        spec = self.config.grid
        grid = None
        if spec.s_max is not None or spec.nodes is not None:
            grid = QuadratureGrid.uniform(LN2, spec.s_max or Config.HARDY_S_MAX, spec.nodes or Config.HARDY_NODES)

        rows: List[HardyRow] = []
        violations = []
        for phi in functions:
            base = hardy_quotient(phi, A, grid)
            rows.append(HardyRow(phi.kind, phi.param, A, None, 0, base))
            if A == 0 and base < 1.0:
                violations.append(f"Hardy quotient {base:.6g} < 1 for {phi.to_dict()}")
            previous = base
            for depth in depths:
                quotient = improved_quotient(phi, D, depth, grid, A)
                rows.append(HardyRow(phi.kind, phi.param, A, D, depth, quotient))
                if quotient > previous * (1 + 1e-12):
                    violations.append(f"improved quotient increases at depth {depth} for {phi.to_dict()}")
                if A == 0 and quotient < 1.0:
                    violations.append(f"improved quotient {quotient:.6g} < 1 at D = {D} for {phi.to_dict()}")
                previous = quotient

        epsilons = self._param("epsilons")
        if epsilons:
            for epsilon, quotient in zip(epsilons, sharpness_probe(epsilons, A, self.workers)):
                rows.append(HardyRow("power_boundary", float(epsilon), A, None, 0, quotient))
        for value in self._param("D_values", []):
            rows.extend(d_sweep(functions[0], [value], max(depths) if depths else 1, A))
        return AnalysisReport("hardy", [row.to_dict() for row in rows], {"A": A, "D": D}, violations)

    def run_agmon(self) -> AnalysisReport:
        potential = self._potential({"variant": "TwoSided",
                                     "left": {"variant": "PowerCritical", "c": 0.75},
                                     "right": {"variant": "PowerCritical", "c": 0.75}})
        rho = float(self._param("rho", 1e-3))
        pair = ground_state(potential, rho, rho, int(self._param("index", 0)))
        G = g_from_dict(self._param("g", {"kind": "hierarchy", "p": 1, "d_omega": 0.5}))
        rho0 = float(self._param("rho0", 0.5 * G.d0))
        n_max = self._param("n_max")
        ratio = agmon_ratio(pair, G, rho0, None if n_max is None else int(n_max), self.workers,
                            int(self._param("subdivisions", 1)), float(self._param("epsrel", Config.AGMON_EPSREL)))

        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 4001)
        inverse_root = grid.t_values ** -0.5
        psi = SolutionSample.from_values(grid, inverse_root, -0.5 * inverse_root ** 3)
        errors = {"power": form_identity_check(PowerCritical(0.75), 0.0, psi, BumpProfile.on(0.1, 0.9))}
        deep = QuadratureGrid.uniform(-math.log(0.06), -math.log(0.005), 4001)
        errors["counterexample"] = form_identity_check(Counterexample(2, -0.6), 0.0,
                                                       counterexample_sample(2, -0.6, deep),
                                                       BumpProfile.on(0.01, 0.05))
        violations = [f"cut-off identity error {error:.3g} for the {name} solution"
                      for name, error in errors.items() if error > self.tolerances["identity"]]
        if not math.isfinite(ratio.sup_ratio):
            violations.append("Agmon sup ratio is not finite")
        summary = {"eigenpair": pair.to_dict(), "g": G.to_dict(), "rho0": rho0,
                   "n_max": len(ratio.ratios) - 1, "sup_ratio": ratio.sup_ratio, "identity_errors": errors}
        return AnalysisReport("agmon", ratio.rows(), summary, violations)

    def run_geometry(self) -> AnalysisReport:
        items = self._param("domains")
        domains = ([domain_from_dict(item, f"/params/domains/{i}") for i, item in enumerate(items)]
                   if items else [Disk(1.0), Annulus(1.0, 2.0), Ellipse(2.0, 1.0)])
        samples = int(self._param("sample_count", 1000))
        reports = [grad_norm_check(dom, samples, self.config.seed) for dom in domains]
        violations = [f"{report.shape}: {len(report.violators)} samples with |grad d| != 1"
                      for report in reports if not report.passed]
        return AnalysisReport("geometry", [report.to_dict() for report in reports], {}, violations)


class ReportGenerator:
    """Console, JSON and CSV output for analysis reports."""

    @staticmethod
    def format_cell(value: Any) -> Any:
        if value is None:
            return ''
        if isinstance(value, bool):
            return str(value)
        if isinstance(value, float):
            return format(value, '.17g')
        if isinstance(value, (dict, list)):
            return json.dumps(value, sort_keys=True)
        return value

    @staticmethod
    def generate_console_report(report: AnalysisReport, limit: int = 20):
        """Print a summary of the report."""
        print("=" * 100)
        print(f"CONFINEMENT ANALYSIS: {report.subcommand.upper()}")
        print("=" * 100)
        for key, value in report.summary.items():
            if not isinstance(value, (dict, list)):
                print(f"{key + ':':<40} {value}")
        fieldnames = FIELDNAMES[report.subcommand]
        print("\n" + "  ".join(f"{name:>18}" for name in fieldnames))
        print("-" * 100)
        for row in report.rows[:limit]:
            print("  ".join(f"{str(ReportGenerator.format_cell(row.get(name)))[:18]:>18}" for name in fieldnames))
        if len(report.rows) > limit:
            print(f"... and {len(report.rows) - limit} more rows")
        if report.violations:
            print(f"\n❌ VIOLATIONS ({len(report.violations)}):")
            for violation in report.violations:
                print(f"   {violation}")
        else:
            print("\n✅ No violations")

    @staticmethod
    def generate_json_report(report: AnalysisReport, config: RunConfig, output_file: Union[str, Path]):
        """Write the report as JSON; no timestamps so reruns are byte-identical."""
        if not report.rows:
            raise ReportError("no results to report", str(output_file))
        output_file = Path(output_file)
        report_data = {
            "analysis_metadata": {
                "report_type": f"confinement_{report.subcommand}",
                "config": config.to_dict(),
                "violations": report.violations,
                **report.summary
            },
            "results": report.json_records
        }
        try:
            with open(output_file, 'w', encoding='utf-8') as f:
                json.dump(report_data, f, indent=2, ensure_ascii=False)
            logger.info(f"JSON report saved to: {output_file}")
        except OSError as e:
            logger.error(f"Failed to save JSON report: {str(e)}")
            raise ReportError(f"cannot write report ({e.strerror})", str(output_file))

    @staticmethod
    def generate_csv_report(report: AnalysisReport, output_file: Union[str, Path]):
        """Write the report rows with the subcommand's fixed column order."""
        if not report.rows:
            raise ReportError("no results to report", str(output_file))
        output_file = Path(output_file)
        fieldnames = FIELDNAMES[report.subcommand]
        try:
            with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
                writer = csv.DictWriter(csvfile, fieldnames=fieldnames, extrasaction='ignore')
                writer.writeheader()
                for row in report.rows:
                    writer.writerow({name: ReportGenerator.format_cell(row.get(name)) for name in fieldnames})
            logger.info(f"CSV report saved to: {output_file}")
        except OSError as e:
            logger.error(f"Failed to save CSV report: {str(e)}")
            raise ReportError(f"cannot write report ({e.strerror})", str(output_file))


def emit_report(report: AnalysisReport, config: RunConfig):
    """Write the report to the configured path in the configured format."""
    if not report.rows:
        raise ReportError("no results to report", config.output.path)
    if config.output.path is None:
        return
    if config.output.format == "json":
        ReportGenerator.generate_json_report(report, config, config.output.path)
    else:
        ReportGenerator.generate_csv_report(report, config.output.path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Confinement Analyzer - self-adjointness thresholds, Agmon and Hardy checks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Classify the endpoint of V = c/x^2 described in a config file
  python confinement_analyzer.py classify --config runs/power.json

  # Locate the threshold of a logarithmic family and write CSV
  python confinement_analyzer.py sweep --config runs/log_p2.json --out sweep.csv

  # Hardy quotient table as JSON
  python confinement_analyzer.py hardy --format json --out hardy.json

  # Show the resolved configuration without computing
  python confinement_analyzer.py geometry --seed 7 --dry-run
        """
    )
    parser.add_argument('subcommand', choices=SUBCOMMANDS, help='Analysis to run')
    parser.add_argument('--config', '-c', type=str, help='JSON run configuration')
    parser.add_argument('--out', '-o', type=str, help='Report output path (overrides the config)')
    parser.add_argument('--format', choices=FORMATS, help='Report format (overrides the config)')
    parser.add_argument('--threads', '-t', type=int, help='Worker threads for parallel sweeps')
    parser.add_argument('--seed', type=int, help='Seed for random sampling')
    parser.add_argument('--dry-run', action='store_true', help='Print the resolved configuration and exit')
    parser.add_argument('--no-console', action='store_true', help='Disable console output')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (if any) with command-line overrides, validated."""
    data = load_run_config(args.config) if args.config else {}
    if data.get("subcommand", args.subcommand) != args.subcommand:
        raise ConfigError("/subcommand", f"config is for {data['subcommand']!r}, "
                                         f"command line asks for {args.subcommand!r}")
    data = {**data, "subcommand": args.subcommand}
    output = dict(data.get("output", {})) if isinstance(data.get("output", {}), dict) else data["output"]
    if isinstance(output, dict):
        if args.out is not None:
            output["path"] = args.out
        if args.format is not None:
            output["format"] = args.format
        data["output"] = output
    if args.threads is not None:
        data["threads"] = args.threads
    if args.seed is not None:
        data["seed"] = args.seed
    return validate_run_config(data)


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point; returns the exit status."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = resolve_config(args)
        if args.dry_run:
            print(json.dumps(config.to_dict(), indent=2))
            return 0

        report = ConfinementAnalyzer(config).run()
        emit_report(report, config)
        if not args.no_console:
            ReportGenerator.generate_console_report(report)

        if report.violations:
            logger.warning(f"{len(report.violations)} verified invariants violated")
            return 1
        return 0

    except NonMonotoneError as e:
        logger.error(str(e))
        return 1
    except (ConfigError, ReportError, ValueError, ToolkitError) as e:
        logger.error(str(e))
        return 2
    except KeyboardInterrupt:
        logger.info("Analysis interrupted by user")
        return 1
    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
