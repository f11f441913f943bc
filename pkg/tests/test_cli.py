import csv
import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stdout

import pytest

from config import validate_run_config
from confinement_analyzer import (FIELDNAMES, AnalysisReport, ConfinementAnalyzer, ReportGenerator,
                                  emit_report, main)
from errors import ReportError


class CommandLineTestCase(unittest.TestCase):
    """Runs main() inside a scratch directory so the log file stays out of the tree."""

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.previous = os.getcwd()
        os.chdir(self.directory.name)

    def tearDown(self):
        os.chdir(self.previous)
        self.directory.cleanup()

    def write_config(self, data, name="run.json"):
        with open(name, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        return name

    def run_main(self, *argv):
        with redirect_stdout(io.StringIO()) as out:
            status = main(list(argv))
        return status, out.getvalue()


class TestDryRun(CommandLineTestCase):
    def test_dry_run_prints_resolved_config(self):
        status, output = self.run_main("geometry", "--seed", "7", "--dry-run")
        self.assertEqual(status, 0)
        data = json.loads(output)
        self.assertEqual(data["seed"], 7)
        self.assertEqual(data["subcommand"], "geometry")

    def test_command_line_overrides_config(self):
        path = self.write_config({"subcommand": "hardy", "output": {"path": "a.csv"}, "threads": 2})
        status, output = self.run_main("hardy", "--config", path, "--out", "b.json", "--format", "json",
                                       "--dry-run")
        self.assertEqual(status, 0)
        data = json.loads(output)
        self.assertEqual(data["output"], {"path": "b.json", "format": "json"})
        self.assertEqual(data["threads"], 2)


class TestUsageErrors(CommandLineTestCase):
    def test_bad_config_exits_2(self):
        path = self.write_config({"subcommand": "hardy", "bogus": 1})
        self.assertEqual(self.run_main("hardy", "--config", path)[0], 2)

    def test_subcommand_mismatch_exits_2(self):
        path = self.write_config({"subcommand": "sigma"})
        self.assertEqual(self.run_main("hardy", "--config", path)[0], 2)

    def test_missing_config_exits_2(self):
        self.assertEqual(self.run_main("hardy", "--config", "absent.json")[0], 2)

    def test_domain_error_exits_2(self):
        path = self.write_config({"subcommand": "counterexample", "params": {"p": 0}})
        self.assertEqual(self.run_main("counterexample", "--config", path)[0], 2)


class TestHardyReport(CommandLineTestCase):
    def test_csv_report(self):
        status, output = self.run_main("hardy", "--out", "hardy.csv")
        self.assertEqual(status, 0)
        self.assertIn("No violations", output)
        with open("hardy.csv", newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        with open("hardy.csv", encoding='utf-8') as f:
            self.assertEqual(f.readline().strip(), ",".join(FIELDNAMES["hardy"]))
        self.assertEqual(len(rows), 12)
        for row in rows:
            self.assertGreaterEqual(float(row["quotient"]), 1.0)

    def test_reruns_are_byte_identical(self):
        self.run_main("hardy", "--out", "first.csv", "--no-console")
        self.run_main("hardy", "--out", "second.csv", "--no-console")
        with open("first.csv", 'rb') as a, open("second.csv", 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_sharpness_rows(self):
        path = self.write_config({"subcommand": "hardy", "params": {"functions": ["sine_pad"], "depths": [1],
                                                                    "epsilons": [0.2, 0.01]},
                                  "output": {"path": "sharp.json", "format": "json"}})
        self.assertEqual(self.run_main("hardy", "--config", path)[0], 0)
        with open("sharp.json", encoding='utf-8') as f:
            data = json.load(f)
        self.assertEqual(data["analysis_metadata"]["report_type"], "confinement_hardy")
        quotients = [row["quotient"] for row in data["results"] if row["family"] == "power_boundary"]
        self.assertAlmostEqual(quotients[0], 1.96, delta=1e-8)


class TestGeometryReport(CommandLineTestCase):
    def test_json_report(self):
        path = self.write_config({"subcommand": "geometry", "params": {"sample_count": 100},
                                  "output": {"path": "geometry.json", "format": "json"}})
        self.assertEqual(self.run_main("geometry", "--config", path, "--no-console")[0], 0)
        with open("geometry.json", encoding='utf-8') as f:
            data = json.load(f)
        self.assertEqual([row["shape"] for row in data["results"]], ["Disk", "Annulus", "Ellipse"])
        self.assertTrue(all(row["passed"] for row in data["results"]))
        self.assertEqual(data["analysis_metadata"]["violations"], [])


class TestCounterexampleReport(CommandLineTestCase):
    def test_first_order_table(self):
        path = self.write_config({"subcommand": "counterexample", "params": {"p": 1, "alpha": -0.6},
                                  "output": {"path": "ce.csv"}})
        self.assertEqual(self.run_main("counterexample", "--config", path, "--no-console")[0], 0)
        with open("ce.csv", newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 1025)
        self.assertAlmostEqual(float(rows[0]["s"]), 5.0, places=12)

    def test_summary(self):
        config = validate_run_config({"subcommand": "counterexample", "params": {"p": 2, "alpha": 0.0}})
        report = ConfinementAnalyzer(config).run()
        self.assertFalse(report.summary["psi_square_integrable"])
        self.assertAlmostEqual(report.summary["wronskian"], 1.0, delta=1e-8)
        self.assertEqual(report.violations, [])


class TestReportGenerator(CommandLineTestCase):
    def test_empty_report_is_an_error(self):
        config = validate_run_config({"subcommand": "hardy", "output": {"path": "x.csv"}})
        self.assertRaises(ReportError, emit_report, AnalysisReport("hardy", []), config)
        self.assertRaises(ReportError, ReportGenerator.generate_csv_report, AnalysisReport("hardy", []), "x.csv")
        self.assertFalse(os.path.exists("x.csv"))

    def test_unwritable_path(self):
        report = AnalysisReport("hardy", [{"family": "sine_pad"}])
        self.assertRaises(ReportError, ReportGenerator.generate_csv_report, report,
                          os.path.join("missing", "dir", "x.csv"))

    def test_cell_formatting(self):
        self.assertEqual(ReportGenerator.format_cell(None), '')
        self.assertEqual(ReportGenerator.format_cell(True), 'True')
        self.assertEqual(ReportGenerator.format_cell(0.1), '0.10000000000000001')
        self.assertEqual(ReportGenerator.format_cell({"b": 1, "a": 2}), '{"a": 2, "b": 1}')
        self.assertEqual(ReportGenerator.format_cell(3), 3)


@pytest.mark.slow
class TestSlowSubcommands(CommandLineTestCase):
    def test_classify(self):
        path = self.write_config({"subcommand": "classify", "potential": {"variant": "PowerCritical", "c": 1.0},
                                  "output": {"path": "classify.json", "format": "json"}})
        self.assertEqual(self.run_main("classify", "--config", path)[0], 0)
        with open("classify.json", encoding='utf-8') as f:
            data = json.load(f)
        self.assertEqual(data["results"][0]["verdict"], "LimitPoint")
        self.assertIn("dominant", data["results"][0]["sigma"])

    def test_two_sided_classify(self):
        config = validate_run_config({"subcommand": "classify", "potential": {
            "variant": "TwoSided", "left": {"variant": "PowerCritical", "c": 0.75},
            "right": {"variant": "PowerCritical", "c": 0.75}}})
        report = ConfinementAnalyzer(config).run()
        self.assertEqual([row["endpoint"] for row in report.rows], ["left", "right"])
        self.assertEqual(report.summary["esa"], "EssentiallySelfAdjoint")

    def test_log_hierarchy_sweep(self):
        path = self.write_config({"subcommand": "sweep",
                                  "potential": {"variant": "LogHierarchy", "p": 2, "c": 1.0},
                                  "tolerances": {"sweep": 0.02}, "threads": 2,
                                  "params": {"c_range": [0.5, 1.5]}, "output": {"path": "sweep.csv"}})
        self.assertEqual(self.run_main("sweep", "--config", path, "--no-console")[0], 0)
        with open("sweep.csv", newline='', encoding='utf-8') as f:
            rows = list(csv.DictReader(f))
        threshold = [row for row in rows if row["verdict"] == "Threshold"]
        self.assertEqual(len(threshold), 1)
        self.assertAlmostEqual(float(threshold[0]["param"]), 1.0, delta=0.05)

    def test_sigma(self):
        config = validate_run_config({"subcommand": "sigma", "params": {"g": {"kind": "log_power", "a": 1.0}}})
        report = ConfinementAnalyzer(config).run()
        self.assertEqual([row["verdict"] for row in report.rows], ["Divergent", "Divergent"])

    def test_agmon(self):
        config = validate_run_config({"subcommand": "agmon"})
        report = ConfinementAnalyzer(config).run()
        self.assertEqual(len(report.rows), report.summary["n_max"] + 1)
        self.assertGreaterEqual(len(report.rows), 3)
        self.assertGreaterEqual(report.rows[-1]["rho_n"], 4e-3)
        self.assertEqual(report.violations, [])

    def test_agmon_second_order_weight(self):
        config = validate_run_config({"subcommand": "agmon", "threads": 2,
                                      "params": {"g": {"kind": "hierarchy", "p": 2, "d_omega": 0.5}}})
        report = ConfinementAnalyzer(config).run()
        self.assertGreaterEqual(len(report.rows), 3)
        self.assertTrue(all(row["ratio"] > 0 for row in report.rows))
        self.assertEqual(report.violations, [])
