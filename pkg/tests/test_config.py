import json
import os
import tempfile
import unittest

from config import RunConfig, load_run_config, validate_run_config
from errors import ConfigError


class TestValidateRunConfig(unittest.TestCase):
    def assertPointer(self, data, pointer):
        with self.assertRaises(ConfigError) as caught:
            validate_run_config(data)
        self.assertEqual(caught.exception.pointer, pointer)

    def test_minimal_config_gets_defaults(self):
        config = validate_run_config({"subcommand": "hardy"})
        self.assertIsInstance(config, RunConfig)
        self.assertEqual(config.energies, [0.0])
        self.assertEqual(config.threads, 1)
        self.assertEqual(config.output.format, "csv")
        self.assertIsNone(config.output.path)

    def test_full_config(self):
        config = validate_run_config({
            "subcommand": "classify",
            "potential": {"variant": "PowerCritical", "c": 0.75},
            "grid": {"s_min": 2, "s_max": 1e5, "nodes": 1025},
            "tolerances": {"sweep": 0.005},
            "output": {"path": "out.json", "format": "json"},
            "seed": 3,
            "threads": 4,
            "energies": [0, 1.5],
            "params": {"endpoint": "right"},
        })
        self.assertEqual(config.grid.s_min, 2.0)
        self.assertEqual(config.grid.nodes, 1025)
        self.assertEqual(config.energies, [0.0, 1.5])
        self.assertEqual(config.to_dict()["output"], {"path": "out.json", "format": "json"})

    def test_pointers(self):
        self.assertPointer({"subcommand": "hardy", "extra": 1}, "/extra")
        self.assertPointer({"subcommand": "plot"}, "/subcommand")
        self.assertPointer({"subcommand": "classify", "potential": {"c": 1}}, "/potential/variant")
        self.assertPointer({"subcommand": "hardy", "grid": {"s_min": 5, "s_max": 2}}, "/grid/s_max")
        self.assertPointer({"subcommand": "hardy", "grid": {"nodes": 10}}, "/grid/nodes")
        self.assertPointer({"subcommand": "hardy", "grid": {"step": 0.1}}, "/grid/step")
        self.assertPointer({"subcommand": "hardy", "tolerances": {"identity": -1}}, "/tolerances/identity")
        self.assertPointer({"subcommand": "hardy", "output": {"format": "xml"}}, "/output/format")
        self.assertPointer({"subcommand": "hardy", "seed": True}, "/seed")
        self.assertPointer({"subcommand": "hardy", "threads": 0}, "/threads")
        self.assertPointer({"subcommand": "hardy", "energies": [0, "high"]}, "/energies/1")
        self.assertPointer({"subcommand": "hardy", "energies": []}, "/energies")
        self.assertPointer({"subcommand": "hardy", "params": []}, "/params")
        self.assertPointer([], "")

    def test_config_error_is_value_error(self):
        self.assertRaises(ValueError, validate_run_config, {"subcommand": None})


class TestLoadRunConfig(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def write(self, name, text):
        path = os.path.join(self.directory.name, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def test_round_trip(self):
        path = self.write("run.json", json.dumps({"subcommand": "sigma", "params": {"N": 512}}))
        self.assertEqual(validate_run_config(load_run_config(path)).params, {"N": 512})

    def test_missing_file(self):
        self.assertRaises(ConfigError, load_run_config, os.path.join(self.directory.name, "absent.json"))

    def test_invalid_json(self):
        self.assertRaises(ConfigError, load_run_config, self.write("bad.json", "{subcommand: hardy"))

    def test_top_level_must_be_object(self):
        self.assertRaises(ConfigError, load_run_config, self.write("list.json", "[1, 2]"))
