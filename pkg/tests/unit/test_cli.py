import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest.mock import patch

from pyqebd.cli import EXIT_ERROR, EXIT_OK, main
from pyqebd.core.exact import exact_sampler
from pyqebd.core.panel_io import write_panel
from tests.util import qebd5_params


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def write_scenario(self, name, **data):
        data.setdefault("name", name)
        path = self.path(name + ".json")
        with open(path, "w") as f:
            json.dump(data, f)
        return path

    def read(self, path):
        with open(path, "rb") as f:
            return f.read()


class FitCommandTestCase(CliTestCase):
    def setUp(self):
        super().setUp()
        self.panel_path = self.path("panel.csv")
        write_panel(self.panel_path, exact_sampler(qebd5_params(), 200, seed=9))

    def test_fit_writes_outputs(self):
        code, out, _ = run(["fit", self.panel_path, "--corr", "exc", "--out", self.path("fit")])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("y1:y2", out)
        payload = json.loads(self.read(self.path("fit.json")))
        self.assertEqual(payload["fit"]["corr"], "exchangeable")
        self.assertEqual(payload["metadata"]["tool"], "pyqebd")
        self.assertEqual(self.read(self.path("fit.txt")).decode(), out)

    def test_fit_is_reproducible(self):
        run(["fit", self.panel_path, "--out", self.path("a")])
        run(["fit", self.panel_path, "--out", self.path("b")])
        self.assertEqual(self.read(self.path("a.json")), self.read(self.path("b.json")))

    def test_mle_estimator(self):
        code, _, _ = run(
            ["fit", self.panel_path, "--estimator", "mle", "--out", self.path("mle")]
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(json.loads(self.read(self.path("mle.json")))["fit"]["method"], "mle")

    def test_environment_default(self):
        with patch.dict(os.environ, {"QEBD_CORR": "ar1"}):
            run(["fit", self.panel_path, "--out", self.path("env")])
        self.assertEqual(json.loads(self.read(self.path("env.json")))["fit"]["corr"], "ar1")

    def test_select(self):
        code, out, _ = run(
            ["select", self.panel_path, "--out", self.path("sel")]
        )
        self.assertEqual(code, EXIT_OK)
        payload = json.loads(self.read(self.path("sel.json")))
        self.assertIn("steps", payload["trace"])

    def test_missing_file(self):
        code, _, err = run(["fit", self.path("nope.csv")])
        self.assertEqual(code, EXIT_ERROR)
        self.assertTrue(err.startswith("pyqebd: error:"))

    def test_bad_panel(self):
        path = self.path("bad.csv")
        with open(path, "w") as f:
            f.write("a,b\n1,0\n0,7\n")
        code, _, err = run(["fit", path])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("line 3", err)

    def test_linear_needs_kernels(self):
        code, _, err = run(["fit", self.panel_path, "--model", "qelr-linear"])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("--kernels", err)

    def test_version(self):
        with self.assertRaises(SystemExit) as context:
            run(["--version"])
        self.assertEqual(context.exception.code, 0)


class SimulateCommandTestCase(CliTestCase):
    def test_zero_replicates_writes_nothing(self):
        config = self.write_scenario(
            "tiny", family="qebd", truth={"beta": [0, 0], "theta": [0.5]}, n=10
        )
        code, _, _ = run(["simulate", config, "--replicates", "0", "--out", self.path("out")])
        self.assertEqual(code, EXIT_OK)
        self.assertFalse(os.path.exists(self.path("out")))

    def test_markov_round_trip(self):
        config = self.write_scenario(
            "markov",
            family="markov",
            truth={"beta": [0.4, 0.2, -0.3], "gamma": [2.0]},
            n=200,
        )
        code, _, _ = run(["simulate", config, "--replicates", "2", "--out", self.path("sim")])
        self.assertEqual(code, EXIT_OK)
        manifest = json.loads(self.read(self.path("sim", "markov_manifest.json")))
        self.assertEqual(manifest["files"], ["markov_r0000.csv", "markov_r0001.csv"])
        code, out, _ = run(
            [
                "fit",
                self.path("sim", "markov_r0000.csv"),
                "--model",
                "markov",
                "--time-start",
                "7",
                "--estimator",
                "gglm",
            ]
        )
        self.assertEqual(code, EXIT_OK)
        for name in ("intercept", "S", "time", "gamma1"):
            self.assertIn(name, out)

    def test_linear_round_trip(self):
        config = self.write_scenario(
            "linear",
            family="qelr-linear",
            truth={"beta": [-1.0, 0.5, 0.0], "gamma": [-0.5, 0.3]},
            n=100,
            m=5,
            burn_in=50,
            thin=2,
        )
        run(["simulate", config, "--replicates", "1", "--out", self.path("sim")])
        kernels = self.path("sim", "linear_r0000_kernels.csv")
        self.assertTrue(os.path.exists(kernels))
        code, out, err = run(
            [
                "fit",
                self.path("sim", "linear_r0000.csv"),
                "--model",
                "qelr-linear",
                "--kernels",
                kernels,
            ]
        )
        self.assertEqual(code, EXIT_OK, err)
        self.assertIn("gamma2", out)

    def test_simulation_is_reproducible(self):
        config = self.write_scenario(
            "tiny", family="qebd", truth={"beta": [0, 0, 0], "theta": [0.5, 0, -0.5]}, n=20
        )
        run(["simulate", config, "--replicates", "1", "--out", self.path("a")])
        run(["simulate", config, "--replicates", "1", "--out", self.path("b")])
        self.assertEqual(
            self.read(self.path("a", "tiny_r0000.csv")),
            self.read(self.path("b", "tiny_r0000.csv")),
        )

    def test_unknown_scenario_key(self):
        config = self.write_scenario(
            "bad", family="qebd", truth={"beta": [0, 0], "theta": [0]}, n=5, colour="red"
        )
        code, _, err = run(["simulate", config, "--out", self.path("x")])
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("colour", err)


class McCommandTestCase(CliTestCase):
    def test_mc_outputs(self):
        config = self.write_scenario(
            "mc",
            family="qebd",
            truth={"beta": [-0.5, 0.5], "theta": [0.4]},
            n=100,
            replicates=3,
            estimators=["mle", "gglm"],
        )
        code, out, _ = run(["--workers", "2", "mc", config, "--out", self.path("mc")])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("divergence rate", out)
        for suffix in (".csv", ".txt", ".json", ".timing.csv"):
            self.assertTrue(os.path.exists(self.path("mc" + suffix)), suffix)
        first = self.read(self.path("mc.json"))
        run(["mc", config, "--out", self.path("mc")])
        self.assertEqual(first, self.read(self.path("mc.json")))

    def test_seed_override(self):
        config = self.write_scenario(
            "mc", family="qebd", truth={"beta": [0, 0], "theta": [0]}, n=50, replicates=2
        )
        run(["--seed", "11", "mc", config, "--out", self.path("mc")])
        payload = json.loads(self.read(self.path("mc.json")))
        self.assertEqual(payload["metadata"]["seed"], 11)


class BenchCommandTestCase(CliTestCase):
    def test_bench(self):
        code, out, _ = run(
            ["bench", "--m", "3", "4", "--n", "30", "--repeats", "1", "--out", self.path("b.txt")]
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("gee_ind_seconds", out)
