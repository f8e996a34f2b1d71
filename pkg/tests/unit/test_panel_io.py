import os
import tempfile
import unittest

import numpy as np

from pyqebd.core.errors import DimensionError, PanelFileError
from pyqebd.core.exact import make_rng
from pyqebd.core.model import BinaryPanel
from pyqebd.core.panel_io import (
    design_covariates,
    read_characteristics,
    read_panel,
    write_characteristics,
    write_panel,
)


class PanelFileTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def write_text(self, name, text):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path


class ReadWideTestCase(PanelFileTestCase):
    def test_responses_and_covariates(self):
        path = self.write_text(
            "wide.csv",
            "cluster,a,b,dose@,x@a,x@b\n"
            "1,1,0,2.5,0.1,0.2\n"
            "2,0,1,3.5,0.3,0.4\n",
        )
        data = read_panel(path)
        self.assertEqual(data.panel.node_names, ("a", "b"))
        np.testing.assert_array_equal(data.panel.y, [[1, 0], [0, 1]])
        self.assertEqual(data.covariate_names, ("dose", "x"))
        np.testing.assert_array_equal(data.covariates[:, :, 0], [[2.5, 2.5], [3.5, 3.5]])
        np.testing.assert_array_equal(data.covariates[:, :, 1], [[0.1, 0.2], [0.3, 0.4]])

    def test_non_binary_response(self):
        path = self.write_text("bad.csv", "a,b\n1,0\n0,2\n")
        with self.assertRaises(PanelFileError) as context:
            read_panel(path)
        self.assertEqual(context.exception.line, 3)
        self.assertEqual(context.exception.column, "b")

    def test_non_numeric_covariate(self):
        path = self.write_text("bad.csv", "a,b,dose@\n1,0,2\n0,1,high\n")
        with self.assertRaises(PanelFileError) as context:
            read_panel(path)
        self.assertEqual((context.exception.line, context.exception.column), (3, "dose@"))

    def test_partial_covariate(self):
        path = self.write_text("bad.csv", "a,b,x@a\n1,0,2\n")
        with self.assertRaises(PanelFileError):
            read_panel(path)

    def test_empty_and_missing_files(self):
        with self.assertRaises(PanelFileError):
            read_panel(self.write_text("empty.csv", ""))
        with self.assertRaises(PanelFileError):
            read_panel(self.path("missing.csv"))

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            read_panel(self.path("x.csv"), format="tall")


class ReadLongTestCase(PanelFileTestCase):
    def test_same_panel_as_wide(self):
        y = make_rng(0).integers(0, 2, size=(6, 3))
        covariates = make_rng(1).normal(size=(6, 3, 1))
        panel = BinaryPanel(y)
        write_panel(self.path("w.csv"), panel, covariates, ("x",), format="wide")
        write_panel(self.path("l.csv"), panel, covariates, ("x",), format="long")
        wide = read_panel(self.path("w.csv"), format="wide")
        long = read_panel(self.path("l.csv"), format="long")
        np.testing.assert_array_equal(wide.panel.y, long.panel.y)
        self.assertEqual(wide.panel.node_names, long.panel.node_names)
        np.testing.assert_array_equal(wide.covariates, long.covariates)
        np.testing.assert_array_equal(wide.covariates, covariates)

    def test_duplicate_node(self):
        path = self.write_text(
            "dup.csv", "cluster,node,y\n1,a,1\n1,a,0\n1,b,1\n"
        )
        with self.assertRaises(PanelFileError) as context:
            read_panel(path, format="long")
        self.assertEqual((context.exception.line, context.exception.column), (3, "node"))

    def test_incomplete_cluster(self):
        path = self.write_text(
            "short.csv", "cluster,node,y\n1,a,1\n1,b,0\n2,a,1\n"
        )
        with self.assertRaises(PanelFileError) as context:
            read_panel(path, format="long")
        self.assertEqual(context.exception.line, 4)

    def test_missing_columns(self):
        path = self.write_text("cols.csv", "cluster,y\n1,1\n")
        with self.assertRaises(PanelFileError) as context:
            read_panel(path, format="long")
        self.assertEqual(context.exception.column, "node")


class WriteTestCase(PanelFileTestCase):
    def test_cluster_constant_covariate_written_once(self):
        panel = BinaryPanel([[1, 0], [0, 1]])
        write_panel(self.path("p.csv"), panel, [[1.0], [0.0]], ("S",))
        with open(self.path("p.csv")) as f:
            self.assertEqual(f.readline().strip(), "y1,y2,S@")

    def test_covariates_round_trip_exactly(self):
        panel = BinaryPanel(make_rng(2).integers(0, 2, size=(4, 3)))
        covariates = make_rng(3).normal(size=(4, 3, 2))
        write_panel(self.path("p.csv"), panel, covariates)
        data = read_panel(self.path("p.csv"))
        self.assertEqual(data.covariate_names, ("x1", "x2"))
        np.testing.assert_array_equal(data.covariates, covariates)


class DesignCovariatesTestCase(PanelFileTestCase):
    def test_intercept_file_covariates_and_time(self):
        path = self.write_text("p.csv", "t1,t2,t3,S@\n1,0,1,1\n0,0,1,0\n")
        X, names = design_covariates(read_panel(path), time_start=7)
        self.assertEqual(names, ("intercept", "S", "time"))
        np.testing.assert_array_equal(X[1, :, 0], 1.0)
        np.testing.assert_array_equal(X[0, :, 1], 1.0)
        np.testing.assert_array_equal(X[0, :, 2], [7, 8, 9])

    def test_nothing_to_fit(self):
        path = self.write_text("p.csv", "a,b\n1,0\n")
        with self.assertRaises(DimensionError):
            design_covariates(read_panel(path), intercept=False)


class CharacteristicsTestCase(PanelFileTestCase):
    def test_round_trip(self):
        U = np.array([[1, 2, 2], [3, 3, 1]])
        write_characteristics(self.path("u.csv"), U, ("a", "b", "c"))
        names, read = read_characteristics(self.path("u.csv"), ("a", "b", "c"))
        self.assertEqual(names, ("gamma1", "gamma2"))
        np.testing.assert_array_equal(read, U)

    def test_missing_node(self):
        path = self.write_text("u.csv", "kernel,a,b\ng,1,2\n")
        with self.assertRaises(PanelFileError) as context:
            read_characteristics(path, ("a", "b", "c"))
        self.assertEqual(context.exception.column, "c")
