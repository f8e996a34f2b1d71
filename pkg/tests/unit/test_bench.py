import unittest

import numpy as np

from pyqebd.core.errors import DimensionError, EnumerationLimitError
from pyqebd.core.model import theta_to_matrix
from pyqebd.sim.bench import bench_params, bench_timing


class BenchParamsTestCase(unittest.TestCase):
    def test_chain_interactions(self):
        params = bench_params(4)
        np.testing.assert_allclose(params.beta, [-1.5, -0.5, 0.5, 1.5])
        Theta = theta_to_matrix(params.theta, 4)
        self.assertEqual(Theta[0, 1], -0.4)
        self.assertEqual(Theta[2, 3], -0.4)
        self.assertEqual(Theta[0, 2], 0.0)


class BenchTimingTestCase(unittest.TestCase):
    def test_rows(self):
        result = bench_timing([3, 4], n=50, repeats=1)
        self.assertEqual([row[0] for row in result.rows], [3, 4])
        for m, mle, gee, ratio in result.rows:
            self.assertGreater(mle, 0.0)
            self.assertGreater(gee, 0.0)
            self.assertAlmostEqual(ratio, mle / gee)
        self.assertEqual(result.ratio(4), result.rows[1][3])
        self.assertIn("median of 1 fits", result.to_text())
        self.assertEqual(
            list(result.to_frame().columns), ["m", "mle_seconds", "gee_ind_seconds", "ratio"]
        )

    def test_enumeration_cap(self):
        with self.assertRaises(EnumerationLimitError):
            bench_timing([25], n=10, repeats=1)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            bench_timing([3], repeats=0)
        with self.assertRaises(DimensionError):
            bench_timing([1], repeats=1)
