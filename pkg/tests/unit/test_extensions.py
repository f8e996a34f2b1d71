import unittest

import numpy as np

import pyqebd
from pyqebd.core.errors import CompatibilityError
from pyqebd.core.extension import Extension, kernel_matrix


def close(u_i, u_j):
    return float(abs(u_i - u_j) <= 1)


def ahead(u_i, u_j):
    return float(u_i < u_j)


class DistanceExtension(Extension):
    name = "distance"
    kernels = {"close": close}


class OrderExtension(Extension):
    name = "order"
    kernels = {"ahead": ahead}


class ExtensionRegistrationTestCase(unittest.TestCase):
    def test_kernel_registry_built(self):
        qe = pyqebd.api(extensions=[DistanceExtension, OrderExtension])
        self.assertIn("distance", qe._extensions)
        self.assertIn("close", qe.kernels)
        self.assertIn("equal", qe.kernels)
        self.assertIs(qe.kernel("close"), close)

    def test_missing_name_raises(self):
        class BadExtension:
            kernels = {"close": close}

        with self.assertRaises(ValueError):
            pyqebd.api(extensions=[BadExtension])

    def test_duplicate_name_raises(self):
        class OtherDistanceExtension(Extension):
            name = "distance"
            kernels = {}

        with self.assertRaisesRegex(ValueError, "Duplicate extension"):
            pyqebd.api(extensions=[DistanceExtension, OtherDistanceExtension])

    def test_duplicate_kernel_raises(self):
        class AlsoClose(Extension):
            name = "also"
            kernels = {"close": close}

        with self.assertRaisesRegex(ValueError, "Duplicate kernel"):
            pyqebd.api(extensions=[DistanceExtension, AlsoClose])

    def test_builtin_kernel_can_be_overridden(self):
        class Override(Extension):
            name = "override"
            kernels = {"equal": close}

        self.assertIs(pyqebd.api(extensions=[Override]).kernel("equal"), close)
        self.assertIsNot(pyqebd.api().kernel("equal"), close)

    def test_instances_accepted(self):
        qe = pyqebd.api(extensions=[DistanceExtension()])
        self.assertIs(qe.kernel("close"), close)

    def test_unknown_kernel(self):
        with self.assertRaises(KeyError):
            pyqebd.api().kernel("close")


class KernelMatrixTestCase(unittest.TestCase):
    def test_registered_kernel(self):
        qe = pyqebd.api(extensions=[DistanceExtension])
        W = kernel_matrix([1, 2, 4], qe.kernel("close"))
        np.testing.assert_array_equal(W, [[0, 1, 0], [1, 0, 0], [0, 0, 0]])

    def test_asymmetric_kernel_refused(self):
        with self.assertRaises(CompatibilityError):
            kernel_matrix([1, 2, 3], ahead)

    def test_vector_characteristics(self):
        W = kernel_matrix([(1, 2), (1, 2), (2, 1)], pyqebd.api().kernel("equal"))
        np.testing.assert_array_equal(W, [[0, 1, 0], [1, 0, 0], [0, 0, 0]])

    def test_kernels_from_characteristics(self):
        W = pyqebd.api().kernels_from_characteristics([[1, 1, 2], [3, 1, 3]], "discrete")
        np.testing.assert_array_equal(W[0], [[0, 0, 1], [0, 0, 1], [1, 1, 0]])
        np.testing.assert_array_equal(W[1], [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
