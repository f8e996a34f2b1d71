import threading
import unittest
from concurrent.futures import ThreadPoolExecutor
from unittest.mock import MagicMock

from pyqebd.core.util import concurrent_map


class ConcurrentMapTestCase(unittest.TestCase):
    def test_serial_when_one_worker(self):
        executor = MagicMock()
        out = concurrent_map(lambda x: x * 2, [1, 2, 3], executor, max_workers=1)
        self.assertEqual(out, [2, 4, 6])
        executor.assert_not_called()

    def test_keeps_input_order(self):
        release = threading.Event()

        def slow_first(x):
            if x == 0:
                release.wait(5)
            else:
                release.set()
            return x

        out = concurrent_map(slow_first, range(4), ThreadPoolExecutor, max_workers=4)
        self.assertEqual(out, [0, 1, 2, 3])

    def test_custom_executor(self):
        calls = []

        class Recording(ThreadPoolExecutor):
            def __init__(self, max_workers=None):
                calls.append(max_workers)
                super().__init__(max_workers=max_workers)

        out = concurrent_map(str, [1, 2], Recording, max_workers=3)
        self.assertEqual(out, ["1", "2"])
        self.assertEqual(calls, [3])

    def test_errors_propagate(self):
        def fail(x):
            raise RuntimeError(x)

        with self.assertRaises(RuntimeError):
            concurrent_map(fail, [1, 2], ThreadPoolExecutor, max_workers=2)
