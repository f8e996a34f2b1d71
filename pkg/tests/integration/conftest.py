import os
from concurrent.futures import ThreadPoolExecutor

import pytest

import pyqebd
from tests.util import load_scenario

# Worker threads for the replicate pool; results do not depend on it.
WORKERS = int(os.environ.get("QEBD_WORKERS", os.cpu_count() or 1))


@pytest.fixture(scope="session")
def qe():
    return pyqebd.api(thread_pool_executor=ThreadPoolExecutor, max_workers=WORKERS)


@pytest.fixture(scope="module")
def markov_report(qe):
    return qe.replicate(load_scenario("markov_smoking"))


@pytest.fixture(scope="module")
def qebd_report(qe):
    return qe.replicate(load_scenario("qebd_m5"))
