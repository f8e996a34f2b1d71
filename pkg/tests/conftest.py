import pytest


def pytest_addoption(parser):
    """Hook on the pytest option parser setup.

    Add the opt-in switch for the slow Monte Carlo reproductions.
    """
    parser.addoption(
        "--run-integration",
        action="store_true",
        default=False,
        help=(
            "Run the desk-scale simulation reproductions under tests/integration."
            " They take several minutes."
        ),
    )


def pytest_collection_modifyitems(config, items):
    """Skip everything under tests/integration unless --run-integration is given."""
    if config.getoption("--run-integration"):
        return
    skip = pytest.mark.skip(reason="needs --run-integration")
    for item in items:
        if "integration" in item.nodeid.split("/"):
            item.add_marker(skip)
