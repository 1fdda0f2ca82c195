import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
for path in (ROOT, ROOT / 'utils'):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long numerical checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long numerical check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def isolated_env(tmp_path, monkeypatch):
    """LATTICEWAVE_* settings pointing at a scratch directory."""
    monkeypatch.setenv('LATTICEWAVE_OUTPUT_DIR', str(tmp_path / 'output'))
    monkeypatch.setenv('LATTICEWAVE_LOG_DIR', str(tmp_path / 'logs'))
    monkeypatch.setenv('LATTICEWAVE_THREADS', '1')
    return tmp_path
