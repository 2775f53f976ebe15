import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vpeval.backends import BridgeClient, FileTransport
from vpeval.fixtures import build_synthetic_experiment

TESTS_DIR = Path(__file__).parent
GOLDEN_DIR = TESTS_DIR / "goldens"
STUB_CMD = f"{sys.executable} {TESTS_DIR / 'stub_sidecar.py'}"


@pytest.fixture(scope="session")
def synthetic(tmp_path_factory):
    """One shared synthetic dataset + replay backend for the session."""
    root = tmp_path_factory.mktemp("synthetic")
    return build_synthetic_experiment(root, n_per_class=2, seed=0)


@pytest.fixture()
def synthetic_client(synthetic):
    client = BridgeClient(FileTransport(synthetic.root / "backend"))
    yield client
    client.close()
