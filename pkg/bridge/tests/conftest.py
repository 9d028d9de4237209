import shutil
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def primary_bin():
    exe = shutil.which("patchcrypt")
    assert exe, "the companion 'patchcrypt' CLI must be installed for bridge tests"
    return exe


@pytest.fixture
def rng():
    return np.random.default_rng(0xB21D6E)
