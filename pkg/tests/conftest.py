import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")



def pytest_terminal_summary(terminalreporter):
    results = {}
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            results.update(getattr(module, "RESULTS", {}))
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
