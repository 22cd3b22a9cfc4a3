import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from skelbench import shapes
from skelbench.skeletonize import skeleton_candidates

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def corpus_candidates():
    """(shape_id, cleaned shape, [Candidate at eps 2, 4, 6]) for the 20-shape corpus."""
    out = []
    for sid, _, img in shapes.corpus(20):
        shape, _, cands = skeleton_candidates(img)
        out.append((sid, shape, cands))
    return out


@pytest.fixture(scope="session")
def corpus():
    return corpus_candidates()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
