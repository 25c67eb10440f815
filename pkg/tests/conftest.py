import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from looserope import AttentionInputs, PositionGrid, SaliencyMap  # noqa: E402
from looserope.saliency import quantize_values  # noqa: E402


def random_instance(rng, H=None, W=None, heads=None, d=None, levels=5, theta_base=1e-4,
                    mask=None, saliency=None):
    """Random attention instance with grids up to 8x8, d up to 32, heads up to 2."""
    H = H or int(rng.integers(1, 9))
    W = W or int(rng.integers(1, 9))
    heads = heads or int(rng.integers(1, 3))
    d = d or int(rng.choice([4, 8, 16, 32]))
    T = H * W
    blocks = [rng.standard_normal((heads, T, d)).astype(np.float32) for _ in range(5)]
    if mask is None:
        mask = rng.random((H, W)) < 0.5
    if saliency is None:
        s = rng.random((H, W))
        s = quantize_values(s, levels) if levels else s.astype(np.float32)
        saliency = SaliencyMap(s, levels)
    return AttentionInputs(*blocks, PositionGrid(H, W), PositionGrid(H, W), mask, saliency,
                           theta_base=theta_base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
