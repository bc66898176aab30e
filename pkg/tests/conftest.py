import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from torselab.geometry import Chart, MetricField, VectorField  # noqa: E402

S3_BOX = [(0.3, np.pi - 0.3), (0.3, np.pi - 0.3), (0.3, 2 * np.pi - 0.3)]


def s3_metric() -> MetricField:
    return MetricField.diagonal(["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2"])


def s3_frame():
    return [
        VectorField.of("1", "0", "0"),
        VectorField.of("0", "1/sin(x1)", "0"),
        VectorField.of("0", "0", "1/(sin(x1)*sin(x2))"),
    ]


def s3_field(h: str = "2 + sin(x3)") -> VectorField:
    # e1 is the coordinate direction d/dx1 here
    return VectorField.of(f"({h})*sin(x1)", "0", "0")


@pytest.fixture
def s3_points():
    return Chart.standard(S3_BOX).sample(64, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
