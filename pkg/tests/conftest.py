from __future__ import annotations

import json
import math

import pytest

from reslab.polygon import build_polygon, gamma_candidates
from reslab.potential import validate_config
from reslab.rootfind import Window
from reslab.secular import expand_terms, exponent_points

ROOT2 = math.sqrt(2.0)

# verdict lines registered by the acceptance tests, echoed after the run
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def two_delta_config(h, c2=1.0):
    """The reference two-pole setup: gap 10 + 5*sqrt(2), betas (1, 0.5)."""
    return validate_config(h, [(-10.0, 1.0, 1.0), (5 * ROOT2, c2, 0.5)])


def three_delta_config(h, betas, couplings=(1.0, 1.0, 1.0)):
    xs = (-5.0, 0.0, 3 * ROOT2)
    return validate_config(h, [(xs[i], couplings[i], betas[i]) for i in range(3)])


def default_window(config, factor=3.0):
    h = config.h
    return Window(1 - factor * h, 1 + factor * h, -factor * h, 0.0)


def candidates_for(config):
    return gamma_candidates(build_polygon(exponent_points(expand_terms(config), config)))


@pytest.fixture
def config_file(tmp_path):
    """Write a config dict as JSON and hand back the path as str."""

    def write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write
