import os
import sys

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fixed", derandomize=True, print_blob=True)
settings.load_profile("fixed")

sys.path.insert(0, os.path.dirname(__file__))

from petcsched import config as config_mod  # noqa: E402
from petcsched import pipeline  # noqa: E402

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BATCH_REACTOR = os.path.join(ROOT, "configs", "batch_reactor.yaml")

A_BR = np.array([[1.38, -0.208, 6.715, -5.676],
                 [-0.581, -4.29, 0.0, 0.675],
                 [1.067, 4.273, -6.654, 5.893],
                 [0.048, 4.273, 1.343, -2.104]])
B_BR = np.array([[0.0, 0.0], [5.679, 0.0], [1.136, -3.146], [1.136, 0.0]])


@pytest.fixture(scope="session")
def br_config():
    return config_mod.load(BATCH_REACTOR)


@pytest.fixture(scope="session")
def designed(br_config):
    """Designed loops of the batch reactor example, keyed by loop id."""
    return {lc.id: pipeline.design_loop(lc) for lc in br_config.loops}


@pytest.fixture(scope="session")
def abstractions(br_config):
    """Full abstraction of both loops (the expensive step, done once per session)."""
    return {lc.id: pipeline.abstract_loop(lc, br_config) for lc in br_config.loops}


@pytest.fixture(scope="session")
def models(abstractions):
    return [abstractions[k].model for k in ("loop1", "loop2")]


@pytest.fixture(scope="session")
def game(br_config, models):
    return pipeline.build_game(br_config, models)


@pytest.fixture(scope="session")
def strategy(game):
    from petcsched.synth import solve_safety
    return solve_safety(game)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} | {title} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
