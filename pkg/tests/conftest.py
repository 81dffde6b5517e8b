"""Shared fixtures and hypothesis configuration for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zsmg.gamegen import builtin, random_game

settings.register_profile(
    "fast",
    max_examples=20,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fast")


@pytest.fixture(scope="session")
def mp1():
    return builtin("mp1")


@pytest.fixture(scope="session")
def const_game():
    return builtin("const")


@pytest.fixture(scope="session")
def chain2():
    return builtin("chain2")


@pytest.fixture(scope="session")
def switching_mp():
    return builtin("switching-mp")


def small_random_game(seed: int, n_states: int = 2, n_actions_p1: int = 2,
                      n_actions_p2: int = 2, gamma: float = 0.9):
    """Convenience wrapper so tests read as one-liners."""
    return random_game(seed=seed, n_states=n_states, n_actions_p1=n_actions_p1,
                       n_actions_p2=n_actions_p2, gamma=gamma)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
