"""Pytest configuration and fixtures for samq tests."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from samq.envs.bus import make_bus_env
from samq.envs.simulation import simulate_bus
from samq.models import BusEnvConfig, Dataset, MdpSpec, SamqConfig, StateIndex
from samq.models.mdp import linear_reward

RandomMdpFactory = Callable[..., MdpSpec]


@pytest.fixture(scope="session")
def base_test_config() -> SamqConfig:
    """Base solver configuration for session-wide reuse.

    Returns:
        SamqConfig with tolerances suited to small test problems.
    """
    return SamqConfig(
        tol=1e-10,
        max_iter=10000,
        outer_tol_theta=1e-7,
        outer_tol_loglik=1e-10,
        max_outer_iter=2000,
        smoothing=0.5,
        kmeans_restarts=5,
        workers=1,
    )


@pytest.fixture
def test_config(base_test_config: SamqConfig) -> SamqConfig:
    """Fresh copy of the base config for test isolation."""
    return base_test_config.model_copy()


@pytest.fixture(scope="session")
def tiny_bus_config() -> BusEnvConfig:
    """Two mileage states, used for parameter recovery."""
    return BusEnvConfig(
        mileage_grid_size=2, mileage_max=1.0, theta_true=[1.0, 0.5], gamma=0.9
    )


@pytest.fixture(scope="session")
def small_bus_config() -> BusEnvConfig:
    """Ten mileage states with enough replacements everywhere for full coverage."""
    return BusEnvConfig(
        mileage_grid_size=10, mileage_max=9.0, theta_true=[0.3, 3.0], gamma=0.9
    )


@pytest.fixture(scope="session")
def small_bus_mdp(small_bus_config: BusEnvConfig) -> MdpSpec:
    return make_bus_env(small_bus_config)


@pytest.fixture(scope="session")
def small_bus_data(small_bus_config: BusEnvConfig) -> tuple[MdpSpec, Dataset]:
    """Simulated (mdp, dataset) pair, 20000 transitions, seed 7."""
    return simulate_bus(small_bus_config, 20000, seed=7)


@pytest.fixture(scope="session")
def demo_env_config() -> BusEnvConfig:
    """Bus env padded with one irrelevant three-valued dummy dimension."""
    return BusEnvConfig(
        mileage_grid_size=10,
        mileage_max=9.0,
        theta_true=[0.3, 3.0],
        dummy_dims=1,
        dummy_grid_size=3,
    )


@pytest.fixture(scope="session")
def linear_irl_mdp() -> MdpSpec:
    """Six-state bus dynamics with a zero-reward continue action.

    r(s, continue) = 0 and r(s, replace) = mileage/mileage_max - 1 under
    theta = (1, 1), so anchoring on continue recovers Q without any shift.
    """
    bus = make_bus_env(BusEnvConfig(mileage_grid_size=6, mileage_max=5.0, gamma=0.5))
    mileage = bus.states.points[:, 0]
    features = np.zeros((bus.n_states, 2, 2))
    features[:, 1, 0] = mileage / mileage.max()
    features[:, 1, 1] = -1.0
    return MdpSpec(
        states=bus.states,
        actions=bus.actions,
        reward=linear_reward(features, bus.states),
        transition=bus.transition,
        gamma=0.5,
    )


def build_random_mdp(
    rng: np.random.Generator,
    n_states: int = 5,
    n_actions: int = 2,
    gamma: float = 0.8,
    n_params: int = 2,
) -> MdpSpec:
    """Random MDP with Dirichlet transitions and a random linear reward."""
    states = StateIndex(np.arange(n_states, dtype=np.float64).reshape(-1, 1))
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    features = rng.uniform(-1.0, 1.0, size=(n_states, n_actions, n_params))
    return MdpSpec(
        states=states,
        actions=tuple(f"a{k}" for k in range(n_actions)),
        reward=linear_reward(features, states),
        transition=transition,
        gamma=gamma,
    )


@pytest.fixture
def random_mdp() -> RandomMdpFactory:
    """Factory for random small MDPs (see :func:`build_random_mdp`)."""
    return build_random_mdp
