"""Bus engine replacement environment with optional dummy state dimensions.

State points are ``(mileage, dummy_0, ..., dummy_{D-1})``. Action 0 continues
(maintenance cost proportional to mileage), action 1 replaces the engine
(fixed cost) and resets mileage to zero before the drift step. Dummy
coordinates are redrawn uniformly from their grid at every step, independent
of action and mileage, so they affect neither rewards nor mileage dynamics.
"""

from __future__ import annotations

import itertools
import logging
from typing import Any

import numpy as np

from ..exceptions import InvalidArgumentError
from ..models.config import BusEnvConfig
from ..models.mdp import (
    FloatArray,
    IntArray,
    LinearReward,
    MdpSpec,
    StateIndex,
    ThetaVector,
    register_reward_family,
)

logger = logging.getLogger(__name__)

CONTINUE, REPLACE = 0, 1
ACTIONS = ("continue", "replace")


@register_reward_family("bus")
def bus_reward(
    params: dict[str, Any], states: StateIndex, n_actions: int
) -> LinearReward:
    """r(s, continue) = -theta_1 * mileage(s); r(s, replace) = -theta_2."""
    if n_actions != 2:
        raise InvalidArgumentError("The bus reward family has exactly two actions")
    mileage_dim = int(params.get("mileage_dim", 0))
    if not 0 <= mileage_dim < states.dim:
        raise InvalidArgumentError(f"mileage_dim {mileage_dim} outside state dimension")

    def feature_fn(points: FloatArray, actions: IntArray) -> FloatArray:
        phi = np.zeros((len(points), 2))
        keep = actions == CONTINUE
        phi[keep, 0] = -points[keep, mileage_dim]
        phi[~keep, 1] = -1.0
        return phi

    return LinearReward(
        kind="bus",
        params={"mileage_dim": mileage_dim},
        n_params=2,
        feature_fn=feature_fn,
    )


def mileage_grid(config: BusEnvConfig) -> FloatArray:
    """Mileage of each grid point; the grid index itself unless ``mileage_max`` rescales it."""
    k = np.arange(config.mileage_grid_size, dtype=np.float64)
    if config.mileage_max is None:
        return k
    return config.mileage_max * k / (config.mileage_grid_size - 1)


def dummy_grid(config: BusEnvConfig) -> FloatArray:
    lo, hi = config.dummy_range
    if config.dummy_grid_size == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, config.dummy_grid_size)


def _mileage_kernel(config: BusEnvConfig) -> FloatArray:
    """Mileage transition matrices of shape (2, grid, grid)."""
    size = config.mileage_grid_size
    kernel = np.zeros((2, size, size))
    for k in range(size):
        for step, p in enumerate(config.drift):
            kernel[CONTINUE, k, min(k + step, size - 1)] += p
            kernel[REPLACE, k, min(step, size - 1)] += p
    return kernel


def make_bus_env(config: BusEnvConfig) -> MdpSpec:
    """Build the tabular bus engine MDP described by ``config``."""
    mileage = mileage_grid(config)
    dummies = [dummy_grid(config)] * config.dummy_dims
    points = np.array(
        [combo for combo in itertools.product(mileage, *dummies)], dtype=np.float64
    ).reshape(-1, 1 + config.dummy_dims)
    states = StateIndex(points)

    n_dummy = config.dummy_grid_size**config.dummy_dims
    dummy_kernel = np.full((n_dummy, n_dummy), 1.0 / n_dummy)
    mileage_kernel = _mileage_kernel(config)
    transition = np.stack(
        [np.kron(mileage_kernel[a], dummy_kernel) for a in (CONTINUE, REPLACE)],
        axis=1,
    )

    mdp = MdpSpec(
        states=states,
        actions=ACTIONS,
        reward=bus_reward({"mileage_dim": 0}, states, 2),
        transition=transition,
        gamma=config.gamma,
        r_max=config.r_max,
    )
    logger.debug(
        f"Built bus env: {mdp.n_states} states "
        f"({config.mileage_grid_size} mileage x {n_dummy} dummy), gamma={config.gamma}"
    )
    return mdp


def theta_true(config: BusEnvConfig) -> ThetaVector:
    return ThetaVector.of(*config.theta_true)
