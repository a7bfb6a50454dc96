"""Data generation from a solved MDP and empirical coverage of aggregated cells."""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from ..core.soft_bellman import choice_probs, soft_q_solve
from ..exceptions import InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.config import BusEnvConfig
from ..models.data import Dataset, DatasetMeta
from ..models.mdp import FloatArray, IntArray, MdpSpec, ThetaVector
from .bus import make_bus_env, theta_true

logger = logging.getLogger(__name__)

InitMode = Literal["uniform", "chained"]


def _initial_distribution(mdp: MdpSpec, init: InitMode | ArrayLike) -> FloatArray:
    if isinstance(init, str):
        return np.full(mdp.n_states, 1.0 / mdp.n_states)
    mu = np.asarray(init, dtype=np.float64).reshape(-1)
    if mu.shape != (mdp.n_states,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("init must be a probability vector over states")
    return mu


def _draw(cdf: FloatArray, u: FloatArray) -> IntArray:
    """Inverse-CDF sampling along the last axis."""
    idx = np.sum(u[..., None] > cdf, axis=-1)
    return np.minimum(idx, cdf.shape[-1] - 1).astype(np.int64)


def simulate(
    mdp: MdpSpec,
    theta_true: ThetaVector,
    n: int,
    seed: int,
    init: InitMode | ArrayLike = "uniform",
    *,
    tol: float = 1e-10,
) -> Dataset:
    """Draw ``n`` transitions from the optimal soft policy under ``theta_true``.

    ``uniform`` (or an explicit state distribution) restarts every transition
    from the initial distribution; ``chained`` follows one trajectory started
    from the uniform distribution.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    q = soft_q_solve(mdp, theta_true, tol)
    policy_cdf = np.cumsum(choice_probs(q.table), axis=1)
    transition_cdf = np.cumsum(mdp.transition, axis=2)
    mu_cdf = np.cumsum(_initial_distribution(mdp, init))
    rng = np.random.default_rng(seed)

    if isinstance(init, str) and init == "chained":
        s_idx = np.empty(n, dtype=np.int64)
        a_idx = np.empty(n, dtype=np.int64)
        next_idx = np.empty(n, dtype=np.int64)
        uniforms = rng.random((n, 2))
        current = int(_draw(mu_cdf, rng.random(1))[0])
        for i in range(n):
            action = int(np.searchsorted(policy_cdf[current], uniforms[i, 0], side="right"))
            action = min(action, mdp.n_actions - 1)
            nxt = int(
                np.searchsorted(transition_cdf[current, action], uniforms[i, 1], side="right")
            )
            nxt = min(nxt, mdp.n_states - 1)
            s_idx[i], a_idx[i], next_idx[i] = current, action, nxt
            current = nxt
    else:
        s_idx = _draw(mu_cdf, rng.random(n))
        a_idx = _draw(policy_cdf[s_idx], rng.random(n))
        next_idx = np.empty(n, dtype=np.int64)
        u = rng.random(n)
        # group by (s, a) so only one CDF row per pair is materialized
        pair = s_idx * mdp.n_actions + a_idx
        order = np.argsort(pair, kind="stable")
        bounds = np.flatnonzero(np.diff(pair[order])) + 1
        for group in np.split(order, bounds):
            s, a = int(s_idx[group[0]]), int(a_idx[group[0]])
            next_idx[group] = _draw(transition_cdf[s, a], u[group])

    points = mdp.states.points
    meta = DatasetMeta(
        gamma=mdp.gamma,
        n_actions=mdp.n_actions,
        env_digest=mdp.digest(),
        seed=seed,
        n=n,
        theta_true=theta_true.tolist(),
        init=init if isinstance(init, str) else "custom",
    )
    logger.debug(
        f"Simulated {n} transitions (seed={seed}); replace share "
        f"{float(np.mean(a_idx == mdp.n_actions - 1)):.4f}"
    )
    return Dataset(points[s_idx], a_idx, points[next_idx], meta)


def simulate_bus(config: BusEnvConfig, n: int, seed: int) -> tuple[MdpSpec, Dataset]:
    """Build the bus env, simulate it, and record the config in the metadata."""
    mdp = make_bus_env(config)
    dataset = simulate(mdp, theta_true(config), n, seed, init=config.init)
    meta = dataset.meta.model_copy(update={"env": config.model_dump(mode="json")})
    return mdp, Dataset(dataset.states, dataset.actions, dataset.next_states, meta)


def population_dataset(
    mdp: MdpSpec,
    theta: ThetaVector,
    mu: ArrayLike | None = None,
    *,
    tol: float = 1e-12,
) -> Dataset:
    """Weighted dataset enumerating the exact data distribution.

    Each row (s, a, s') carries weight mu(s) * pi(a|s) * P(s'|s, a), so
    empirical averages over it are population expectations.
    """
    q = soft_q_solve(mdp, theta, tol)
    probs = choice_probs(q.table)
    mu_vec = _initial_distribution(mdp, "uniform" if mu is None else mu)
    weights = mu_vec[:, None, None] * probs[:, :, None] * mdp.transition
    s_idx, a_idx, next_idx = np.nonzero(weights > 0)
    points = mdp.states.points
    meta = DatasetMeta(
        gamma=mdp.gamma,
        n_actions=mdp.n_actions,
        env_digest=mdp.digest(),
        n=len(s_idx),
        theta_true=theta.tolist(),
        init="population",
        weighted=True,
    )
    return Dataset(
        points[s_idx],
        a_idx,
        points[next_idx],
        meta,
        weights=weights[s_idx, a_idx, next_idx],
    )


def coverage_table(dataset: Dataset, aggregation: Aggregation) -> FloatArray:
    """Weighted frequency of each (cluster, action) cell, shape (n_s, n_a)."""
    clusters = aggregation.labels_of(dataset.states)
    cells = clusters * dataset.n_actions + dataset.actions
    mass = np.bincount(
        cells,
        weights=dataset.weights,
        minlength=aggregation.n_s * dataset.n_actions,
    )
    return (mass / dataset.weights.sum()).reshape(aggregation.n_s, dataset.n_actions)


def empirical_coverage(dataset: Dataset, aggregation: Aggregation) -> float:
    """Smallest cell frequency; zero signals an uncovered (cluster, action) cell."""
    return float(coverage_table(dataset, aggregation).min())
