"""Integration tests for the estimate-Q, aggregate, estimate-theta workflow.

Runs the library functions in the order the CLI chains them, on population
data (exact frequencies) and on simulated samples.
"""

from __future__ import annotations

import numpy as np
import pytest

from samq import ThetaVector, cluster_states, estimate_q, nfmle_estimate
from samq.core.clustering import ad_hoc_aggregation
from samq.envs.bus import REPLACE
from samq.envs.simulation import population_dataset, simulate_bus
from samq.evaluation.benchmark import run_dummy_state_demo, run_experiment
from samq.models import (
    BusEnvConfig,
    DemoConfig,
    ExperimentConfig,
    IrlOptions,
    NfmleOptions,
)

THETA_INIT = ThetaVector.of(0.05, 1.0)


def _samq_pipeline(dataset, mdp, n_s: int, opts: NfmleOptions | None = None, smoothing=0.5):
    q_hat = estimate_q(
        dataset, mdp.gamma, IrlOptions(anchor_action=REPLACE, smoothing=smoothing, tol=1e-13)
    ).q
    aggregation = cluster_states(q_hat, None, n_s, seed=0, restarts=5)
    return nfmle_estimate(dataset, aggregation, THETA_INIT, opts, reward=mdp.reward)


def test_population_pipeline_recovers_truth(small_bus_mdp, small_bus_config):
    """Exact frequencies and one cluster per state give back theta*."""
    dataset = population_dataset(small_bus_mdp, ThetaVector.of(*small_bus_config.theta_true))
    report = _samq_pipeline(
        dataset,
        small_bus_mdp,
        small_bus_mdp.n_states,
        NfmleOptions(xatol=1e-8, fatol=1e-10, inner_tol=1e-13),
        smoothing=0.0,
    )
    np.testing.assert_allclose(report.theta_hat, small_bus_config.theta_true, atol=1e-3)


def test_sampled_pipeline_is_deterministic(small_bus_config):
    first_mdp, first_data = simulate_bus(small_bus_config, 20000, seed=3)
    _, second_data = simulate_bus(small_bus_config, 20000, seed=3)
    np.testing.assert_array_equal(first_data.states, second_data.states)
    np.testing.assert_array_equal(first_data.actions, second_data.actions)

    first = _samq_pipeline(first_data, first_mdp, 5)
    second = _samq_pipeline(second_data, first_mdp, 5)
    assert first.theta_hat == second.theta_hat
    assert first.log_likelihood == second.log_likelihood


def test_aggregated_estimate_is_reasonable(small_bus_config):
    mdp, dataset = simulate_bus(small_bus_config, 20000, seed=5)
    report = _samq_pipeline(dataset, mdp, 5)
    assert report.squared_error(small_bus_config.theta_true) < 1.0
    assert report.n_s == 5


def test_dummy_dimension_is_ignored_by_samq():
    """Q-based clusters merge states differing only in the dummy coordinate."""
    result = run_dummy_state_demo(DemoConfig())

    # the raw-value grid cuts the dummy axis, separating every same-mileage pair
    assert result.adhoc_purity == 0.0
    assert result.samq_purity > 0.5
    assert result.samq_purity > result.adhoc_purity


def test_ad_hoc_grid_uses_dummy_cuts(demo_env_config):
    _, dataset = simulate_bus(demo_env_config, 5000, seed=0)
    aggregation = ad_hoc_aggregation(dataset.support(), 10)
    dummy = aggregation.states.points[:, 1]
    assert len({tuple(aggregation.labels[dummy == d]) for d in np.unique(dummy)}) > 1


@pytest.mark.slow
def test_samq_beats_ad_hoc_on_a_dense_replacement_world():
    """Coarse raw-value grids lose more than Q-based clusters of the same size."""
    env = BusEnvConfig(mileage_max=20.0, theta_true=[0.1, 2.0])
    config = ExperimentConfig(env=env, n=10000, n_s_list=[5, 50], replications=3, seed=0)
    table = run_experiment(config)
    assert table.row("SAmQ", 5).mse_mean < table.row("NF-MLE-SA", 5).mse_mean
    assert table.row("NF-MLE").mse_mean >= 0.0
