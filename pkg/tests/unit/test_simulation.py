"""Tests for the bus environment, data simulation and cell coverage."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from samq.core.soft_bellman import choice_probs, soft_q_solve
from samq.envs.bus import CONTINUE, REPLACE, make_bus_env
from samq.envs.simulation import (
    coverage_table,
    empirical_coverage,
    population_dataset,
    simulate,
    simulate_bus,
)
from samq.exceptions import InvalidArgumentError
from samq.models import Aggregation, BusEnvConfig, Dataset, DatasetMeta, ThetaVector
from samq.models.mdp import StateIndex


class TestBusEnv:
    """Test rewards and dynamics of the engine replacement environment."""

    def test_zero_reward_gives_uniform_policy(self, small_bus_mdp):
        q = soft_q_solve(small_bus_mdp, ThetaVector.of(0.0, 0.0))
        np.testing.assert_allclose(choice_probs(q.table), 0.5, atol=1e-9)

    def test_reward_formula(self):
        mdp = make_bus_env(BusEnvConfig(mileage_grid_size=11, mileage_max=10.0))
        rewards = mdp.reward_table(ThetaVector.of(0.1, 5.0))
        assert rewards[-1, CONTINUE] == pytest.approx(-1.0)
        assert rewards[-1, REPLACE] == pytest.approx(-5.0)
        assert rewards[0, CONTINUE] == 0.0

    def test_dummy_moves_independently_of_action(self):
        config = BusEnvConfig(mileage_grid_size=4, mileage_max=3.0, dummy_dims=1, dummy_grid_size=3)
        mdp = make_bus_env(config)
        # states are mileage-major: (mileage, dummy) -> mileage * 3 + dummy
        kernel = mdp.transition.reshape(4, 3, 2, 4, 3)
        dummy_next = kernel.sum(axis=3)
        np.testing.assert_allclose(dummy_next[:, :, CONTINUE], dummy_next[:, :, REPLACE])
        np.testing.assert_allclose(dummy_next, 1.0 / 3.0)

    def test_continuation_value_decreases_with_mileage(self, small_bus_mdp):
        q = soft_q_solve(small_bus_mdp, ThetaVector.of(0.3, 3.0))
        assert np.all(np.diff(q.table[:, CONTINUE]) <= 1e-12)


class TestSimulate:
    """Test data generation from the optimal soft policy."""

    def test_single_transition(self, small_bus_mdp):
        dataset = simulate(small_bus_mdp, ThetaVector.of(0.3, 3.0), 1, seed=0)
        assert dataset.n == 1
        assert dataset.meta.n == 1

    def test_reproducible(self, small_bus_config):
        _, first = simulate_bus(small_bus_config, 2000, seed=42)
        _, second = simulate_bus(small_bus_config, 2000, seed=42)
        _, other = simulate_bus(small_bus_config, 2000, seed=43)
        np.testing.assert_array_equal(first.states, second.states)
        np.testing.assert_array_equal(first.actions, second.actions)
        np.testing.assert_array_equal(first.next_states, second.next_states)
        assert not np.array_equal(first.actions, other.actions)

    def test_meta_records_generation(self, small_bus_config):
        mdp, dataset = simulate_bus(small_bus_config, 100, seed=3)
        assert dataset.meta.seed == 3
        assert dataset.meta.gamma == small_bus_config.gamma
        assert dataset.meta.env_digest == mdp.digest()
        assert dataset.meta.theta_true == small_bus_config.theta_true
        assert BusEnvConfig.model_validate(dataset.meta.env) == small_bus_config

    def test_expensive_replacement_is_rare(self, small_bus_mdp):
        dataset = simulate(small_bus_mdp, ThetaVector.of(0.01, 50.0), 10000, seed=1)
        assert np.mean(dataset.actions == REPLACE) < 0.01

    def test_action_frequencies_match_policy(self, small_bus_mdp):
        theta = ThetaVector.of(0.3, 3.0)
        dataset = simulate(small_bus_mdp, theta, 20000, seed=2)
        probs = choice_probs(soft_q_solve(small_bus_mdp, theta).table)[:, REPLACE]
        rows = small_bus_mdp.states.indices_of(dataset.states)
        for s in range(small_bus_mdp.n_states):
            mask = rows == s
            visits = int(mask.sum())
            p = probs[s]
            band = 4 * np.sqrt(p * (1 - p) / visits)
            assert abs(np.mean(dataset.actions[mask] == REPLACE) - p) <= band

    def test_chained_trajectory(self, small_bus_mdp):
        dataset = simulate(small_bus_mdp, ThetaVector.of(0.3, 3.0), 500, seed=0, init="chained")
        np.testing.assert_array_equal(dataset.next_states[:-1], dataset.states[1:])

    def test_dummy_marginal_is_uniform(self, demo_env_config):
        _, dataset = simulate_bus(demo_env_config, 10000, seed=0)
        _, counts = np.unique(dataset.next_states[:, 1], return_counts=True)
        assert len(counts) == demo_env_config.dummy_grid_size
        assert stats.chisquare(counts).pvalue > 0.01

    def test_invalid_arguments(self, small_bus_mdp):
        with pytest.raises(InvalidArgumentError):
            simulate(small_bus_mdp, ThetaVector.of(0.3, 3.0), 0, seed=0)
        with pytest.raises(InvalidArgumentError):
            simulate(small_bus_mdp, ThetaVector.of(0.3, 3.0), 10, seed=0, init=[1.0, 0.0])


class TestPopulationDataset:
    def test_weights_are_the_data_distribution(self, small_bus_mdp):
        theta = ThetaVector.of(0.3, 3.0)
        dataset = population_dataset(small_bus_mdp, theta)
        assert dataset.weights.sum() == pytest.approx(1.0)
        assert dataset.is_weighted

        probs = choice_probs(soft_q_solve(small_bus_mdp, theta, 1e-12).table)
        rows = small_bus_mdp.states.indices_of(dataset.states)
        mass = np.zeros_like(probs)
        np.add.at(mass, (rows, dataset.actions), dataset.weights)
        np.testing.assert_allclose(mass, probs / small_bus_mdp.n_states, atol=1e-12)


class TestEmpiricalCoverage:
    """Test the minimum aggregated cell frequency."""

    @staticmethod
    def _dataset(states, actions) -> Dataset:
        points = np.asarray(states, dtype=np.float64).reshape(-1, 1)
        return Dataset(points, actions, points, DatasetMeta(gamma=0.5, n_actions=2, n=len(actions)))

    def test_single_cluster(self):
        dataset = self._dataset([0, 1, 1, 0, 1], [0, 0, 1, 0, 0])
        aggregation = Aggregation(StateIndex(np.array([[0.0], [1.0]])), [0, 0], [0])
        table = coverage_table(dataset, aggregation)
        assert table.sum() == pytest.approx(1.0)
        assert empirical_coverage(dataset, aggregation) == pytest.approx(0.2)

    def test_missing_cell(self):
        dataset = self._dataset([0, 1], [0, 0])
        aggregation = Aggregation.identity(StateIndex(np.array([[0.0], [1.0]])))
        assert empirical_coverage(dataset, aggregation) == 0.0

    def test_uniform_cells(self):
        states = np.repeat([0, 0, 1, 1], 100)
        actions = np.tile(np.repeat([0, 1], 100), 2)
        dataset = self._dataset(states, actions)
        aggregation = Aggregation.identity(StateIndex(np.array([[0.0], [1.0]])))
        np.testing.assert_allclose(coverage_table(dataset, aggregation), 0.25)
        assert empirical_coverage(dataset, aggregation) == pytest.approx(0.25)
