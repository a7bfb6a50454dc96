"""Tests for dataset persistence."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from samq.envs.simulation import population_dataset
from samq.exceptions import InvalidArgumentError
from samq.models import ThetaVector
from samq.utils.io import load_dataset, meta_path, save_dataset


class TestSaveDataset:
    def test_layout(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "data" / "transitions.csv")

        frame = pd.read_csv(path)
        assert list(frame.columns) == ["s_0", "a", "snext_0"]
        assert len(frame) == dataset.n
        assert meta_path(path) == tmp_path / "data" / "transitions.meta.json"
        assert meta_path(path).exists()

    def test_round_trip(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        loaded = load_dataset(save_dataset(dataset, tmp_path / "d.csv"))

        np.testing.assert_array_equal(loaded.states, dataset.states)
        np.testing.assert_array_equal(loaded.actions, dataset.actions)
        np.testing.assert_array_equal(loaded.next_states, dataset.next_states)
        assert loaded.meta == dataset.meta
        assert not loaded.is_weighted

    def test_weighted_round_trip(self, small_bus_mdp, tmp_path):
        dataset = population_dataset(small_bus_mdp, ThetaVector.of(0.3, 3.0))
        path = save_dataset(dataset, tmp_path / "population.csv")

        assert "w" in pd.read_csv(path).columns
        loaded = load_dataset(path)
        assert loaded.is_weighted
        np.testing.assert_array_equal(loaded.weights, dataset.weights)


class TestLoadDataset:
    """Test rejection of malformed inputs."""

    def test_missing_sidecar(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "d.csv")
        meta_path(path).unlink()
        with pytest.raises(InvalidArgumentError, match="metadata"):
            load_dataset(path)

    def test_invalid_sidecar(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "d.csv")
        meta_path(path).write_text('{"gamma": 2.0}', encoding="utf-8")
        with pytest.raises(InvalidArgumentError, match="Invalid metadata"):
            load_dataset(path)

    def test_missing_action_column(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "d.csv")
        pd.read_csv(path).drop(columns="a").to_csv(path, index=False)
        with pytest.raises(InvalidArgumentError, match="columns"):
            load_dataset(path)

    def test_columns_numbered_from_zero(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "d.csv")
        pd.read_csv(path).rename(columns={"s_0": "s_1", "snext_0": "snext_1"}).to_csv(
            path, index=False
        )
        with pytest.raises(InvalidArgumentError, match="numbered"):
            load_dataset(path)

    def test_dimension_mismatch(self, small_bus_data, tmp_path):
        _, dataset = small_bus_data
        path = save_dataset(dataset, tmp_path / "d.csv")
        frame = pd.read_csv(path)
        frame["s_1"] = 0.0
        frame.to_csv(path, index=False)
        with pytest.raises(InvalidArgumentError, match="next-state columns"):
            load_dataset(path)
