"""Tests for the finite-sample bound calculator and its constants."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from samq.core.clustering import aggregation_q_error, cluster_states
from samq.core.irl import estimate_q
from samq.core.nfmle import nfmle_estimate
from samq.envs.bus import REPLACE
from samq.evaluation.bounds import (
    BoundInputs,
    build_bound_report,
    clustering_constant,
    format_bound_table,
    irl_q_error,
    optimal_aggregation_error,
    theorem2_bound,
    theorem2_sweep,
    theta_cardinality,
)
from samq.exceptions import BoundUndefinedError, DiagnosticUnavailableError, InvalidArgumentError
from samq.models import Aggregation, IrlOptions, ThetaVector
from samq.models.mdp import QFunction, StateIndex

EXAMPLE = BoundInputs(gamma=0.95, r_max=1.0, c_h=1.0, c_uni=0.01, n_s=10, n_a=2)


def _reference_bound(
    gamma: float, r_max: float, c_h: float, c_uni: float, n_s: int, n_a: int,
    n: int, delta: float, card: float, c_q: float = 0.0, c_clustering: float = 0.0,
) -> tuple[float, float]:
    """Independent transcription of the bias and variance terms."""
    k = r_max + 1.0
    disc = 4.0 * k / ((1.0 - gamma) * (n_s ** (1.0 / n_a) - 1.0))
    bias = 4.0 * (disc + 2.0 * c_q + c_clustering) / (c_h * (1.0 - gamma))
    first = 4.0 * k * math.sqrt(math.log(4.0 * card / delta) / (2.0 * n)) / ((1.0 - gamma) * c_h)
    shrink = c_uni - math.sqrt(math.log(4.0 * n_s * n_a * card / delta) / (2.0 * n))
    second = (
        4.0 * k * math.sqrt(math.log(8.0 * n_s * n_a * card / delta) / (2.0 * n))
        / ((1.0 - gamma) ** 2 * c_h * shrink)
    )
    return bias, first + second


def _q(table) -> QFunction:
    table = np.asarray(table, dtype=np.float64)
    return QFunction(table, StateIndex(np.arange(len(table), dtype=np.float64).reshape(-1, 1)))


def _brute_force_error(vectors: np.ndarray, n_s: int) -> float:
    best = np.inf
    for labels in itertools.product(range(n_s), repeat=len(vectors)):
        if len(set(labels)) != n_s:
            continue
        labels = np.asarray(labels)
        worst = 0.0
        for k in range(n_s):
            members = vectors[labels == k]
            radius = min(np.max(np.abs(members - center)) for center in members)
            worst = max(worst, radius)
        best = min(best, worst)
    return float(best)


class TestTheorem2Bound:
    """Test the closed-form bias and variance terms."""

    def test_matches_reference_formula(self):
        result = theorem2_bound(EXAMPLE, 1_000_000, 0.05, 1e6)
        bias, variance = _reference_bound(0.95, 1.0, 1.0, 0.01, 10, 2, 1_000_000, 0.05, 1e6)
        assert result.bias == pytest.approx(bias, rel=1e-12)
        assert result.variance == pytest.approx(variance, rel=1e-12)
        assert result.total == pytest.approx(bias + variance, rel=1e-12)
        assert math.isfinite(result.total) and result.total > 0

    def test_matches_reference_formula_on_random_constants(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n_s, n_a = int(rng.integers(2, 200)), int(rng.integers(2, 5))
            n = int(rng.integers(100_000, 100_000_000))
            delta = float(rng.uniform(0.01, 0.2))
            card = float(10 ** rng.uniform(1.0, 8.0))
            floor = math.sqrt(math.log(4.0 * n_s * n_a * card / delta) / (2.0 * n))
            constants = {
                "gamma": float(rng.uniform(0.5, 0.99)),
                "r_max": float(rng.uniform(0.1, 10.0)),
                "c_h": float(rng.uniform(0.1, 5.0)),
                "c_uni": floor + float(rng.uniform(0.01, 0.3)),
                "n_s": n_s,
                "n_a": n_a,
                "c_q": float(rng.uniform(0.0, 0.5)),
                "c_clustering": float(rng.uniform(0.0, 0.5)),
            }
            result = theorem2_bound(BoundInputs(**constants), n, delta, card)
            bias, variance = _reference_bound(n=n, delta=delta, card=card, **constants)
            assert result.bias == pytest.approx(bias, rel=1e-12)
            assert result.variance == pytest.approx(variance, rel=1e-12)

    def test_estimation_constants_enter_bias_only(self):
        base = theorem2_bound(EXAMPLE, 1_000_000, 0.05, 1e6)
        shifted = theorem2_bound(
            EXAMPLE.model_copy(update={"c_q": 0.1, "c_clustering": 0.2}), 1_000_000, 0.05, 1e6
        )
        bias, _ = _reference_bound(
            0.95, 1.0, 1.0, 0.01, 10, 2, 1_000_000, 0.05, 1e6, c_q=0.1, c_clustering=0.2
        )
        assert shifted.bias == pytest.approx(bias, rel=1e-12)
        assert shifted.bias > base.bias
        assert shifted.variance == base.variance

    def test_bias_monotone_in_constants(self):
        values = [
            theorem2_bound(
                EXAMPLE.model_copy(update={"c_q": c, "c_clustering": c}), 1_000_000, 0.05, 1e6
            ).bias
            for c in (0.0, 0.5, 1.0, 2.0)
        ]
        assert values == sorted(values)
        assert len(set(values)) == 4

    def test_variance_vanishes_with_sample_size(self):
        sizes = [10**6, 10**8, 10**10, 10**12]
        results = [theorem2_bound(EXAMPLE, n, 0.05, 1e6) for n in sizes]
        variances = [r.variance for r in results]
        assert all(a > b for a, b in itertools.pairwise(variances))
        assert variances[-1] / variances[0] < 1e-2
        assert len({r.bias for r in results}) == 1

    def test_precondition_margin(self):
        with pytest.raises(BoundUndefinedError) as excinfo:
            theorem2_bound(EXAMPLE, 100, 0.05, 1e6)
        assert excinfo.value.margin < 1

    def test_single_cluster_is_undefined(self):
        with pytest.raises(BoundUndefinedError):
            theorem2_bound(EXAMPLE.model_copy(update={"n_s": 1}), 1_000_000, 0.05, 1e6)

    @pytest.mark.parametrize(
        "n, delta, card", [(0, 0.05, 1e6), (1000, 0.0, 1e6), (1000, 1.0, 1e6), (1000, 0.05, 0.5)]
    )
    def test_invalid_arguments(self, n, delta, card):
        with pytest.raises(InvalidArgumentError):
            theorem2_bound(EXAMPLE, n, delta, card)

    def test_inputs_validated(self):
        with pytest.raises(ValidationError):
            BoundInputs(gamma=0.9, r_max=1.0, c_h=1.0, c_uni=0.0, n_s=4, n_a=2)
        with pytest.raises(ValidationError):
            BoundInputs(gamma=1.0, r_max=1.0, c_h=1.0, c_uni=0.1, n_s=4, n_a=2)


class TestTheorem2Sweep:
    """The bound traded off over the number of clusters."""

    @pytest.fixture
    def sweep_inputs(self) -> BoundInputs:
        return BoundInputs(gamma=0.9, r_max=1.0, c_h=1.0, c_uni=1.0, n_s=2, n_a=2)

    def test_interior_minimum(self, sweep_inputs):
        results = theorem2_sweep(sweep_inputs, range(4, 101), 1_000_000, 0.05, 1e4)
        totals = {n_s: r.total for n_s, r in results.items()}
        best = min(totals, key=totals.get)
        assert 4 < best < 100
        assert totals[best] < totals[4]
        assert totals[best] < totals[100]
        assert 30 <= best <= 70

    def test_coverage_follows_cluster_count(self, sweep_inputs):
        results = theorem2_sweep(sweep_inputs, [10], 1_000_000, 0.05, 1e4)
        direct = theorem2_bound(
            sweep_inputs.model_copy(update={"n_s": 10, "c_uni": 1 / 20}), 1_000_000, 0.05, 1e4
        )
        assert results[10] == direct

    def test_undefined_points_skipped(self, sweep_inputs):
        results = theorem2_sweep(sweep_inputs, [1, 10, 200], 1_000_000, 0.05, 1e4)
        assert list(results) == [10]


class TestThetaCardinality:
    def test_default_box(self):
        assert theta_cardinality(2) == pytest.approx(2000.0**2)
        assert theta_cardinality(3) == pytest.approx(2000.0**3)

    def test_custom_grid(self):
        assert theta_cardinality(3, box=(0.0, 1.0), resolution=0.5) == pytest.approx(8.0)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            theta_cardinality(0)
        with pytest.raises(InvalidArgumentError):
            theta_cardinality(2, box=(1.0, 1.0))


class TestIrlQError:
    def test_constant_shift_is_free(self):
        q = _q(np.random.default_rng(0).normal(size=(5, 2)))
        shifted = QFunction(q.table + 3.7, q.index)
        assert irl_q_error(shifted, q) == pytest.approx(0.0, abs=1e-12)

    def test_half_range_of_difference(self):
        q = _q(np.zeros((3, 2)))
        table = np.zeros((3, 2))
        table[1, 0] = 0.2
        assert irl_q_error(QFunction(table, q.index), q) == pytest.approx(0.1)


class TestOptimalAggregationError:
    """Exhaustive partition search against brute force."""

    @pytest.mark.parametrize("n_s", [1, 2, 3, 4])
    def test_matches_brute_force(self, n_s):
        table = np.random.default_rng(n_s).normal(size=(6, 2))
        assert optimal_aggregation_error(_q(table), n_s) == pytest.approx(
            _brute_force_error(table, n_s)
        )

    def test_zero_for_singletons(self):
        q = _q(np.random.default_rng(5).normal(size=(5, 2)))
        assert optimal_aggregation_error(q, 5) == 0.0

    def test_never_above_any_partition(self):
        q = _q(np.random.default_rng(6).normal(size=(7, 2)))
        aggregation = cluster_states(q, None, 3)
        assert optimal_aggregation_error(q, 3) <= aggregation_q_error(q, aggregation) + 1e-12

    def test_state_limit(self):
        with pytest.raises(DiagnosticUnavailableError):
            optimal_aggregation_error(_q(np.zeros((11, 2))), 2)

    def test_n_s_range(self):
        with pytest.raises(InvalidArgumentError):
            optimal_aggregation_error(_q(np.zeros((3, 2))), 0)
        with pytest.raises(InvalidArgumentError):
            optimal_aggregation_error(_q(np.zeros((3, 2))), 4)


class TestClusteringConstant:
    def test_identity_is_optimal(self):
        q = _q(np.random.default_rng(7).normal(size=(5, 2)))
        assert clustering_constant(q, Aggregation.identity(q.index)) == 0.0

    def test_non_negative(self):
        q = _q(np.random.default_rng(8).normal(size=(8, 2)))
        aggregation = Aggregation(q.index, [0, 1, 0, 1, 0, 1, 0, 1], [0, 1])
        value = clustering_constant(q, aggregation)
        assert value >= 0.0
        assert value == pytest.approx(
            aggregation_q_error(q, aggregation) - optimal_aggregation_error(q, 2)
        )


class TestBoundReport:
    """Test measured constants on a simulated bus instance."""

    @pytest.fixture(scope="class")
    def instance(self, small_bus_data):
        mdp, dataset = small_bus_data
        q_hat = estimate_q(dataset, 0.9, IrlOptions(anchor_action=REPLACE)).q
        aggregation = cluster_states(q_hat, dataset.support(), 4, seed=0)
        estimate = nfmle_estimate(
            dataset, aggregation, ThetaVector.of(0.5, 1.0), reward=mdp.reward
        )
        return mdp, dataset, q_hat, aggregation, estimate

    def test_with_true_parameters(self, instance):
        mdp, dataset, q_hat, aggregation, estimate = instance
        report = build_bound_report(
            dataset, mdp, q_hat, aggregation, estimate, theta_star=[0.3, 3.0]
        )
        assert report.n == dataset.n
        assert report.n_s == 4
        assert report.eps_q is not None and report.eps_q > 0
        assert report.theta_gap == pytest.approx(
            math.sqrt(estimate.squared_error([0.3, 3.0]))
        )
        assert report.c_clustering is not None and report.c_clustering >= 0
        assert 0 < report.c_uni <= 1
        names = [record.name for record in report.inequalities]
        assert names[0] == "likelihood_gap"
        assert report.inequalities[0].holds

    def test_without_true_parameters(self, instance):
        mdp, dataset, q_hat, aggregation, estimate = instance
        report = build_bound_report(dataset, mdp, q_hat, aggregation, estimate)
        assert report.eps_q is None
        assert report.theta_gap is None
        assert report.inequalities == []
        assert any("theta* unknown" in note for note in report.notes)

    def test_format_table(self, instance):
        mdp, dataset, q_hat, aggregation, estimate = instance
        report = build_bound_report(
            dataset, mdp, q_hat, aggregation, estimate, theta_star=[0.3, 3.0]
        )
        text = format_bound_table(report)
        assert "Bound Constants" in text
        assert "eps_dis_hat" in text
        assert "Inequalities" in text
        assert "likelihood_gap" in text
