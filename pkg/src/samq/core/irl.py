"""Q-function estimation from choice data without knowledge of the reward.

Choice probabilities are estimated per state bin; the value function is then
identified through an anchor action a0:

    v(s) = gamma * E[v(s') | s, a0] - log pi(a0 | s)
    Q(s, a) = v(s) + log pi(a | s)

This recovers Q exactly up to the anchor action's reward, which is normalized
to zero. The renewal (replace) action of the bus env has a state-independent
continuation and identifies Q up to a single additive constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike

from ..exceptions import CoverageError, InvalidArgumentError
from ..models.config import IrlOptions
from ..models.data import Dataset
from ..models.mdp import FloatArray, IntArray, QFunction, StateIndex, _as_points
from .fixed_point import iterate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateBinner:
    """Maps state points to bins: one per known state, or a uniform product grid."""

    index: StateIndex | None = None
    lower: FloatArray | None = None
    upper: FloatArray | None = None
    bins_per_dim: int = 0

    @classmethod
    def exact(cls, states: StateIndex) -> StateBinner:
        return cls(index=states)

    @classmethod
    def uniform(cls, points: ArrayLike, bins: int) -> StateBinner:
        if bins < 1:
            raise InvalidArgumentError(f"bins must be >= 1, got {bins}")
        array = _as_points(points)
        return cls(lower=array.min(axis=0), upper=array.max(axis=0), bins_per_dim=bins)

    @property
    def n_bins(self) -> int:
        if self.index is not None:
            return len(self.index)
        assert self.lower is not None
        return int(self.bins_per_dim ** len(self.lower))

    def assign(self, points: ArrayLike) -> IntArray:
        if self.index is not None:
            return self.index.indices_of(points)
        assert self.lower is not None and self.upper is not None
        array = _as_points(points)
        width = np.where(self.upper > self.lower, self.upper - self.lower, 1.0)
        cells = np.floor((array - self.lower) / width * self.bins_per_dim).astype(np.int64)
        cells = np.clip(cells, 0, self.bins_per_dim - 1)
        dims = (self.bins_per_dim,) * array.shape[1]
        return np.ravel_multi_index(tuple(cells.T), dims).astype(np.int64)


@dataclass(frozen=True)
class PolicyEstimate:
    """Estimated choice probabilities per bin with the counts behind them."""

    probs: FloatArray
    counts: FloatArray
    binner: StateBinner
    smoothing: float

    def probs_at(self, points: ArrayLike) -> FloatArray:
        return self.probs[self.binner.assign(points)]


@dataclass(frozen=True)
class QEstimate:
    """Estimated Q-function on the dataset's state support."""

    q: QFunction
    anchor_action: int
    fit_residual: float
    policy: PolicyEstimate

    def to_frame(self) -> pd.DataFrame:
        points = self.q.index.points
        frame = pd.DataFrame(points, columns=[f"s_{k}" for k in range(points.shape[1])])
        for a in range(self.q.n_actions):
            frame[f"q_{a}"] = self.q.table[:, a]
        return frame

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def estimate_policy(
    dataset: Dataset, bins: int | None = None, smoothing: float = 0.5
) -> PolicyEstimate:
    """Laplace-smoothed action frequencies per bin.

    ``bins=None`` uses one bin per distinct state of the dataset support;
    otherwise each dimension is cut into ``bins`` equal-width intervals.
    """
    if smoothing < 0:
        raise InvalidArgumentError(f"smoothing must be >= 0, got {smoothing}")
    if dataset.n < 1:
        raise InvalidArgumentError("Cannot estimate a policy from an empty dataset")
    support = dataset.support()
    binner = (
        StateBinner.exact(support)
        if bins is None
        else StateBinner.uniform(support.points, bins)
    )
    n_actions = dataset.n_actions
    cells = binner.assign(dataset.states) * n_actions + dataset.actions
    counts = np.bincount(
        cells, weights=dataset.weights, minlength=binner.n_bins * n_actions
    ).reshape(binner.n_bins, n_actions)

    totals = counts.sum(axis=1, keepdims=True) + smoothing * n_actions
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = (counts + smoothing) / totals
    empty = totals[:, 0] == 0
    probs[empty] = 1.0 / n_actions
    logger.debug(
        f"Estimated policy over {binner.n_bins} bins ({int(empty.sum())} without data)"
    )
    return PolicyEstimate(probs, counts, binner, smoothing)


def estimate_value_anchor(
    dataset: Dataset,
    policy: PolicyEstimate,
    gamma: float,
    anchor: int = 0,
    tol: float = 1e-10,
    *,
    max_iter: int = 10000,
    steps: list[float] | None = None,
) -> tuple[FloatArray, float]:
    """Anchor-action value iteration over bins.

    ``steps`` collects the successive-difference sequence when given.

    Returns:
        Value per bin (NaN for bins no support state falls into) and the final
        successive-difference residual.
    """
    n_actions = dataset.n_actions
    if not 0 <= anchor < n_actions:
        raise InvalidArgumentError(f"anchor {anchor} outside [0, {n_actions})")
    if not 0.0 <= gamma < 1.0:
        raise InvalidArgumentError(f"gamma must lie in [0, 1), got {gamma}")
    binner = policy.binner
    n_bins = binner.n_bins

    active = np.zeros(n_bins, dtype=bool)
    active[binner.assign(dataset.support().points)] = True

    mask = dataset.actions == anchor
    src = binner.assign(dataset.states[mask])
    dst = binner.assign(dataset.next_states[mask])
    mass = np.bincount(
        src * n_bins + dst, weights=dataset.weights[mask], minlength=n_bins * n_bins
    ).reshape(n_bins, n_bins)
    row_mass = mass.sum(axis=1)

    # gamma = 0 never reads the anchor kernel
    uncovered = np.flatnonzero(active & (row_mass <= 0))
    if gamma > 0 and uncovered.size:
        bad = int(uncovered[0])
        where = (
            f"state {binner.index.points[bad].tolist()}"
            if binner.index is not None
            else f"bin {bad}"
        )
        raise CoverageError(
            f"No anchor-action (a={anchor}) transitions from {where}; "
            f"{uncovered.size} bins uncovered",
            cell=(bad,),
        )

    with np.errstate(divide="ignore"):
        log_anchor = np.log(policy.probs[:, anchor])
    if np.any(~np.isfinite(log_anchor[active])):
        raise CoverageError(
            "Anchor action has zero estimated probability; use smoothing > 0",
            cell=(int(np.flatnonzero(active & ~np.isfinite(log_anchor))[0]),),
        )
    kernel = np.zeros_like(mass)
    covered = row_mass > 0
    kernel[covered] = mass[covered] / row_mass[covered, None]
    cost = np.where(active, -log_anchor, 0.0)

    result = iterate(
        lambda v: gamma * np.einsum("bc,c->b", kernel, v) + cost,
        np.zeros(n_bins),
        modulus=gamma,
        tol=tol,
        max_iter=max_iter,
        label="anchor value iteration",
        steps=steps,
    )
    values = np.where(active, result.value, np.nan)
    return values, result.residual


def estimate_q(dataset: Dataset, gamma: float, opts: IrlOptions | None = None) -> QEstimate:
    """Estimate Q on every state of the dataset support."""
    opts = opts or IrlOptions()
    if abs(dataset.gamma - gamma) > 1e-12:
        raise InvalidArgumentError(
            f"gamma={gamma} is inconsistent with dataset gamma={dataset.gamma}"
        )
    policy = estimate_policy(dataset, opts.bins, opts.smoothing)
    values, residual = estimate_value_anchor(
        dataset,
        policy,
        gamma,
        opts.anchor_action,
        opts.tol,
        max_iter=opts.max_iter,
    )
    support = dataset.support()
    bins = policy.binner.assign(support.points)
    with np.errstate(divide="ignore"):
        log_probs = np.log(policy.probs[bins])
    if not np.all(np.isfinite(log_probs)):
        raise CoverageError(
            "An action has zero estimated probability at a support state; "
            "use smoothing > 0",
            cell=(int(np.flatnonzero(~np.all(np.isfinite(log_probs), axis=1))[0]),),
        )
    table = values[bins][:, None] + log_probs
    logger.info(
        f"Estimated Q on {len(support)} states (anchor a={opts.anchor_action}, "
        f"residual {residual:.2e})"
    )
    return QEstimate(QFunction(table, support), opts.anchor_action, residual, policy)


def load_q_function(path: Path) -> QFunction:
    """Read a Q table written by :meth:`QEstimate.save`."""
    frame = pd.read_csv(path, float_precision="round_trip")
    state_cols = [c for c in frame.columns if c.startswith("s_")]
    q_cols = [c for c in frame.columns if c.startswith("q_")]
    if not state_cols or len(q_cols) < 2:
        raise InvalidArgumentError(f"{path} is not a Q estimate table")
    return QFunction(
        frame[q_cols].to_numpy(dtype=np.float64),
        StateIndex(frame[state_cols].to_numpy(dtype=np.float64)),
    )
