"""Observed transition datasets and their generation metadata."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from ..exceptions import InvalidArgumentError
from .mdp import FloatArray, IntArray, StateIndex, _as_points


class DatasetMeta(BaseModel):
    """Sidecar metadata persisted next to a dataset CSV."""

    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(ge=0.0, lt=1.0, description="Discount of the generating MDP")
    n_actions: int = Field(ge=2, description="Number of actions")
    env_digest: str | None = Field(default=None, description="Generating MDP digest")
    seed: int | None = Field(default=None, description="Generator seed")
    n: int = Field(ge=1, description="Number of transitions")
    env: dict[str, Any] | None = Field(
        default=None, description="Environment config used for simulation"
    )
    theta_true: list[float] | None = Field(
        default=None, description="Parameters used for simulation"
    )
    init: str | None = Field(default=None, description="Initial-state mode")
    weighted: bool = Field(default=False, description="Rows carry explicit weights")


@dataclass(frozen=True)
class Dataset:
    """Transitions (s_i, a_i, s'_i) with optional non-negative row weights."""

    states: FloatArray
    actions: IntArray
    next_states: FloatArray
    meta: DatasetMeta
    weights: FloatArray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        states = _as_points(self.states).copy()
        next_states = _as_points(self.next_states).copy()
        actions = np.array(self.actions, dtype=np.int64).reshape(-1)
        n = len(actions)
        if n < 1:
            raise InvalidArgumentError("A dataset needs at least one transition")
        if states.shape != next_states.shape or len(states) != n:
            raise InvalidArgumentError(
                f"Inconsistent dataset shapes: states {states.shape}, "
                f"actions {actions.shape}, next states {next_states.shape}"
            )
        if np.any(actions < 0) or np.any(actions >= self.meta.n_actions):
            raise InvalidArgumentError(
                f"Action indices must lie in [0, {self.meta.n_actions})"
            )
        if not (np.all(np.isfinite(states)) and np.all(np.isfinite(next_states))):
            raise InvalidArgumentError("Dataset states must be finite")
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if weights.size == 0:
            weights = np.ones(n)
        if len(weights) != n or np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidArgumentError("Weights must be finite, non-negative, one per row")
        if weights.sum() <= 0:
            raise InvalidArgumentError("Weights must not all be zero")
        if self.meta.n != n:
            object.__setattr__(self, "meta", self.meta.model_copy(update={"n": n}))
        for name, array in (
            ("states", states),
            ("actions", actions),
            ("next_states", next_states),
            ("weights", weights),
        ):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def n_actions(self) -> int:
        return self.meta.n_actions

    @property
    def gamma(self) -> float:
        return self.meta.gamma

    @property
    def is_weighted(self) -> bool:
        return bool(self.meta.weighted or np.any(self.weights != 1.0))

    def support(self) -> StateIndex:
        """Distinct states seen as sources or successors."""
        return StateIndex.from_points(np.vstack([self.states, self.next_states]))

    def with_states(
        self, states: ArrayLike | None = None, next_states: ArrayLike | None = None
    ) -> Dataset:
        """Copy with source and/or next states replaced row by row."""
        return replace(
            self,
            states=self.states if states is None else _as_points(states),
            next_states=self.next_states if next_states is None else _as_points(next_states),
        )

    def permuted(self, order: ArrayLike) -> Dataset:
        idx = np.asarray(order, dtype=np.int64)
        return replace(
            self,
            states=self.states[idx],
            actions=self.actions[idx],
            next_states=self.next_states[idx],
            weights=self.weights[idx],
        )
