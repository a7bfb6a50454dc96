"""Finite MDP primitives: state tables, parameter vectors, Q tables and reward families."""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..exceptions import InvalidArgumentError, RewardBoundError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

STOCHASTIC_ATOL = 1e-9


def _as_points(points: ArrayLike) -> FloatArray:
    """Coerce state points to a 2-D float array; a flat vector means 1-D states."""
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise InvalidArgumentError(
            f"State points must be a matrix of shape (n, d), got shape {array.shape}"
        )
    return array


def _key(point: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(x) for x in point)


@dataclass(frozen=True)
class StateIndex:
    """Ordered table of state points with constant-time point -> row lookup."""

    points: FloatArray
    _lookup: dict[tuple[float, ...], int] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        points = _as_points(self.points).copy()
        if points.shape[0] < 1:
            raise InvalidArgumentError("A state table needs at least one state")
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError("State points must be finite")
        lookup: dict[tuple[float, ...], int] = {}
        for row, point in enumerate(points):
            key = _key(point)
            if key in lookup:
                raise InvalidArgumentError(f"Duplicate state point {key}")
            lookup[key] = row
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "_lookup", lookup)

    @classmethod
    def from_points(cls, points: ArrayLike) -> StateIndex:
        """Build an index over the distinct rows of ``points`` in lexicographic order."""
        array = _as_points(points)
        return cls(np.unique(array, axis=0))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def contains(self, point: ArrayLike) -> bool:
        return _key(np.atleast_1d(np.asarray(point, dtype=np.float64))) in self._lookup

    def index_of(self, point: ArrayLike) -> int:
        """Row of a single state point."""
        key = _key(np.atleast_1d(np.asarray(point, dtype=np.float64)))
        try:
            return self._lookup[key]
        except KeyError:
            raise InvalidArgumentError(f"Unknown state {key}") from None

    def indices_of(self, points: ArrayLike) -> IntArray:
        """Rows of many state points; raises on the first unknown point."""
        array = _as_points(points)
        if array.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"State dimension mismatch: expected {self.dim}, got {array.shape[1]}"
            )
        unique, inverse = np.unique(array, axis=0, return_inverse=True)
        rows = np.fromiter(
            (self.index_of(point) for point in unique), dtype=np.int64, count=len(unique)
        )
        return rows[inverse.reshape(-1)]

    def tolist(self) -> list[list[float]]:
        return [list(map(float, point)) for point in self.points]


@dataclass(frozen=True)
class ThetaVector:
    """Structural parameters, optionally constrained to a per-coordinate box."""

    values: FloatArray
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64)).copy()
        if values.ndim != 1 or values.size == 0:
            raise InvalidArgumentError("theta must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"theta must be finite, got {values.tolist()}")
        bounds = self.bounds
        if bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
            if len(bounds) != values.size:
                raise InvalidArgumentError(
                    f"Expected {values.size} bounds, got {len(bounds)}"
                )
            for k, (lo, hi) in enumerate(bounds):
                if lo > hi:
                    raise InvalidArgumentError(f"Empty bound interval for theta[{k}]")
                if not lo <= values[k] <= hi:
                    raise InvalidArgumentError(
                        f"theta[{k}]={values[k]} outside bounds [{lo}, {hi}]"
                    )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def of(cls, *values: float) -> ThetaVector:
        return cls(np.array(values, dtype=np.float64))

    def __len__(self) -> int:
        return int(self.values.size)

    def project(self, candidate: ArrayLike) -> ThetaVector:
        """Clip a candidate vector into this vector's box (identity without bounds)."""
        array = np.asarray(candidate, dtype=np.float64)
        if self.bounds is not None:
            lo = np.array([b[0] for b in self.bounds])
            hi = np.array([b[1] for b in self.bounds])
            array = np.clip(array, lo, hi)
        return ThetaVector(array, self.bounds)

    def squared_distance(self, other: ThetaVector | ArrayLike) -> float:
        other_values = other.values if isinstance(other, ThetaVector) else other
        diff = self.values - np.asarray(other_values, dtype=np.float64)
        return float(diff @ diff)

    def tolist(self) -> list[float]:
        return [float(v) for v in self.values]


@dataclass(frozen=True)
class QFunction:
    """Tabular (state, action) -> real map over an explicit state table."""

    table: FloatArray
    index: StateIndex

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2 or table.shape[0] != len(self.index):
            raise InvalidArgumentError(
                f"Q table shape {table.shape} does not match {len(self.index)} states"
            )
        if table.shape[1] < 1:
            raise InvalidArgumentError("Q table needs at least one action column")
        if not np.all(np.isfinite(table)):
            raise InvalidArgumentError("Q table entries must be finite")
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n_states(self) -> int:
        return int(self.table.shape[0])

    @property
    def n_actions(self) -> int:
        return int(self.table.shape[1])

    def row(self, point: ArrayLike) -> FloatArray:
        return self.table[self.index.index_of(point)]

    def rows(self, points: ArrayLike) -> FloatArray:
        return self.table[self.index.indices_of(points)]

    def with_table(self, table: ArrayLike) -> QFunction:
        return QFunction(np.asarray(table, dtype=np.float64), self.index)


# Reward families ---------------------------------------------------------------

FeatureFn = Callable[[FloatArray, IntArray], FloatArray]


@dataclass(frozen=True)
class LinearReward:
    """Reward r(s, a; theta) = phi(s, a) . theta for a named feature family."""

    kind: str
    params: dict[str, Any]
    n_params: int
    feature_fn: FeatureFn = field(repr=False, compare=False)

    def features(self, points: ArrayLike, actions: ArrayLike) -> FloatArray:
        """Feature matrix of shape (n, n_params) for paired points and actions."""
        array = _as_points(points)
        acts = np.asarray(actions, dtype=np.int64).reshape(-1)
        if len(acts) != len(array):
            raise InvalidArgumentError("points and actions must have equal length")
        phi = np.asarray(self.feature_fn(array, acts), dtype=np.float64)
        return phi.reshape(len(array), self.n_params)

    def evaluate(
        self, points: ArrayLike, actions: ArrayLike, theta: ThetaVector
    ) -> FloatArray:
        self.check_theta(theta)
        return self.features(points, actions) @ theta.values

    def check_theta(self, theta: ThetaVector) -> None:
        if len(theta) != self.n_params:
            raise InvalidArgumentError(
                f"Reward family '{self.kind}' takes {self.n_params} parameters, "
                f"got {len(theta)}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": self.params}


RewardFactory = Callable[[dict[str, Any], StateIndex, int], LinearReward]

_REWARD_FAMILIES: dict[str, RewardFactory] = {}


def register_reward_family(kind: str) -> Callable[[RewardFactory], RewardFactory]:
    """Decorator registering a reward family under ``kind``."""

    def decorator(factory: RewardFactory) -> RewardFactory:
        _REWARD_FAMILIES[kind] = factory
        return factory

    return decorator


def reward_families() -> list[str]:
    _ensure_builtin_families()
    return sorted(_REWARD_FAMILIES)


def build_reward(
    kind: str, params: dict[str, Any], states: StateIndex, n_actions: int
) -> LinearReward:
    """Instantiate a registered reward family for a state table."""
    _ensure_builtin_families()
    try:
        factory = _REWARD_FAMILIES[kind]
    except KeyError:
        raise InvalidArgumentError(
            f"Unknown reward kind '{kind}'; registered: {sorted(_REWARD_FAMILIES)}"
        ) from None
    return factory(params, states, n_actions)


def _ensure_builtin_families() -> None:
    # Environment modules register their families on import.
    from .. import envs  # noqa: F401


@register_reward_family("linear")
def _linear_family(
    params: dict[str, Any], states: StateIndex, n_actions: int
) -> LinearReward:
    """Explicit per-state feature table ``features[state][action][k]``."""
    table = np.asarray(params.get("features"), dtype=np.float64)
    if table.ndim != 3 or table.shape[:2] != (len(states), n_actions):
        raise InvalidArgumentError(
            f"'linear' features must have shape ({len(states)}, {n_actions}, K), "
            f"got {table.shape}"
        )

    def feature_fn(points: FloatArray, actions: IntArray) -> FloatArray:
        return table[states.indices_of(points), actions]

    return LinearReward(
        kind="linear",
        params={"features": table.tolist()},
        n_params=int(table.shape[2]),
        feature_fn=feature_fn,
    )


def linear_reward(features: ArrayLike, states: StateIndex) -> LinearReward:
    table = np.asarray(features, dtype=np.float64)
    return build_reward("linear", {"features": table}, states, int(table.shape[1]))


# MDP -----------------------------------------------------------------------------


@dataclass(frozen=True)
class MdpSpec:
    """Finite entropy-regularized MDP with a linear reward family.

    ``transition[s, a, s']`` is row-stochastic. ``r_max``, when given, is the
    declared reward bound every evaluation must respect.
    """

    states: StateIndex
    actions: tuple[str, ...]
    reward: LinearReward
    transition: FloatArray
    gamma: float
    r_max: float | None = None
    _features: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        actions = tuple(str(a) for a in self.actions)
        if len(actions) < 2:
            raise InvalidArgumentError("An MDP needs at least two actions")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgumentError(f"gamma must lie in [0, 1), got {self.gamma}")
        n_states, n_actions = len(self.states), len(actions)
        transition = np.asarray(self.transition, dtype=np.float64)
        if transition.shape != (n_states, n_actions, n_states):
            raise InvalidArgumentError(
                f"Transition shape {transition.shape} does not match "
                f"({n_states}, {n_actions}, {n_states})"
            )
        if np.any(transition < 0) or not np.all(np.isfinite(transition)):
            raise InvalidArgumentError("Transition entries must be finite and >= 0")
        row_sums = transition.sum(axis=2)
        worst = float(np.max(np.abs(row_sums - 1.0)))
        if worst > STOCHASTIC_ATOL:
            raise InvalidArgumentError(
                f"Transition rows must sum to 1 (worst deviation {worst:.3e})"
            )
        if self.r_max is not None and not self.r_max >= 0:
            raise InvalidArgumentError("r_max must be non-negative")
        transition = transition.copy()
        transition.setflags(write=False)

        grid = np.repeat(self.states.points, n_actions, axis=0)
        acts = np.tile(np.arange(n_actions, dtype=np.int64), n_states)
        features = self.reward.features(grid, acts).reshape(
            n_states, n_actions, self.reward.n_params
        )
        features.setflags(write=False)

        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "_features", features)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_params(self) -> int:
        return self.reward.n_params

    @property
    def features(self) -> FloatArray:
        """Feature tensor of shape (n_states, n_actions, n_params)."""
        return self._features

    def reward_table(self, theta: ThetaVector) -> FloatArray:
        """Reward matrix r(s, a; theta), checked against ``r_max``."""
        self.reward.check_theta(theta)
        table = self._features @ theta.values
        if self.r_max is not None:
            worst = float(np.max(np.abs(table)))
            if worst > self.r_max:
                raise RewardBoundError(
                    f"|r| reaches {worst:.6g} above declared R_max={self.r_max:.6g} "
                    f"at theta={theta.tolist()}",
                    value=worst,
                    r_max=self.r_max,
                )
        return table

    def q_bound(self, r_max: float) -> float:
        """Sup-norm bound (R_max + log n_a)/(1 - gamma) on solver outputs."""
        return (r_max + float(np.log(self.n_actions))) / (1.0 - self.gamma)

    def to_dict(self) -> dict[str, Any]:
        return {
            "states": self.states.tolist(),
            "actions": list(self.actions),
            "gamma": self.gamma,
            "transition": self.transition.tolist(),
            "reward": self.reward.to_dict(),
            "r_max": self.r_max,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MdpSpec:
        try:
            states = StateIndex(np.asarray(data["states"], dtype=np.float64))
            actions = tuple(data["actions"])
            reward_doc = data["reward"]
            reward = build_reward(
                reward_doc["kind"], dict(reward_doc.get("params", {})), states, len(actions)
            )
            return cls(
                states=states,
                actions=actions,
                reward=reward,
                transition=np.asarray(data["transition"], dtype=np.float64),
                gamma=float(data["gamma"]),
                r_max=data.get("r_max"),
            )
        except KeyError as e:
            raise InvalidArgumentError(f"MDP document is missing field {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> MdpSpec:
        return cls.from_dict(json.loads(text))

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        logger.debug(f"Wrote MDP ({self.n_states} states) to {path}")

    @classmethod
    def load(cls, path: Path) -> MdpSpec:
        return cls.from_json(path.read_text(encoding="utf-8"))

    def digest(self) -> str:
        """Stable short content hash, recorded in dataset metadata."""
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def theta_from(values: ThetaVector | Sequence[float] | ArrayLike) -> ThetaVector:
    if isinstance(values, ThetaVector):
        return values
    return ThetaVector(np.asarray(values, dtype=np.float64))
