"""State aggregation: a projection of states onto representative states."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..exceptions import InvalidArgumentError
from .mdp import FloatArray, IntArray, StateIndex, _as_points


@dataclass(frozen=True)
class Aggregation:
    """Partition of ``states`` into clusters, each with a member representative.

    ``labels[i]`` is the cluster of ``states.points[i]`` and
    ``representatives[k]`` is the row (in ``states``) of cluster ``k``'s
    representative. ``rep_q`` optionally stores the representatives' Q-vectors
    for nearest-representative projection of unseen states.
    """

    states: StateIndex
    labels: IntArray
    representatives: IntArray
    rep_q: FloatArray | None = None

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        reps = np.array(self.representatives, dtype=np.int64).reshape(-1)
        n_s = len(reps)
        if len(labels) != len(self.states):
            raise InvalidArgumentError(
                f"{len(labels)} labels for {len(self.states)} states"
            )
        if n_s < 1:
            raise InvalidArgumentError("An aggregation needs at least one representative")
        if len(np.unique(reps)) != n_s:
            raise InvalidArgumentError("Representatives must be distinct")
        if np.any(reps < 0) or np.any(reps >= len(self.states)):
            raise InvalidArgumentError("Representative rows out of range")
        if np.any(labels < 0) or np.any(labels >= n_s):
            raise InvalidArgumentError(f"Labels must lie in [0, {n_s})")
        if np.any(labels[reps] != np.arange(n_s)):
            raise InvalidArgumentError("Each representative must belong to its own cluster")
        rep_q = self.rep_q
        if rep_q is not None:
            rep_q = np.array(rep_q, dtype=np.float64)
            if rep_q.ndim != 2 or rep_q.shape[0] != n_s:
                raise InvalidArgumentError("rep_q must have one row per representative")
            rep_q.setflags(write=False)
        labels.setflags(write=False)
        reps.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "representatives", reps)
        object.__setattr__(self, "rep_q", rep_q)

    @classmethod
    def identity(cls, states: StateIndex, q_table: FloatArray | None = None) -> Aggregation:
        rows = np.arange(len(states), dtype=np.int64)
        return cls(states, rows, rows, q_table)

    @property
    def n_s(self) -> int:
        return len(self.representatives)

    @property
    def representative_points(self) -> FloatArray:
        return self.states.points[self.representatives]

    def members(self, cluster: int) -> IntArray:
        return np.flatnonzero(self.labels == cluster)

    def labels_of(self, points: ArrayLike, fallback_q: ArrayLike | None = None) -> IntArray:
        """Cluster of each point.

        Unassigned points raise unless ``fallback_q`` supplies their Q-vectors
        (one row per point) and ``rep_q`` is set, in which case they join the
        Chebyshev-nearest representative in Q space.
        """
        array = _as_points(points)
        if array.shape[1] != self.states.dim:
            raise InvalidArgumentError(
                f"State dimension mismatch: expected {self.states.dim}, got {array.shape[1]}"
            )
        fallback = None if fallback_q is None else np.asarray(fallback_q, dtype=np.float64)
        if fallback is not None:
            fallback = fallback.reshape(len(array), -1)
        unique, inverse = np.unique(array, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        if fallback is not None:
            first = np.zeros(len(unique), dtype=np.int64)
            first[inverse[::-1]] = np.arange(len(array))[::-1]
            fallback = fallback[first]
        out = np.empty(len(unique), dtype=np.int64)
        for i, point in enumerate(unique):
            if self.states.contains(point):
                out[i] = self.labels[self.states.index_of(point)]
            elif fallback is not None and self.rep_q is not None:
                distances = np.max(np.abs(self.rep_q - fallback[i]), axis=1)
                out[i] = int(np.argmin(distances))
            else:
                raise InvalidArgumentError(
                    f"State {point.tolist()} is not assigned and no fallback is enabled"
                )
        return out[inverse]

    def project_points(
        self, points: ArrayLike, fallback_q: ArrayLike | None = None
    ) -> FloatArray:
        return self.representative_points[self.labels_of(points, fallback_q)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_s": self.n_s,
            "representatives": self.representative_points.tolist(),
            "states": self.states.tolist(),
            "assign": self.labels.tolist(),
            "rep_q": None if self.rep_q is None else self.rep_q.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Aggregation:
        try:
            states = StateIndex(np.asarray(data["states"], dtype=np.float64))
            reps = states.indices_of(np.asarray(data["representatives"], dtype=np.float64))
            aggregation = cls(
                states,
                np.asarray(data["assign"], dtype=np.int64),
                reps,
                None if data.get("rep_q") is None else np.asarray(data["rep_q"]),
            )
        except KeyError as e:
            raise InvalidArgumentError(f"Aggregation document is missing field {e}") from e
        if aggregation.n_s != int(data.get("n_s", aggregation.n_s)):
            raise InvalidArgumentError("n_s does not match the representative list")
        return aggregation

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> Aggregation:
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
