"""State aggregation by Q-vector clustering, plus the raw-value discretization baseline."""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np
from numpy.typing import ArrayLike
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from ..exceptions import InvalidArgumentError
from ..models.aggregation import Aggregation
from ..models.mdp import FloatArray, IntArray, QFunction, StateIndex, _as_points

logger = logging.getLogger(__name__)

RESEED_ATTEMPTS = 3


def q_distance(q: QFunction, s: ArrayLike, s_prime: ArrayLike) -> float:
    """Chebyshev distance between the Q-vectors of two states."""
    return float(np.max(np.abs(q.row(s) - q.row(s_prime))))


def chebyshev_medoid(vectors: FloatArray) -> int:
    """Row minimizing the largest Chebyshev distance to the other rows."""
    distances = np.max(np.abs(vectors[:, None, :] - vectors[None, :, :]), axis=2)
    return int(np.argmin(distances.max(axis=1)))


def _canonical(labels: IntArray) -> IntArray:
    """Relabel clusters in order of their first member."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(labels.max() + 1, dtype=np.int64)
    remap[np.unique(labels)[order]] = np.arange(len(order))
    return remap[labels]


def _from_labels(index: StateIndex, vectors: FloatArray, labels: IntArray) -> Aggregation:
    labels = _canonical(labels)
    n_s = int(labels.max()) + 1
    reps = np.empty(n_s, dtype=np.int64)
    for k in range(n_s):
        members = np.flatnonzero(labels == k)
        reps[k] = members[chebyshev_medoid(vectors[members])]
    return Aggregation(index, labels, reps, vectors[reps])


def cluster_states(
    q: QFunction,
    states: StateIndex | ArrayLike | None,
    n_s: int,
    seed: int = 0,
    restarts: int = 10,
) -> Aggregation:
    """K-means on Q-vectors with Chebyshev-medoid representatives.

    Args:
        q: Q-function whose rows embed the states.
        states: States to aggregate (defaults to every state of ``q``).
        n_s: Number of clusters.
        seed: Seed for k-means++ initialization.
        restarts: Independent k-means++ runs; the lowest inertia wins.

    Returns:
        Aggregation whose representatives are actual states.
    """
    if states is None:
        index = q.index
    elif isinstance(states, StateIndex):
        index = states
    else:
        index = StateIndex(_as_points(states))
    vectors = q.rows(index.points)
    n_states = len(index)
    if not 1 <= n_s <= n_states:
        raise InvalidArgumentError(f"n_s must lie in [1, {n_states}], got {n_s}")
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be >= 1, got {restarts}")

    if n_s == n_states:
        return Aggregation.identity(index, vectors)
    if n_s == 1:
        return _from_labels(index, vectors, np.zeros(n_states, dtype=np.int64))

    n_distinct = len(np.unique(vectors, axis=0))
    if n_distinct < n_s:
        raise InvalidArgumentError(
            f"Only {n_distinct} distinct Q-vectors for n_s={n_s} clusters"
        )

    for attempt in range(RESEED_ATTEMPTS):
        model = KMeans(
            n_clusters=n_s,
            init="k-means++",
            n_init=restarts,
            random_state=seed + attempt,
            tol=0.0,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            labels = model.fit_predict(vectors).astype(np.int64)
        if len(np.unique(labels)) == n_s:
            break
        logger.debug(f"K-means left empty clusters (attempt {attempt + 1}); reseeding")
    else:
        raise InvalidArgumentError(
            f"K-means could not populate {n_s} clusters after {RESEED_ATTEMPTS} attempts"
        )

    aggregation = _from_labels(index, vectors, labels)
    logger.debug(
        f"Clustered {n_states} states into {n_s} (inertia {model.inertia_:.4g}, "
        f"eps_dis {aggregation_q_error(q, aggregation):.4g})"
    )
    return aggregation


def project(
    aggregation: Aggregation, s: ArrayLike, fallback_q: ArrayLike | None = None
) -> FloatArray:
    """Representative of ``s``; unseen states need ``fallback_q`` (their Q-vector)."""
    point = np.atleast_1d(np.asarray(s, dtype=np.float64)).reshape(1, -1)
    fallback = None if fallback_q is None else np.asarray(fallback_q).reshape(1, -1)
    return aggregation.project_points(point, fallback)[0]


def aggregation_q_error(q: QFunction, aggregation: Aggregation) -> float:
    """max over states and actions of |Q(s, a) - Q(project(s), a)|."""
    own = q.rows(aggregation.states.points)
    reps = q.rows(aggregation.representative_points)[aggregation.labels]
    return float(np.max(np.abs(own - reps)))


def _cuts_per_dim(n_s: int, dim: int) -> list[int]:
    """Per-dimension cut counts whose product is the largest grid not above n_s."""
    cuts = [max(1, math.floor(n_s ** (1.0 / dim)))] * dim
    grown = True
    while grown:
        grown = False
        for j in range(dim):
            if math.prod(cuts) // cuts[j] * (cuts[j] + 1) <= n_s:
                cuts[j] += 1
                grown = True
    return cuts


def ad_hoc_aggregation(states: StateIndex | ArrayLike, n_s: int) -> Aggregation:
    """Quantile-grid discretization of raw state values into at most n_s cells.

    Each dimension is cut at its empirical quantiles; empty cells are dropped.
    The representative is the member nearest the cell's coordinate median.
    """
    index = states if isinstance(states, StateIndex) else StateIndex(_as_points(states))
    points = index.points
    n_states, dim = points.shape
    if not 1 <= n_s <= n_states:
        raise InvalidArgumentError(f"n_s must lie in [1, {n_states}], got {n_s}")
    if n_s == n_states:
        return Aggregation.identity(index)

    cuts = _cuts_per_dim(n_s, dim)
    cells = np.zeros((n_states, dim), dtype=np.int64)
    for j, k in enumerate(cuts):
        if k > 1:
            edges = np.quantile(points[:, j], np.linspace(0.0, 1.0, k + 1)[1:-1])
            cells[:, j] = np.searchsorted(edges, points[:, j], side="right")
    cell_ids = np.ravel_multi_index(tuple(cells.T), tuple(cuts))
    labels = _canonical(np.unique(cell_ids, return_inverse=True)[1].reshape(-1))

    n_cells = int(labels.max()) + 1
    reps = np.empty(n_cells, dtype=np.int64)
    for c in range(n_cells):
        members = np.flatnonzero(labels == c)
        median = np.median(points[members], axis=0)
        reps[c] = members[int(np.argmin(np.linalg.norm(points[members] - median, axis=1)))]
    if n_cells < n_s:
        logger.debug(f"Ad-hoc grid {cuts} produced {n_cells} non-empty cells for n_s={n_s}")
    return Aggregation(index, labels, reps)
