"""Latent-state transition matrices and PageRank fingerprints.

The default transition matrix is proximity based: for clusters ``i`` and
``j`` it counts ordered pairs of a participant's projected days, one in each
cluster, lying within a distance threshold, then normalises every row. A
temporal-succession matrix over consecutive recorded days is available as
an extension.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist

from staterank.exceptions import StateflowError

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.85
ROW_SUM_TOL = 1e-9
CONTRACTION_SLACK = 1e-15


@dataclass
class TransitionMatrix:
    participant_id: str
    values: np.ndarray
    threshold: float
    counts: np.ndarray = None

    @property
    def k(self):
        return self.values.shape[0]


@dataclass
class StateVector:
    participant_id: str
    values: np.ndarray
    alpha: float
    iterations: int
    converged: bool
    threshold: float = math.nan

    @property
    def entropy(self):
        return state_entropy(self.values)


def _coordinates(points):
    return np.array([[p.x, p.y] for p in points], dtype=np.float64).reshape(-1, 2)


def median_threshold(points):
    """Median pairwise Euclidean distance among ``points``.

    Falls back to 1.0 when there is no positive pairwise distance.
    """
    coords = _coordinates(points)
    distances = pdist(coords) if coords.shape[0] > 1 else np.zeros(0)
    median = float(np.median(distances)) if distances.size else 0.0
    if median <= 0:
        logger.warning('no positive pairwise distance, using threshold 1.0')
        return 1.0
    return median


def _normalise_rows(counts):
    k = counts.shape[0]
    sums = counts.sum(axis=1)
    values = np.full((k, k), 1.0 / k)
    occupied = sums > 0
    values[occupied] = counts[occupied] / sums[occupied, None]
    return values


def _check_labels(labels, k):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise StateflowError('labels must lie in [0, %d)' % k)
    return labels


def build_transition_matrix(points, labels, k, threshold, participant_id=None):
    """Proximity transition matrix for one participant.

    ``R[i, j]`` counts ordered pairs ``(a, b)``, ``a`` in cluster ``i`` and
    ``b`` in cluster ``j``, ``a != b``, with ``d(a, b) <= threshold``. Rows are
    normalised; rows without any pair become uniform.

    :param points: the participant's :class:`~staterank.projection.Point2D`
    :param labels: global cluster label of each point
    """
    points = list(points)
    if not points:
        raise StateflowError('participant %s has no points' % participant_id)
    if not threshold > 0:
        raise StateflowError('threshold must be > 0, got %r' % (threshold,))
    labels = _check_labels(labels, k)
    if labels.size != len(points):
        raise StateflowError('%d labels for %d points' % (labels.size, len(points)))
    participant_id = participant_id or points[0].participant_id

    coords = _coordinates(points)
    near = (cdist(coords, coords) <= threshold).astype(np.float64)
    np.fill_diagonal(near, 0.0)
    membership = np.zeros((len(points), k))
    membership[np.arange(len(points)), labels] = 1.0
    counts = membership.T @ near @ membership
    return TransitionMatrix(participant_id, _normalise_rows(counts), float(threshold),
                            counts=np.rint(counts))


def build_succession_matrix(dates, labels, k, participant_id=None):
    """Counts label pairs of consecutive calendar days, then normalises rows."""
    labels = _check_labels(labels, k)
    by_date = sorted(zip(dates, labels.tolist()))
    counts = np.zeros((k, k))
    for (d0, l0), (d1, l1) in zip(by_date, by_date[1:]):
        if (d1 - d0).days == 1:
            counts[l0, l1] += 1
    return TransitionMatrix(participant_id, _normalise_rows(counts), math.nan,
                            counts=counts)


def pagerank(transition, alpha=DEFAULT_ALPHA, max_iter=1000, tol=1e-10):
    """Power iteration ``p <- (1 - alpha) / k + alpha * T^T p`` from uniform ``p``.

    Stops once the L1 change drops below ``tol``. Hitting ``max_iter`` returns
    the last vector with ``converged=False``.

    :param transition: :class:`TransitionMatrix` or a row-stochastic array
    """
    if isinstance(transition, TransitionMatrix):
        T = transition.values
        participant_id, threshold = transition.participant_id, transition.threshold
    else:
        T = np.asarray(transition, dtype=np.float64)
        participant_id, threshold = None, math.nan
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
        raise StateflowError('transition matrix must be square and nonempty')
    if np.any(T < 0) or not np.allclose(T.sum(axis=1), 1.0, rtol=0, atol=ROW_SUM_TOL):
        raise StateflowError('transition matrix is not row-stochastic')
    if not 0 < alpha < 1:
        raise StateflowError('alpha must lie in (0, 1), got %r' % (alpha,))

    k = T.shape[0]
    teleport = (1.0 - alpha) / k
    p = np.full(k, 1.0 / k)
    first_residual = None
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = teleport + alpha * (T.T @ p)
        residual = float(np.abs(new - p).sum())
        p = new
        if first_residual is None:
            first_residual = residual
        elif iterations % 100 == 0:
            bound = alpha ** (iterations - 1) * first_residual
            assert residual <= bound + CONTRACTION_SLACK, 'power iteration failed to contract'
        if residual < tol:
            converged = True
            break
    if not converged:
        logger.warning('PageRank for %s did not converge in %d iterations',
                       participant_id, max_iter)
    return StateVector(participant_id, p, alpha, iterations, converged, threshold)


def state_entropy(values):
    """Shannon entropy in bits."""
    values = np.asarray(values, dtype=np.float64)
    values = values[values > 0]
    return float(-(values * np.log2(values)).sum())


def fingerprint(participant_id, points, labels, k, threshold=None,
                alpha=DEFAULT_ALPHA, max_iter=1000, tol=1e-10, mode='proximity'):
    """The participant's ``(1, k)`` PageRank state vector.

    :param threshold: a positive distance, or ``None`` for
        :func:`median_threshold` over the participant's own points
    :param mode: ``"proximity"`` (default) or ``"succession"``
    """
    points = list(points)
    if mode == 'proximity':
        if threshold is None:
            threshold = median_threshold(points)
        transition = build_transition_matrix(points, labels, k, threshold, participant_id)
    elif mode == 'succession':
        if not points:
            raise StateflowError('participant %s has no points' % participant_id)
        transition = build_succession_matrix([p.date for p in points], labels, k,
                                             participant_id)
    else:
        raise StateflowError('unknown transition mode %r' % (mode,))
    vector = pagerank(transition, alpha=alpha, max_iter=max_iter, tol=tol)
    vector.participant_id = participant_id
    return vector


def fingerprint_cohort(points, labels, k, threshold=None, alpha=DEFAULT_ALPHA,
                       max_iter=1000, tol=1e-10, mode='proximity'):
    """Fingerprints for every participant, sorted by participant id.

    :param points: all projected days
    :param labels: the global cluster label of each point
    """
    grouped = OrderedDict()
    for point, label in zip(points, labels):
        grouped.setdefault(point.participant_id, ([], []))
        grouped[point.participant_id][0].append(point)
        grouped[point.participant_id][1].append(int(label))
    return [fingerprint(pid, grouped[pid][0], grouped[pid][1], k, threshold,
                        alpha, max_iter, tol, mode)
            for pid in sorted(grouped)]


def fingerprints_frame(vectors):
    k = len(vectors[0].values) if vectors else 0
    rows = []
    for vector in vectors:
        row = OrderedDict([('participant_id', vector.participant_id)])
        for i, value in enumerate(vector.values, 1):
            row['v%d' % i] = float(value)
        row['alpha'] = vector.alpha
        row['threshold'] = vector.threshold
        row['converged'] = bool(vector.converged)
        row['entropy'] = vector.entropy
        rows.append(row)
    columns = (['participant_id'] + ['v%d' % i for i in range(1, k + 1)]
               + ['alpha', 'threshold', 'converged', 'entropy'])
    return pd.DataFrame(rows, columns=columns)


def read_fingerprints(path_or_buffer):
    frame = pd.read_csv(path_or_buffer, dtype={'participant_id': str},
                        float_precision='round_trip')
    value_columns = [c for c in frame.columns if c.startswith('v') and c[1:].isdigit()]
    value_columns.sort(key=lambda c: int(c[1:]))
    vectors = []
    for row in frame.to_dict('records'):
        converged = row['converged']
        if isinstance(converged, str):
            converged = converged.strip().lower() == 'true'
        vectors.append(StateVector(
            participant_id=row['participant_id'],
            values=np.array([row[c] for c in value_columns], dtype=np.float64),
            alpha=float(row['alpha']),
            iterations=0,
            converged=bool(converged),
            threshold=float(row['threshold']),
        ))
    return vectors
