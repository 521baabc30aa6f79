"""K-means with k-means++ seeding and silhouette based model selection."""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from staterank.exceptions import ClusteringError
from staterank.utils import spawn_seeds

logger = logging.getLogger(__name__)

SILHOUETTE_CHUNK = 1024


@dataclass
class ClusterModel:
    """A fitted K-means model.

    :param centroids: ``(k, n_features)`` array
    :param labels: cluster index for every input row
    :param inertia: total within-cluster squared Euclidean distance
    """

    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    seed: int
    n_iter: int = 0
    scores: dict = field(default_factory=dict)

    def predict(self, points):
        return _assign(_as_points(points), self.centroids)[0]

    def as_dict(self):
        data = OrderedDict([
            ('k', int(self.k)),
            ('centroids', [[float(v) for v in row] for row in self.centroids]),
            ('seed', int(self.seed)),
            ('inertia', float(self.inertia)),
        ])
        if self.scores:
            data['silhouette'] = OrderedDict((str(k), float(v))
                                             for k, v in sorted(self.scores.items()))
        return data


@dataclass
class KSelection:
    best_k: int
    scores: dict
    model: ClusterModel


def _as_points(points):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise ClusteringError('points must be a 2-d array')
    return points


def _squared_distances(points, centroids):
    d2 = np.empty((points.shape[0], centroids.shape[0]))
    for j, centroid in enumerate(centroids):
        diff = points - centroid
        d2[:, j] = np.einsum('ij,ij->i', diff, diff)
    return d2


def _assign(points, centroids):
    d2 = _squared_distances(points, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(points.shape[0]), labels]


def _kmeans_plus_plus(points, k, rng):
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    closest = _squared_distances(points, points[chosen]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            index = int(rng.choice(n, p=closest / total))
        else:
            # every remaining point coincides with a centroid
            remaining = np.setdiff1d(np.arange(n), chosen)
            index = int(rng.choice(remaining))
        chosen.append(index)
        closest = np.minimum(closest, _squared_distances(points, points[[index]]).ravel())
    return points[chosen].copy()


def _repair_empty(labels, cost, k):
    """Moves the costliest point of a multi-member cluster into each empty cluster."""
    labels = labels.copy()
    cost = cost.copy()
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        candidates = np.flatnonzero(movable)
        victim = candidates[np.argmax(cost[candidates])]
        counts[labels[victim]] -= 1
        labels[victim] = empty
        counts[empty] = 1
        cost[victim] = 0.0
    return labels


def _centroids(points, labels, k):
    centroids = np.zeros((k, points.shape[1]))
    np.add.at(centroids, labels, points)
    counts = np.bincount(labels, minlength=k)
    return centroids / counts[:, None]


def _lloyd(points, k, rng, max_iter, tol):
    centroids = _kmeans_plus_plus(points, k, rng)
    labels, cost = _assign(points, centroids)
    inertia = cost.sum()
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels = _repair_empty(labels, cost, k)
        centroids = _centroids(points, labels, k)
        labels, cost = _assign(points, centroids)
        new_inertia = cost.sum()
        assert new_inertia <= inertia * (1 + 1e-12) + 1e-12, \
            'Lloyd iteration increased inertia'
        change = (inertia - new_inertia) / inertia if inertia > 0 else 0.0
        inertia = new_inertia
        if change < tol:
            break
    labels = _repair_empty(labels, cost, k)
    centroids = _centroids(points, labels, k)
    diff = points - centroids[labels]
    inertia = float(np.einsum('ij,ij->', diff, diff))
    return centroids, labels, inertia, n_iter


def kmeans_fit(points, k, seed=0, restarts=10, max_iter=300, tol=1e-6):
    """Fits K-means, keeping the best of ``restarts`` k-means++ runs.

    Each restart draws from its own generator derived from ``seed``, so the
    result is reproducible. Ties in inertia keep the earliest restart.

    :raises ClusteringError: if there are fewer points than clusters
    """
    points = _as_points(points)
    n = points.shape[0]
    if k < 1:
        raise ClusteringError('k must be >= 1, got %r' % (k,))
    if n < k:
        raise ClusteringError('cannot fit %d clusters to %d points' % (k, n))

    best = None
    for run, run_seed in enumerate(spawn_seeds(seed, max(1, restarts))):
        rng = np.random.default_rng(run_seed)
        centroids, labels, inertia, n_iter = _lloyd(points, k, rng, max_iter, tol)
        logger.debug('k-means k=%d restart %d: inertia %.6g after %d iterations',
                     k, run, inertia, n_iter)
        if best is None or inertia < best.inertia:
            best = ClusterModel(k=k, centroids=centroids, labels=labels,
                                inertia=inertia, seed=seed, n_iter=n_iter)
    return best


def silhouette(points, labels):
    """Mean silhouette coefficient with Euclidean distance.

    Samples in singleton clusters score 0.

    :raises ClusteringError: for fewer than two clusters, or when all points
        coincide so that only one cluster is effectively present
    """
    points = _as_points(points)
    labels = np.asarray(labels)
    uniques, codes = np.unique(labels, return_inverse=True)
    if uniques.size < 2:
        raise ClusteringError('silhouette needs at least 2 clusters, got %d' % uniques.size)
    if np.all(points == points[0]):
        raise ClusteringError('all points coincide: a single effective cluster')

    n = points.shape[0]
    m = uniques.size
    counts = np.bincount(codes, minlength=m).astype(np.float64)
    membership = np.zeros((n, m))
    membership[np.arange(n), codes] = 1.0

    scores = np.empty(n)
    for start in range(0, n, SILHOUETTE_CHUNK):
        stop = min(n, start + SILHOUETTE_CHUNK)
        rows = np.arange(start, stop)
        sums = cdist(points[start:stop], points) @ membership
        own = codes[start:stop]
        own_counts = counts[own]
        with np.errstate(divide='ignore', invalid='ignore'):
            a = np.where(own_counts > 1,
                         sums[rows - start, own] / (own_counts - 1), 0.0)
            means = sums / counts
        means[rows - start, own] = np.inf
        b = means.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(divide='ignore', invalid='ignore'):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        s[own_counts <= 1] = 0.0
        scores[start:stop] = s
    return float(scores.mean())


def select_k(points, k_range, seed=0, restarts=10):
    """Fits every ``k`` in ``k_range`` and keeps the best silhouette.

    Ties go to the smaller ``k``.
    """
    points = _as_points(points)
    n = points.shape[0]
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > n - 1:
        raise ClusteringError('k_range %s must lie within [2, %d]' % (ks, n - 1))

    scores = OrderedDict()
    best_k, best_score, best_model = None, None, None
    for k in ks:
        model = kmeans_fit(points, k, seed=seed, restarts=restarts)
        score = silhouette(points, model.labels)
        scores[k] = score
        logger.info('k=%d silhouette %.4f', k, score)
        if best_score is None or score > best_score:
            best_k, best_score, best_model = k, score, model
    best_model.scores = dict(scores)
    return KSelection(best_k=best_k, scores=scores, model=best_model)
