"""Exact t-SNE projection of day embeddings onto the plane.

The optimiser always runs on the rows in a canonical order and maps the
layout back to the caller's order, so relabelling the input only relabels
the output. The gradient is evaluated over fixed blocks of rows, which may
run on several threads; partial sums are combined in block order.
"""

import datetime
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import special

from staterank.exceptions import ProjectionError

logger = logging.getLogger(__name__)

ENTROPY_TOL = 1e-7
BINARY_SEARCH_STEPS = 200
MIN_GAIN = 0.01
P_FLOOR = 1e-12
ROW_BLOCK = 256


@dataclass(frozen=True)
class Point2D:
    participant_id: str
    date: datetime.date
    x: float
    y: float

    @property
    def key(self):
        return self.participant_id, self.date


@dataclass
class TsneConfig:
    """Optimiser settings for :func:`tsne_fit`.

    Exaggeration multiplies the affinities for the first
    ``exaggeration_iterations`` iterations; momentum switches from
    ``initial_momentum`` to ``final_momentum`` at ``momentum_switch``.
    ``workers`` bounds the gradient threads (``None`` lets the executor
    decide); it never changes the result.
    """

    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iterations: int = 250
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch: int = 250
    seed: int = 0
    kl_every: int = 50
    workers: int = None

    @classmethod
    def from_mapping(cls, mapping, seed=None):
        known = {k: v for k, v in (mapping or {}).items()
                 if k in cls.__dataclass_fields__}
        if seed is not None:
            known.setdefault('seed', seed)
        return cls(**known)


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_history: list = field(default_factory=list)


def squared_distances(X):
    sum_x = np.einsum('ij,ij->i', X, X)
    d = X @ X.T
    d *= -2.0
    d += sum_x[:, None]
    d += sum_x[None, :]
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _row_blocks(n, size=ROW_BLOCK):
    return [(start, min(start + size, n)) for start in range(0, n, size)]


def _entropies(distances, beta):
    """Entropies in bits and normalised affinities of rows for precisions ``beta``."""
    shifted = distances - distances.min(axis=1, keepdims=True)
    p = np.exp(-shifted * beta[:, None])
    total = p.sum(axis=1)
    entropy = np.log(total) + beta * np.einsum('ij,ij->i', shifted, p) / total
    p /= total[:, None]
    return entropy / math.log(2.0), p


def _search_block(distances, target):
    """Bisects the precision of every row of ``distances`` at once."""
    rows = distances.shape[0]
    beta = np.ones(rows)
    lo = np.zeros(rows)
    hi = np.full(rows, np.inf)
    entropy, p = _entropies(distances, beta)
    active = np.abs(entropy - target) >= ENTROPY_TOL
    for _ in range(BINARY_SEARCH_STEPS):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        b = beta[idx]
        above = entropy[idx] > target
        lo[idx] = np.where(above, b, lo[idx])
        hi[idx] = np.where(above, hi[idx], b)
        widened = np.where(np.isinf(hi[idx]), b * 2.0, (b + hi[idx]) / 2.0)
        beta[idx] = np.where(above, widened, (b + lo[idx]) / 2.0)
        entropy[idx], p[idx] = _entropies(distances[idx], beta[idx])
        active[idx] = np.abs(entropy[idx] - target) >= ENTROPY_TOL
    return entropy, p, np.flatnonzero(active)


def conditional_probabilities(X, perplexity):
    """Per-point conditional affinities matched to ``perplexity`` by bisection.

    :returns: ``(P, entropies)`` where row ``i`` of ``P`` holds ``p_{j|i}`` and
        ``entropies[i]`` is its Shannon entropy in bits
    """
    d = squared_distances(X)
    n = d.shape[0]
    target = math.log2(perplexity)
    P = np.zeros((n, n))
    entropies = np.empty(n)
    for start, stop in _row_blocks(n):
        others = np.ones((stop - start, n), dtype=bool)
        others[np.arange(stop - start), np.arange(start, stop)] = False
        block = d[start:stop][others].reshape(stop - start, n - 1)
        entropy, p, stuck = _search_block(block, target)
        for row in stuck:
            logger.warning('perplexity search for row %d stopped %.2e bits from target',
                           start + row, entropy[row] - target)
        P[start:stop][others] = p.ravel()
        entropies[start:stop] = entropy
    return P, entropies


def conditional_entropies(X, perplexity):
    return conditional_probabilities(np.asarray(X, dtype=np.float64), perplexity)[1]


def joint_probabilities(X, perplexity):
    """Symmetrised affinities summing to one."""
    P, _ = conditional_probabilities(np.asarray(X, dtype=np.float64), perplexity)
    P += P.T
    P /= 2.0 * P.shape[0]
    return P


def _kernel_rows(Y, sq, start, stop):
    """Rows ``start:stop`` of ``1 / (1 + |y_i - y_j|^2)``, diagonal included."""
    num = Y[start:stop] @ Y.T
    num *= -2.0
    num += sq[start:stop, None]
    num += sq[None, :]
    np.maximum(num, 0.0, out=num)
    num += 1.0
    return np.reciprocal(num, out=num)


def _gradient_terms(P, Y, sq, start, stop):
    num = _kernel_rows(Y, sq, start, stop)
    rows = np.arange(stop - start)
    num[rows, rows + start] = 0.0
    z = float(num.sum())
    pn = P[start:stop] * num
    attract = pn.sum(axis=1)[:, None] * Y[start:stop] - pn @ Y
    np.multiply(num, num, out=num)
    repel = num.sum(axis=1)[:, None] * Y[start:stop] - num @ Y
    return z, attract, repel


def _kl_terms(P, Y, sq, start, stop):
    num = _kernel_rows(Y, sq, start, stop)
    rows = np.arange(stop - start)
    z = float(num.sum() - num[rows, rows + start].sum())
    block = P[start:stop]
    return z, float(np.einsum('ij,ij->', block, np.log(num))), float(special.xlogy(block, block).sum())


def _map_blocks(executor, func, P, Y):
    sq = np.einsum('ij,ij->i', Y, Y)
    return list(executor.map(lambda bounds: func(P, Y, sq, *bounds), _row_blocks(Y.shape[0])))


def tsne_gradient(P, Y, exaggeration=1.0, executor=None):
    """Exact gradient of KL(P || Q) at layout ``Y``, with ``P`` scaled by ``exaggeration``."""
    if executor is None:
        with ThreadPoolExecutor(max_workers=1) as own:
            return tsne_gradient(P, Y, exaggeration, own)
    parts = _map_blocks(executor, _gradient_terms, P, Y)
    z = sum(part[0] for part in parts)
    attract = np.vstack([part[1] for part in parts])
    repel = np.vstack([part[2] for part in parts])
    repel /= z
    attract *= exaggeration
    attract -= repel
    attract *= 4.0
    return attract


def kl_divergence(P, Y, executor=None):
    """KL(P || Q) for the Student-t affinities ``Q`` of layout ``Y``."""
    if executor is None:
        with ThreadPoolExecutor(max_workers=1) as own:
            return kl_divergence(P, Y, own)
    parts = _map_blocks(executor, _kl_terms, P, Y)
    z = sum(part[0] for part in parts)
    cross = sum(part[1] for part in parts)
    entropy = sum(part[2] for part in parts)
    return entropy - cross + math.log(z) * float(P.sum())


def check_perplexity(n, perplexity):
    if n < 5:
        raise ProjectionError('t-SNE needs at least 5 points, got %d' % n)
    if not 0 < perplexity < (n - 1) / 3.0:
        raise ProjectionError('perplexity %g too large for %d points (must be < %g)'
                              % (perplexity, n, (n - 1) / 3.0))


def canonical_order(X, init=None, keys=None):
    """The row order the optimiser runs in.

    Rows are sorted by ``keys`` when given, otherwise lexicographically by
    their values (and then by their starting position in ``init``).
    """
    if keys is not None:
        keys = list(keys)
        return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.intp)
    columns = X if init is None else np.hstack([X, init])
    return np.lexsort(columns.T[::-1])


def tsne_embed(X, config=None, init=None, keys=None):
    """Runs exact t-SNE on a data matrix.

    :param X: ``(n, d)`` array
    :param init: optional ``(n, 2)`` starting layout, row ``i`` for ``X[i]``;
        drawn from ``N(0, 1e-4)`` over the canonical order with the
        configured seed otherwise
    :param keys: optional sortable identity per row defining the canonical
        order
    """
    config = config or TsneConfig()
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    check_perplexity(n, config.perplexity)
    if init is not None:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (n, 2):
            raise ProjectionError('initial layout must have shape (%d, 2)' % n)

    order = canonical_order(X, init, keys)
    P = joint_probabilities(X[order], config.perplexity)
    np.maximum(P, P_FLOOR, out=P)
    np.fill_diagonal(P, 0.0)

    if init is None:
        Y = np.random.default_rng(config.seed).normal(0.0, 1e-4, size=(n, 2))
    else:
        Y = init[order]
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history = []

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        for it in range(config.iterations):
            exaggeration = (config.early_exaggeration
                            if it < config.exaggeration_iterations else 1.0)
            momentum = (config.initial_momentum
                        if it < config.momentum_switch else config.final_momentum)
            grad = tsne_gradient(P, Y, exaggeration, executor)

            flipped = (grad > 0) == (update > 0)
            gains[flipped] *= 0.8
            gains[~flipped] += 0.2
            np.maximum(gains, MIN_GAIN, out=gains)
            update *= momentum
            update -= config.learning_rate * gains * grad
            Y += update
            Y -= Y.mean(axis=0)

            if not np.all(np.isfinite(Y)):
                raise ProjectionError('non-finite coordinates', iteration=it)
            if config.kl_every and (it + 1) % config.kl_every == 0:
                kl = kl_divergence(P, Y, executor)
                history.append((it + 1, kl))
                logger.debug('t-SNE iteration %d: KL %.6f', it + 1, kl)

    embedding = np.empty_like(Y)
    embedding[order] = Y
    return TsneResult(embedding=embedding, kl_history=history)


def tsne_fit(embeddings, config=None, init=None, kl_history=None):
    """Projects an :class:`~staterank.embedding.EmbeddingSet` to one
    :class:`Point2D` per embedding, in input order.

    The optimiser runs over the days sorted by ``(participant_id, date)``.
    When ``kl_history`` is a list the ``(iteration, KL)`` checkpoints are
    appended to it.
    """
    keys = embeddings.keys()
    result = tsne_embed(embeddings.matrix(), config, init, keys=keys)
    if kl_history is not None:
        kl_history.extend(result.kl_history)
    return [Point2D(key[0], key[1], float(x), float(y))
            for key, (x, y) in zip(keys, result.embedding)]


def points_frame(points):
    return pd.DataFrame({
        'participant_id': [p.participant_id for p in points],
        'date': [p.date.isoformat() for p in points],
        'x': [p.x for p in points],
        'y': [p.y for p in points],
    }, columns=['participant_id', 'date', 'x', 'y'])


def read_points(path_or_buffer):
    frame = pd.read_csv(path_or_buffer, dtype={'participant_id': str, 'date': str},
                        float_precision='round_trip')
    return [Point2D(row['participant_id'], datetime.date.fromisoformat(row['date']),
                    float(row['x']), float(row['y']))
            for row in frame.to_dict('records')]
