"""Cluster based contrastive sample selection and triplet export.

A positive for an anchor day is another day of the same participant, at most
``window_days`` calendar days away, in the same one-hot cluster. Any other
day (except the anchor itself) is a negative.
"""

import datetime
import json
import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from staterank.clustering import kmeans_fit
from staterank.exceptions import DataError, TripletExhaustedError
from staterank.preprocess import NOWHERE

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_DAYS = 30
DEFAULT_ONEHOT_K = 5


@dataclass(frozen=True)
class OneHotDay:
    participant_id: str
    date: datetime.date
    vector: np.ndarray


class Triplet(namedtuple('Triplet', 'anchor positive negative')):
    """Three ``(participant_id, date)`` keys."""

    __slots__ = ()

    def as_dict(self):
        return {name: [key[0], key[1].isoformat()]
                for name, key in zip(self._fields, self)}


@dataclass
class TripletSet:
    triplets: list
    seed: int
    window_days: int

    def __iter__(self):
        return iter(self.triplets)

    def __len__(self):
        return len(self.triplets)


def vocabulary(days):
    """Sorted token vocabulary, ``"nowhere"`` always first."""
    tokens = set()
    for day in days:
        tokens.update(day.tokens)
    tokens.discard(NOWHERE)
    return [NOWHERE] + sorted(tokens)


def one_hot_matrix(days, vocab=None):
    vocab = vocab or vocabulary(days)
    position = {token: i for i, token in enumerate(vocab)}
    if not days:
        return np.zeros((0, 0)), vocab
    n_slots = len(days[0].tokens)
    width = len(vocab)
    matrix = np.zeros((len(days), n_slots * width))
    slots = np.arange(n_slots) * width
    for row, day in enumerate(days):
        if len(day.tokens) != n_slots:
            raise DataError('day strings of different lengths cannot share an encoding')
        matrix[row, slots + [position[t] for t in day.tokens]] = 1.0
    return matrix, vocab


def one_hot_encode(days, vocab=None):
    """Encodes every day as ``slots * |vocab|`` binary components.

    Slot ``s`` with token index ``t`` sets component ``s * |vocab| + t``.
    """
    matrix, _ = one_hot_matrix(days, vocab)
    return [OneHotDay(day.participant_id, day.date, matrix[row])
            for row, day in enumerate(days)]


def cluster_one_hot(days, k=DEFAULT_ONEHOT_K, seed=0):
    matrix, _ = one_hot_matrix(days)
    return kmeans_fit(matrix, k, seed=seed).labels


def _positive_sets(days, labels, window_days):
    """Index arrays of eligible positives for every day."""
    by_participant = {}
    for i, day in enumerate(days):
        by_participant.setdefault(day.participant_id, []).append(i)
    positives = [None] * len(days)
    for indices in by_participant.values():
        indices = np.asarray(indices)
        ordinals = np.array([days[i].date.toordinal() for i in indices])
        own = labels[indices]
        for j, i in enumerate(indices):
            ok = ((np.abs(ordinals - ordinals[j]) <= window_days)
                  & (own == own[j]))
            ok[j] = False
            positives[i] = indices[ok]
    return positives


def select_triplets(days, labels, n, window_days=DEFAULT_WINDOW_DAYS, seed=0):
    """Draws ``n`` triplets from one seeded generator.

    Anchors are drawn uniformly among days that have at least one positive
    and at least one negative; positives and negatives are then drawn
    uniformly from their pools.

    :param days: :class:`~staterank.preprocess.DayString` list
    :param labels: one-hot cluster label per day
    :raises TripletExhaustedError: if no day can serve as an anchor
    """
    labels = np.asarray(labels)
    if len(labels) != len(days):
        raise DataError('%d labels for %d days' % (len(labels), len(days)))
    keys = [day.key for day in days]
    if len(set(keys)) != len(keys):
        raise DataError('duplicate participant-days in triplet input')
    total = len(days)
    positives = _positive_sets(days, labels, window_days)
    # negatives: everything but the anchor and its positives
    eligible = np.array([i for i in range(total)
                         if positives[i].size and total - 1 - positives[i].size > 0],
                        dtype=np.int64)
    if n > 0 and not eligible.size:
        raise TripletExhaustedError('no day has both an eligible positive and a negative '
                                    '(%d days, window %d)' % (total, window_days))

    rng = np.random.default_rng(seed)
    triplets = []
    for _ in range(n):
        anchor = int(eligible[rng.integers(eligible.size)])
        pool = positives[anchor]
        positive = int(pool[rng.integers(pool.size)])
        excluded = set(pool.tolist())
        excluded.add(anchor)
        while True:
            negative = int(rng.integers(total))
            if negative not in excluded:
                break
        triplets.append(Triplet(keys[anchor], keys[positive], keys[negative]))
    logger.info('selected %d triplets from %d anchors', len(triplets), eligible.size)
    return TripletSet(triplets=triplets, seed=seed, window_days=window_days)


def is_positive(anchor, candidate, cluster_of, window_days):
    """Checks the three similarity criteria directly on keys."""
    return (anchor != candidate
            and anchor[0] == candidate[0]
            and abs((anchor[1] - candidate[1]).days) <= window_days
            and cluster_of[anchor] == cluster_of[candidate])


def validate_triplets(days, labels, triplets, window_days=DEFAULT_WINDOW_DAYS):
    """Re-checks every triplet against the criteria; returns the violators."""
    cluster_of = {day.key: int(label) for day, label in zip(days, labels)}
    bad = []
    for triplet in triplets:
        if (triplet.negative == triplet.anchor
                or not is_positive(triplet.anchor, triplet.positive, cluster_of, window_days)
                or is_positive(triplet.anchor, triplet.negative, cluster_of, window_days)):
            bad.append(triplet)
    return bad


def dumps_triplets(triplet_set):
    header = {'seed': triplet_set.seed, 'window_days': triplet_set.window_days,
              'count': len(triplet_set)}
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(t.as_dict(), sort_keys=True) for t in triplet_set)
    return '\n'.join(lines) + '\n'


def _key(pair):
    return pair[0], datetime.date.fromisoformat(pair[1])


def read_triplets(stream):
    lines = [line for line in stream if line.strip()]
    if not lines:
        raise DataError('empty triplet file')
    header = json.loads(lines[0])
    triplets = []
    for line in lines[1:]:
        data = json.loads(line)
        triplets.append(Triplet(_key(data['anchor']), _key(data['positive']),
                                _key(data['negative'])))
    return TripletSet(triplets=triplets, seed=header.get('seed'),
                      window_days=header.get('window_days'))
