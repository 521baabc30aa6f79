"""Day embeddings: external TSV ingestion, a hashing baseline and triplet scoring."""

import datetime
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from sklearn.utils import murmurhash3_32

from staterank.exceptions import EmbeddingFormatError

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 384
MIN_HASH_DIMENSION = 16


@dataclass(frozen=True)
class Embedding:
    participant_id: str
    date: datetime.date
    vector: np.ndarray

    @property
    def key(self):
        return self.participant_id, self.date


class EmbeddingSet(object):
    """An ordered, immutable collection of equally sized day embeddings.

    :param records: iterable of :class:`Embedding`
    :param dimension: expected vector length; inferred from the first
        record when omitted
    """

    def __init__(self, records, dimension=None):
        self._index = OrderedDict()
        rows = []
        for record in records:
            vector = np.asarray(record.vector, dtype=np.float64)
            if dimension is None:
                dimension = vector.shape[0]
            if vector.shape != (dimension,):
                raise EmbeddingFormatError('embedding %s/%s has %d components, expected %d'
                                           % (record.participant_id, record.date,
                                              vector.size, dimension))
            if not np.all(np.isfinite(vector)):
                raise EmbeddingFormatError('embedding %s/%s has non-finite components'
                                           % (record.participant_id, record.date))
            if record.key in self._index:
                raise EmbeddingFormatError('duplicate embedding key %s/%s'
                                           % (record.participant_id, record.date))
            self._index[record.key] = len(rows)
            rows.append(vector)
        self.dimension = dimension
        self._matrix = (np.vstack(rows) if rows
                        else np.zeros((0, dimension or 0)))
        self._matrix.setflags(write=False)

    def __len__(self):
        return len(self._index)

    def __contains__(self, key):
        return key in self._index

    def __iter__(self):
        for key, row in self._index.items():
            yield Embedding(key[0], key[1], self._matrix[row])

    def keys(self):
        return list(self._index)

    def index(self, key):
        return self._index[key]

    def vector(self, key):
        return self._matrix[self._index[key]]

    def matrix(self):
        return self._matrix


def load_embeddings(stream):
    """Reads ``participant_id<TAB>date<TAB>v1 ... vd`` rows.

    The dimension is fixed by the first row. Ragged rows, non-finite values
    and duplicate keys raise :class:`EmbeddingFormatError` naming the line.
    """
    records = []
    seen = set()
    dimension = None
    for line_no, line in enumerate(stream, 1):
        line = line.rstrip('\r\n')
        if not line:
            continue
        parts = line.split('\t')
        if len(parts) < 3:
            raise EmbeddingFormatError('line %d: expected an id, a date and components'
                                       % line_no)
        if dimension is None:
            dimension = len(parts) - 2
        elif len(parts) - 2 != dimension:
            raise EmbeddingFormatError('line %d: ragged row with %d components, expected %d'
                                       % (line_no, len(parts) - 2, dimension))
        try:
            date = datetime.date.fromisoformat(parts[1])
            vector = np.array([float(v) for v in parts[2:]], dtype=np.float64)
        except ValueError as e:
            raise EmbeddingFormatError('line %d: %s' % (line_no, e))
        if not np.all(np.isfinite(vector)):
            raise EmbeddingFormatError('line %d: non-finite component' % line_no)
        key = (parts[0], date)
        if key in seen:
            raise EmbeddingFormatError('line %d: duplicate key %s/%s'
                                       % (line_no, parts[0], parts[1]))
        seen.add(key)
        records.append(Embedding(parts[0], date, vector))
    logger.debug('loaded %d embeddings of dimension %s', len(records), dimension)
    return EmbeddingSet(records, dimension)


def dumps_embeddings(embeddings):
    lines = []
    for record in embeddings:
        values = '\t'.join(repr(float(v)) for v in record.vector)
        lines.append('%s\t%s\t%s\n' % (record.participant_id,
                                       record.date.isoformat(), values))
    return ''.join(lines)


def save_embeddings(embeddings, stream):
    stream.write(dumps_embeddings(embeddings))


def _features(tokens):
    features = ['%d=%s' % (slot, token) for slot, token in enumerate(tokens)]
    bigrams = sorted({'%s>%s' % pair for pair in zip(tokens, tokens[1:])})
    return features + bigrams


def hash_embed(day, d=DEFAULT_DIMENSION, seed=0):
    """Embeds a day string by signed feature hashing.

    Features are the set of ``(slot, token)`` pairs and the set of adjacent
    token bigrams. Each is hashed with MurmurHash3 under ``seed`` to an index
    in ``[0, d)`` and a sign taken from the hash, as
    :class:`sklearn.feature_extraction.text.HashingVectorizer` does; the
    result is L2-normalised.
    """
    if d < MIN_HASH_DIMENSION:
        raise EmbeddingFormatError('hash dimension must be >= %d, got %d'
                                   % (MIN_HASH_DIMENSION, d))
    vector = np.zeros(d, dtype=np.float64)
    for feature in _features(day.tokens):
        h = murmurhash3_32(feature, seed=seed)
        vector[abs(h) % d] += 1.0 if h >= 0 else -1.0
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return Embedding(day.participant_id, day.date, vector)


def embed_days(days, d=DEFAULT_DIMENSION, seed=0):
    return EmbeddingSet((hash_embed(day, d, seed) for day in days), d)


def l1_distance(a, b):
    return float(np.abs(np.asarray(a, dtype=np.float64)
                        - np.asarray(b, dtype=np.float64)).sum())


def triplet_accuracy(embeddings, triplets, margin=1.0):
    """Scores embeddings against triplets with the Manhattan triplet loss.

    :returns: dict with ``accuracy`` (fraction of triplets with the anchor
        strictly closer to the positive) and ``mean_loss``
    """
    anchors, positives, negatives = [], [], []
    for triplet in triplets:
        for key in (triplet.anchor, triplet.positive, triplet.negative):
            if key not in embeddings:
                raise EmbeddingFormatError('triplet %s references missing embedding %s/%s'
                                           % (triplet, key[0], key[1]))
        anchors.append(embeddings.index(triplet.anchor))
        positives.append(embeddings.index(triplet.positive))
        negatives.append(embeddings.index(triplet.negative))
    if not anchors:
        return {'accuracy': math.nan, 'mean_loss': math.nan, 'n': 0}

    matrix = embeddings.matrix()
    a = matrix[anchors]
    d_pos = np.abs(a - matrix[positives]).sum(axis=1)
    d_neg = np.abs(a - matrix[negatives]).sum(axis=1)
    losses = np.maximum(0.0, d_pos - d_neg + margin)
    return {
        'accuracy': float(np.mean(d_pos < d_neg)),
        'mean_loss': float(losses.mean()),
        'n': len(anchors),
    }
