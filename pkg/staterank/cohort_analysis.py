"""Similarity retrieval, paired comparisons and participant clustering."""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from staterank.clustering import select_k
from staterank.exceptions import DataError, StatisticsError

logger = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25
NEIGHBOURS = 3
MIN_PARTICIPANTS = 7
ZERO_VARIANCE = 'undefined (zero variance)'
TOO_FEW = 'undefined (n<2)'


@dataclass
class SimilarityResult:
    """Nearest and farthest participants for one query.

    ``most_similar`` is ascending and ``least_similar`` descending by distance.
    """

    participant_id: str
    most_similar: list
    least_similar: list
    metric: str = 'l1'


@dataclass
class FeatureComparison:
    p_value: float
    cohens_d: float
    n: int
    t_statistic: float = math.nan
    note: str = None

    def as_dict(self):
        def clean(value):
            return None if value is None or math.isnan(value) else float(value)
        return OrderedDict([('p_value', clean(self.p_value)),
                            ('cohens_d', clean(self.cohens_d)),
                            ('t_statistic', clean(self.t_statistic)),
                            ('n', self.n),
                            ('note', self.note)])


@dataclass
class ComparisonReport:
    side: str
    features: OrderedDict

    def as_dict(self):
        return OrderedDict([('side', self.side),
                            ('features', OrderedDict((name, c.as_dict())
                                                     for name, c in self.features.items()))])


def delta_score(current, prior, assessment_date, prior_date):
    """Annualised change between two assessments (per 365.25 days)."""
    days = (assessment_date - prior_date).days
    if days <= 0:
        raise StatisticsError('assessment %s does not follow prior assessment %s'
                              % (assessment_date, prior_date))
    return (current - prior) / (days / DAYS_PER_YEAR)


def _delta(current, prior):
    def accessor(profile):
        values = (getattr(profile, current), getattr(profile, prior),
                  profile.assessment_date, profile.prior_assessment_date)
        if any(v is None for v in values):
            return None
        return delta_score(*values)
    return accessor


def _attribute(name):
    return lambda profile: getattr(profile, name)


FEATURES = OrderedDict([
    ('MMSE', _attribute('mmse')),
    ('ADAS-Cog', _attribute('adas_cog')),
    ('HADS-Depression', _attribute('hads_depression')),
    ('HADS-Anxiety', _attribute('hads_anxiety')),
    ('Age', _attribute('age')),
    ('ΔMMSE', _delta('mmse', 'mmse_prior')),
    ('ΔADAS-Cog', _delta('adas_cog', 'adas_cog_prior')),
])

METRICS = {
    'l1': lambda a, b: float(np.abs(a - b).sum()),
    'l2': lambda a, b: float(np.sqrt(((a - b) ** 2).sum())),
}


def rank_similar(fingerprints, query_id, metric='l1', neighbours=NEIGHBOURS):
    """Ranks every other participant by fingerprint distance to ``query_id``.

    Ties are broken by participant id.
    """
    if metric not in METRICS:
        raise DataError('unknown metric %r' % (metric,))
    by_id = OrderedDict((f.participant_id, np.asarray(f.values, dtype=np.float64))
                        for f in fingerprints)
    if query_id not in by_id:
        raise DataError('unknown participant %r' % (query_id,))
    if len(by_id) < MIN_PARTICIPANTS:
        raise DataError('similarity ranking needs at least %d participants, got %d'
                        % (MIN_PARTICIPANTS, len(by_id)))
    distance = METRICS[metric]
    query = by_id[query_id]
    scored = [(pid, distance(query, vector))
              for pid, vector in by_id.items() if pid != query_id]
    ascending = sorted(scored, key=lambda item: (item[1], item[0]))
    descending = sorted(scored, key=lambda item: (-item[1], item[0]))
    return SimilarityResult(query_id, ascending[:neighbours],
                            descending[:neighbours], metric)


def paired_ttest(x, y):
    """Two-sided paired t-test and paired Cohen's d on ``x - y``.

    :returns: ``(t, p, d, note)``; degenerate inputs give NaNs and a note
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = x - y
    if diff.size < 2:
        return math.nan, math.nan, math.nan, TOO_FEW
    sd = float(np.std(diff, ddof=1))
    if sd == 0:
        return math.nan, math.nan, math.nan, ZERO_VARIANCE
    result = stats.ttest_rel(x, y)
    return (float(result.statistic), float(result.pvalue),
            float(diff.mean() / sd), None)


def compare_groups(profiles, similarity_results, side='most'):
    """Paired comparison of each participant against its selected counterparts.

    For every feature, ``x`` is the participant's own value and ``y`` the mean
    over its counterparts on ``side``; participants missing the feature, or
    whose counterparts miss it, are left out of that feature's ``n``.
    """
    if side not in ('most', 'least'):
        raise DataError("side must be 'most' or 'least', got %r" % (side,))
    results = sorted(similarity_results, key=lambda r: r.participant_id)
    features = OrderedDict()
    for name, accessor in FEATURES.items():
        xs, ys = [], []
        for result in results:
            own_profile = profiles.get(result.participant_id)
            own = accessor(own_profile) if own_profile else None
            others = result.most_similar if side == 'most' else result.least_similar
            values = [accessor(profiles[pid]) if pid in profiles else None
                      for pid, _ in others]
            if own is None or not values or any(v is None for v in values):
                continue
            xs.append(float(own))
            ys.append(float(np.mean(values)))
        t, p, d, note = paired_ttest(xs, ys)
        features[name] = FeatureComparison(p_value=p, cohens_d=d, n=len(xs),
                                           t_statistic=t, note=note)
        if note:
            logger.info('%s (%s side): %s', name, side, note)
    return ComparisonReport(side=side, features=features)


def cluster_participants(fingerprints, k_range=range(2, 9), seed=0):
    """Silhouette-selected K-means over the participants' fingerprints."""
    fingerprints = sorted(fingerprints, key=lambda f: f.participant_id)
    ks = list(k_range)
    if len(fingerprints) < max(ks) + 1:
        raise DataError('clustering over k up to %d needs at least %d participants, got %d'
                        % (max(ks), max(ks) + 1, len(fingerprints)))
    matrix = np.vstack([f.values for f in fingerprints])
    selection = select_k(matrix, ks, seed=seed)
    logger.info('participant clustering: best k=%d', selection.best_k)
    return selection.model


def similarity_frame(results):
    rows = []
    for result in sorted(results, key=lambda r: r.participant_id):
        for side, pairs in (('most', result.most_similar), ('least', result.least_similar)):
            for rank, (other, distance) in enumerate(pairs, 1):
                rows.append(OrderedDict([('participant_id', result.participant_id),
                                         ('side', side), ('rank', rank),
                                         ('other_id', other), ('distance', distance),
                                         ('metric', result.metric)]))
    return pd.DataFrame(rows, columns=['participant_id', 'side', 'rank', 'other_id',
                                       'distance', 'metric'])


def read_similarity(path_or_buffer):
    frame = pd.read_csv(path_or_buffer, dtype={'participant_id': str, 'other_id': str},
                        float_precision='round_trip')
    grouped = OrderedDict()
    for row in frame.to_dict('records'):
        result = grouped.setdefault(row['participant_id'],
                                    SimilarityResult(row['participant_id'], [], [],
                                                     row['metric']))
        pair = (row['other_id'], float(row['distance']))
        (result.most_similar if row['side'] == 'most' else result.least_similar).append(pair)
    return list(grouped.values())
