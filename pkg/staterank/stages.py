"""The analysis stages and the factory that registers them.

Each stage reads the artifacts named in ``requires`` from the output
directory and returns the artifacts it ``produces``; the
:class:`~staterank.Pipeline` writes them and records the manifest.
"""

import datetime
import json
import logging
import math

import numpy as np
import pandas as pd

from staterank import Pipeline, Stage
from staterank import figures
from staterank.clustering import kmeans_fit, select_k
from staterank.cohort_analysis import (cluster_participants, compare_groups, rank_similar,
                                       read_similarity, similarity_frame)
from staterank.data_model import (Cohort, dumps_events, parse_events, profiles_frame,
                                  read_profiles, validate_cohort)
from staterank.embedding import (Embedding, EmbeddingSet, dumps_embeddings, embed_days,
                                 load_embeddings, triplet_accuracy)
from staterank.exceptions import ConfigError, DataError, EmbeddingFormatError
from staterank.preprocess import build_day_strings, day_strings_frame, fixed_offset, read_day_strings
from staterank.projection import TsneConfig, points_frame, read_points, tsne_fit
from staterank.stateflow import fingerprint_cohort, fingerprints_frame, read_fingerprints
from staterank.synthgen import default_archetypes, generate_cohort, ground_truth_frame
from staterank.triplet_gen import (cluster_one_hot, dumps_triplets, read_triplets,
                                   select_triplets, validate_triplets)
from staterank.utils import OrderedDict

logger = logging.getLogger(__name__)


def _finite(value):
    return None if value is None or math.isnan(value) else value


def read_labels(path):
    frame = pd.read_csv(path, dtype={'participant_id': str, 'date': str})
    return OrderedDict(((row['participant_id'], datetime.date.fromisoformat(row['date'])),
                        int(row['label']))
                       for row in frame.to_dict('records'))


def labels_frame(points, labels):
    return pd.DataFrame({
        'participant_id': [p.participant_id for p in points],
        'date': [p.date.isoformat() for p in points],
        'label': [int(label) for label in labels],
    }, columns=['participant_id', 'date', 'label'])


class PipelineStage(Stage):
    """Shared readers for the artifacts passed between stages."""

    @property
    def tz(self):
        return fixed_offset(self.config['UTC_OFFSET_MINUTES'])

    def read_text(self, name):
        with open(self.path(name), encoding='utf-8') as fp:
            return fp.readlines()

    def days(self):
        return read_day_strings(self.path('days.csv'))

    def points(self):
        return read_points(self.path('points.csv'))

    def point_labels(self, points):
        labels = read_labels(self.path('labels.csv'))
        missing = [p.key for p in points if p.key not in labels]
        if missing:
            raise DataError('labels.csv has no label for %s/%s'
                            % (missing[0][0], missing[0][1].isoformat()))
        return [labels[p.key] for p in points]

    def profiles(self):
        return OrderedDict((p.participant_id, p)
                           for p in read_profiles(self.path('profiles.csv')))

    def fingerprints(self):
        return read_fingerprints(self.path('fingerprints.csv'))

    def latent_k(self):
        with open(self.path('cluster_model.json'), encoding='utf-8') as fp:
            return int(json.load(fp)['k'])


class Synth(PipelineStage):
    """Simulates the shipped archetype cohort."""

    produces = ('events.jsonl', 'profiles.csv', 'ground_truth.csv')

    @classmethod
    def skip(cls, config):
        return bool(config.get('EVENTS_PATH'))

    def run(self):
        if self.skip(self.config):
            raise ConfigError('EVENTS_PATH', 'synth would overwrite the configured events file')
        synth = self.config['SYNTH']
        start = datetime.date.fromisoformat(synth.get('start_date', '2023-07-31'))
        cohort = generate_cohort(default_archetypes(),
                                 synth.get('participants_per_archetype', 10),
                                 synth.get('days', 180), seed=self.config.seed,
                                 start_date=start, tz=self.tz)
        records = list(cohort.records())
        artifacts = {
            'events.jsonl': dumps_events(records),
            'profiles.csv': profiles_frame(cohort.profiles.values()),
            'ground_truth.csv': ground_truth_frame(cohort.ground_truth),
        }
        return artifacts, {'participants': len(cohort.ground_truth), 'events': len(records)}


class Preprocess(PipelineStage):
    """Validates the cohort and renders every kept participant-day as a day string.

    ``DATE_RANGE`` restricts the cohort to an inclusive window of local dates.
    """

    requires = ('events.jsonl', 'profiles.csv')
    produces = ('days.csv', 'validation.json')

    def run(self):
        records = parse_events(self.read_text('events.jsonl'))
        cohort = Cohort.from_records(records, read_profiles(self.path('profiles.csv')))
        if self.config.date_range is not None:
            cohort = cohort.between(*self.config.date_range, tz=self.tz)
        report = validate_cohort(cohort, self.tz)
        kept = report.filter(self.config['MIN_DAYS'])
        if not kept:
            raise DataError('no participant has a complete profile and at least %d recorded days'
                            % self.config['MIN_DAYS'])
        dropped = len(report.participants) - len(kept)
        if dropped:
            logger.info('excluded %d of %d participants', dropped, len(report.participants))
        days = build_day_strings(cohort, self.config['WINDOW_MINUTES'], self.tz, kept)
        validation = report.as_dict()
        validation['kept'] = kept
        return ({'days.csv': day_strings_frame(days), 'validation.json': validation},
                {'participants': len(kept), 'days': len(days)})


class Triplets(PipelineStage):
    """Contrastive samples for fine-tuning an external day encoder."""

    requires = ('days.csv',)
    produces = ('triplets.jsonl',)

    def run(self):
        days = self.days()
        seed = self.config.seed
        labels = cluster_one_hot(days, self.config['ONEHOT_K'], seed=seed)
        triplets = select_triplets(days, labels, self.config['TRIPLET_COUNT'],
                                   self.config['TRIPLET_WINDOW_DAYS'], seed=seed)
        bad = validate_triplets(days, labels, triplets, self.config['TRIPLET_WINDOW_DAYS'])
        if bad:
            raise DataError('%d selected triplets violate the selection criteria, first %s'
                            % (len(bad), bad[0]))
        return {'triplets.jsonl': dumps_triplets(triplets)}, {'count': len(triplets)}


class Embed(PipelineStage):
    """Hash baseline embeddings, or the configured external embedding file."""

    requires = ('days.csv',)
    optional = ('triplets.jsonl',)
    produces = ('embeddings.tsv', 'embedding_scores.json')

    def external(self, days):
        path = self.config['EMBEDDINGS_PATH']
        with open(path, encoding='utf-8') as fp:
            loaded = load_embeddings(fp)
        records = []
        for day in days:
            if day.key not in loaded:
                raise EmbeddingFormatError('%s has no embedding for %s/%s'
                                           % (path, day.participant_id, day.date.isoformat()))
            records.append(Embedding(day.participant_id, day.date, loaded.vector(day.key)))
        return EmbeddingSet(records, loaded.dimension)

    def run(self):
        days = self.days()
        if self.config.get('EMBEDDINGS_PATH'):
            embeddings = self.external(days)
            source = 'external'
        else:
            embeddings = embed_days(days, self.config['EMBEDDING_DIM'], seed=self.config.seed)
            source = 'hash'
        triplets = (read_triplets(self.read_text('triplets.jsonl'))
                    if self.has('triplets.jsonl') else ())
        scores = triplet_accuracy(embeddings, triplets, self.config['TRIPLET_MARGIN'])
        artifacts = {'embeddings.tsv': dumps_embeddings(embeddings),
                     'embedding_scores.json': {k: _finite(v) for k, v in scores.items()}}
        return artifacts, {'source': source, 'dimension': embeddings.dimension}


class Tsne(PipelineStage):
    """Projects the day embeddings to two dimensions."""

    requires = ('embeddings.tsv',)
    produces = ('points.csv',)

    def run(self):
        with open(self.path('embeddings.tsv'), encoding='utf-8') as fp:
            embeddings = load_embeddings(fp)
        config = TsneConfig.from_mapping(self.config['TSNE'], seed=self.config.seed)
        history = []
        points = tsne_fit(embeddings, config, kl_history=history)
        meta = {'kl_history': [[it, float(kl)] for it, kl in history]}
        return {'points.csv': points_frame(points)}, meta


class Cluster(PipelineStage):
    """Latent states: K-means over the projected days."""

    requires = ('points.csv',)
    produces = ('labels.csv', 'cluster_model.json')

    def run(self):
        points = self.points()
        matrix = np.array([[p.x, p.y] for p in points], dtype=np.float64)
        seed = self.config.seed
        selection = select_k(matrix, self.config['K_RANGE'], seed=seed)
        k = self.config['K_LATENT']
        if k is None or k == selection.best_k:
            model = selection.model
        else:
            logger.info('silhouette prefers k=%d, K_LATENT fixes k=%d', selection.best_k, k)
            model = kmeans_fit(matrix, k, seed=seed)
            model.scores = dict(selection.scores)
        logger.info('latent states: k=%d, inertia %.4f', model.k, model.inertia)
        model_dump = model.as_dict()
        model_dump['best_k'] = int(selection.best_k)
        return ({'labels.csv': labels_frame(points, model.labels),
                 'cluster_model.json': model_dump},
                {'k': int(model.k), 'best_k': int(selection.best_k),
                 'silhouette': model_dump['silhouette']})


class Fingerprint(PipelineStage):
    """One PageRank state vector per participant."""

    requires = ('points.csv', 'labels.csv', 'cluster_model.json')
    produces = ('fingerprints.csv',)

    def run(self):
        points = self.points()
        labels = self.point_labels(points)
        k = self.latent_k()
        threshold = self.config['THRESHOLD']
        vectors = fingerprint_cohort(points, labels, k,
                                     threshold=None if threshold == 'median' else float(threshold),
                                     alpha=self.config['ALPHA'],
                                     max_iter=self.config['PAGERANK_MAX_ITER'],
                                     tol=self.config['PAGERANK_TOL'],
                                     mode=self.config['TRANSITION_MODE'])
        unconverged = sorted(v.participant_id for v in vectors if not v.converged)
        return ({'fingerprints.csv': fingerprints_frame(vectors)},
                {'participants': len(vectors), 'unconverged': unconverged})


class Similar(PipelineStage):
    """Most and least similar participants for every participant."""

    requires = ('fingerprints.csv',)
    produces = ('similarity.csv',)

    def run(self):
        fingerprints = self.fingerprints()
        results = [rank_similar(fingerprints, f.participant_id, self.config['METRIC'],
                                self.config['NEIGHBOURS'])
                   for f in fingerprints]
        return {'similarity.csv': similarity_frame(results)}


class CohortComparison(PipelineStage):
    """Paired comparisons against counterparts and participant clustering."""

    name = 'cohort'
    requires = ('profiles.csv', 'similarity.csv', 'fingerprints.csv')
    produces = ('comparison.json', 'participant_clusters.csv')

    def run(self):
        profiles = self.profiles()
        results = read_similarity(self.path('similarity.csv'))
        comparison = OrderedDict((side, compare_groups(profiles, results, side).as_dict())
                                 for side in ('most', 'least'))
        fingerprints = sorted(self.fingerprints(), key=lambda f: f.participant_id)
        model = cluster_participants(fingerprints, self.config['PARTICIPANT_K_RANGE'],
                                     seed=self.config.seed)
        clusters = pd.DataFrame({
            'participant_id': [f.participant_id for f in fingerprints],
            'cluster': [int(label) for label in model.labels],
        }, columns=['participant_id', 'cluster'])
        meta = {'k': int(model.k),
                'silhouette': {str(k): float(v) for k, v in sorted(model.scores.items())}}
        return {'comparison.json': comparison, 'participant_clusters.csv': clusters}, meta


class Report(PipelineStage):
    """Static SVG figures."""

    requires = ('points.csv', 'labels.csv', 'cluster_model.json', 'fingerprints.csv',
                'profiles.csv', 'participant_clusters.csv')
    produces = ('tsne_map.svg', 'mmse_adas.svg', 'pagerank.svg', 'trajectories/')

    def run(self):
        points = self.points()
        labels = self.point_labels(points)
        k = self.latent_k()
        artifacts = OrderedDict([('tsne_map.svg', figures.tsne_map(points, labels, k))])

        grouped = OrderedDict()
        for point, label in zip(points, labels):
            grouped.setdefault(point.participant_id, ([], []))
            grouped[point.participant_id][0].append(point)
            grouped[point.participant_id][1].append(label)
        for pid in sorted(grouped):
            own, own_labels = grouped[pid]
            artifacts['trajectories/%s.svg' % pid] = figures.trajectory(
                pid, own, own_labels, k, background=points)

        clusters = pd.read_csv(self.path('participant_clusters.csv'),
                               dtype={'participant_id': str})
        cluster_of = dict(zip(clusters['participant_id'], clusters['cluster'].astype(int)))
        artifacts['mmse_adas.svg'] = figures.mmse_adas_scatter(self.profiles(), cluster_of)
        artifacts['pagerank.svg'] = figures.pagerank_bars(self.fingerprints())
        return artifacts, {'figures': len(artifacts)}


STAGES = (
    ('synth', Synth),
    ('preprocess', Preprocess),
    ('triplets', Triplets),
    ('embed', Embed),
    ('tsne', Tsne),
    ('cluster', Cluster),
    ('fingerprint', Fingerprint),
    ('similar', Similar),
    ('cohort', CohortComparison),
    ('report', Report),
)


def create_pipeline(config=None, decorators=None):
    """Builds a :class:`~staterank.Pipeline` with every stage in execution order."""
    pipeline = Pipeline(config, decorators)
    for name, stage in STAGES:
        pipeline.add_stage(stage, name)
    return pipeline
