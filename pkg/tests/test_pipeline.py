import datetime
import filecmp
import json
import os
import shutil
import tempfile
import time
import unittest
from unittest import mock

import numpy as np
import pandas as pd

import staterank
from staterank import Pipeline, PipelineConfig, Stage, figures
from staterank.exceptions import ArtifactFormatError, ConfigError, MissingArtifact
from staterank.projection import Point2D, points_frame
from staterank.stages import STAGES, Synth, create_pipeline
from staterank.utils import unpack
from staterank.utils.digest import file_digest
from tests import TempDirMixin, tiny_config

DAY = datetime.date(2023, 8, 1)


class Hello(Stage):
    produces = ('hello.json',)

    def run(self):
        return {'hello.json': {'hello': 'world'}}


class Echo(Stage):
    requires = ('hello.json',)
    produces = ('echo.txt',)

    def run(self):
        with open(self.path('hello.json')) as fp:
            return {'echo.txt': fp.read()}, {'echoed': True}


def listing(root):
    found = []
    for dirpath, _, filenames in os.walk(root):
        for filename in filenames:
            found.append(os.path.relpath(os.path.join(dirpath, filename), root))
    return sorted(found)


class UnpackTestCase(unittest.TestCase):

    def test_unpack(self):
        self.assertEqual(unpack({'a': 1}), ({'a': 1}, {}))
        self.assertEqual(unpack(({'a': 1}, {'k': 2})), ({'a': 1}, {'k': 2}))
        self.assertEqual(unpack(({'a': 1},)), (({'a': 1},), {}))
        self.assertEqual(unpack([{'a': 1}, {}]), ([{'a': 1}, {}], {}))


class PipelineTestCase(TempDirMixin, unittest.TestCase):

    def make_pipeline(self, **kwargs):
        config = PipelineConfig()
        config['OUT_DIR'] = self.tmp
        return Pipeline(config, **kwargs)

    def test_pipeline_base(self):
        pipeline = Pipeline()
        self.assertEqual(pipeline.stages, {})
        self.assertEqual(list(pipeline.representations), ['.json', '.csv', '.svg'])
        self.assertEqual(pipeline.out_dir, 'out')

    def test_add_stage_defaults_to_class_name(self):
        pipeline = self.make_pipeline()

        class Greeting(Stage):
            pass

        pipeline.add_stage(Greeting)
        self.assertIs(pipeline.stages['greeting'], Greeting)
        self.assertEqual(Greeting.name, 'greeting')

    def test_add_two_conflicting_stages_on_same_name(self):
        pipeline = self.make_pipeline()

        class Foo1(Stage):
            pass

        class Foo2(Stage):
            pass

        pipeline.add_stage(Foo1, 'foo')
        self.assertRaises(ValueError, pipeline.add_stage, Foo2, 'foo')

    def test_add_the_same_stage_twice(self):
        pipeline = self.make_pipeline()

        class Foo1(Stage):
            pass

        pipeline.add_stage(Foo1, 'foo')
        pipeline.add_stage(Foo1, 'foo')
        self.assertEqual(list(pipeline.stages), ['foo'])

    def test_stage_decorator(self):
        pipeline = self.make_pipeline()

        @pipeline.stage('hi')
        class Hi(Stage):
            def run(self):
                return {}

        self.assertIs(pipeline.stages['hi'], Hi)

    def test_pipeline_representation(self):
        pipeline = self.make_pipeline()

        @pipeline.representation('.npy')
        def npy(data, path, config):
            pass

        self.assertIs(pipeline.representations['.npy'], npy)

    def test_representation_receives_path_and_config(self):
        pipeline = self.make_pipeline()
        writer = mock.Mock()
        pipeline.representation('.bin')(writer)
        path = pipeline.make_artifact('nested/blob.bin', b'\x00')
        self.assertEqual(path, os.path.join(self.tmp, 'nested', 'blob.bin'))
        writer.assert_called_with(b'\x00', path, pipeline.config)
        self.assertTrue(os.path.isdir(os.path.join(self.tmp, 'nested')))

    def test_unknown_suffix(self):
        pipeline = self.make_pipeline()
        with self.assertRaises(ArtifactFormatError):
            pipeline.make_artifact('table.parquet', {'a': 1})

    def test_strings_are_written_unchanged(self):
        pipeline = self.make_pipeline()
        path = pipeline.make_artifact('notes.anything', 'line\n')
        with open(path) as fp:
            self.assertEqual(fp.read(), 'line\n')

    def test_json_settings_from_config(self):
        pipeline = self.make_pipeline()
        pipeline.config['JSON'] = {'indent': None, 'separators': (',', ':')}
        path = pipeline.make_artifact('foo.json', {'foo': 'bar', 'baz': 'qux'})
        with open(path, 'rb') as fp:
            self.assertEqual(fp.read(), b'{"baz":"qux","foo":"bar"}\n')

    def test_csv_artifact(self):
        pipeline = self.make_pipeline()
        frame = pd.DataFrame({'a': [1, 2], 'b': ['x', 'y']}, columns=['a', 'b'])
        path = pipeline.make_artifact('frame.csv', frame)
        with open(path, 'rb') as fp:
            self.assertEqual(fp.read(), b'a,b\n1,x\n2,y\n')

    def test_dispatch_writes_artifacts_and_manifest(self):
        pipeline = self.make_pipeline()
        pipeline.add_stage(Hello)
        pipeline.add_stage(Echo)
        pipeline.dispatch('hello')
        artifacts = pipeline.dispatch('echo')
        self.assertEqual(list(artifacts), ['echo.txt'])

        with open(os.path.join(self.tmp, 'manifests', 'echo.json')) as fp:
            manifest = json.load(fp)
        self.assertEqual(manifest['stage'], 'echo')
        self.assertEqual(manifest['version'], staterank.__version__)
        self.assertEqual(manifest['config_digest'], pipeline.config.digest())
        self.assertEqual(manifest['seed'], 0)
        hello = os.path.join(self.tmp, 'hello.json')
        self.assertEqual(manifest['inputs'], {'hello.json': file_digest(hello)})
        self.assertEqual(manifest['outputs'],
                         {'echo.txt': file_digest(os.path.join(self.tmp, 'echo.txt'))})
        self.assertEqual(manifest['meta'], {'echoed': True})

    def test_missing_artifact(self):
        pipeline = self.make_pipeline()
        pipeline.add_stage(Echo)
        with self.assertRaises(MissingArtifact) as ctx:
            pipeline.dispatch('echo')
        self.assertEqual(ctx.exception.code, 3)
        self.assertIn('hello.json', str(ctx.exception))
        self.assertFalse(os.path.exists(os.path.join(self.tmp, 'manifests')))

    def test_unknown_stage(self):
        with self.assertRaises(ConfigError):
            self.make_pipeline().dispatch('nope')

    def test_decorators_wrap_dispatch(self):
        calls = []

        def record(func):
            def wrapper(stage):
                calls.append(stage.name)
                return func(stage)
            return wrapper

        pipeline = self.make_pipeline(decorators=[record])
        pipeline.add_stage(Hello)
        pipeline.dispatch('hello')
        self.assertEqual(calls, ['hello'])

    def test_method_decorators(self):
        def shout(f):
            def upper(*args, **kwargs):
                return {name: text.upper() for name, text in f(*args, **kwargs).items()}
            return upper

        class Loud(Stage):
            method_decorators = [shout]

            def run(self):
                return {'loud.txt': 'quiet'}

        pipeline = self.make_pipeline()
        pipeline.add_stage(Loud)
        self.assertEqual(pipeline.dispatch('loud'), {'loud.txt': 'QUIET'})
        self.assertEqual(Loud(pipeline).run(), {'loud.txt': 'quiet'})

    def test_run_all_passes_over_skipped_stages(self):
        class Skipped(Stage):
            @classmethod
            def skip(cls, config):
                return True

            def run(self):
                raise AssertionError('must not run')

        pipeline = self.make_pipeline()
        pipeline.add_stage(Skipped)
        pipeline.add_stage(Hello)
        pipeline.run_all()
        self.assertTrue(os.path.exists(os.path.join(self.tmp, 'hello.json')))
        self.assertFalse(os.path.exists(os.path.join(self.tmp, 'manifests', 'skipped.json')))

    def test_configured_inputs_live_outside_out_dir(self):
        pipeline = self.make_pipeline()
        pipeline.config['EVENTS_PATH'] = '/data/events.jsonl'
        self.assertEqual(pipeline.artifact_path('events.jsonl'), '/data/events.jsonl')
        self.assertEqual(pipeline.artifact_path('profiles.csv'),
                         os.path.join(self.tmp, 'profiles.csv'))

    def test_synth_refuses_configured_events(self):
        pipeline = create_pipeline(tiny_config(self.tmp, EVENTS_PATH='/data/events.jsonl'))
        self.assertTrue(Synth.skip(pipeline.config))
        with self.assertRaises(ConfigError) as ctx:
            pipeline.dispatch('synth')
        self.assertEqual(ctx.exception.field, 'EVENTS_PATH')

    def test_stage_order(self):
        pipeline = create_pipeline(tiny_config(self.tmp))
        self.assertEqual(list(pipeline.stages), [name for name, _ in STAGES])
        self.assertEqual(list(pipeline.stages)[:2], ['synth', 'preprocess'])
        self.assertEqual(list(pipeline.stages)[-1], 'report')


class ClusterStageTestCase(TempDirMixin, unittest.TestCase):

    def setUp(self):
        super(ClusterStageTestCase, self).setUp()
        rng = np.random.default_rng(0)
        points = []
        for group, (cx, cy) in enumerate([(0.0, 0.0), (40.0, 0.0), (0.0, 40.0)]):
            for i in range(10):
                x, y = rng.normal(0.0, 1.0, size=2)
                points.append(Point2D('p%d' % group, DAY + datetime.timedelta(days=i),
                                      cx + x, cy + y))
        points_frame(points).to_csv(os.path.join(self.tmp, 'points.csv'), index=False)

    def cluster(self, **overrides):
        pipeline = create_pipeline(tiny_config(self.tmp, K_RANGE=[2, 3, 4], **overrides))
        pipeline.dispatch('cluster')
        with open(os.path.join(self.tmp, 'cluster_model.json')) as fp:
            model = json.load(fp)
        with open(os.path.join(self.tmp, 'manifests', 'cluster.json')) as fp:
            return model, json.load(fp)['meta']

    def test_silhouette_chooses_k(self):
        model, meta = self.cluster(K_LATENT=None)
        self.assertEqual((model['k'], model['best_k']), (3, 3))
        self.assertEqual(sorted(model['silhouette']), ['2', '3', '4'])
        self.assertEqual(meta['silhouette'], model['silhouette'])

    def test_k_latent_overrides_the_choice(self):
        model, meta = self.cluster(K_LATENT=2)
        self.assertEqual((model['k'], model['best_k']), (2, 3))
        self.assertEqual((meta['k'], meta['best_k']), (2, 3))
        self.assertEqual(sorted(model['silhouette']), ['2', '3', '4'])
        self.assertGreater(model['silhouette']['3'], model['silhouette']['2'])


class DateRangeTestCase(TempDirMixin, unittest.TestCase):

    def test_preprocess_keeps_the_window(self):
        pipeline = create_pipeline(tiny_config(self.tmp,
                                               DATE_RANGE=['2023-08-01', '2023-08-02']))
        pipeline.dispatch('synth')
        pipeline.dispatch('preprocess')
        days = pd.read_csv(os.path.join(self.tmp, 'days.csv'), dtype={'date': str})
        self.assertEqual(len(days), 20)
        self.assertEqual(sorted(set(days['date'])), ['2023-08-01', '2023-08-02'])
        with open(os.path.join(self.tmp, 'validation.json')) as fp:
            validation = json.load(fp)
        self.assertEqual(validation['date_range'], ['2023-08-01', '2023-08-02'])
        self.assertEqual({p['recorded_days'] for p in validation['participants'].values()}, {2})


class EndToEndTestCase(unittest.TestCase):
    """Runs every stage on a tiny synthetic cohort, once with ``run_all``
    and once stage by stage."""

    @classmethod
    def setUpClass(cls):
        cls.root = tempfile.mkdtemp(prefix='staterank-')
        cls.first = os.path.join(cls.root, 'first')
        cls.second = os.path.join(cls.root, 'second')
        create_pipeline(tiny_config(cls.first)).run_all()
        pipeline = create_pipeline(tiny_config(cls.second))
        for name, _ in STAGES:
            pipeline.dispatch(name)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, True)

    def test_every_artifact_exists(self):
        files = listing(self.first)
        for name in ('events.jsonl', 'profiles.csv', 'ground_truth.csv', 'days.csv',
                     'validation.json', 'triplets.jsonl', 'embeddings.tsv',
                     'embedding_scores.json', 'points.csv', 'labels.csv',
                     'cluster_model.json', 'fingerprints.csv', 'similarity.csv',
                     'comparison.json', 'participant_clusters.csv', 'tsne_map.svg',
                     'mmse_adas.svg', 'pagerank.svg'):
            self.assertIn(name, files)
        for name, _ in STAGES:
            self.assertIn(os.path.join('manifests', name + '.json'), files)
        trajectories = [f for f in files if f.startswith('trajectories' + os.sep)]
        self.assertEqual(len(trajectories), 10)

    def test_runs_are_byte_identical(self):
        files = listing(self.first)
        self.assertEqual(files, listing(self.second))
        match, mismatch, errors = filecmp.cmpfiles(self.first, self.second, files,
                                                   shallow=False)
        self.assertEqual((mismatch, errors), ([], []))

    def test_row_counts(self):
        days = pd.read_csv(os.path.join(self.first, 'days.csv'))
        points = pd.read_csv(os.path.join(self.first, 'points.csv'))
        fingerprints = pd.read_csv(os.path.join(self.first, 'fingerprints.csv'))
        self.assertEqual(len(days), 40)
        self.assertEqual(len(points), 40)
        self.assertEqual(len(fingerprints), 10)
        self.assertEqual([c for c in fingerprints.columns if c.startswith('v')],
                         ['v1', 'v2', 'v3'])
        sums = fingerprints[['v1', 'v2', 'v3']].sum(axis=1)
        self.assertTrue(((sums - 1.0).abs() < 1e-9).all())

    def test_comparison_report(self):
        with open(os.path.join(self.first, 'comparison.json')) as fp:
            comparison = json.load(fp)
        self.assertEqual(sorted(comparison), ['least', 'most'])
        features = comparison['most']['features']
        self.assertIn('MMSE', features)
        self.assertEqual(features['MMSE']['n'], 10)

    def test_manifests_chain(self):
        with open(os.path.join(self.first, 'manifests', 'tsne.json')) as fp:
            tsne = json.load(fp)
        with open(os.path.join(self.first, 'manifests', 'cluster.json')) as fp:
            cluster = json.load(fp)
        self.assertEqual(cluster['inputs']['points.csv'], tsne['outputs']['points.csv'])
        self.assertEqual(cluster['meta']['k'], 3)
        self.assertIn(cluster['meta']['best_k'], (2, 3))
        self.assertEqual(sorted(cluster['meta']['silhouette']), ['2', '3'])
        self.assertTrue(tsne['meta']['kl_history'])

    def test_svg_has_no_date(self):
        with open(os.path.join(self.first, 'tsne_map.svg')) as fp:
            self.assertNotIn('<dc:date>', fp.read())

    def test_trajectories_are_drawn_over_the_cohort(self):
        with mock.patch('staterank.stages.figures.trajectory',
                        wraps=figures.trajectory) as trajectory:
            create_pipeline(tiny_config(self.first)).dispatch('report')
        self.assertEqual(trajectory.call_count, 10)
        for call in trajectory.call_args_list:
            self.assertEqual(len(call.kwargs['background']), 40)

    def test_embedding_is_scored(self):
        with open(os.path.join(self.first, 'embedding_scores.json')) as fp:
            scores = json.load(fp)
        with open(os.path.join(self.first, 'triplets.jsonl')) as fp:
            written = len(fp.readlines()) - 1
        self.assertEqual(scores['n'], written)
        self.assertGreater(written, 0)
        self.assertTrue(0.0 <= scores['accuracy'] <= 1.0)


@unittest.skipUnless(os.environ.get('STATERANK_SCALE_TESTS'),
                     'set STATERANK_SCALE_TESTS=1 to run the full-size cohort')
class FullCohortTestCase(TempDirMixin, unittest.TestCase):
    """The default configuration: 50 participants over 180 days."""

    def test_pipeline_finishes_within_five_minutes(self):
        config = PipelineConfig()
        config['OUT_DIR'] = self.tmp
        started = time.perf_counter()
        create_pipeline(config.validate()).run_all()
        elapsed = time.perf_counter() - started
        self.assertLess(elapsed, 300.0)
        days = pd.read_csv(os.path.join(self.tmp, 'days.csv'))
        self.assertEqual(len(days), 9000)
        files = listing(self.tmp)
        for name, _ in STAGES:
            self.assertIn(os.path.join('manifests', name + '.json'), files)


if __name__ == '__main__':
    unittest.main()
