from __future__ import absolute_import

import logging
import os
from functools import wraps

from staterank.__version__ import __version__
from staterank.config import PipelineConfig
from staterank.exceptions import ArtifactFormatError, ConfigError, MissingArtifact
from staterank.representations.csv import output_csv, output_text
from staterank.representations.json import output_json
from staterank.utils import OrderedDict, logged, unpack
from staterank.utils.digest import file_digest

__all__ = ('Pipeline', 'Stage', 'PipelineConfig', '__version__')

logger = logging.getLogger(__name__)


def output_svg(data, path, config=None):
    # matplotlib is only imported once a figure is written
    from staterank.representations.svg import output_svg as write
    return write(data, path, config)


DEFAULT_REPRESENTATIONS = [('.json', output_json), ('.csv', output_csv),
                           ('.svg', output_svg)]

# artifacts that may live outside the output directory
INPUT_KEYS = {
    'events.jsonl': 'EVENTS_PATH',
    'profiles.csv': 'PROFILES_PATH',
}


class Pipeline(object):
    """
    The main entry point for running the analysis. Stages are registered
    on a pipeline and dispatched by name: ::

    >>> pipeline = Pipeline(PipelineConfig.load('run.json'))
    >>> pipeline.add_stage(Preprocess)
    >>> pipeline.dispatch('preprocess')

    Every stage returns a mapping of artifact names to data. The pipeline
    writes each artifact through the representation registered for its file
    suffix and then records a manifest under ``manifests/<stage>.json``.

    :param config: the run configuration
    :type config: :class:`~staterank.config.PipelineConfig`
    :param decorators: Decorators to attach to every stage dispatch
    :type decorators: list

    """

    def __init__(self, config=None, decorators=None):
        self.representations = OrderedDict(DEFAULT_REPRESENTATIONS)
        self.config = config if config is not None else PipelineConfig()
        self.decorators = decorators if decorators is not None else [logged]
        self.stages = OrderedDict()

    @property
    def out_dir(self):
        return self.config['OUT_DIR']

    def add_stage(self, stage, name=None):
        """Adds a stage to the pipeline. Stages run in registration order
        under :meth:`run_all`.

        :param stage: the stage class
        :type stage: :class:`Type[Stage]`
        :param name: subcommand name (defaults to :attr:`Stage.name` or the
            lowercased class name)
        :type name: str

        """
        name = name or stage.name or stage.__name__.lower()
        previous = self.stages.get(name)
        if previous is not None and previous is not stage:
            raise ValueError('This stage (%s) is already set to the class %s.'
                             % (name, previous.__name__))
        stage.name = name
        self.stages[name] = stage
        return stage

    def stage(self, name=None):
        """Wraps a :class:`~staterank.Stage` class, adding it to the
        pipeline. Parameters are the same as :meth:`add_stage`.

        Example::

            @pipeline.stage('hello')
            class Hello(Stage):
                produces = ('hello.json',)

                def run(self):
                    return {'hello.json': {'hello': 'world'}}

        """

        def decorator(cls):
            self.add_stage(cls, name)
            return cls

        return decorator

    def representation(self, suffix):
        """Allows additional artifact writers to be declared for the
        pipeline. Writers receive the data, the destination path and the
        configuration.

        Ex::

            @pipeline.representation('.parquet')
            def parquet(data, path, config):
                data.to_parquet(path)
        """

        def wrapper(func):
            self.representations[suffix] = func
            return func

        return wrapper

    def artifact_path(self, name):
        key = INPUT_KEYS.get(name)
        if key and self.config.get(key):
            return self.config[key]
        return os.path.join(self.out_dir, name)

    def make_artifact(self, name, data):
        """Writes one artifact using the representation for its suffix.
        Plain strings are written unchanged whatever the suffix.
        """
        path = self.artifact_path(name)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        suffix = os.path.splitext(name)[1]
        if isinstance(data, str):
            output_text(data, path, self.config)
        elif suffix in self.representations:
            self.representations[suffix](data, path, self.config)
        else:
            raise ArtifactFormatError('no representation for %s artifacts (%s)'
                                      % (suffix or 'suffix-less', name))
        return path

    def output(self, func):
        """Wraps a stage dispatch so that its artifacts and manifest are written

        :param func: callable taking the stage instance
        """

        @wraps(func)
        def wrapper(stage):
            artifacts, meta = unpack(func(stage))
            for name, data in artifacts.items():
                logger.debug('writing %s', self.artifact_path(name))
                self.make_artifact(name, data)
            self.write_manifest(stage, list(artifacts), meta)
            return artifacts

        return wrapper

    def write_manifest(self, stage, outputs, meta=None):
        inputs = OrderedDict()
        for name in tuple(stage.requires) + tuple(stage.optional):
            path = self.artifact_path(name)
            if os.path.exists(path):
                inputs[name] = file_digest(path)
        manifest = OrderedDict([
            ('stage', stage.name),
            ('version', __version__),
            ('config_digest', self.config.digest()),
            ('seed', self.config.seed),
            ('inputs', inputs),
            ('outputs', OrderedDict((name, file_digest(self.artifact_path(name)))
                                    for name in sorted(outputs))),
        ])
        if meta:
            manifest['meta'] = meta
        self.make_artifact('manifests/%s.json' % stage.name, manifest)

    def dispatch(self, name):
        """Runs one stage by name and returns its artifacts."""
        if name not in self.stages:
            raise ConfigError('stage', 'unknown stage %r' % (name,))
        stage = self.stages[name](self)
        func = self.output(Stage.dispatch)
        for decorator in self.decorators:
            func = decorator(func)
        return func(stage)

    def run_all(self):
        """Dispatches every stage in registration order, passing over stages
        whose :meth:`Stage.skip` is true for the configuration."""
        for name, stage in list(self.stages.items()):
            if stage.skip(self.config):
                logger.info('stage %s: skipped', name)
                continue
            self.dispatch(name)


class Stage(object):
    """
    Represents one step of the analysis. Concrete stages extend this class,
    declare the artifacts they read in :attr:`requires` (and
    :attr:`optional`) and implement :meth:`run`, returning a mapping of
    artifact names to data, optionally paired with manifest extras. A
    missing required artifact raises :class:`~staterank.exceptions.MissingArtifact`
    before :meth:`run` is called.
    """
    name = None
    requires = ()
    optional = ()
    produces = ()
    method_decorators = []

    def __init__(self, pipeline):
        self.pipeline = pipeline
        self.config = pipeline.config

    @classmethod
    def skip(cls, config):
        return False

    def path(self, name):
        return self.pipeline.artifact_path(name)

    def has(self, name):
        return os.path.exists(self.path(name))

    def dispatch(self):
        for name in self.requires:
            if not self.has(name):
                raise MissingArtifact(self.name, self.path(name))

        meth = self.run
        for decorator in self.method_decorators:
            meth = decorator(meth)

        return meth()

    def run(self):
        raise NotImplementedError
