"""Pipeline configuration.

:class:`PipelineConfig` is a :class:`flask.Config`, so it loads the same
way a Flask application's configuration does: defaults, then a JSON file,
then ``STATERANK_`` prefixed environment variables, then explicit
overrides. Keys are uppercase.
"""

import copy
import datetime
import json
import logging
import numbers
import os

from flask import Config

from staterank.exceptions import ConfigError
from staterank.utils.digest import data_digest

logger = logging.getLogger(__name__)

ENV_PREFIX = 'STATERANK'

DEFAULTS = {
    'EVENTS_PATH': None,
    'PROFILES_PATH': None,
    'EMBEDDINGS_PATH': None,
    'OUT_DIR': 'out',
    'WINDOW_MINUTES': 20,
    'UTC_OFFSET_MINUTES': 0,
    'MIN_DAYS': 0,
    'DATE_RANGE': None,
    'EMBEDDING_DIM': 384,
    'K_LATENT': 5,
    'K_RANGE': [4, 5, 6, 7],
    'PARTICIPANT_K_RANGE': [2, 3, 4, 5, 6, 7, 8],
    'ONEHOT_K': 5,
    'TSNE': {
        'perplexity': 30.0,
        'iterations': 1000,
        'learning_rate': 200.0,
        'early_exaggeration': 12.0,
        'exaggeration_iterations': 250,
        'initial_momentum': 0.5,
        'final_momentum': 0.8,
        'momentum_switch': 250,
    },
    'THRESHOLD': 'median',
    'TRANSITION_MODE': 'proximity',
    'ALPHA': 0.85,
    'PAGERANK_MAX_ITER': 1000,
    'PAGERANK_TOL': 1e-10,
    'METRIC': 'l1',
    'NEIGHBOURS': 3,
    'SEED': 0,
    'TRIPLET_COUNT': 50000,
    'TRIPLET_WINDOW_DAYS': 30,
    'TRIPLET_MARGIN': 1.0,
    'SYNTH': {
        'participants_per_archetype': 10,
        'days': 180,
        'start_date': '2023-07-31',
    },
    'JSON': {},
}

# keys that only say where files go, not what goes in them
LOCATION_KEYS = ('OUT_DIR',)


def _is_int(value):
    return isinstance(value, numbers.Integral) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _date_range(value):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return None
    try:
        start, end = (datetime.date.fromisoformat(v) for v in value)
    except (TypeError, ValueError):
        return None
    return (start, end) if start <= end else None


class PipelineConfig(Config):
    """Configuration for a :class:`~staterank.Pipeline`.

    :param root_path: directory relative file paths are resolved against
    :param defaults: mapping that replaces :data:`DEFAULTS`
    """

    def __init__(self, root_path=None, defaults=None):
        super(PipelineConfig, self).__init__(root_path or os.getcwd(),
                                             copy.deepcopy(defaults or DEFAULTS))

    @classmethod
    def load(cls, path=None, overrides=None, env=True):
        """Builds a validated configuration from its layered sources."""
        config = cls()
        if path is not None:
            try:
                config.from_file(os.path.abspath(path), load=json.load)
            except (OSError, ValueError) as e:
                raise ConfigError('--config', 'cannot load %s (%s)' % (path, e))
        if env:
            config.from_prefixed_env(ENV_PREFIX)
        if overrides:
            config.from_mapping({k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    @property
    def slots_per_day(self):
        return 1440 // self['WINDOW_MINUTES']

    @property
    def seed(self):
        return self['SEED']

    @property
    def date_range(self):
        """The configured ``(start, end)`` dates, or ``None``."""
        return _date_range(self['DATE_RANGE'])

    def _require(self, key, check, reason):
        if key not in self or not check(self[key]):
            raise ConfigError(key, '%s (got %r)' % (reason, self.get(key)))

    def validate(self):
        """Checks every key; raises :class:`ConfigError` naming the first bad one."""
        self._require('WINDOW_MINUTES',
                      lambda v: _is_int(v) and v > 0 and 1440 % v == 0,
                      'must be a positive integer dividing 1440')
        self._require('UTC_OFFSET_MINUTES',
                      lambda v: _is_int(v) and -24 * 60 < v < 24 * 60,
                      'must be an integer number of minutes within a day')
        self._require('MIN_DAYS', lambda v: _is_int(v) and v >= 0,
                      'must be a nonnegative integer')
        self._require('DATE_RANGE', lambda v: v is None or _date_range(v) is not None,
                      'must be null or [start, end] ISO dates with start <= end')
        self._require('EMBEDDING_DIM', lambda v: _is_int(v) and v >= 16,
                      'must be an integer >= 16')
        self._require('K_LATENT', lambda v: v is None or (_is_int(v) and v >= 1),
                      'must be null or a positive integer')
        for key in ('K_RANGE', 'PARTICIPANT_K_RANGE'):
            self._require(key, lambda v: isinstance(v, (list, tuple)) and v
                          and all(_is_int(k) and k >= 2 for k in v),
                          'must be a nonempty list of integers >= 2')
        self._require('ONEHOT_K', lambda v: _is_int(v) and v >= 1,
                      'must be a positive integer')
        self._require('TSNE', lambda v: isinstance(v, dict), 'must be an object')
        tsne = self['TSNE']
        if tsne.get('workers') is not None and not (_is_int(tsne['workers'])
                                                      and tsne['workers'] >= 1):
            raise ConfigError('TSNE.workers',
                              'must be null or a positive integer (got %r)' % (tsne['workers'],))
        for name in ('perplexity', 'learning_rate', 'early_exaggeration'):
            if name in tsne and not (_is_number(tsne[name]) and tsne[name] > 0):
                raise ConfigError('TSNE.%s' % name, 'must be positive (got %r)' % (tsne[name],))
        for name in ('iterations', 'exaggeration_iterations', 'momentum_switch'):
            if name in tsne and not (_is_int(tsne[name]) and tsne[name] >= 0):
                raise ConfigError('TSNE.%s' % name,
                                  'must be a nonnegative integer (got %r)' % (tsne[name],))
        self._require('THRESHOLD',
                      lambda v: v == 'median' or (_is_number(v) and v > 0),
                      'must be "median" or a positive number')
        self._require('TRANSITION_MODE', lambda v: v in ('proximity', 'succession'),
                      'must be "proximity" or "succession"')
        self._require('ALPHA', lambda v: _is_number(v) and 0 < v < 1,
                      'must lie in (0, 1)')
        self._require('PAGERANK_MAX_ITER', lambda v: _is_int(v) and v >= 1,
                      'must be a positive integer')
        self._require('PAGERANK_TOL', lambda v: _is_number(v) and v > 0,
                      'must be positive')
        self._require('METRIC', lambda v: v in ('l1', 'l2'), 'must be "l1" or "l2"')
        self._require('NEIGHBOURS', lambda v: _is_int(v) and v >= 1,
                      'must be a positive integer')
        self._require('SEED', lambda v: _is_int(v) and v >= 0,
                      'must be a nonnegative integer')
        self._require('TRIPLET_COUNT', lambda v: _is_int(v) and v >= 0,
                      'must be a nonnegative integer')
        self._require('TRIPLET_WINDOW_DAYS', lambda v: _is_int(v) and v >= 0,
                      'must be a nonnegative integer')
        self._require('TRIPLET_MARGIN', lambda v: _is_number(v) and v >= 0,
                      'must be nonnegative')
        self._require('SYNTH', lambda v: isinstance(v, dict), 'must be an object')
        synth = self['SYNTH']
        for name in ('participants_per_archetype', 'days'):
            if name in synth and not (_is_int(synth[name]) and synth[name] >= 1):
                raise ConfigError('SYNTH.%s' % name,
                                  'must be a positive integer (got %r)' % (synth[name],))
        return self

    def as_dict(self):
        return {key: self[key] for key in sorted(self) if key.isupper()}

    def digest(self):
        """sha256 of the configuration, ignoring where outputs are written."""
        content = {k: v for k, v in self.as_dict().items() if k not in LOCATION_KEYS}
        return data_digest(content)
