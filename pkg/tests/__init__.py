#!/usr/bin/env python

import datetime
import shutil
import tempfile

from staterank.config import PipelineConfig
from staterank.data_model import UTC, EventKind, EventRecord


def at(date, hour, minute=0, second=0):
    return datetime.datetime.combine(date, datetime.time(hour, minute, second), tzinfo=UTC)


def entry(pid, when, location):
    return EventRecord(pid, when, EventKind.LOCATION_ENTRY, location)


def tiny_config(out_dir, **overrides):
    """A configuration small enough to run every stage in seconds."""
    config = PipelineConfig()
    config.from_mapping({
        'OUT_DIR': out_dir,
        'EMBEDDING_DIM': 32,
        'K_LATENT': 3,
        'K_RANGE': [2, 3],
        'PARTICIPANT_K_RANGE': [2, 3],
        'ONEHOT_K': 3,
        'TSNE': {'perplexity': 5.0, 'iterations': 120, 'exaggeration_iterations': 40,
                 'momentum_switch': 40},
        'TRIPLET_COUNT': 200,
        'SYNTH': {'participants_per_archetype': 2, 'days': 4, 'start_date': '2023-07-31'},
    })
    config.from_mapping(overrides)
    return config.validate()


class TempDirMixin(object):

    def setUp(self):
        super(TempDirMixin, self).setUp()
        self.tmp = tempfile.mkdtemp(prefix='staterank-')
        self.addCleanup(shutil.rmtree, self.tmp, True)
