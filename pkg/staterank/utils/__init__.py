import logging
import time
from collections import OrderedDict
from functools import wraps

import numpy as np

logger = logging.getLogger(__name__)


def unpack(value):
    """Return a two tuple of artifacts and manifest extras"""
    if not isinstance(value, tuple):
        return value, {}

    try:
        artifacts, meta = value
        return artifacts, meta
    except ValueError:
        pass

    return value, {}


def logged(func):
    """Logs the start, finish and duration of a stage's ``dispatch``."""

    @wraps(func)
    def wrapper(stage, *args, **kwargs):
        logger.info('stage %s: started', stage.name)
        started = time.perf_counter()
        result = func(stage, *args, **kwargs)
        logger.info('stage %s: finished in %.2fs', stage.name,
                    time.perf_counter() - started)
        return result

    return wrapper


def spawn_seeds(seed, count):
    """Derives ``count`` independent integer seeds from a master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


__all__ = ('OrderedDict', 'logged', 'spawn_seeds', 'unpack')
