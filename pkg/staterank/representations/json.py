from __future__ import absolute_import
from json import dumps


def output_json(data, path, config=None):
    """Writes a JSON encoded artifact"""

    settings = dict((config or {}).get('JSON', {}))

    # Artifacts are compared byte for byte between runs, so keys are always
    # sorted unless the configuration says otherwise.
    settings.setdefault('indent', 2)
    settings.setdefault('sort_keys', True)

    # always end the json dumps with a new line
    dumped = dumps(data, **settings) + "\n"

    with open(path, 'w', encoding='utf-8', newline='\n') as fp:
        fp.write(dumped)
