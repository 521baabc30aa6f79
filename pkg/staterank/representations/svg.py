from __future__ import absolute_import

import matplotlib

matplotlib.use('Agg')

from matplotlib import pyplot as plt  # noqa: E402

# fixed ids inside the SVG keep reruns byte-identical
plt.rcParams['svg.hashsalt'] = 'staterank'


def output_svg(data, path, config=None):
    """Saves a matplotlib figure as SVG without a creation date"""
    try:
        data.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(data)
