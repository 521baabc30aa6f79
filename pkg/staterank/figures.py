"""Static figures for the ``report`` stage.

Builders return :class:`matplotlib.figure.Figure` objects; writing them is
left to the SVG representation.
"""

import matplotlib

matplotlib.use('Agg')

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

CMAP = 'tab10'


def _colours(labels, k):
    cmap = matplotlib.colormaps[CMAP] if hasattr(matplotlib, 'colormaps') \
        else matplotlib.cm.get_cmap(CMAP)
    return [cmap(int(label) % cmap.N) for label in labels]


def tsne_map(points, labels, k):
    """All projected days coloured by latent state."""
    fig = Figure(figsize=(7, 6))
    ax = fig.add_subplot(1, 1, 1)
    xs = [p.x for p in points]
    ys = [p.y for p in points]
    ax.scatter(xs, ys, c=_colours(labels, k), s=6, linewidths=0)
    for state in range(k):
        ax.scatter([], [], color=_colours([state], k)[0], label='state %d' % state)
    ax.legend(loc='best', fontsize='small', markerscale=1.5)
    ax.set_title('Latent states of all participant-days')
    ax.set_xlabel('t-SNE 1')
    ax.set_ylabel('t-SNE 2')
    return fig


def trajectory(participant_id, points, labels, k, background=None):
    """One participant's days joined in date order over the cohort map."""
    order = sorted(range(len(points)), key=lambda i: points[i].date)
    xs = [points[i].x for i in order]
    ys = [points[i].y for i in order]
    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot(1, 1, 1)
    if background:
        ax.scatter([p.x for p in background], [p.y for p in background],
                   color='0.85', s=4, linewidths=0)
    ax.plot(xs, ys, color='0.4', linewidth=0.6)
    ax.scatter(xs, ys, c=_colours([labels[i] for i in order], k), s=14, linewidths=0)
    if order:
        ax.annotate(points[order[0]].date.isoformat(), (xs[0], ys[0]), fontsize='x-small')
        ax.annotate(points[order[-1]].date.isoformat(), (xs[-1], ys[-1]), fontsize='x-small')
    ax.set_title('Trajectory of %s' % participant_id)
    return fig


def pagerank_bars(fingerprints):
    """Stacked state shares per participant."""
    fingerprints = sorted(fingerprints, key=lambda f: f.participant_id)
    values = np.vstack([f.values for f in fingerprints])
    k = values.shape[1]
    fig = Figure(figsize=(max(6, 0.18 * len(fingerprints)), 4))
    ax = fig.add_subplot(1, 1, 1)
    bottom = np.zeros(len(fingerprints))
    positions = np.arange(len(fingerprints))
    for state in range(k):
        ax.bar(positions, values[:, state], bottom=bottom,
               color=_colours([state], k)[0], label='state %d' % state)
        bottom += values[:, state]
    ax.set_xticks(positions)
    ax.set_xticklabels([f.participant_id for f in fingerprints], rotation=90,
                       fontsize='xx-small')
    ax.set_ylabel('PageRank')
    ax.legend(loc='upper right', fontsize='x-small')
    return fig


def mmse_adas_scatter(profiles, cluster_of):
    """MMSE against ADAS-Cog, coloured by participant cluster."""
    ids = [pid for pid in sorted(cluster_of)
           if pid in profiles and profiles[pid].mmse is not None
           and profiles[pid].adas_cog is not None]
    k = max(cluster_of.values()) + 1 if cluster_of else 1
    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot(1, 1, 1)
    for cluster in range(k):
        members = [pid for pid in ids if cluster_of[pid] == cluster]
        ax.scatter([profiles[pid].mmse for pid in members],
                   [profiles[pid].adas_cog for pid in members],
                   color=_colours([cluster], k)[0], label='cluster %d' % (cluster + 1))
    ax.set_xlabel('MMSE')
    ax.set_ylabel('ADAS-Cog')
    ax.set_title('MMSE vs ADAS-Cog by fingerprint cluster')
    ax.legend(loc='best', fontsize='small')
    return fig
