"""Synthetic cohorts driven by latent behavioural archetypes.

Each archetype is an hour-of-day modulated Markov chain over home locations
plus a sleep schedule and a clinical prior. Participants are simulated with
generators derived from one master seed, so a cohort is reproducible.
"""

import datetime
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from staterank.data_model import (CANONICAL_LOCATIONS, UTC, Cohort, EventKind,
                                  EventRecord, ParticipantProfile)
from staterank.exceptions import DataError
from staterank.utils import spawn_seeds

logger = logging.getLogger(__name__)

HOURS = 24
SECONDS_PER_DAY = 86400
DEFAULT_START = datetime.date(2023, 7, 31)


@dataclass
class ClinicalPrior:
    mmse_mean: float = 22.0
    mmse_sd: float = 3.0
    adas_cog_mean: float = 25.0
    adas_cog_sd: float = 6.0
    mmse_drift: float = -1.0
    adas_cog_drift: float = 3.0
    age_mean: float = 80.0
    age_sd: float = 6.0
    hads_depression_mean: float = 6.0
    hads_anxiety_mean: float = 6.0
    hads_sd: float = 2.5
    lives_alone_prob: float = 0.4


@dataclass
class ArchetypeSpec:
    """A generative behaviour profile.

    :param hourly_transitions: ``(24, L, L)`` array; row ``[h, a]`` is the
        distribution of the next location after ``a`` during hour ``h``
    :param night_rise_prob: probability of leaving the bed in any hour asleep
    """

    name: str
    locations: tuple
    initial: np.ndarray
    hourly_transitions: np.ndarray
    events_per_hour: float = 6.0
    wake_hour_mean: float = 7.0
    wake_hour_sd: float = 0.5
    bed_hour_mean: float = 22.5
    bed_hour_sd: float = 0.5
    night_rise_prob: float = 0.05
    clinical: ClinicalPrior = field(default_factory=ClinicalPrior)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=np.float64)
        self.hourly_transitions = np.asarray(self.hourly_transitions, dtype=np.float64)
        n = len(self.locations)
        if 'bedroom' not in self.locations:
            raise DataError('archetype %s needs a bedroom location' % self.name)
        if self.initial.shape != (n,) or not np.isclose(self.initial.sum(), 1.0):
            raise DataError('archetype %s: initial distribution must sum to 1' % self.name)
        if self.hourly_transitions.shape != (HOURS, n, n):
            raise DataError('archetype %s: transitions must have shape (24, %d, %d)'
                            % (self.name, n, n))
        if (np.any(self.hourly_transitions < 0)
                or not np.allclose(self.hourly_transitions.sum(axis=2), 1.0)):
            raise DataError('archetype %s: transition rows must sum to 1' % self.name)
        sds = (self.wake_hour_sd, self.bed_hour_sd, self.clinical.mmse_sd,
               self.clinical.adas_cog_sd, self.clinical.age_sd, self.clinical.hads_sd)
        if min(sds) < 0:
            raise DataError('archetype %s: standard deviations must be >= 0' % self.name)
        if not 0 <= self.night_rise_prob <= 1:
            raise DataError('archetype %s: night_rise_prob must lie in [0, 1]' % self.name)


def make_archetype(name, periods, stickiness=0.5, base_weight=0.05,
                   locations=CANONICAL_LOCATIONS, **kwargs):
    """Builds an archetype from per-period location preferences.

    :param periods: ``(start_hour, end_hour, {location: weight})`` triples;
        hours not covered use uniform preferences
    :param stickiness: probability mass kept on the current location
    """
    locations = tuple(locations)
    index = {loc: i for i, loc in enumerate(locations)}
    preferences = np.full((HOURS, len(locations)), 1.0)
    for start, end, weights in periods:
        row = np.full(len(locations), base_weight)
        for loc, weight in weights.items():
            row[index[loc]] = weight
        for hour in range(start, end):
            preferences[hour % HOURS] = row
    preferences /= preferences.sum(axis=1, keepdims=True)
    eye = np.eye(len(locations))
    transitions = (stickiness * eye[None, :, :]
                   + (1.0 - stickiness) * preferences[:, None, :])
    wake = int(kwargs.get('wake_hour_mean', 7.0)) % HOURS
    return ArchetypeSpec(name=name, locations=locations, initial=preferences[wake],
                         hourly_transitions=transitions, **kwargs)


def default_archetypes():
    """Five well separated archetypes used as the separation fixture."""
    return [
        make_archetype(
            'early_kitchen',
            [(5, 10, {'kitchen': 6.0, 'hallway': 1.0}),
             (10, 17, {'kitchen': 3.0, 'lounge': 2.0}),
             (17, 24, {'kitchen': 4.0, 'bathroom': 1.0})],
            wake_hour_mean=5.5, bed_hour_mean=20.5, events_per_hour=8.0,
            clinical=ClinicalPrior(mmse_mean=26.0, adas_cog_mean=15.0, age_mean=74.0)),
        make_archetype(
            'lounge_sitter',
            [(8, 24, {'lounge': 8.0, 'kitchen': 0.5})],
            stickiness=0.7, wake_hour_mean=8.5, bed_hour_mean=23.0, events_per_hour=4.0,
            clinical=ClinicalPrior(mmse_mean=21.0, adas_cog_mean=28.0, age_mean=84.0)),
        make_archetype(
            'hallway_wanderer',
            [(6, 24, {'hallway': 6.0, 'bathroom': 1.5})],
            stickiness=0.3, wake_hour_mean=6.5, bed_hour_mean=22.0, events_per_hour=12.0,
            night_rise_prob=0.3,
            clinical=ClinicalPrior(mmse_mean=16.0, adas_cog_mean=40.0, age_mean=82.0,
                                   hads_anxiety_mean=11.0)),
        make_archetype(
            'bedroom_recluse',
            [(10, 24, {'bedroom': 8.0, 'bathroom': 1.0})],
            stickiness=0.7, wake_hour_mean=10.5, bed_hour_mean=21.5, events_per_hour=3.0,
            clinical=ClinicalPrior(mmse_mean=19.0, adas_cog_mean=33.0, age_mean=88.0,
                                   hads_depression_mean=12.0)),
        make_archetype(
            'restless_nights',
            [(7, 24, {'bathroom': 5.0, 'kitchen': 2.0})],
            wake_hour_mean=7.5, bed_hour_mean=23.5, bed_hour_sd=0.2, events_per_hour=7.0,
            night_rise_prob=0.6,
            clinical=ClinicalPrior(mmse_mean=23.0, adas_cog_mean=22.0, age_mean=78.0)),
    ]


class _DaySimulator(object):

    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.cumulative = np.cumsum(spec.hourly_transitions, axis=2)
        self.initial_cumulative = np.cumsum(spec.initial)
        self.last = len(spec.locations) - 1

    def _draw(self, cumulative):
        return min(int(np.searchsorted(cumulative, self.rng.random(), side='right')),
                   self.last)

    def _night_rises(self, start_s, end_s, emit):
        for hour_start in range(int(start_s // 3600) * 3600, int(end_s), 3600):
            if self.rng.random() >= self.spec.night_rise_prob:
                continue
            leave = hour_start + self.rng.uniform(0, 3600)
            back = leave + self.rng.uniform(180, 900)
            if leave <= start_s or back >= end_s:
                continue
            emit(leave, EventKind.BED_LEAVE, None)
            emit(leave + 30, EventKind.LOCATION_ENTRY, 'bathroom')
            emit(back - 60, EventKind.LOCATION_ENTRY, 'bedroom')
            emit(back, EventKind.BED_ENTER, None)

    def simulate(self, participant_id, day_start):
        spec, rng = self.spec, self.rng
        wake = float(np.clip(rng.normal(spec.wake_hour_mean, spec.wake_hour_sd), 0.5, 14.0))
        bed = float(np.clip(rng.normal(spec.bed_hour_mean, spec.bed_hour_sd),
                            wake + 4.0, 23.8))
        wake_s, bed_s = wake * 3600.0, bed * 3600.0
        raw = []

        def emit(seconds, kind, location):
            raw.append((int(min(max(seconds, 0), SECONDS_PER_DAY - 1)), kind, location))

        self._night_rises(0.0, wake_s, emit)
        emit(wake_s, EventKind.BED_LEAVE, None)
        loc = self._draw(self.initial_cumulative)
        emit(wake_s + 30, EventKind.LOCATION_ENTRY, spec.locations[loc])
        t = wake_s + 30
        mean_gap = 3600.0 / spec.events_per_hour
        while True:
            t += rng.exponential(mean_gap)
            if t >= bed_s:
                break
            hour = int(t // 3600) % HOURS
            loc = self._draw(self.cumulative[hour, loc])
            emit(t, EventKind.LOCATION_ENTRY, spec.locations[loc])
        emit(bed_s, EventKind.LOCATION_ENTRY, 'bedroom')
        emit(bed_s + 120, EventKind.BED_ENTER, None)
        self._night_rises(bed_s + 120, SECONDS_PER_DAY, emit)

        raw.sort(key=lambda item: item[0])
        return [EventRecord(participant_id, day_start + datetime.timedelta(seconds=s),
                            kind, location)
                for s, kind, location in raw]


def _score(rng, mean, sd, low, high):
    return float(np.clip(round(rng.normal(mean, sd)), low, high))


def _profile(participant_id, spec, rng, assessment_date):
    prior = spec.clinical
    mmse = _score(rng, prior.mmse_mean, prior.mmse_sd, 0, 30)
    adas = _score(rng, prior.adas_cog_mean, prior.adas_cog_sd, 0, 85)
    return ParticipantProfile(
        participant_id=participant_id,
        age=_score(rng, prior.age_mean, prior.age_sd, 50, 105),
        lives_alone=bool(rng.random() < prior.lives_alone_prob),
        mmse=mmse,
        adas_cog=adas,
        hads_depression=_score(rng, prior.hads_depression_mean, prior.hads_sd, 0, 21),
        hads_anxiety=_score(rng, prior.hads_anxiety_mean, prior.hads_sd, 0, 21),
        mmse_prior=float(np.clip(mmse - prior.mmse_drift + round(rng.normal(0, 1)), 0, 30)),
        adas_cog_prior=float(np.clip(adas - prior.adas_cog_drift + round(rng.normal(0, 2)),
                                     0, 85)),
        assessment_date=assessment_date,
        prior_assessment_date=assessment_date - datetime.timedelta(days=365),
    )


@dataclass
class SyntheticCohort(Cohort):
    """A :class:`~staterank.data_model.Cohort` with its archetype labels."""

    ground_truth: dict = field(default_factory=dict)


def generate_cohort(archetypes, participants_per_archetype, days, seed=0,
                    start_date=DEFAULT_START, tz=UTC):
    """Simulates ``participants_per_archetype`` participants per archetype.

    Participant ids are ``p000, p001, ...`` in archetype order.
    """
    archetypes = list(archetypes)
    if not archetypes:
        raise DataError('at least one archetype is required')
    if days < 1:
        raise DataError('days must be >= 1, got %r' % (days,))
    total = len(archetypes) * participants_per_archetype
    seeds = spawn_seeds(seed, total)
    end_date = start_date + datetime.timedelta(days=days - 1)

    events, profiles, truth = {}, {}, OrderedDict()
    for n in range(total):
        spec = archetypes[n // participants_per_archetype]
        pid = 'p%03d' % n
        rng = np.random.default_rng(seeds[n])
        simulator = _DaySimulator(spec, rng)
        records = []
        for offset in range(days):
            date = start_date + datetime.timedelta(days=offset)
            day_start = datetime.datetime.combine(date, datetime.time(), tzinfo=tz)
            records.extend(simulator.simulate(pid, day_start))
        events[pid] = tuple(records)
        profiles[pid] = _profile(pid, spec, rng, end_date)
        truth[pid] = spec.name
    logger.info('generated %d participants x %d days (%d events)', total, days,
                sum(len(e) for e in events.values()))
    return SyntheticCohort(events=events, profiles=profiles,
                           date_range=(start_date, end_date), ground_truth=truth)


def ground_truth_frame(ground_truth):
    return pd.DataFrame({'participant_id': list(ground_truth),
                         'archetype': list(ground_truth.values())},
                        columns=['participant_id', 'archetype'])
