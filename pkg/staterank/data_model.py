"""Core domain types and ingestion of raw event and profile files."""

import datetime
import enum
import json
import logging
import math
import re
from collections import Counter, OrderedDict
from dataclasses import dataclass, field, fields

import pandas as pd

from staterank.exceptions import DataError, MalformedEventsError

logger = logging.getLogger(__name__)

UTC = datetime.timezone.utc

FRACTION = re.compile(r'(\d{2}:\d{2}:\d{2})[.,]\d+')

CANONICAL_LOCATIONS = ('lounge', 'kitchen', 'hallway', 'bedroom', 'bathroom')

PROFILE_COLUMNS = (
    'participant_id', 'age', 'lives_alone', 'mmse', 'adas_cog',
    'hads_depression', 'hads_anxiety', 'mmse_prior', 'adas_cog_prior',
    'assessment_date', 'prior_assessment_date',
)


class EventKind(enum.Enum):
    LOCATION_ENTRY = 'location_entry'
    BED_ENTER = 'bed_enter'
    BED_LEAVE = 'bed_leave'


@dataclass(frozen=True)
class EventRecord:
    """One sensor firing.

    ``location`` is present iff ``kind`` is :attr:`EventKind.LOCATION_ENTRY`.
    """

    participant_id: str
    timestamp: datetime.datetime
    kind: EventKind
    location: str = None

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise DataError('timestamp must be timezone aware')
        if self.timestamp.microsecond:
            raise DataError('timestamp must be second aligned')
        if self.kind is EventKind.LOCATION_ENTRY:
            if (not self.location or self.location != self.location.lower()
                    or self.location.split() != [self.location]):
                raise DataError('location must be a nonempty lowercase token without whitespace')
        elif self.location is not None:
            raise DataError('location is forbidden for %s events' % self.kind.value)

    def as_dict(self):
        data = OrderedDict([
            ('participant', self.participant_id),
            ('ts', format_timestamp(self.timestamp)),
            ('kind', self.kind.value),
        ])
        if self.location is not None:
            data['location'] = self.location
        return data


@dataclass(frozen=True)
class ParticipantProfile:
    """Clinical and demographic features of one participant.

    Any feature may be ``None`` when missing from the source file; such a
    profile is reported as incomplete by :func:`validate_cohort`.
    """

    participant_id: str
    age: float = None
    lives_alone: bool = None
    mmse: float = None
    adas_cog: float = None
    hads_depression: float = None
    hads_anxiety: float = None
    mmse_prior: float = None
    adas_cog_prior: float = None
    assessment_date: datetime.date = None
    prior_assessment_date: datetime.date = None

    def __post_init__(self):
        for name in ('mmse', 'mmse_prior'):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 30:
                raise DataError('%s: %s is outside 0-30 (participant %s)'
                                % (name, value, self.participant_id))
        for name in ('adas_cog', 'adas_cog_prior'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise DataError('%s: %s is negative (participant %s)'
                                % (name, value, self.participant_id))
        if (self.assessment_date is not None
                and self.prior_assessment_date is not None
                and self.prior_assessment_date >= self.assessment_date):
            raise DataError('prior_assessment_date must precede '
                            'assessment_date (participant %s)' % self.participant_id)

    def missing_fields(self):
        return [f.name for f in fields(self) if getattr(self, f.name) is None]

    @property
    def is_complete(self):
        return not self.missing_fields()


@dataclass
class Cohort:
    """Events grouped by participant plus their profiles.

    :param events: mapping of participant id to a tuple of events sorted by
        timestamp
    :param profiles: mapping of participant id to :class:`ParticipantProfile`
    :param date_range: inclusive ``(start_date, end_date)``; derived from the
        events when omitted
    """

    events: dict
    profiles: dict = field(default_factory=dict)
    date_range: tuple = None

    @classmethod
    def from_records(cls, records, profiles=None, date_range=None):
        grouped = {}
        for record in records:
            grouped.setdefault(record.participant_id, []).append(record)
        events = {pid: tuple(sorted(evs, key=_event_sort_key))
                  for pid, evs in grouped.items()}
        profiles = {p.participant_id: p for p in (profiles or ())}
        return cls(events=events, profiles=profiles, date_range=date_range)

    @property
    def participants(self):
        return sorted(set(self.events) | set(self.profiles))

    def records(self):
        for pid in sorted(self.events):
            for record in self.events[pid]:
                yield record

    def span(self, tz=UTC):
        """Returns the configured date range or the range covered by events."""
        if self.date_range is not None:
            return self.date_range
        days = [r.timestamp.astimezone(tz).date() for r in self.records()]
        if not days:
            return None
        return min(days), max(days)

    def between(self, start, end, tz=UTC):
        """Restricts the cohort to events whose local date is in [start, end]."""
        events = {}
        for pid, evs in self.events.items():
            kept = tuple(e for e in evs
                         if start <= e.timestamp.astimezone(tz).date() <= end)
            if kept:
                events[pid] = kept
        return Cohort(events=events, profiles=dict(self.profiles),
                      date_range=(start, end))


def _event_sort_key(record):
    return record.timestamp


def format_timestamp(ts):
    return ts.astimezone(UTC).strftime('%Y-%m-%dT%H:%M:%SZ')


def parse_timestamp(text):
    """Parses an RFC 3339 timestamp into an aware UTC datetime.

    Fractional seconds of any length are truncated to keep 1-second
    resolution.
    """
    if not isinstance(text, str):
        raise ValueError('ts must be a string')
    text = FRACTION.sub(r'\1', text.strip())
    if text.endswith(('Z', 'z')):
        text = text[:-1] + '+00:00'
    ts = datetime.datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError('ts lacks a UTC offset')
    return ts.astimezone(UTC).replace(microsecond=0)


def _parse_line(line):
    try:
        data = json.loads(line)
    except ValueError as e:
        raise ValueError('invalid JSON (%s)' % e)
    if not isinstance(data, dict):
        raise ValueError('expected a JSON object')
    unknown = set(data) - {'participant', 'ts', 'kind', 'location'}
    if unknown:
        raise ValueError('unexpected field(s) %s' % ', '.join(sorted(unknown)))
    participant = data.get('participant')
    if not isinstance(participant, str) or not participant:
        raise ValueError('participant must be a nonempty string')
    try:
        kind = EventKind(data.get('kind'))
    except ValueError:
        raise ValueError('unknown kind %r' % (data.get('kind'),))
    location = data.get('location')
    if kind is EventKind.LOCATION_ENTRY:
        if not isinstance(location, str) or not location.strip():
            raise ValueError('location_entry requires a location')
        # "Living Room" becomes "living_room"
        location = '_'.join(location.lower().split())
    elif 'location' in data:
        raise ValueError('location is forbidden for %s events' % kind.value)
    return EventRecord(participant, parse_timestamp(data.get('ts')), kind, location)


def parse_events(stream):
    """Parses a JSONL events stream.

    Blank lines are skipped. Every malformed line is collected; if there is
    at least one, :class:`MalformedEventsError` is raised carrying all line
    numbers and the records that did parse.

    :param stream: an iterable of text lines
    :returns: list of :class:`EventRecord` in file order
    """
    records, errors = [], []
    for line_no, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            records.append(_parse_line(line))
        except (ValueError, TypeError, DataError) as e:
            errors.append((line_no, str(e)))
    if errors:
        raise MalformedEventsError(errors, records)
    logger.debug('parsed %d event records', len(records))
    return records


def serialize_events(records, stream):
    for record in records:
        stream.write(json.dumps(record.as_dict()) + '\n')


def dumps_events(records):
    return ''.join(json.dumps(r.as_dict()) + '\n' for r in records)


def _cell(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _as_bool(value):
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ('1', 'true', 'yes', 'y'):
            return True
        if lowered in ('0', 'false', 'no', 'n'):
            return False
        raise DataError('lives_alone: cannot read %r as a boolean' % value)
    return bool(value)


def _as_date(value):
    if isinstance(value, datetime.date):
        return value
    return datetime.date.fromisoformat(str(value))


def read_profiles(path_or_buffer):
    """Reads the profiles CSV into a list of :class:`ParticipantProfile`."""
    frame = pd.read_csv(path_or_buffer, dtype={'participant_id': str,
                                               'lives_alone': str,
                                               'assessment_date': str,
                                               'prior_assessment_date': str})
    missing = [c for c in PROFILE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError('profiles file lacks column(s) %s' % ', '.join(missing))
    profiles = []
    for row in frame.to_dict('records'):
        values = {}
        for name in PROFILE_COLUMNS:
            value = _cell(row[name])
            if value is None or name == 'participant_id':
                values[name] = value
            elif name == 'lives_alone':
                values[name] = _as_bool(value)
            elif name.endswith('date'):
                values[name] = _as_date(value)
            else:
                values[name] = float(value)
        profiles.append(ParticipantProfile(**values))
    return profiles


def profiles_frame(profiles):
    rows = []
    for profile in sorted(profiles, key=lambda p: p.participant_id):
        row = OrderedDict((name, getattr(profile, name)) for name in PROFILE_COLUMNS)
        for name in ('assessment_date', 'prior_assessment_date'):
            if row[name] is not None:
                row[name] = row[name].isoformat()
        rows.append(row)
    return pd.DataFrame(rows, columns=list(PROFILE_COLUMNS))


@dataclass
class ParticipantStatus:
    participant_id: str
    recorded_days: int
    gap_days: int
    records: int
    has_events: bool
    profile_complete: bool
    missing_fields: list

    @property
    def flag(self):
        if not self.has_events:
            return 'no events'
        if not self.profile_complete:
            return 'incomplete profile'
        return 'complete'


@dataclass
class ValidationReport:
    date_range: tuple
    participants: dict
    location_counts: dict

    def filter(self, min_days=0):
        """Returns ids with a complete profile and ``>= min_days`` recorded days."""
        return [pid for pid, status in sorted(self.participants.items())
                if status.profile_complete and status.has_events
                and status.recorded_days >= min_days]

    def as_dict(self):
        start, end = self.date_range if self.date_range else (None, None)
        return {
            'date_range': [start.isoformat() if start else None,
                           end.isoformat() if end else None],
            'location_counts': dict(sorted(self.location_counts.items())),
            'participants': {
                pid: {
                    'flag': s.flag,
                    'recorded_days': s.recorded_days,
                    'gap_days': s.gap_days,
                    'records': s.records,
                    'missing_fields': list(s.missing_fields),
                } for pid, s in sorted(self.participants.items())
            },
        }


def validate_cohort(cohort, tz=UTC):
    """Reports recorded days, gap days and profile completeness per participant.

    The report only depends on the set of events, never on their order.
    """
    span = cohort.span(tz)
    total_days = (span[1] - span[0]).days + 1 if span else 0
    locations = Counter()
    statuses = {}
    for pid in cohort.participants:
        events = cohort.events.get(pid, ())
        days = set()
        for event in events:
            days.add(event.timestamp.astimezone(tz).date())
            if event.kind is EventKind.LOCATION_ENTRY:
                locations[event.location] += 1
            elif event.kind is EventKind.BED_ENTER:
                locations['bed'] += 1
        if span:
            days = {d for d in days if span[0] <= d <= span[1]}
        profile = cohort.profiles.get(pid)
        missing = profile.missing_fields() if profile else ['profile']
        statuses[pid] = ParticipantStatus(
            participant_id=pid,
            recorded_days=len(days),
            gap_days=total_days - len(days),
            records=len(events),
            has_events=bool(events),
            profile_complete=not missing,
            missing_fields=missing,
        )
        if not events:
            logger.warning('participant %s has a profile but no events', pid)
    return ValidationReport(date_range=span, participants=statuses,
                            location_counts=dict(locations))
