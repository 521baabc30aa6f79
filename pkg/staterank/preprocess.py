"""Rectification of raw events into fixed windows and day strings."""

import datetime
import logging
from collections import OrderedDict
from dataclasses import dataclass

import pandas as pd

from staterank.data_model import UTC, EventKind
from staterank.exceptions import DataError

logger = logging.getLogger(__name__)

NOWHERE = 'nowhere'
BED = 'bed'
MINUTES_PER_DAY = 1440
DEFAULT_WINDOW_MINUTES = 20


def slots_per_day(window_minutes=DEFAULT_WINDOW_MINUTES):
    if window_minutes <= 0 or MINUTES_PER_DAY % window_minutes:
        raise DataError('window_minutes must divide %d, got %r'
                        % (MINUTES_PER_DAY, window_minutes))
    return MINUTES_PER_DAY // window_minutes


def fixed_offset(minutes):
    if not minutes:
        return UTC
    return datetime.timezone(datetime.timedelta(minutes=minutes))


@dataclass(frozen=True)
class DayString:
    """A participant-day as one location token per window slot.

    Slot ``s`` covers ``[s * window, (s + 1) * window)`` of the local day.
    """

    participant_id: str
    date: datetime.date
    tokens: tuple

    def __post_init__(self):
        if not self.tokens or MINUTES_PER_DAY % len(self.tokens):
            raise DataError('a day string needs a slot count dividing %d, got %d'
                            % (MINUTES_PER_DAY, len(self.tokens)))
        for token in self.tokens:
            if not token or token != token.lower() or ' ' in token:
                raise DataError('invalid token %r in day string' % (token,))

    @property
    def key(self):
        return self.participant_id, self.date

    def __len__(self):
        return len(self.tokens)


def event_token(event):
    """Maps an event to the token it votes for, or ``None`` if it does not vote."""
    if event.kind is EventKind.LOCATION_ENTRY:
        return event.location
    if event.kind is EventKind.BED_ENTER:
        return BED
    return None


def window_day(events, participant_id=None, date=None,
               window_minutes=DEFAULT_WINDOW_MINUTES, tz=UTC):
    """Rectifies one participant-day of events into a :class:`DayString`.

    Each slot records its most frequent voting token; ties go to the token
    whose first event in the slot is earliest. Slots without votes are
    ``"nowhere"``. ``bed_leave`` events never vote.

    :param events: events of one participant on one local calendar date,
        sorted by timestamp
    :param participant_id: required when ``events`` is empty
    :param date: required when ``events`` is empty
    """
    n_slots = slots_per_day(window_minutes)
    events = list(events)
    if events:
        participant_id = participant_id or events[0].participant_id
        date = date or events[0].timestamp.astimezone(tz).date()
    if participant_id is None or date is None:
        raise DataError('participant_id and date are required for an empty day')

    day_start = datetime.datetime.combine(date, datetime.time(), tzinfo=tz)
    votes = [None] * n_slots
    for event in events:
        local = event.timestamp.astimezone(tz)
        if local.date() != date:
            raise DataError('event at %s does not belong to %s'
                            % (local.isoformat(), date.isoformat()))
        if event.participant_id != participant_id:
            raise DataError('events from participants %s and %s mixed in one day'
                            % (participant_id, event.participant_id))
        token = event_token(event)
        if token is None:
            continue
        seconds = int((local - day_start).total_seconds())
        slot = seconds // (window_minutes * 60)
        if votes[slot] is None:
            votes[slot] = OrderedDict()
        votes[slot][token] = votes[slot].get(token, 0) + 1

    tokens = []
    for counts in votes:
        if not counts:
            tokens.append(NOWHERE)
        else:
            # max keeps the first maximal key in insertion order
            tokens.append(max(counts, key=counts.get))
    return DayString(participant_id, date, tuple(tokens))


def day_to_text(day):
    return ' '.join(day.tokens)


def text_to_day(participant_id, date, text):
    return DayString(participant_id, date, tuple(text.split()))


def build_day_strings(cohort, window_minutes=DEFAULT_WINDOW_MINUTES, tz=UTC,
                      participants=None):
    """Builds a :class:`DayString` for every participant-day with an event.

    Days without events are not imputed.
    """
    selected = sorted(participants if participants is not None else cohort.events)
    days = []
    for pid in selected:
        by_date = OrderedDict()
        for event in cohort.events.get(pid, ()):
            by_date.setdefault(event.timestamp.astimezone(tz).date(), []).append(event)
        for date in sorted(by_date):
            days.append(window_day(by_date[date], pid, date, window_minutes, tz))
    logger.info('built %d day strings for %d participants', len(days), len(selected))
    return days


def day_strings_frame(days):
    return pd.DataFrame({
        'participant_id': [d.participant_id for d in days],
        'date': [d.date.isoformat() for d in days],
        'tokens': [day_to_text(d) for d in days],
    }, columns=['participant_id', 'date', 'tokens'])


def read_day_strings(path_or_buffer):
    frame = pd.read_csv(path_or_buffer, dtype=str, keep_default_na=False)
    return [text_to_day(row['participant_id'],
                        datetime.date.fromisoformat(row['date']),
                        row['tokens'])
            for row in frame.to_dict('records')]
